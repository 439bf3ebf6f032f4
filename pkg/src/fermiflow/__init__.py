"""fermiflow: a numerical laboratory for mean-field fermion dynamics.

Hartree-Fock and Hartree flows for one-particle density matrices on
periodic lattices in the coupled semiclassical scaling hbar = N^(-1/ds),
with commutator diagnostics, an exact Fock-space oracle on tiny lattices,
fluctuation dynamics around the Slater sea, and a Wigner/Vlasov
classical-limit comparison.
"""

__version__ = "0.1.0"

from .model import (Lattice, ModelParams, Potential, build_potential,
                    fourier_matrix, kinetic_operator, make_lattice,
                    momentum_operator, phase_operator)
from .initial_data import (DegenerateFermiLevel, DensityMatrix, PhaseSpaceSymbol,
                           SemiclassicalReport, default_probe_momenta,
                           fermi_ball_indices, kernel_ansatz,
                           plane_wave_projection, semiclassical_constant,
                           trapped_slater, weyl_quantize)
from .meanfield import (EvolutionConfig, MeanFieldKind, Trajectory,
                        compare_hf_hartree, density_profile, direct_term,
                        evolve, exchange_term, generator, hf_energy, step)
from .diagnostics import (CommutatorSeries, DistanceSeries, GrowthFit,
                          commutator_momentum, commutator_phase, distance_series,
                          fit_double_exponential, fit_exponential, hs_norm,
                          semiclassical_series, trace_norm)
from .semiclassics import (PhaseSpaceDensity, WignerFunction,
                           compare_wigner_vlasov, momentum_grid, vlasov_step,
                           wigner)
from .snapshots import read_fmf1, write_csv, write_fmf1

__all__ = [name for name in dir() if not name.startswith("_")]
