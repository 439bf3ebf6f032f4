"""Periodic lattices, momentum grids, interaction potentials and the
elementary one-particle operators everything else is assembled from.

Conventions used throughout the package:

* sites are x_j = j*a on the torus [0, l)^ds, enumerated row-major over
  the integer index j;
* momenta are p_k = (2*pi/l)*k with integer components in
  {-floor(d/2), ..., ceil(d/2)-1}, enumerated row-major over k;
* a kernel A(x; y) is transcribed to the matrix A_{xy} = a^ds * A(x_j; y_j),
  so that matrix products discretize operator composition;
* the interaction is expanded as V(x) = sum_k Vhat(p_k) exp(i p_k . x),
  i.e. Vhat carries no extra volume factor.
"""

import functools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "ModelParams",
    "Potential",
    "make_lattice",
    "build_potential",
    "fourier_matrix",
    "kinetic_operator",
    "momentum_operator",
    "phase_operator",
]


@dataclass(frozen=True)
class Lattice:
    """Periodic spatial grid with its paired momentum grid."""

    ds: int
    d: int
    length: float

    @property
    def spacing(self) -> float:
        return self.length / self.d

    @property
    def site_count(self) -> int:
        return self.d ** self.ds

    def site_indices(self) -> np.ndarray:
        """Integer site indices j, shape (site_count, ds), row-major."""
        grids = np.indices((self.d,) * self.ds)
        return grids.reshape(self.ds, -1).T

    def sites(self) -> np.ndarray:
        """Site coordinates x_j, shape (site_count, ds)."""
        return self.site_indices() * self.spacing

    def momentum_indices(self) -> np.ndarray:
        """Integer momentum indices k, shape (site_count, ds), row-major,
        components in {-floor(d/2), ..., ceil(d/2)-1} ascending."""
        half = self.d // 2
        axis = np.arange(-half, self.d - half)
        grids = np.meshgrid(*([axis] * self.ds), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def momenta(self) -> np.ndarray:
        """Momentum vectors p_k, shape (site_count, ds)."""
        return self.momentum_indices() * (2.0 * np.pi / self.length)


@dataclass(frozen=True)
class ModelParams:
    """Particle number N and the coupled semiclassical parameter hbar.

    When hbar is not given it defaults to N**(-1/ds); the 1/N mean-field
    coupling is derived, never independent.
    """

    n_particles: int
    ds: int = 1
    hbar: float = None  # resolved in __post_init__

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be a positive integer")
        if self.hbar is None:
            object.__setattr__(
                self, "hbar", float(self.n_particles) ** (-1.0 / self.ds)
            )
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def coupling(self) -> float:
        return 1.0 / self.n_particles


@dataclass(frozen=True)
class Potential:
    """Even interaction V given in real space and in Fourier space."""

    lattice: Lattice
    real_space: np.ndarray
    fourier: np.ndarray
    assumption_weight: float = field(default=None)

    def __post_init__(self):
        if self.assumption_weight is None:
            p = self.lattice.momenta()
            w = np.sum((1.0 + np.linalg.norm(p, axis=1)) ** 2 * np.abs(self.fourier))
            object.__setattr__(self, "assumption_weight", float(w))


def make_lattice(ds: int, d: int, length: float) -> Lattice:
    if ds not in (1, 2, 3):
        raise ValueError(f"spatial dimension must be 1, 2 or 3, got {ds}")
    if d < 2:
        raise ValueError(f"need at least 2 sites per dimension, got {d}")
    if length <= 0:
        raise ValueError(f"torus side must be positive, got {length}")
    return Lattice(ds=ds, d=int(d), length=float(length))


@functools.lru_cache(maxsize=32)
def fourier_matrix(lattice: Lattice) -> np.ndarray:
    """Unitary lattice Fourier transform F[k, j] = exp(-i p_k.x_j)/sqrt(M)."""
    phase = lattice.momenta() @ lattice.sites().T
    return np.exp(-1j * phase) / np.sqrt(lattice.site_count)


def _shifted_fft(values: np.ndarray, lattice: Lattice) -> np.ndarray:
    """DFT coefficients in our ascending-k order: Vhat_k = (1/M) sum_j V_j e^{-i p_k.x_j}."""
    grid = values.reshape((lattice.d,) * lattice.ds)
    coef = np.fft.fftn(grid) / lattice.site_count
    return np.fft.fftshift(coef).ravel()


def _shifted_ifft(coef: np.ndarray, lattice: Lattice) -> np.ndarray:
    grid = np.fft.ifftshift(coef.reshape((lattice.d,) * lattice.ds))
    return (np.fft.ifftn(grid) * lattice.site_count).ravel()


_GAUSSIAN_IMAGES = 2  # wrap 5 torus images per axis: m in {-2, ..., 2}


def _potential_from_samples(samples: np.ndarray, lattice: Lattice,
                            evenness_tol: float = 1e-10) -> Potential:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (lattice.site_count,):
        raise ValueError(
            f"potential table must have {lattice.site_count} samples, "
            f"got shape {samples.shape}"
        )
    grid = samples.reshape((lattice.d,) * lattice.ds)
    # x -> -x on the torus is index j -> (-j) mod d along every axis
    reflected = grid
    for ax in range(lattice.ds):
        reflected = np.flip(np.roll(reflected, -1, axis=ax), axis=ax)
    defect = np.max(np.abs(grid - reflected))
    if defect > evenness_tol:
        raise ValueError(f"potential violates evenness by {defect:.3e}")
    fourier = _shifted_fft(samples, lattice)
    if np.max(np.abs(fourier.imag)) > 1e-12 * max(1.0, np.max(np.abs(fourier))):
        raise ValueError("Fourier coefficients of an even real potential must be real")
    return Potential(lattice=lattice, real_space=samples, fourier=fourier)


def build_potential(spec: dict, lattice: Lattice) -> Potential:
    """Build an interaction from a named shape.

    Supported shapes: {"shape": "zero"}, {"shape": "gaussian", "strength", "sigma"},
    {"shape": "cosine", "strength", "mode"}, {"shape": "table", "samples"}.
    The gaussian is periodized by wrapping over 5 torus images per axis.
    """
    shape = spec.get("shape")
    if shape == "zero":
        samples = np.zeros(lattice.site_count)
    elif shape == "gaussian":
        lam = float(spec["strength"])
        sigma = float(spec["sigma"])
        if sigma <= 0:
            raise ValueError(f"gaussian width must be positive, got {sigma}")
        x = lattice.sites()
        l = lattice.length
        # wrap to [-l/2, l/2) so the image set is symmetric under x -> -x
        xc = x - l * np.round(x / l)
        samples = np.ones(lattice.site_count)
        for ax in range(lattice.ds):
            axis_sum = np.zeros(lattice.site_count)
            for m in range(-_GAUSSIAN_IMAGES, _GAUSSIAN_IMAGES + 1):
                axis_sum += np.exp(-((xc[:, ax] + m * l) ** 2) / (2.0 * sigma ** 2))
            samples *= axis_sum
        samples *= lam
    elif shape == "cosine":
        lam = float(spec["strength"])
        mode = int(spec["mode"])
        x = lattice.sites()
        samples = lam * np.sum(
            np.cos(2.0 * np.pi * mode * x / lattice.length), axis=1
        )
    elif shape == "table":
        samples = np.asarray(spec["samples"], dtype=float)
    else:
        raise ValueError(f"unknown potential shape {shape!r}")
    return _potential_from_samples(samples, lattice)


@functools.lru_cache(maxsize=32)
def kinetic_operator(lattice: Lattice, hbar: float) -> np.ndarray:
    """-hbar^2 Laplacian: F* diag(hbar^2 |p_k|^2) F, Hermitian PSD."""
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    f = fourier_matrix(lattice)
    eig = hbar ** 2 * np.sum(lattice.momenta() ** 2, axis=1)
    op = f.conj().T @ (eig[:, None] * f)
    return 0.5 * (op + op.conj().T)


@functools.lru_cache(maxsize=32)
def momentum_operator(lattice: Lattice, hbar: float, axis: int = 0) -> np.ndarray:
    """hbar * d/dx_axis: anti-Hermitian, momentum-basis eigenvalues i*hbar*p_k."""
    if not 0 <= axis < lattice.ds:
        raise ValueError(f"axis {axis} out of range for ds={lattice.ds}")
    f = fourier_matrix(lattice)
    eig = 1j * hbar * lattice.momenta()[:, axis]
    op = f.conj().T @ (eig[:, None] * f)
    return 0.5 * (op - op.conj().T)


def phase_operator(lattice: Lattice, r) -> np.ndarray:
    """Diagonal unitary with entries exp(i r.x_j); r need not be on the grid."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if r.shape != (lattice.ds,):
        raise ValueError(f"r must have {lattice.ds} components")
    return np.diag(np.exp(1j * (lattice.sites() @ r)))
