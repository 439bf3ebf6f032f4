"""Exact second-quantized oracle on a tiny one-dimensional lattice.

Occupation bitmasks index the 2^L Fock basis (integer order); Jordan-Wigner
strings follow the site order, so a_x picks up (-1)^(number of occupied
modes below x).  Everything downstream (Bogoliubov implementors, Wick
reduced densities, fluctuation dynamics) is validated against the
anticommutation relations fixed by that single choice.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .initial_data import DensityMatrix
from .meanfield import EvolutionConfig, MeanFieldKind
from .model import Lattice, ModelParams, Potential, kinetic_operator

__all__ = [
    "FockSpace",
    "BogoliubovSpec",
    "ladder",
    "field_operator",
    "apply_ladder",
    "apply_field",
    "d_gamma",
    "number_operator",
    "hamiltonian",
    "pair_operator",
    "bogoliubov_from_projection",
    "implement_bogoliubov",
    "quasi_free_state",
    "slater_vector",
    "SectorPropagator",
    "exact_evolve",
    "rdm1",
    "rdmk",
    "wick_rdmk",
    "generalized_density",
    "FluctuationDynamics",
    "number_moment",
    "verify_operator_bounds",
]

_MAX_SITES = 14
_DENSE_SECTOR_CAP = 4096


def _popcount(states: np.ndarray, bits: int) -> np.ndarray:
    out = np.zeros_like(states)
    for b in range(bits):
        out += (states >> b) & 1
    return out


@dataclass(frozen=True)
class FockSpace:
    """Fermionic Fock space over L lattice sites; basis = occupation bitmasks
    in integer order, mode order = site order."""

    l_sites: int

    def __post_init__(self):
        if not 1 <= self.l_sites <= _MAX_SITES:
            raise ValueError(f"need 1 <= L <= {_MAX_SITES}, got {self.l_sites}")

    @property
    def dim(self) -> int:
        return 1 << self.l_sites

    def states(self) -> np.ndarray:
        return np.arange(self.dim)

    def occupations(self) -> np.ndarray:
        return _popcount(self.states(), self.l_sites)

    def vacuum(self) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[0] = 1.0
        return psi


def _jw_signs(states: np.ndarray, site: int, bits: int) -> np.ndarray:
    below = states & ((1 << site) - 1)
    return 1.0 - 2.0 * (_popcount(below, bits) & 1)


def apply_ladder(space: FockSpace, psi: np.ndarray, site: int, create: bool) -> np.ndarray:
    """Apply a single a_x or a*_x to a state vector."""
    if not 0 <= site < space.l_sites:
        raise ValueError(f"site {site} out of range")
    states = space.states()
    bit = (states >> site) & 1
    src = states[bit == (0 if create else 1)]
    out = np.zeros_like(psi)
    signs = _jw_signs(src, site, space.l_sites)
    out[src ^ (1 << site)] = signs * psi[src]
    return out


def ladder(space: FockSpace, site: int, kind: str) -> sp.csr_matrix:
    """Sparse a_x (kind='annihilate') or a*_x (kind='create')."""
    if kind not in ("create", "annihilate"):
        raise ValueError(f"kind must be 'create' or 'annihilate', got {kind!r}")
    if not 0 <= site < space.l_sites:
        raise ValueError(f"site {site} out of range")
    create = kind == "create"
    states = space.states()
    bit = (states >> site) & 1
    src = states[bit == (0 if create else 1)]
    dst = src ^ (1 << site)
    signs = _jw_signs(src, site, space.l_sites)
    return sp.csr_matrix((signs.astype(complex), (dst, src)),
                         shape=(space.dim, space.dim))


def apply_field(space: FockSpace, psi: np.ndarray, f: np.ndarray, create: bool) -> np.ndarray:
    """Apply a(f) = sum conj(f(x)) a_x, or a*(f) = sum f(x) a*_x."""
    f = np.asarray(f, dtype=complex)
    out = np.zeros_like(psi)
    for x in range(space.l_sites):
        coef = f[x] if create else np.conj(f[x])
        if coef != 0:
            out += coef * apply_ladder(space, psi, x, create)
    return out


def field_operator(space: FockSpace, f: np.ndarray, create: bool) -> sp.csr_matrix:
    f = np.asarray(f, dtype=complex)
    op = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for x in range(space.l_sites):
        coef = f[x] if create else np.conj(f[x])
        if coef != 0:
            op = op + coef * ladder(space, x, "create" if create else "annihilate")
    return op


def d_gamma(space: FockSpace, o: np.ndarray) -> sp.csr_matrix:
    """Second quantization sum_{xy} O(x;y) a*_x a_y; particle-number preserving."""
    o = np.asarray(o, dtype=complex)
    if o.shape != (space.l_sites, space.l_sites):
        raise ValueError(f"one-particle matrix must be {space.l_sites}x{space.l_sites}")
    states = space.states()
    rows, cols, vals = [], [], []
    occ = _popcount(states, space.l_sites)  # noqa: F841  (kept for clarity)
    # diagonal part: number-weighted occupations
    diag = np.zeros(space.dim, dtype=complex)
    for x in range(space.l_sites):
        diag += o[x, x] * ((states >> x) & 1)
    rows.append(states)
    cols.append(states)
    vals.append(diag)
    # hopping part x != y: need bit y set and bit x clear
    for x in range(space.l_sites):
        for y in range(space.l_sites):
            if x == y or o[x, y] == 0:
                continue
            sel = states[(((states >> y) & 1) == 1) & (((states >> x) & 1) == 0)]
            s1 = _jw_signs(sel, y, space.l_sites)
            mid = sel ^ (1 << y)
            s2 = _jw_signs(mid, x, space.l_sites)
            rows.append(mid ^ (1 << x))
            cols.append(sel)
            vals.append(o[x, y] * s1 * s2)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )


def pair_operator(space: FockSpace, o: np.ndarray, create: bool) -> sp.csr_matrix:
    """sum_{xy} O(x;y) a_x a_y (annihilating pair) or a*_x a*_y (creating)."""
    o = np.asarray(o, dtype=complex)
    op = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    kind = "create" if create else "annihilate"
    for x in range(space.l_sites):
        ax = ladder(space, x, kind)
        for y in range(space.l_sites):
            if o[x, y] != 0:
                op = op + o[x, y] * (ax @ ladder(space, y, kind))
    return op


def number_operator(space: FockSpace) -> sp.csr_matrix:
    return sp.diags(space.occupations().astype(complex)).tocsr()


def hamiltonian(space: FockSpace, v: Potential, params: ModelParams,
                lattice: Lattice) -> sp.csr_matrix:
    """dGamma(-hbar^2 Lap) + (1/2N) sum_{x,y} V(x-y) a*_x a*_y a_y a_x.

    The interaction is diagonal in the occupation basis; its site-pair
    coupling uses the same V samples as the mean-field direct/exchange
    terms, so the exact dynamics is tangent to the Hartree-Fock flow."""
    if lattice.ds != 1 or lattice.site_count != space.l_sites:
        raise ValueError("hamiltonian needs a ds=1 lattice matching the Fock sites")
    from .meanfield import _v_pair_matrix

    h = d_gamma(space, kinetic_operator(lattice, params.hbar))
    w = _v_pair_matrix(v, lattice).copy()
    np.fill_diagonal(w, 0.0)
    states = space.states()
    occ = np.zeros((space.dim, space.l_sites))
    for x in range(space.l_sites):
        occ[:, x] = (states >> x) & 1
    diag = 0.5 / params.n_particles * np.einsum("bx,xy,by->b", occ, w, occ)
    return (h + sp.diags(diag.astype(complex))).tocsr()


@dataclass
class BogoliubovSpec:
    """Pairing-free particle-hole data: u = 1 - omega, v = sum |conj f_j><f_j|."""

    u: np.ndarray
    v: np.ndarray
    orbitals: np.ndarray  # columns f_j, occupied eigenbasis of omega

    def check(self, tol: float = 1e-12):
        ident = np.eye(self.u.shape[0])
        c1 = np.max(np.abs(self.u.conj().T @ self.u + self.v.conj().T @ self.v - ident))
        c2 = np.max(np.abs(self.u.conj().T @ np.conj(self.v)
                           + self.v.conj().T @ np.conj(self.u)))
        if c1 > tol or c2 > tol:
            raise ValueError(f"Bogoliubov block conditions violated: {c1:.2e}, {c2:.2e}")


def bogoliubov_from_projection(omega) -> BogoliubovSpec:
    """Particle-hole Bogoliubov data for an orthogonal projection omega."""
    m = omega.matrix if hasattr(omega, "matrix") else np.asarray(omega, dtype=complex)
    if np.linalg.norm(m @ m - m, "fro") > 1e-10:
        raise ValueError("input is not an orthogonal projection")
    eig, vec = np.linalg.eigh(m)
    n = int(round(np.sum(eig).real))
    # descending eigenvalue order; fix each orbital's phase by making its
    # first non-negligible component real positive
    occ = vec[:, ::-1][:, :n].copy()
    for j in range(n):
        col = occ[:, j]
        idx = np.argmax(np.abs(col) > 1e-8)
        phase = col[idx] / abs(col[idx])
        occ[:, j] = col / phase
    u = np.eye(m.shape[0], dtype=complex) - m
    v = np.conj(occ) @ np.conj(occ).T
    spec = BogoliubovSpec(u=u, v=v, orbitals=occ)
    spec.check()
    return spec


def slater_vector(space: FockSpace, orbitals: np.ndarray) -> np.ndarray:
    """a*(f_1) ... a*(f_N) applied to the vacuum."""
    psi = space.vacuum()
    for j in range(orbitals.shape[1] - 1, -1, -1):
        psi = apply_field(space, psi, orbitals[:, j], create=True)
    return psi


def implement_bogoliubov(space: FockSpace, spec: BogoliubovSpec) -> sp.csr_matrix:
    """Unitary implementor R = prod_j (a*(f_j) + a(f_j)), j ascending left to
    right; global phase fixed so <a*(f_1)...a*(f_N) vacuum, R vacuum> > 0."""
    n = spec.orbitals.shape[1]
    r = sp.identity(space.dim, dtype=complex, format="csr")
    for j in range(n):
        f = spec.orbitals[:, j]
        b = field_operator(space, f, create=True) + field_operator(space, f, create=False)
        r = r @ b
    target = slater_vector(space, spec.orbitals)
    overlap = np.vdot(target, r @ space.vacuum())
    if abs(overlap) > 1e-12:
        r = r * (abs(overlap) / overlap)
    # unitarity check
    if space.dim <= _DENSE_SECTOR_CAP:
        defect = np.max(np.abs((r.conj().T @ r - sp.identity(space.dim)).toarray()))
    else:
        rng = np.random.default_rng(0)
        z = rng.normal(size=(space.dim, 4)) + 1j * rng.normal(size=(space.dim, 4))
        defect = np.max(np.abs(r.conj().T @ (r @ z) - z)) / np.max(np.abs(z))
    if defect > 1e-8:
        raise RuntimeError(f"Bogoliubov implementor not unitary (defect {defect:.2e})")
    return r


def quasi_free_state(space: FockSpace, omega) -> np.ndarray:
    """The pairing-free quasi-free state R_nu vacuum with rdm1 = omega."""
    spec = bogoliubov_from_projection(omega)
    psi = space.vacuum()
    for j in range(spec.orbitals.shape[1] - 1, -1, -1):
        f = spec.orbitals[:, j]
        psi = (apply_field(space, psi, f, create=True)
               + apply_field(space, psi, f, create=False))
    return psi


class SectorPropagator:
    """exp(-i h t / hbar) applied sector by sector; dense eigendecompositions
    are cached per fixed-particle-number sector."""

    def __init__(self, space: FockSpace, h, hbar: float):
        self.space = space
        self.h = sp.csr_matrix(h) if not sp.issparse(h) else h.tocsr()
        herm_defect = abs(self.h - self.h.conj().T).max()
        if herm_defect > 1e-10:
            raise ValueError(f"generator not Hermitian (defect {herm_defect:.2e})")
        self.hbar = hbar
        occ = space.occupations()
        self._sectors = [np.nonzero(occ == n)[0] for n in range(space.l_sites + 1)]
        self._eig = {}

    def _sector_eig(self, n: int):
        if n not in self._eig:
            idx = self._sectors[n]
            if len(idx) > _DENSE_SECTOR_CAP:
                self._eig[n] = None
            else:
                sub = self.h[np.ix_(idx, idx)].toarray()
                self._eig[n] = np.linalg.eigh(sub)
        return self._eig[n]

    def __call__(self, psi: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for n, idx in enumerate(self._sectors):
            block = psi[idx]
            if np.linalg.norm(block) == 0:
                continue
            eigpair = self._sector_eig(n)
            if eigpair is None:
                from scipy.sparse.linalg import expm_multiply

                sub = self.h[np.ix_(idx, idx)]
                out[idx] = expm_multiply(-1j * t / self.hbar * sub, block)
            else:
                eig, vec = eigpair
                out[idx] = (vec * np.exp(-1j * t * eig / self.hbar)) @ (vec.conj().T @ block)
        drift = abs(np.linalg.norm(out) - np.linalg.norm(psi))
        if drift > 1e-10 * max(1.0, np.linalg.norm(psi)):
            raise RuntimeError(f"exact propagation lost norm ({drift:.2e})")
        return out


def exact_evolve(psi: np.ndarray, h, t: float, hbar: float) -> np.ndarray:
    """exp(-i h t / hbar) psi for a Hermitian, number-conserving h."""
    dim = psi.shape[0]
    l_sites = int(round(np.log2(dim)))
    if 1 << l_sites != dim:
        raise ValueError("state dimension is not a power of two")
    return SectorPropagator(FockSpace(l_sites), h, hbar)(psi, t)


def _annihilated_stack(space: FockSpace, psi: np.ndarray) -> np.ndarray:
    return np.stack([apply_ladder(space, psi, x, create=False)
                     for x in range(space.l_sites)])


def rdm1(psi: np.ndarray, space: FockSpace = None) -> np.ndarray:
    """gamma(x;y) = <psi, a*_y a_x psi>; Hermitian PSD, trace = <N>."""
    if space is None:
        space = FockSpace(int(round(np.log2(psi.shape[0]))))
    a_psi = _annihilated_stack(space, psi)
    return a_psi @ a_psi.conj().T


def rdmk(psi: np.ndarray, k: int, space: FockSpace = None) -> np.ndarray:
    """k-particle reduced density as a rank-2k tensor, normalized so the
    total trace is <N!/(N-k)!>."""
    if space is None:
        space = FockSpace(int(round(np.log2(psi.shape[0]))))
    if not 1 <= k <= 3:
        raise ValueError("k must be 1, 2 or 3")
    mean_n = number_moment(psi, 1) - 1.0
    if k > mean_n + 1e-9:
        raise ValueError(f"k={k} exceeds the mean particle number {mean_n:.3f}")
    l = space.l_sites
    from itertools import product

    tuples = list(product(range(l), repeat=k))
    phi = np.zeros((len(tuples), space.dim), dtype=complex)
    for i, tup in enumerate(tuples):
        vec = psi
        for y in tup:  # rightmost operator a_{y_1} acts first
            vec = apply_ladder(space, vec, y, create=False)
        phi[i] = vec
    g = phi @ phi.conj().T  # g[x_tuple, x'_tuple] = <Phi_{x'}, Phi_x>
    return g.reshape((l,) * (2 * k))


def wick_rdmk(omega: np.ndarray, k: int) -> np.ndarray:
    """Quasi-free k-particle reduced density: the k x k determinant
    det[ omega(x_i; x'_j) ] for every pair of index tuples."""
    omega = np.asarray(omega, dtype=complex)
    if k < 1:
        raise ValueError("k must be >= 1")
    l = omega.shape[0]
    from itertools import product

    tuples = np.array(list(product(range(l), repeat=k)))
    blocks = omega[tuples[:, None, :, None], tuples[None, :, None, :]]
    return np.linalg.det(blocks).reshape((l,) * (2 * k))


def generalized_density(psi: np.ndarray, space: FockSpace = None) -> np.ndarray:
    """Block matrix [[gamma, alpha], [-conj(alpha), 1 - conj(gamma)]]."""
    if space is None:
        space = FockSpace(int(round(np.log2(psi.shape[0]))))
    a_psi = _annihilated_stack(space, psi)
    c_psi = np.stack([apply_ladder(space, psi, x, create=True)
                      for x in range(space.l_sites)])
    gamma = a_psi @ a_psi.conj().T
    # alpha(x;y) = <psi, a_y a_x psi> = <a*_y psi, a_x psi>
    alpha = (np.conj(c_psi) @ a_psi.T).T
    ident = np.eye(space.l_sites)
    top = np.hstack([gamma, alpha])
    bot = np.hstack([-np.conj(alpha), ident - np.conj(gamma)])
    return np.vstack([top, bot])


def number_moment(xi: np.ndarray, k: int, space: FockSpace = None) -> float:
    """<xi, (N_op + 1)^k xi> / ||xi||^2."""
    if not 0 <= k <= 6:
        raise ValueError("k must be between 0 and 6")
    if space is None:
        space = FockSpace(int(round(np.log2(xi.shape[0]))))
    weights = (space.occupations() + 1.0) ** k
    nrm2 = float(np.vdot(xi, xi).real)
    return float(np.sum(weights * np.abs(xi) ** 2) / nrm2)


class FluctuationDynamics:
    """U(t;0) = R*_{nu_t} exp(-i H t / hbar) R_{nu_0}: evolution of the
    particles outside the evolving Slater sea.

    The time-dependent rotation is rebuilt from the mean-field flow
    re-integrated to each requested time, keeping omega_t an exact
    projection rather than interpolating matrices."""

    def __init__(self, space: FockSpace, omega0: DensityMatrix, v: Potential,
                 params: ModelParams, lattice: Lattice, dt: float = 1e-3):
        if lattice.ds != 1 or lattice.site_count != space.l_sites:
            raise ValueError("fluctuation dynamics needs a matching ds=1 lattice")
        self.space = space
        self.omega0 = omega0
        self.v = v
        self.params = params
        self.lattice = lattice
        self.dt = dt
        self.propagator = SectorPropagator(
            space, hamiltonian(space, v, params, lattice), params.hbar)
        self._r0 = implement_bogoliubov(space, bogoliubov_from_projection(omega0))
        self._omega_cache = {0: omega0}

    def _omega_at(self, n_steps: int) -> DensityMatrix:
        if n_steps not in self._omega_cache:
            known = max(k for k in self._omega_cache if k <= n_steps)
            state = self._omega_cache[known]
            from .meanfield import step as mf_step

            cfg = EvolutionConfig(dt=self.dt, t_final=max(self.dt, n_steps * self.dt))
            for i in range(known + 1, n_steps + 1):
                state = mf_step(state, cfg, MeanFieldKind.HARTREE_FOCK,
                                self.v, self.params, self.lattice)
                self._omega_cache[i] = state
        return self._omega_cache[n_steps]

    def evolve(self, xi: np.ndarray, t: float) -> np.ndarray:
        n_steps = int(round(t / self.dt)) if t > 0 else 0
        if abs(n_steps * self.dt - t) > 1e-9:
            raise ValueError(f"t={t} is not a multiple of the mean-field dt={self.dt}")
        psi = self.propagator(self._r0 @ xi, t)
        if n_steps == 0:
            r_t = self._r0
        else:
            r_t = implement_bogoliubov(
                self.space, bogoliubov_from_projection(self._omega_at(n_steps)))
        out = r_t.conj().T @ psi
        drift = abs(np.linalg.norm(out) - np.linalg.norm(xi))
        if drift > 1e-9 * max(1.0, np.linalg.norm(xi)):
            raise RuntimeError(f"fluctuation dynamics lost norm ({drift:.2e})")
        return out


def fluctuation_evolve(xi: np.ndarray, t: float, dynamics: FluctuationDynamics) -> np.ndarray:
    return dynamics.evolve(xi, t)


def verify_operator_bounds(space: FockSpace, trials: int, seed: int) -> dict:
    """Numerically check the quadratic-operator norm inequalities on random
    one-particle matrices and random Fock vectors; violations indicate bugs."""
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    n_op = number_operator(space)
    occ = space.occupations().astype(float)
    names = [
        "dgamma_operator_norm_bound",
        "dgamma_hs_bound",
        "pair_annihilation_hs_bound",
        "pair_creation_hs_bound",
        "dgamma_trace_bound",
        "pair_annihilation_trace_bound",
        "pair_creation_trace_bound",
    ]
    report = {name: {"violations": 0, "worst_slack": np.inf} for name in names}

    def tally(name, lhs, rhs, tol=1e-10):
        slack = rhs - lhs
        entry = report[name]
        entry["worst_slack"] = min(entry["worst_slack"], slack)
        if slack < -tol:
            entry["violations"] += 1

    l = space.l_sites
    for _ in range(trials):
        o = rng.normal(size=(l, l)) + 1j * rng.normal(size=(l, l))
        psi = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
        psi /= np.linalg.norm(psi)
        sv = np.linalg.svd(o, compute_uv=False)
        op_norm, hs, tr = sv[0], np.linalg.norm(sv), np.sum(sv)

        dg = d_gamma(space, o)
        n_psi = occ * psi
        tally("dgamma_operator_norm_bound", np.linalg.norm(dg @ psi),
              op_norm * np.linalg.norm(n_psi))
        tally("dgamma_hs_bound", np.linalg.norm(dg @ psi),
              hs * np.linalg.norm(np.sqrt(occ) * psi))
        pa = pair_operator(space, o, create=False)
        tally("pair_annihilation_hs_bound", np.linalg.norm(pa @ psi),
              hs * np.linalg.norm(np.sqrt(occ) * psi))
        pc = pair_operator(space, o, create=True)
        tally("pair_creation_hs_bound", np.linalg.norm(pc @ psi),
              2.0 * hs * np.linalg.norm(np.sqrt(occ + 1.0) * psi))
        tally("dgamma_trace_bound",
              np.linalg.svd(dg.toarray(), compute_uv=False)[0], 2.0 * tr)
        tally("pair_annihilation_trace_bound",
              np.linalg.svd(pa.toarray(), compute_uv=False)[0], 2.0 * tr)
        tally("pair_creation_trace_bound",
              np.linalg.svd(pc.toarray(), compute_uv=False)[0], 2.0 * tr)

    for entry in report.values():
        entry["worst_slack"] = float(entry["worst_slack"])
    report["trials"] = trials
    report["seed"] = seed
    return report
