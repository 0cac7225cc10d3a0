"""Explicitly correlated Gaussian solver for the lithium quartet state.

Each primitive is exp(sum_i alpha_i |r_i|^2 + sum_pairs beta |r_i-r_j|^2)
times a sinh lobe in the z coordinates; the antisymmetrizer is the
unnormalized signed sum over the six diagonal particle permutations.  All
matrix elements reduce to one closed-form Gaussian kernel: the sinh factors
are expanded into exponential pairs and the Coulomb terms into the
isotropic-Gaussian error-function average, so every analytic value can be
cross-checked against Monte Carlo quadrature of the same integrand.

Atomic units; the nuclear charge is 3 throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.linalg import eigh
from scipy.special import erf

from .ringcore import GROUP36, S3_PERMS, S3_SIGNS
from .symgroup import ETA_BAR_TABLE

Z_NUCLEUS = 3.0
COND_THRESHOLD = 1e12
SQRT_2_OVER_PI = (2.0 / pi) ** 0.5


class NotNegativeDefiniteError(ValueError):
    """Quadratic form is not negative definite; the state is unnormalizable."""


class IllConditionedOverlapError(ArithmeticError):
    """Overlap matrix condition number above threshold; prune the basis."""


class NegativeBlockNormError(ArithmeticError):
    """A block weight came out non-positive: numerical breakdown."""


class OptimizerStall(RuntimeWarning):
    pass


# permutation matrices of the six diagonal S3 elements, table order
PERM_MATS = np.zeros((6, 3, 3))
for _k, _p in enumerate(S3_PERMS):
    for _i in range(3):
        PERM_MATS[_k, _i, _p[_i]] = 1.0
PERM_SIGNS = np.array(S3_SIGNS, dtype=float)

_PAIR_COUPLING = np.array([
    [[1, -1, 0], [-1, 1, 0], [0, 0, 0]],     # |r1 - r2|^2
    [[1, 0, -1], [0, 0, 0], [-1, 0, 1]],     # |r1 - r3|^2
    [[0, 0, 0], [0, 1, -1], [0, -1, 1]],     # |r2 - r3|^2
], dtype=float)


def axis_matrix(alpha, beta) -> np.ndarray:
    """Per-axis 3x3 exponent matrix: exponent = sum_axes v^T A v."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    return np.diag(a) + np.tensordot(b, _PAIR_COUPLING, axes=1)


@dataclass
class ECGPrimitive:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(3)
        self.beta = np.asarray(self.beta, dtype=float).reshape(3)
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(3)

    def matrix(self) -> np.ndarray:
        return axis_matrix(self.alpha, self.beta)

    def is_valid(self) -> bool:
        """Negative definiteness of the full 9x9 form (3 identical blocks)."""
        return bool(np.all(np.linalg.eigvalsh(self.matrix()) < 0))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
                "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ECGPrimitive":
        return cls(d["alpha"], d["beta"], d["gamma"])


@dataclass
class ECGBasis:
    primitives: list
    coefficients: np.ndarray | None = None
    energy: float | None = None
    stall: bool = False
    stage_history: list = field(default_factory=list)
    stage_snapshots: list = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return len(self.primitives)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "energy": self.energy,
            "coefficients": None if self.coefficients is None
            else list(map(float, self.coefficients)),
            "primitives": [p.to_dict() for p in self.primitives],
            "stall": self.stall,
            "stage_history": [
                {"size": s, "energy": e} for s, e in self.stage_history
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "ECGBasis":
        basis = cls(
            [ECGPrimitive.from_dict(p) for p in d["primitives"]],
            None if d.get("coefficients") is None
            else np.asarray(d["coefficients"], dtype=float),
            d.get("energy"),
            d.get("stall", False),
        )
        basis.stage_history = [
            (h["size"], h["energy"]) for h in d.get("stage_history", [])
        ]
        return basis

    @classmethod
    def from_json(cls, text: str) -> "ECGBasis":
        return cls.from_json_dict(text)

    @classmethod
    def from_json_dict(cls, text: str) -> "ECGBasis":
        return cls.from_dict(json.loads(text))


def gaussian_moment_integral(Q, b) -> float:
    """Integral over R^9 of exp(u^T Q u + b^T u) for negative definite Q."""
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = b.size
    if Q.shape != (n, n):
        raise ValueError("Q and b dimensions disagree")
    try:
        chol = np.linalg.cholesky(-Q)
    except np.linalg.LinAlgError:
        raise NotNegativeDefiniteError("Q is not negative definite") from None
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    y = np.linalg.solve(chol, b)
    # -1/4 b^T Q^-1 b = +1/4 b^T (-Q)^-1 b
    quarter = 0.25 * float(y @ y)
    return float(pi ** (n / 2) * np.exp(-0.5 * logdet + quarter))


def _coulomb_average(dist, var):
    """E[1/|r|] for an isotropic 3D Gaussian: erf(d/sqrt(2 var)) / d."""
    dist = np.asarray(dist, dtype=float)
    var = np.asarray(var, dtype=float)
    t = dist / np.sqrt(2.0 * var)
    small = t < 1e-6
    safe_d = np.where(small, 1.0, dist)
    out = np.where(
        small,
        SQRT_2_OVER_PI / np.sqrt(var) * (1.0 - t * t / 3.0),
        erf(t) / safe_d,
    )
    return out


def _pair_blocks(am, gm, an, gn):
    """Overlap, kinetic and potential contributions for one primitive pair.

    Vectorized over the six diagonal permutations of the ket and the two
    sinh sign combinations; returns (s, t, v) already summed over both.
    """
    an_p = np.einsum("rji,jk,rkl->ril", PERM_MATS, an, PERM_MATS)  # (6,3,3)
    gn_p = np.einsum("rji,j->ri", PERM_MATS, gn)                   # (6,3)

    ppos = -(am[None] + an_p)            # (6,3,3), positive definite
    pinv = np.linalg.inv(ppos)
    detp = np.linalg.det(ppos)
    sigma = 0.5 * pinv                   # per-axis covariance

    # b combinations: bra gamma plus/minus permuted ket gamma
    b2 = np.stack([gn_p, -gn_p])         # (2,6,3)
    b1 = np.broadcast_to(gm, b2.shape)
    b = b1 + b2
    mu = 0.5 * np.einsum("rij,srj->sri", pinv, b)     # (2,6,3)

    base = pi ** 4.5 * detp[None] ** -1.5 * np.exp(
        0.5 * np.einsum("sri,sri->sr", mu, b)
    )  # exp(1/4 b P^-1 b) since mu = P^-1 b / 2

    # kinetic: 1/2 <grad f, grad g>
    tr3 = 12.0 * np.einsum("ij,rjk,rki->r", am, an_p, sigma)  # 4 tr * 3 axes
    quad = 4.0 * np.einsum("sri,ij,rjk,srk->sr", mu, am, an_p, mu)
    lin = 2.0 * np.einsum("sri,sri->sr",
                          np.einsum("ij,srj->sri", am, b2)
                          + np.einsum("rij,srj->sri", an_p, b1), mu)
    dot = np.einsum("sri,sri->sr", b1, b2)
    kin = 0.5 * base * (tr3[None] + quad + lin + dot)

    # potentials: isotropic per-particle marginals, mean along z only
    svar = np.einsum("rii->ri", sigma)                  # (6,3)
    nuc = np.zeros_like(base)
    for i in range(3):
        nuc += _coulomb_average(np.abs(mu[:, :, i]), svar[None, :, i])
    rep = np.zeros_like(base)
    for i in range(3):
        for j in range(i + 1, 3):
            var = svar[:, i] + svar[:, j] - 2.0 * sigma[:, i, j]
            rep += _coulomb_average(np.abs(mu[:, :, i] - mu[:, :, j]),
                                    var[None])
    pot = base * (-Z_NUCLEUS * nuc + rep)

    # sinh pair: 1/2 [K(+) - K(-)]; antisymmetrizer signs and factor 6
    comb = np.array([0.5, -0.5])
    s_elem = 6.0 * float(np.einsum("s,r,sr->", comb, PERM_SIGNS, base))
    t_elem = 6.0 * float(np.einsum("s,r,sr->", comb, PERM_SIGNS, kin))
    v_elem = 6.0 * float(np.einsum("s,r,sr->", comb, PERM_SIGNS, pot))
    return s_elem, t_elem, v_elem


def split_matrix_elements(basis: ECGBasis):
    """Overlap, kinetic and potential matrices over antisymmetrized primitives."""
    n = basis.size
    mats = [p.matrix() for p in basis.primitives]
    gams = [p.gamma for p in basis.primitives]
    for k, p in enumerate(basis.primitives):
        if not np.all(np.linalg.eigvalsh(mats[k]) < 0):
            raise NotNegativeDefiniteError(f"primitive {k} is not normalizable")
    s = np.zeros((n, n))
    t = np.zeros((n, n))
    v = np.zeros((n, n))
    for m in range(n):
        for k in range(m, n):
            se, te, ve = _pair_blocks(mats[m], gams[m], mats[k], gams[k])
            s[m, k] = s[k, m] = se
            t[m, k] = t[k, m] = te
            v[m, k] = v[k, m] = ve
    return s, t, v


def matrix_elements(basis: ECGBasis):
    """Overlap and Hamiltonian matrices (Eq.-level contract of the solver)."""
    s, t, v = split_matrix_elements(basis)
    return s, t + v


def solve_secular(h, s, cond_threshold: float = COND_THRESHOLD):
    """Lowest generalized eigenpair of H C = E S C, normalized to <psi|psi>=1."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    d = np.sqrt(np.abs(np.diag(s)))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise IllConditionedOverlapError("overlap diagonal not positive")
    ds = np.outer(d, d)
    s_n = s / ds
    evals = np.linalg.eigvalsh(s_n)
    if evals[0] <= 0 or evals[-1] / evals[0] > cond_threshold:
        raise IllConditionedOverlapError(
            f"overlap condition {evals[-1] / max(evals[0], 1e-300):.3e}"
        )
    w, vecs = eigh(h / ds, s_n)
    c = vecs[:, 0] / d
    norm = float(c @ s @ c)
    c = c / np.sqrt(norm)
    return float(w[0]), c


# ---------------------------------------------------------------------------
# Term expansion: the wave function as a flat list of pure exponentials
# ---------------------------------------------------------------------------

@dataclass
class TermBlock:
    """coef_k * exp(sum_ax u_ax^T A[k,ax] u_ax + g[k] . u_z), stacked."""

    coef: np.ndarray   # (T,)
    a: np.ndarray      # (T, 3, 3, 3) per-axis exponent matrices
    g: np.ndarray      # (T, 3) z-linear coefficients


def expand_terms(basis: ECGBasis, coefficients=None) -> TermBlock:
    """All 12 N exponential terms of the antisymmetrized expansion."""
    c = basis.coefficients if coefficients is None else coefficients
    if c is None:
        raise ValueError("basis has no coefficients; run solve_secular first")
    coefs, amats, gvecs = [], [], []
    for cn, prim in zip(c, basis.primitives):
        a = prim.matrix()
        for r in range(6):
            p = PERM_MATS[r]
            ap = p.T @ a @ p
            gp = p.T @ prim.gamma
            for sign, half in ((1.0, 0.5), (-1.0, -0.5)):
                coefs.append(cn * PERM_SIGNS[r] * half)
                amats.append(np.stack([ap, ap, ap]))
                gvecs.append(sign * gp)
    return TermBlock(np.array(coefs), np.array(amats), np.array(gvecs))


# gather index arrays for the 36 variable-set permutations, per axis
_YZ_PERMS = [(GROUP36[j].py, GROUP36[j].pz) for j in range(36)]


def axis_permute_terms(terms: TermBlock, j: int) -> TermBlock:
    """Terms of f(sigma_j v): conjugate y/z exponent blocks, relabel gamma."""
    py, pz = _YZ_PERMS[j]
    pym = np.zeros((3, 3))
    pzm = np.zeros((3, 3))
    for i in range(3):
        pym[i, py[i]] = 1.0
        pzm[i, pz[i]] = 1.0
    a = terms.a.copy()
    a[:, 1] = np.einsum("ji,tjk,kl->til", pym, terms.a[:, 1], pym)
    a[:, 2] = np.einsum("ji,tjk,kl->til", pzm, terms.a[:, 2], pzm)
    g = terms.g @ pzm
    return TermBlock(terms.coef.copy(), a, g)


def evaluate_terms(terms: TermBlock, points) -> np.ndarray:
    """Evaluate the term sum at points of shape (..., 9)."""
    pts = np.asarray(points, dtype=float)
    x, y, z = pts[..., 0:3], pts[..., 3:6], pts[..., 6:9]
    expo = (
        np.einsum("...i,tij,...j->...t", x, terms.a[:, 0], x)
        + np.einsum("...i,tij,...j->...t", y, terms.a[:, 1], y)
        + np.einsum("...i,tij,...j->...t", z, terms.a[:, 2], z)
        + np.einsum("...i,ti->...t", z, terms.g)
    )
    return np.einsum("t,...t->...", terms.coef, np.exp(expo))


def ecg_value(basis: ECGBasis, points) -> np.ndarray:
    """Wave function value(s) at 9-dimensional configuration points."""
    return evaluate_terms(expand_terms(basis), points)


def contract_overlap(bra: TermBlock, ket: TermBlock) -> float:
    """Full L2 inner product of two term sums (closed form, vectorized)."""
    ppos = -(bra.a[:, None] + ket.a[None])          # (T1,T2,3,3,3)
    b = bra.g[:, None] + ket.g[None]                # (T1,T2,3)
    det = np.linalg.det(ppos)                       # (T1,T2,3)
    pz_inv_b = np.linalg.solve(ppos[:, :, 2], b[..., None])[..., 0]
    quart = 0.25 * np.einsum("abi,abi->ab", b, pz_inv_b)
    vals = pi ** 4.5 * np.prod(det, axis=-1) ** -0.5 * np.exp(quart)
    return float(np.einsum("a,b,ab->", bra.coef, ket.coef, vals))


def permuted_overlap(basis: ECGBasis, j: int) -> float:
    """<Psi(v0) | Psi(sigma_j v0)> for the normalized wave function."""
    terms = expand_terms(basis)
    return contract_overlap(terms, axis_permute_terms(terms, j))


def all_permuted_overlaps(basis: ECGBasis) -> np.ndarray:
    terms = expand_terms(basis)
    return np.array([
        contract_overlap(terms, axis_permute_terms(terms, j)) for j in range(36)
    ])


# ---------------------------------------------------------------------------
# Shape-block amplitudes and weights
# ---------------------------------------------------------------------------

@dataclass
class BlockWeights:
    a: np.ndarray        # 11 amplitudes entering Psi = sum a_k Xi_k
    w: np.ndarray        # weights w_k = a_k^2
    basis_size: int
    energy: float | None
    overlaps: np.ndarray  # the 36 permuted overlaps (provenance)


def block_amplitudes(basis: ECGBasis, overlaps=None) -> BlockWeights:
    """Block weights from the 36 permuted overlaps.

    Eq.-level: the normalization of the aggregate block function is
    [ (1/36) sum_j eta_k(sigma_j) <Psi|Psi(sigma_j v0)> ]^(1/2) inverted,
    so the amplitude of the normalized block function in Psi is the square
    root of that bracket and the weight is the bracket itself.
    """
    o = np.asarray(
        all_permuted_overlaps(basis) if overlaps is None else overlaps,
        dtype=float,
    )
    eta = np.array(ETA_BAR_TABLE, dtype=float)
    w = eta @ o / 36.0
    if np.any(w <= -1e-10):
        raise NegativeBlockNormError(f"non-positive block norm: {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return BlockWeights(np.sqrt(w), w, basis.size, basis.energy, o)


def xi_orthonormality_residual(overlaps) -> float:
    """Max |<Xi_k|Xi_k'> - delta| computed from the 36 overlaps alone."""
    from .ringcore import COMPOSE36, INVERSE36

    o = np.asarray(overlaps, dtype=float)
    eta = np.array(ETA_BAR_TABLE, dtype=float)
    w = eta @ o / 36.0
    a = 1.0 / np.sqrt(w)
    gram = np.zeros((11, 11))
    comp = np.array([[COMPOSE36[INVERSE36[j]][jp] for jp in range(36)]
                     for j in range(36)])
    ovals = o[comp]  # <Psi(v_j)|Psi(v_j')>
    for k in range(11):
        for kp in range(11):
            gram[k, kp] = a[k] * a[kp] / 36.0 ** 2 * float(
                eta[k] @ ovals @ eta[kp]
            )
    return float(np.max(np.abs(gram - np.eye(11))))


# ---------------------------------------------------------------------------
# Stagewise stochastic optimization
# ---------------------------------------------------------------------------

def narayana_sizes(n_stages: int) -> list[int]:
    sizes = [1, 2, 3]
    while len(sizes) < n_stages:
        sizes.append(sizes[-3] + sizes[-1])
    return sizes[:n_stages]


def validate_size_schedule(sizes) -> None:
    sizes = list(sizes)
    want = narayana_sizes(len(sizes))
    if sizes != want:
        raise ValueError(f"sizes {sizes} do not follow the cows sequence {want}")


def _random_primitive(rng) -> ECGPrimitive:
    while True:
        alpha = -np.exp(rng.uniform(np.log(0.03), np.log(40.0), 3))
        beta = rng.normal(0.0, 0.12, 3)
        gamma = rng.normal(0.0, 0.7, 3)
        if np.max(np.abs(gamma)) < 0.05:
            continue
        prim = ECGPrimitive(alpha, beta, gamma)
        if prim.is_valid():
            return prim


def _perturb_primitive(prim, rng, step) -> ECGPrimitive:
    alpha = -np.abs(prim.alpha) * np.exp(step * rng.normal(0.0, 1.0, 3))
    beta = prim.beta + step * rng.normal(0.0, 0.2, 3)
    gamma = prim.gamma * np.exp(step * rng.normal(0.0, 0.6, 3)) \
        + step * rng.normal(0.0, 0.05, 3)
    return ECGPrimitive(alpha, beta, gamma)


def _energy_of(prims) -> float | None:
    basis = ECGBasis(list(prims))
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            s, h = matrix_elements(basis)
            if not (np.all(np.isfinite(s)) and np.all(np.isfinite(h))):
                return None
            e, _ = solve_secular(h, s)
    except (NotNegativeDefiniteError, IllConditionedOverlapError,
            np.linalg.LinAlgError):
        return None
    if not np.isfinite(e):
        return None
    return e


def _virial_rescale(prims, max_iter: int = 12):
    """Exact width rescaling to the virial optimum s* = -<V> / (2 <T>).

    Psi(s r) has energy s^2 <T> + s <V>, so the optimal scale is available
    in closed form and never raises the energy.  Iterated to
    self-consistency because the linear coefficients re-relax after each
    rescale; at the fixed point the virial ratio is exactly -2.
    """
    prims = list(prims)
    for _ in range(max_iter):
        basis = ECGBasis(list(prims))
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                s, t, v = split_matrix_elements(basis)
                _, c = solve_secular(t + v, s)
                tk = float(c @ t @ c)
                vv = float(c @ v @ c)
        except (NotNegativeDefiniteError, IllConditionedOverlapError,
                np.linalg.LinAlgError):
            return prims
        if tk <= 0:
            return prims
        scale = -vv / (2.0 * tk)
        if not np.isfinite(scale) or scale <= 0:
            return prims
        prims = [
            ECGPrimitive(p.alpha * scale ** 2, p.beta * scale ** 2,
                         p.gamma * scale)
            for p in prims
        ]
        if abs(scale - 1.0) < 1e-10:
            break
    return prims


_STEP_CYCLE = (0.45, 0.18, 0.07, 0.028, 0.011, 0.0045)


class _StageState:
    """Incrementally updated S, T, V matrices: replacing one primitive only
    touches its row and column."""

    def __init__(self, prims):
        self.prims = list(prims)
        self.mats = [p.matrix() for p in self.prims]
        self.gams = [p.gamma for p in self.prims]
        n = len(prims)
        self.s = np.zeros((n, n))
        self.t = np.zeros((n, n))
        self.v = np.zeros((n, n))
        for m in range(n):
            for k in range(m, n):
                se, te, ve = _pair_blocks(self.mats[m], self.gams[m],
                                          self.mats[k], self.gams[k])
                self.s[m, k] = self.s[k, m] = se
                self.t[m, k] = self.t[k, m] = te
                self.v[m, k] = self.v[k, m] = ve

    def energy(self):
        try:
            e, _ = solve_secular(self.t + self.v, self.s)
        except (IllConditionedOverlapError, np.linalg.LinAlgError):
            return None
        return e if np.isfinite(e) else None

    def _row_for(self, k, prim):
        a, g = prim.matrix(), prim.gamma
        if np.any(np.linalg.eigvalsh(a) >= 0):
            return None
        rows = np.zeros((3, len(self.prims)))
        for m in range(len(self.prims)):
            am, gm = (a, g) if m == k else (self.mats[m], self.gams[m])
            vals = _pair_blocks(am, gm, a, g)
            rows[:, m] = vals
        return rows

    def try_replace(self, k, prim):
        """Energy if primitive k were replaced; None when invalid."""
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            rows = self._row_for(k, prim)
            if rows is None or not np.all(np.isfinite(rows)):
                return None, None
            mats = []
            for base, row in zip((self.s, self.t, self.v), rows):
                m = base.copy()
                m[k, :] = row
                m[:, k] = row
                mats.append(m)
            try:
                e, _ = solve_secular(mats[1] + mats[2], mats[0])
            except (IllConditionedOverlapError, np.linalg.LinAlgError):
                return None, None
        return (e, (mats, rows)) if np.isfinite(e) else (None, None)

    def commit(self, k, prim, payload):
        mats, _ = payload
        self.s, self.t, self.v = mats
        self.prims[k] = prim
        self.mats[k] = prim.matrix()
        self.gams[k] = prim.gamma


def _optimize_stage(prims, rng, n_cycles, trials_per_param):
    """Cyclic per-primitive random refinement with a shrinking step schedule.

    Accept-if-lower only, so the energy is non-increasing; each cycle ends
    with the exact virial rescaling.
    """
    prims = _virial_rescale(list(prims))
    state = _StageState(prims)
    best = state.energy()
    if best is None:
        raise IllConditionedOverlapError("invalid starting basis for a stage")
    stalled = True
    for cycle in range(n_cycles):
        improved = False
        for step in _STEP_CYCLE:
            for k in range(len(state.prims)):
                for _ in range(trials_per_param):
                    if rng.random() < 0.05:
                        cand = _random_primitive(rng)
                    else:
                        cand = _perturb_primitive(state.prims[k], rng, step)
                    e, payload = state.try_replace(k, cand)
                    if e is not None and e < best - 1e-12:
                        state.commit(k, cand, payload)
                        best = e
                        improved = True
        rescaled = _virial_rescale(state.prims)
        e = _energy_of(rescaled)
        if e is not None and e < best:
            state = _StageState(rescaled)
            best = e
        if improved:
            stalled = False
        else:
            break
    return list(state.prims), best, stalled


def optimize_basis(target_sizes, seed: int = 0, n_cycles: int = 3,
                   trials_per_param: int = 20) -> ECGBasis:
    """Grow the basis along the cows-sequence schedule, refining each stage.

    Each new stage merges the two prescribed earlier sets as its starting
    point; accepted steps never raise the energy.  Returns the optimized
    basis at the largest requested size with the full stage history.
    """
    validate_size_schedule(target_sizes)
    rng = np.random.default_rng(seed)
    stage_sets: dict[int, list] = {}
    history = []
    snapshots = []
    stalled_any = False
    prims: list = []
    for stage_idx, size in enumerate(target_sizes):
        if size <= 3:
            while len(prims) < size:
                prims = prims + [_best_seed_primitive(prims, rng)]
        else:
            lower = stage_sets[target_sizes[stage_idx - 3]]
            upper = stage_sets[target_sizes[stage_idx - 1]]
            prims = _merge_sets(upper, lower, rng)
        prims, energy, stalled = _optimize_stage(
            prims, rng, n_cycles, trials_per_param
        )
        stalled_any = stalled_any or stalled
        stage_sets[size] = list(prims)
        history.append((size, energy))
        snapshots.append(normalize(ECGBasis(list(prims))))
    basis = ECGBasis(list(prims))
    s, h = matrix_elements(basis)
    basis.energy, basis.coefficients = solve_secular(h, s)
    basis.stall = stalled_any
    basis.stage_history = history
    basis.stage_snapshots = snapshots
    return basis


def _best_seed_primitive(prims, rng, n_candidates: int = 60):
    best, best_e = None, np.inf
    for _ in range(n_candidates):
        cand = _random_primitive(rng)
        e = _energy_of(prims + [cand])
        if e is not None and e < best_e:
            best, best_e = cand, e
    if best is None:
        raise IllConditionedOverlapError("could not seed a new primitive")
    return best


def _merge_sets(upper, lower, rng):
    """Union of two optimized sets, jittering near-duplicate parameters."""
    merged = [ECGPrimitive(p.alpha.copy(), p.beta.copy(), p.gamma.copy())
              for p in upper]
    for p in lower:
        cand = ECGPrimitive(p.alpha.copy(), p.beta.copy(), p.gamma.copy())
        for q in merged:
            scale = np.max(np.abs(np.concatenate([q.alpha, q.beta, q.gamma])))
            diff = max(
                np.max(np.abs(cand.alpha - q.alpha)),
                np.max(np.abs(cand.beta - q.beta)),
                np.max(np.abs(cand.gamma - q.gamma)),
            )
            if diff < 1e-3 * scale:
                cand = _perturb_primitive(cand, rng, 0.15)
        merged.append(cand)
    return merged


def normalize(basis: ECGBasis) -> ECGBasis:
    """Re-solve the secular problem and normalize <psi|psi> = 1."""
    s, h = matrix_elements(basis)
    basis.energy, basis.coefficients = solve_secular(h, s)
    return basis


def energy_components(basis: ECGBasis):
    """(E, <T>, <V>) for the current coefficients (virial diagnostics)."""
    s, t, v = split_matrix_elements(basis)
    c = basis.coefficients
    if c is None:
        e, c = solve_secular(t + v, s)
        basis.coefficients, basis.energy = c, e
    norm = float(c @ s @ c)
    tk = float(c @ t @ c) / norm
    vv = float(c @ v @ c) / norm
    return tk + vv, tk, vv


# ---------------------------------------------------------------------------
# Monte Carlo oracle for the integral engine
# ---------------------------------------------------------------------------

def _single_primitive_terms(prim: ECGPrimitive) -> TermBlock:
    basis = ECGBasis([prim], coefficients=np.array([1.0]))
    return expand_terms(basis)


def _apply_hamiltonian(terms: TermBlock, points) -> np.ndarray:
    """(H f)(u) for a term sum: closed-form kinetic plus Coulomb factors."""
    pts = np.asarray(points, dtype=float)
    x, y, z = pts[..., 0:3], pts[..., 3:6], pts[..., 6:9]
    expo = (
        np.einsum("...i,tij,...j->...t", x, terms.a[:, 0], x)
        + np.einsum("...i,tij,...j->...t", y, terms.a[:, 1], y)
        + np.einsum("...i,tij,...j->...t", z, terms.a[:, 2], z)
        + np.einsum("...i,ti->...t", z, terms.g)
    )
    ex = np.exp(expo)
    gx = 2.0 * np.einsum("tij,...j->...ti", terms.a[:, 0], x)
    gy = 2.0 * np.einsum("tij,...j->...ti", terms.a[:, 1], y)
    gz = 2.0 * np.einsum("tij,...j->...ti", terms.a[:, 2], z) + terms.g[:, :]
    grad_sq = (gx ** 2).sum(-1) + (gy ** 2).sum(-1) + (gz ** 2).sum(-1)
    tra = 2.0 * np.einsum("taii->t", terms.a)
    kin = -0.5 * (grad_sq + tra) * ex
    val = ex
    r = np.stack([pts[..., [i, 3 + i, 6 + i]] for i in range(3)], axis=-2)
    rnorm = np.linalg.norm(r, axis=-1)
    vne = -Z_NUCLEUS * (1.0 / rnorm).sum(-1)
    vee = sum(
        1.0 / np.linalg.norm(r[..., i, :] - r[..., j, :], axis=-1)
        for i in range(3) for j in range(i + 1, 3)
    )
    pot = (vne + vee)[..., None] * val
    return np.einsum("t,...t->...", terms.coef, kin + pot)


class _MixtureProposal:
    """Gaussian mixture matched to the bra-ket pair envelope (covariances
    inflated for heavier tails)."""

    def __init__(self, bra: TermBlock, ket: TermBlock, inflate: float = 1.6):
        ppos = -(bra.a[:, None] + ket.a[None])
        b = bra.g[:, None] + ket.g[None]
        t1, t2 = bra.coef.size, ket.coef.size
        det = np.linalg.det(ppos)
        pz_inv_b = np.linalg.solve(ppos[:, :, 2], b[..., None])[..., 0]
        vals = pi ** 4.5 * np.prod(det, axis=-1) ** -0.5 * np.exp(
            0.25 * np.einsum("abi,abi->ab", b, pz_inv_b)
        )
        weight = np.abs(bra.coef[:, None] * ket.coef[None] * vals).reshape(-1)
        keep = weight > weight.max() * 1e-12
        self.weights = weight[keep] / weight[keep].sum()
        cov = inflate * 0.5 * np.linalg.inv(ppos).reshape(t1 * t2, 3, 3, 3)
        mean_z = 0.5 * pz_inv_b.reshape(t1 * t2, 3)
        self.cov = cov[keep]
        self.mean_z = mean_z[keep]
        self.chols = np.linalg.cholesky(self.cov)

    def sample(self, rng, n):
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        normal = rng.standard_normal((n, 3, 3))
        pts = np.einsum("naij,naj->nai", self.chols[comp], normal)
        pts[:, 2] += self.mean_z[comp]
        return pts.reshape(n, 9), comp

    def pdf(self, pts):
        pts = np.asarray(pts, dtype=float)
        n = pts.shape[0]
        total = np.zeros(n)
        x = pts[:, 0:3]
        y = pts[:, 3:6]
        z = pts[:, 6:9]
        for k in range(self.weights.size):
            logp = np.zeros(n)
            for ax, coords in enumerate((x, y, z)):
                c = coords - (self.mean_z[k] if ax == 2 else 0.0)
                cov = self.cov[k, ax]
                inv = np.linalg.inv(cov)
                det = np.linalg.det(cov)
                logp += -0.5 * np.einsum("ni,ij,nj->n", c, inv, c) \
                    - 0.5 * np.log((2 * pi) ** 3 * det)
            total += self.weights[k] * np.exp(logp)
        return total


def mc_matrix_element(basis: ECGBasis, kind: str, m: int, n: int,
                      j: int = 0, n_samples: int = 200_000,
                      seed: int = 0, batch: int = 50_000):
    """Monte Carlo estimate of one S/H/permuted-overlap entry with its SE.

    kind: 'S' or 'H' for matrix entries over antisymmetrized primitives,
    'O' for the permuted overlap of the full normalized wave function.
    """
    if kind == "O":
        bra = expand_terms(basis)
        ket = axis_permute_terms(expand_terms(basis), j)
        op = None
    else:
        bra = _single_primitive_terms(basis.primitives[m])
        ket = _single_primitive_terms(basis.primitives[n])
        op = kind
    prop = _MixtureProposal(bra, ket)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    count = 0
    while count < n_samples:
        nb = min(batch, n_samples - count)
        pts, _ = prop.sample(rng, nb)
        q = prop.pdf(pts)
        fb = evaluate_terms(bra, pts)
        if op == "H":
            gb = _apply_hamiltonian(ket, pts)
        else:
            gb = evaluate_terms(ket, pts)
        vals = fb * gb / q
        total += float(vals.sum())
        total_sq += float((vals ** 2).sum())
        count += nb
    mean = total / count
    var = max(total_sq / count - mean ** 2, 0.0)
    return mean, (var / count) ** 0.5
