"""One-electron and bosonic densities of the ECG wave function.

The one-electron density has a closed form: after fixing particle 1, every
pair of exponential terms integrates over the remaining six coordinates to
a Gaussian in (x1, y1, z1).  Bosonic densities require the coefficient
functions pointwise and are estimated by importance-sampled Monte Carlo
with the Gaussian envelope of |Psi|^2 as proposal; an independent
radial-angular quadrature path covers the collinear-x block as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .decompose import (
    DEFAULT_EPS,
    PERM_GATHER,
    coincidence_guard,
    extract_bosonic_numeric_batch,
)
from .ecg import ECGBasis, TermBlock, axis_permute_terms, evaluate_terms, expand_terms
from .shapes import canonical_shapes
from .symgroup import CHI_TABLE


class BudgetExhaustedError(RuntimeError):
    """Too many samples rejected by the coincidence guard."""


# chi rows extracting the four one-dimensional blocks
_SINGLE_BLOCK_CHI = {32: 0, 0: 1, 23: 2, 26: 3}


# ---------------------------------------------------------------------------
# closed-form one-electron density
# ---------------------------------------------------------------------------

def _pair_reduction(terms: TermBlock):
    """Reduce |sum of terms|^2 over (r2, r3) to Gaussians in r1.

    Returns arrays (kappa, qx, qy, qz, lz) with
    integral = sum kappa * exp(qx x^2 + qy y^2 + qz z^2 + lz z).
    """
    t = terms.coef.size
    coef = (terms.coef[:, None] * terms.coef[None, :]).reshape(-1)
    kappa = np.ones_like(coef)
    quads = []
    lins = []
    for ax in range(3):
        w = (terms.a[:, None, ax] + terms.a[None, :, ax]).reshape(-1, 3, 3)
        if ax == 2:
            g = (terms.g[:, None] + terms.g[None, :]).reshape(-1, 3)
        else:
            g = np.zeros((w.shape[0], 3))
        w00 = w[:, 0, 0]
        w0r = w[:, 0, 1:]
        wrr = w[:, 1:, 1:]
        p = -wrr
        det = p[:, 0, 0] * p[:, 1, 1] - p[:, 0, 1] * p[:, 1, 0]
        pinv = np.empty_like(p)
        pinv[:, 0, 0] = p[:, 1, 1] / det
        pinv[:, 1, 1] = p[:, 0, 0] / det
        pinv[:, 0, 1] = -p[:, 0, 1] / det
        pinv[:, 1, 0] = -p[:, 1, 0] / det
        gr = g[:, 1:]
        quad = w00 + np.einsum("pi,pij,pj->p", w0r, pinv, w0r)
        lin = g[:, 0] + np.einsum("pi,pij,pj->p", w0r, pinv, gr)
        const = pi / np.sqrt(det) * np.exp(
            0.25 * np.einsum("pi,pij,pj->p", gr, pinv, gr)
        )
        kappa = kappa * const
        quads.append(quad)
        lins.append(lin)
    kappa = coef * kappa
    qx, qy, qz = quads
    lz = lins[2]
    # collapse duplicate Gaussian signatures (the permutation sums produce many)
    key = np.round(np.stack([qx, qy, qz, lz], axis=1), 12)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    k_sum = np.zeros(len(uniq))
    np.add.at(k_sum, inverse, kappa)
    return k_sum, uniq[:, 0], uniq[:, 1], uniq[:, 2], uniq[:, 3]


class OneElectronDensity:
    """Callable closed-form rho(r1) = 3 * integral of |Psi|^2 over r2, r3."""

    def __init__(self, basis: ECGBasis):
        terms = expand_terms(basis)
        self.kappa, self.qx, self.qy, self.qz, self.lz = _pair_reduction(terms)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(pts.shape[0])
        chunk = max(1, 2_000_000 // max(self.kappa.size, 1))
        for lo in range(0, pts.shape[0], chunk):
            p = pts[lo:lo + chunk]
            expo = (
                np.outer(p[:, 0] ** 2, self.qx)
                + np.outer(p[:, 1] ** 2, self.qy)
                + np.outer(p[:, 2] ** 2, self.qz)
                + np.outer(p[:, 2], self.lz)
            )
            out[lo:lo + chunk] = 3.0 * np.exp(expo) @ self.kappa
        return out if np.asarray(points).ndim > 1 else out[0]


def one_electron_density(basis: ECGBasis, r1) -> float:
    return float(OneElectronDensity(basis)(np.asarray(r1, dtype=float)))


def density_normalization(basis: ECGBasis, n_radial: int = 48,
                          n_theta: int = 32, n_phi: int = 16,
                          r_max: float = 14.0) -> float:
    """Quadrature of rho over a radial-angular grid; should equal 3."""
    rho = OneElectronDensity(basis)
    rx, rw = np.polynomial.legendre.leggauss(n_radial)
    # pack nodes toward the origin where the core density peaks
    r = r_max * ((rx + 1.0) / 2.0) ** 2
    rjac = r_max * (rx + 1.0) * rw / 2.0
    cx, cw = np.polynomial.legendre.leggauss(n_theta)
    phi = (np.arange(n_phi) + 0.5) * 2.0 * pi / n_phi
    st = np.sqrt(1.0 - cx ** 2)
    pts = np.stack([
        np.einsum("r,t,p->rtp", r, st, np.cos(phi)),
        np.einsum("r,t,p->rtp", r, st, np.sin(phi)),
        np.einsum("r,t,p->rtp", r, cx, np.ones_like(phi)),
    ], axis=-1).reshape(-1, 3)
    vals = rho(pts).reshape(len(r), n_theta, n_phi)
    wgt = np.einsum("r,t->rt", rjac * r ** 2, cw)[:, :, None] * (2.0 * pi / n_phi)
    return float((vals * wgt).sum())


# ---------------------------------------------------------------------------
# Monte Carlo bosonic densities
# ---------------------------------------------------------------------------

class _ConditionalEnvelope:
    """Gaussian proposal for (r2, r3) at fixed r1.

    Matched to the envelope of all 36 permuted copies of |Psi|^2 (the
    bosonic coefficients involve every permuted evaluation, whose mass the
    unpermuted envelope misses); each component is a per-axis 2D
    conditional Gaussian, covariances inflated for heavier tails.
    """

    def __init__(self, basis: ECGBasis, r1, inflate: float = 1.5):
        base = expand_terms(basis)
        perm = [axis_permute_terms(base, j) for j in range(36)]
        coef = np.concatenate([t.coef for t in perm])
        amat = np.concatenate([t.a for t in perm])
        gvec = np.concatenate([t.g for t in perm])
        # deduplicate identical permuted terms before building components
        key = np.round(np.concatenate(
            [amat.reshape(len(coef), -1), gvec], axis=1), 10)
        _, first, inv = np.unique(key, axis=0, return_index=True,
                                  return_inverse=True)
        mass = np.zeros(len(first))
        np.add.at(mass, inv, np.abs(coef))
        amat, gvec = amat[first], gvec[first]
        r1 = np.asarray(r1, dtype=float)
        t = len(first)
        means = np.zeros((t, 3, 2))
        covs = np.zeros((t, 3, 2, 2))
        logw = np.log(mass + 1e-300) * 2.0
        for ax in range(3):
            w = 2.0 * amat[:, ax]
            g = 2.0 * gvec if ax == 2 else np.zeros((t, 3))
            w00 = w[:, 0, 0]
            w0r = w[:, 0, 1:]
            p = -w[:, 1:, 1:]
            det = p[:, 0, 0] * p[:, 1, 1] - p[:, 0, 1] * p[:, 1, 0]
            pinv = np.empty_like(p)
            pinv[:, 0, 0] = p[:, 1, 1] / det
            pinv[:, 1, 1] = p[:, 0, 0] / det
            pinv[:, 0, 1] = -p[:, 0, 1] / det
            pinv[:, 1, 0] = -p[:, 1, 0] / det
            a = r1[ax]
            c = 2.0 * a * w0r + g[:, 1:]
            means[:, ax] = 0.5 * np.einsum("pij,pj->pi", pinv, c)
            covs[:, ax] = 0.5 * pinv * inflate
            logw += (
                w00 * a * a + g[:, 0] * a
                + 0.25 * np.einsum("pi,pij,pj->p", c, pinv, c)
                - 0.5 * np.log(det)
            )
        logw -= logw.max()
        weight = np.exp(logw)
        keep = weight > 1e-9 * weight.max()
        self.weights = weight[keep] / weight[keep].sum()
        self.means = means[keep]
        self.chols = np.linalg.cholesky(covs[keep])
        self.covs = covs[keep]

    def sample(self, rng, n):
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        normal = rng.standard_normal((n, 3, 2))
        pts = np.einsum("naij,naj->nai", self.chols[comp], normal) \
            + self.means[comp]
        return pts  # (n, 3 axes, 2 particles)

    def pdf(self, pts):
        cov = self.covs  # (K, 3, 2, 2)
        det = cov[..., 0, 0] * cov[..., 1, 1] - cov[..., 0, 1] * cov[..., 1, 0]
        inv = np.empty_like(cov)
        inv[..., 0, 0] = cov[..., 1, 1] / det
        inv[..., 1, 1] = cov[..., 0, 0] / det
        inv[..., 0, 1] = -cov[..., 0, 1] / det
        inv[..., 1, 0] = -cov[..., 1, 0] / det
        logp = -0.5 * np.log((2 * pi) ** 6 * np.prod(det, axis=1))  # (K,)
        c = pts[None, :, :, :] - self.means[:, None, :, :]  # (K, n, 3, 2)
        quad = np.einsum("knai,kaij,knaj->kn", c, inv, c)
        dens = np.exp(logp[:, None] - 0.5 * quad)
        return np.einsum("k,kn->n", self.weights, dens)


def _assemble_points(r1, block):
    """(n,3,2) proposal draws + fixed r1 -> 9-coordinate points."""
    n = block.shape[0]
    pts = np.empty((n, 9))
    for ax in range(3):
        pts[:, 3 * ax] = r1[ax]
        pts[:, 3 * ax + 1] = block[:, ax, 0]
        pts[:, 3 * ax + 2] = block[:, ax, 1]
    return pts


def _phi_values(basis: ECGBasis, i: int, pts, eps: float) -> np.ndarray:
    """Bosonic coefficient i at guarded points (vectorized)."""
    terms = expand_terms(basis)
    if i in _SINGLE_BLOCK_CHI:
        chi = CHI_TABLE[_SINGLE_BLOCK_CHI[i]]
        perm = np.stack([pts[:, PERM_GATHER[j]] for j in range(36)])
        vals = np.stack([evaluate_terms(terms, perm[j]) for j in range(36)])
        g = np.einsum("j,jn->n", np.array(chi, dtype=float), vals)
        s = canonical_shapes().shapes[i].evaluate([pts[:, k] for k in range(9)])
        return g / (36.0 * s)
    phi = extract_bosonic_numeric_batch(
        lambda p: evaluate_terms(terms, p), pts, eps
    )
    return phi[:, i]


def bosonic_density(basis: ECGBasis, i: int, r1, budget: int = 20000,
                    seed: int = 0, eps: float = DEFAULT_EPS,
                    max_reject_factor: float = 20.0):
    """Monte Carlo estimate of the bosonic density D_i at r1.

    Returns (value, standard error).  Samples failing the coincidence
    guard are re-drawn; raises BudgetExhaustedError when rejections exceed
    max_reject_factor * budget.
    """
    r1 = np.asarray(r1, dtype=float)
    env = _ConditionalEnvelope(basis, r1)
    rng = np.random.default_rng(seed)
    # batch means give a stable standard-error estimate for the
    # heavy-tailed importance weights
    n_batches = max(16, min(64, budget // 256))
    per_batch = (budget + n_batches - 1) // n_batches
    batch_means = []
    batch_sizes = []
    rejected = 0
    for _ in range(n_batches):
        collected = 0
        total = 0.0
        while collected < per_batch:
            n = min(per_batch - collected, 8192)
            block = env.sample(rng, n)
            pts = _assemble_points(r1, block)
            good = coincidence_guard(pts, eps)
            rejected += int(n - good.sum())
            if rejected > max_reject_factor * budget + 1000:
                raise BudgetExhaustedError(
                    f"guard rejected {rejected} samples for budget {budget}"
                )
            if not np.any(good):
                continue
            block = block[good]
            pts = pts[good]
            q = env.pdf(block)
            phi = _phi_values(basis, i, pts, eps)
            total += float((phi * phi / q).sum())
            collected += int(good.sum())
        batch_means.append(total / collected)
        batch_sizes.append(collected)
    m = np.array(batch_means)
    w = np.array(batch_sizes, dtype=float)
    mean = float(np.average(m, weights=w))
    var_mean = float(np.sum((w / w.sum()) ** 2 * (m - mean) ** 2)
                     * n_batches / (n_batches - 1))
    return mean, var_mean ** 0.5


def rho_monte_carlo(basis: ECGBasis, r1, budget: int = 20000, seed: int = 0):
    """Monte Carlo cross-check of the closed-form one-electron density."""
    r1 = np.asarray(r1, dtype=float)
    env = _ConditionalEnvelope(basis, r1)
    rng = np.random.default_rng(seed)
    terms = expand_terms(basis)
    block = env.sample(rng, budget)
    pts = _assemble_points(r1, block)
    q = env.pdf(block)
    psi = evaluate_terms(terms, pts)
    vals = 3.0 * psi * psi / q
    mean = float(vals.mean())
    return mean, float(vals.std(ddof=1) / np.sqrt(budget))


# ---------------------------------------------------------------------------
# Transformed radial-angular quadrature for the collinear-x block
# ---------------------------------------------------------------------------

def d32_quadrature(basis: ECGBasis, r1, n_radial: int = 48,
                   n_angle: int = 24, r_min: float = 0.02,
                   r_max: float = 9.0) -> float:
    """D_32(r1) via the transformed (r, phi) quadrature.

    Substituting x2 = x1 + r sin(phi), x3 = x1 + r cos(phi) turns the
    integral over the squared collinear-x coefficient into a radial-angular
    one whose y- and z-coordinate integrals are closed-form Gaussians.
    The angular panels avoid the removable 0/0 angles.
    """
    r1 = np.asarray(r1, dtype=float)
    terms = expand_terms(basis)
    gterms = [axis_permute_terms(terms, j) for j in range(36)]
    coef = np.concatenate([t.coef for t in gterms])
    amats = np.concatenate([t.a for t in gterms])
    gvecs = np.concatenate([t.g for t in gterms])

    # y,z closed-form reduction at fixed y1, z1; x-form pair index kept
    t = coef.size
    xforms = amats[:, 0]
    xkey = np.round(xforms.reshape(t, 9), 12)
    uniq_x, xid = np.unique(xkey, axis=0, return_inverse=True)
    nx = len(uniq_x)

    # pair reduction in manageable chunks
    c_group = np.zeros((nx, nx))
    chunk = max(1, 8_000_000 // t)
    ii = np.arange(t)
    for lo in range(0, t, chunk):
        hi = min(t, lo + chunk)
        ia = ii[lo:hi]
        kappa = coef[ia][:, None] * coef[None, :]
        logs = np.zeros((hi - lo, t))
        for ax, fixed in ((1, r1[1]), (2, r1[2])):
            w = amats[ia, ax][:, None] + amats[None, :, ax]
            if ax == 2:
                g = gvecs[ia][:, None] + gvecs[None, :]
            else:
                g = np.zeros((hi - lo, t, 3))
            w00 = w[..., 0, 0]
            w0r = w[..., 0, 1:]
            p = -w[..., 1:, 1:]
            det = p[..., 0, 0] * p[..., 1, 1] - p[..., 0, 1] * p[..., 1, 0]
            pinv = np.empty_like(p)
            pinv[..., 0, 0] = p[..., 1, 1] / det
            pinv[..., 1, 1] = p[..., 0, 0] / det
            pinv[..., 0, 1] = -p[..., 0, 1] / det
            pinv[..., 1, 0] = -p[..., 1, 0] / det
            c = 2.0 * fixed * w0r + g[..., 1:]
            logs += (
                w00 * fixed ** 2 + g[..., 0] * fixed
                + 0.25 * np.einsum("...i,...ij,...j->...", c, pinv, c)
                - 0.5 * np.log(det) + np.log(pi)
            )
        vals = kappa * np.exp(logs)
        np.add.at(c_group, (xid[ia][:, None], xid[None, :]), vals)

    wsum = uniq_x.reshape(nx, 3, 3)[:, None] + uniq_x.reshape(nx, 3, 3)[None]

    # angular panels between the removable singular angles
    bounds = np.array([0, 0.25, 0.5, 1.0, 1.25, 1.5, 2.0]) * pi
    gx, gw = np.polynomial.legendre.leggauss(n_angle)
    phis, phiw = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        phis.append((b - a) / 2 * gx + (a + b) / 2)
        phiw.append((b - a) / 2 * gw)
    phis = np.concatenate(phis)
    phiw = np.concatenate(phiw)

    rx, rw = np.polynomial.legendre.leggauss(n_radial)
    # log-spaced radial panels resolve both the core and the tail
    redges = np.geomspace(r_min, r_max, 5)
    rr, rwgt = [], []
    for a, b in zip(redges[:-1], redges[1:]):
        rr.append((b - a) / 2 * gx + (a + b) / 2)
        rwgt.append((b - a) / 2 * gw)
    rr = np.concatenate(rr)
    rwgt = np.concatenate(rwgt)

    rg, pg = np.meshgrid(rr, phis, indexing="ij")
    x2 = r1[0] + rg * np.sin(pg)
    x3 = r1[0] + rg * np.cos(pg)
    xv = np.stack([np.full_like(x2, r1[0]), x2, x3], axis=-1)
    expo = np.einsum("rpi,nij,rpj->rpn", xv, wsum.reshape(-1, 3, 3)[: nx * nx]
                     .reshape(nx * nx, 3, 3), xv)
    f_tot = np.einsum("rpn,n->rp", np.exp(expo), c_group.reshape(-1))
    delta = (xv[..., 0] - xv[..., 1]) * (xv[..., 0] - xv[..., 2]) \
        * (xv[..., 1] - xv[..., 2])
    integrand = f_tot / (36.0 ** 2 * 9.0 * delta ** 2) * rg
    return float(np.einsum("rp,r,p->", integrand, rwgt, phiw))


# ---------------------------------------------------------------------------
# Grid sampling and the plain-text volumetric format
# ---------------------------------------------------------------------------

@dataclass
class DensityGrid:
    kind: str
    origin: np.ndarray   # (3,)
    step: np.ndarray     # (3,)
    counts: tuple        # (nx, ny, nz)
    values: np.ndarray   # flattened, z fastest

    def points(self) -> np.ndarray:
        nx, ny, nz = self.counts
        ax = [self.origin[i] + self.step[i] * np.arange(self.counts[i])
              for i in range(3)]
        g = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def cube(self) -> np.ndarray:
        return self.values.reshape(self.counts)

    def write(self, path, config_hash: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# shapedecomp density grid v1 (values z-fastest)\n")
            if config_hash:
                fh.write(f"# config_hash {config_hash}\n")
            fh.write(f"kind {self.kind}\n")
            fh.write("origin " + " ".join(repr(float(v)) for v in self.origin) + "\n")
            fh.write("step " + " ".join(repr(float(v)) for v in self.step) + "\n")
            fh.write("counts " + " ".join(str(int(c)) for c in self.counts) + "\n")
            fh.write("values\n")
            for v in self.values:
                fh.write(repr(float(v)) + "\n")

    @classmethod
    def read(cls, path) -> "DensityGrid":
        kind, origin, step, counts = None, None, None, None
        values = []
        in_values = False
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if in_values:
                    values.append(float(line))
                    continue
                key, *rest = line.split()
                if key == "kind":
                    kind = rest[0]
                elif key == "origin":
                    origin = np.array([float(v) for v in rest])
                elif key == "step":
                    step = np.array([float(v) for v in rest])
                elif key == "counts":
                    counts = tuple(int(v) for v in rest)
                elif key == "values":
                    in_values = True
        return cls(kind, origin, step, counts, np.array(values))


def parse_grid_spec(spec: str, npoints_default: int = 21):
    """'lo:hi:n' applied to all three axes."""
    parts = spec.split(":")
    lo, hi = float(parts[0]), float(parts[1])
    n = int(parts[2]) if len(parts) > 2 else npoints_default
    if n < 2 or hi <= lo:
        raise ValueError(f"bad grid spec {spec!r}")
    return lo, hi, n


def density_grid(basis: ECGBasis, kind: str, grid_spec: str,
                 seed: int = 0, budget: int = 4000,
                 eps: float = DEFAULT_EPS) -> DensityGrid:
    """Sample rho or a bosonic density on a regular cube grid."""
    lo, hi, n = parse_grid_spec(grid_spec)
    step = (hi - lo) / (n - 1)
    origin = np.array([lo, lo, lo])
    steps = np.array([step, step, step])
    grid = DensityGrid(kind, origin, steps, (n, n, n), np.empty(n ** 3))
    pts = grid.points()
    if kind == "rho":
        grid.values = OneElectronDensity(basis)(pts)
        return grid
    if not kind.startswith("D"):
        raise ValueError(f"unknown density kind {kind!r}")
    i = int(kind[1:])
    vals = np.empty(len(pts))
    for k, p in enumerate(pts):
        vals[k], _ = bosonic_density(basis, i, p, budget=budget,
                                     seed=seed + k, eps=eps)
    grid.values = vals
    return grid
