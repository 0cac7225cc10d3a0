"""Harmonic polynomials, Vandermonde forms, syzygies and degree counts.

The harmonic polynomial h(axis; k, l, m) is the 3x3 determinant whose rows
hold successively lower powers a_i^(k-r)/(k-r)! of the axis coordinates,
rows with negative factorial arguments being zero.  Index triples whose
determinant vanishes identically yield the zero polynomial (uniform
treatment keeps generated code paths simple).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

from .ringcore import AXES, Poly9, Variable


class SyzygyViolation(AssertionError):
    """A syzygy of the harmonic polynomials failed to vanish."""


# The six independent harmonics per axis, highest degree first.
BASIS_INDICES = ((2, 2, 2), (2, 1, 2), (2, 2, 1), (2, 1, 1), (1, 2, 1), (2, 1, 0))


@lru_cache(maxsize=None)
def harmonic_poly(axis: str, k: int, l: int, m: int) -> Poly9:
    """Determinant-defined harmonic polynomial in one axis triplet."""
    if not all(0 <= v <= 2 for v in (k, l, m)):
        raise ValueError("harmonic indices must lie in 0..2")
    cols = []
    for idx, power in zip((1, 2, 3), (k, l, m)):
        var = Poly9.variable(axis, idx)
        col = []
        for row in range(3):
            p = power - row
            if p < 0:
                col.append(Poly9.zero())
            else:
                col.append(var ** p * Fraction(1, factorial(p)))
        cols.append(col)
    # 3x3 determinant, Leibniz expansion
    c = cols
    return (
        c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
        - c[1][0] * (c[0][1] * c[2][2] - c[0][2] * c[2][1])
        + c[2][0] * (c[0][1] * c[1][2] - c[0][2] * c[1][1])
    )


def vandermonde(axis: str) -> Poly9:
    """Delta_axis = (a1-a2)(a1-a3)(a2-a3); equals 2*h(axis;2,2,2)."""
    a1, a2, a3 = (Poly9.variable(axis, i) for i in (1, 2, 3))
    return (a1 - a2) * (a1 - a3) * (a2 - a3)


def degree_dimensions(n: int) -> tuple[int, ...]:
    """Coefficients of the q-factorial [n]_q!, counting independent harmonics."""
    if n < 1:
        raise ValueError("n must be >= 1")
    coeffs = [1]
    for k in range(2, n + 1):
        out = [0] * (len(coeffs) + k - 1)
        for i, c in enumerate(coeffs):
            for j in range(k):
                out[i + j] += c
        coeffs = out
    return tuple(coeffs)


def independent_harmonics(axis: str) -> list[Poly9]:
    """The 6-element basis {222, 212, 221, 211, 121, 210} for one axis."""
    return [harmonic_poly(axis, *klm) for klm in BASIS_INDICES]


def check_syzygies(axis: str = "x") -> dict:
    """Verify the two linear syzygies and the nonlinear one as exact identities.

    Returns a report mapping syzygy name -> residual Poly9 (all must be zero);
    raises SyzygyViolation otherwise.
    """
    h = lambda k, l, m: harmonic_poly(axis, k, l, m)
    residuals = {
        "linear_1": h(1, 1, 2) + h(1, 2, 1) + h(2, 1, 1),
        "linear_2": h(1, 2, 2) + h(2, 1, 2) + h(2, 2, 1),
        "nonlinear": (
            h(1, 2, 1) * h(2, 1, 2)
            + h(2, 1, 1) * h(2, 1, 2)
            + h(1, 2, 1) * h(2, 2, 1)
            - Poly9.constant(3) * h(2, 2, 2)
        ),
    }
    for name, res in residuals.items():
        if not res.is_zero():
            raise SyzygyViolation(f"syzygy {name} residual nonzero on axis {axis}: {res!r}")
    return residuals


def _monomial_matrix(polys):
    monos = sorted({e for p in polys for e, _ in p.terms()})
    index = {e: i for i, e in enumerate(monos)}
    rows = []
    for p in polys:
        row = [Fraction(0)] * len(monos)
        for e, c in p.terms():
            row[index[e]] = c
        rows.append(row)
    return rows


def exact_rank(polys) -> int:
    """Rank over the rationals of a family of polynomials (coefficient vectors)."""
    rows = _monomial_matrix(polys)
    rank = 0
    ncols = len(rows[0]) if rows else 0
    col = 0
    while rank < len(rows) and col < ncols:
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / pv
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
        col += 1
    return rank


def solve_in_span(targets, generators):
    """Exact coefficients expressing each target in the span of generators.

    Returns a list (one per target) of coefficient lists, or None where a
    target lies outside the span.
    """
    monos = sorted(
        {e for p in list(generators) + list(targets) for e, _ in p.terms()}
    )
    index = {e: i for i, e in enumerate(monos)}
    ncols = len(generators)
    # Augmented system A c = t solved by eliminating on generator columns.
    a_rows = [[Fraction(0)] * ncols for _ in monos]
    for j, g in enumerate(generators):
        for e, c in g.terms():
            a_rows[index[e]][j] = c
    t_cols = []
    for t in targets:
        col = [Fraction(0)] * len(monos)
        for e, c in t.terms():
            col[index[e]] = c
        t_cols.append(col)
    solutions = _solve_many(a_rows, t_cols, ncols)
    return solutions


def _solve_many(a_rows, t_cols, ncols):
    nrows = len(a_rows)
    rows = [list(a_rows[r]) + [c[r] for c in t_cols] for r in range(nrows)]
    pivots = []
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, nrows) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        rows[rank] = [v / pv for v in rows[rank]]
        for r in range(nrows):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        pivots.append(col)
        rank += 1
    out = []
    for k in range(len(t_cols)):
        tcol = ncols + k
        # inconsistent if a zero generator-row has nonzero target entry
        consistent = all(
            any(rows[r][c] != 0 for c in range(ncols)) or rows[r][tcol] == 0
            for r in range(nrows)
        )
        if not consistent:
            out.append(None)
            continue
        coeffs = [Fraction(0)] * ncols
        for r, col in enumerate(pivots):
            coeffs[col] = rows[r][tcol]
        out.append(coeffs)
    return out


def rewrite_to_basis(axis: str, k: int, l: int, m: int):
    """Express h(axis;k,l,m) in the 6-element independent basis (exact)."""
    target = harmonic_poly(axis, k, l, m)
    if target.is_zero():
        return [Fraction(0)] * len(BASIS_INDICES)
    sol = solve_in_span([target], independent_harmonics(axis))[0]
    if sol is None:
        raise SyzygyViolation(f"harmonic {axis}{k}{l}{m} outside the 6-element basis")
    return sol


def all_harmonic_indices():
    return [(k, l, m) for k in range(3) for l in range(3) for m in range(3)]
