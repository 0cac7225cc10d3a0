"""Extraction of the 36 bosonic coefficient functions from a wave function.

The character transforms g_k together with the inverse matrices M4..M10
turn the 36 permuted evaluations of a diagonally alternating function into
its bosonic coefficients, one shape block at a time.  The same block
algebra runs in two backends: symbolic (exact division of Poly9 values)
and numeric (floating point with a coincidence guard), sharing one code
path for the linear algebra.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .harmonics import harmonic_poly, vandermonde
from .ringcore import (
    COMPOSE36,
    GROUP36,
    INVERSE36,
    NotAlternatingError,
    NotDivisibleError,
    Poly9,
    S3_PERMS,
    linear_combination,
)
from .shapes import BLOCKS, canonical_shapes
from .symgroup import CHI_TABLE, ETA_BAR_TABLE, S3_CHARS, TableMismatch


class NearSingularError(ArithmeticError):
    """Evaluation point too close to a coordinate coincidence; re-sample."""


class SingularPointError(ArithmeticError):
    """Two-fermion numeric inversion at a point with xyz = 0."""


DEFAULT_EPS = 1e-6

# Variable sets whose transforms feed each 4x4 block system.
VSETS_XY = (0, 6, 7, 24)   # g4 and g5
VSETS_XZ = (0, 1, 2, 4)    # g6 and g7
CHI8_VSETS = (0, 1, 2, 4, 6, 7, 9, 10, 12, 14, 18, 23, 24, 26, 28, 32)

# Ordering of the chi8 unknowns after the column reordering C^-1.
PHI16 = (3, 9, 10, 16, 17, 24, 25, 33, 7, 12, 14, 15, 18, 19, 21, 28)

# Row elimination combinations Gg: (divisor, ((coeff, vset), ...)) with a
# further overall factor 1/3 applied where used.
GG_ROWS = (
    (2, ((1, 4), (-1, 10), (1, 12), (-1, 24))),
    (2, ((1, 0), (1, 9), (1, 10), (1, 14), (1, 24), (1, 32))),
    (2, ((1, 1), (1, 2), (1, 6), (1, 7), (1, 18), (1, 26))),
    (2, ((1, 2), (-1, 6), (1, 23), (1, 26), (1, 28))),
    (2, ((-1, 4), (-1, 10), (1, 12), (1, 24))),
    (2, ((1, 1), (1, 2), (-1, 6), (-1, 7), (-1, 18), (1, 26))),
    (2, ((-1, 1), (2, 6), (1, 7), (1, 18), (-1, 23), (1, 28))),
    (2, ((1, 0), (1, 4), (-1, 9), (-1, 12), (-1, 14), (1, 32))),
    (1, ((1, 0), (-1, 9), (-1, 10), (-1, 12), (-1, 32))),
    (1, ((1, 1), (-1, 7), (1, 18), (1, 26), (1, 28))),
    (1, ((1, 2), (1, 7), (-1, 23), (-1, 26))),
    (1, ((1, 4), (1, 9), (-1, 14), (1, 24), (1, 32))),
    (1, ((-1, 1), (1, 2), (-1, 7), (-1, 18), (2, 23), (-2, 26), (-1, 28))),
    (1, ((2, 1), (1, 2), (2, 7), (-1, 18), (-1, 23), (1, 26), (2, 28))),
    (1, ((-2, 0), (-1, 4), (1, 9), (-1, 10), (-1, 12), (-2, 14), (-1, 24), (1, 32))),
    (1, ((1, 0), (-1, 4), (1, 9), (2, 10), (2, 12), (1, 14), (-1, 24), (-2, 32))),
)

_M_SPECS = {
    4: (
        ("x121*y121 + x211*y121 + x211*y211",
         "-x121*y121 + x211*y211",
         "x211*y121 + x121*y211 + x211*y211",
         "x211*y121 - x121*y211"),
        ("-x221*y121 - x212*y211 - x221*y211",
         "-x212*y121 - x212*y211 - x221*y211",
         "-x212*y121 - x221*y121 - x221*y211",
         "-x212*y121 - x221*y121 - x212*y211"),
        ("x121*y212 - x211*y221",
         "-x121*y212 - x211*y212 - x211*y221",
         "-x121*y212 - x121*y221 - x211*y221",
         "x121*y212 + x211*y212 + x121*y221"),
        ("x212*y212 + x212*y221 + x221*y221",
         "x221*y212 + x212*y221 + x221*y221",
         "-x212*y212 + x221*y221",
         "-x221*y212 + x212*y221"),
    ),
    5: (
        ("-x121*y121 + x211*y121 - 2*x121*y211 - x211*y211",
         "-x121*y121 - 2*x211*y121 - 2*x121*y211 - x211*y211",
         "-2*x121*y121 - x211*y121 - x121*y211 + x211*y211",
         "-2*x121*y121 - x211*y121 - x121*y211 - 2*x211*y211"),
        ("-2*x212*y121 - x221*y121 - x212*y211 + x221*y211",
         "x212*y121 + 2*x221*y121 - x212*y211 + x221*y211",
         "-x212*y121 + x221*y121 - 2*x212*y211 - x221*y211",
         "-x212*y121 + x221*y121 + x212*y211 + 2*x221*y211"),
        ("-x121*y212 - 2*x211*y212 - 2*x121*y221 - x211*y221",
         "-x121*y212 + x211*y212 - 2*x121*y221 - x211*y221",
         "x121*y212 + 2*x211*y212 - x121*y221 + x211*y221",
         "x121*y212 - x211*y212 - x121*y221 - 2*x211*y221"),
        ("-x212*y212 - 2*x221*y212 + x212*y221 - x221*y221",
         "2*x212*y212 + x221*y212 + x212*y221 - x221*y221",
         "x212*y212 + 2*x221*y212 + 2*x212*y221 + x221*y221",
         "-2*x212*y212 - x221*y212 - x212*y221 - 2*x221*y221"),
    ),
    6: (
        ("x121*z121 + x211*z121 + x211*z211",
         "-x121*z121 + x211*z211",
         "x211*z121 + x121*z211 + x211*z211",
         "x211*z121 - x121*z211"),
        ("-x221*z121 - x212*z211 - x221*z211",
         "-x212*z121 - x212*z211 - x221*z211",
         "-x212*z121 - x221*z121 - x221*z211",
         "-x212*z121 - x221*z121 - x212*z211"),
        ("x121*z212 - x211*z221",
         "-x121*z212 - x211*z212 - x211*z221",
         "-x121*z212 - x121*z221 - x211*z221",
         "x121*z212 + x211*z212 + x121*z221"),
        ("x212*z212 + x212*z221 + x221*z221",
         "x221*z212 + x212*z221 + x221*z221",
         "-x212*z212 + x221*z221",
         "-x221*z212 + x212*z221"),
    ),
    7: (
        ("-x121*z121 + x211*z121 - 2*x121*z211 - x211*z211",
         "-x121*z121 - 2*x211*z121 - 2*x121*z211 - x211*z211",
         "-2*x121*z121 - x211*z121 - x121*z211 + x211*z211",
         "-2*x121*z121 - x211*z121 - x121*z211 - 2*x211*z211"),
        ("-2*x212*z121 - x221*z121 - x212*z211 + x221*z211",
         "x212*z121 + 2*x221*z121 - x212*z211 + x221*z211",
         "-x212*z121 + x221*z121 - 2*x212*z211 - x221*z211",
         "-x212*z121 + x221*z121 + x212*z211 + 2*x221*z211"),
        ("-x121*z212 - 2*x211*z212 - 2*x121*z221 - x211*z221",
         "-x121*z212 + x211*z212 - 2*x121*z221 - x211*z221",
         "x121*z212 + 2*x211*z212 - x121*z221 + x211*z221",
         "x121*z212 - x211*z212 - x121*z221 - 2*x211*z221"),
        ("-x212*z212 - 2*x221*z212 + x212*z221 - x221*z221",
         "2*x212*z212 + x221*z212 + x212*z221 - x221*z221",
         "x212*z212 + 2*x221*z212 + 2*x212*z221 + x221*z221",
         "-2*x212*z212 - x221*z212 - x212*z221 - 2*x221*z221"),
    ),
    8: (
        ("y121*z121 + 2*y211*z121 - y121*z211 + y211*z211",
         "2*y121*z121 + y211*z121 + y121*z211 + 2*y211*z211",
         "-y121*z121 + y211*z121 + y121*z211 + 2*y211*z211",
         "2*y121*z121 + y211*z121 + y121*z211 - y211*z211"),
        ("-y212*z121 - 2*y221*z121 - 2*y212*z211 - y221*z211",
         "y212*z121 - y221*z121 - y212*z211 - 2*y221*z211",
         "-2*y212*z121 - y221*z121 - y212*z211 - 2*y221*z211",
         "y212*z121 - y221*z121 + 2*y212*z211 + y221*z211"),
        ("2*y121*z212 + y211*z212 + y121*z221 - y211*z221",
         "y121*z212 - y211*z212 - y121*z221 - 2*y211*z221",
         "-2*y121*z212 - y211*z212 - y121*z221 - 2*y211*z221",
         "y121*z212 + 2*y211*z212 - y121*z221 + y211*z221"),
        ("y212*z212 - y221*z212 + 2*y212*z221 + y221*z221",
         "2*y212*z212 + y221*z212 + y212*z221 + 2*y221*z221",
         "-y212*z212 + y221*z212 + y212*z221 + 2*y221*z221",
         "-y212*z212 - 2*y221*z212 - 2*y212*z221 - y221*z221"),
    ),
    9: (
        ("y121*z121 + y211*z121 + y211*z211",
         "-y121*z121 + y211*z211",
         "y211*z121 + y121*z211 + y211*z211",
         "y211*z121 - y121*z211"),
        ("-y221*z121 - y212*z211 - y221*z211",
         "-y212*z121 - y212*z211 - y221*z211",
         "-y212*z121 - y221*z121 - y221*z211",
         "-y212*z121 - y221*z121 - y212*z211"),
        ("-y121*z212 + y211*z221",
         "y121*z212 + y211*z212 + y211*z221",
         "y121*z212 + y121*z221 + y211*z221",
         "-y121*z212 - y211*z212 - y121*z221"),
        ("y212*z212 + y212*z221 + y221*z221",
         "y221*z212 + y212*z221 + y221*z221",
         "-y212*z212 + y221*z221",
         "-y221*z212 + y212*z221"),
    ),
    10: (
        ("-2*x121*y121*z121 - x121*y211*z121 - x121*y121*z211 + x121*y211*z211",
         "x121*y121*z121 + 2*x121*y211*z121 - x121*y121*z211 + x121*y211*z211",
         "-x121*y121*z121 + x121*y211*z121 - 2*x121*y121*z211 - x121*y211*z211",
         "-x121*y121*z121 + x121*y211*z121 + x121*y121*z211 + 2*x121*y211*z211",
         "x121*y121*z121 + x211*y121*z121 + x121*y211*z121 + x211*y211*z121 + x121*y211*z211 + x211*y211*z211",
         "x121*y121*z121 + x211*y121*z121 + x121*y121*z211 + x211*y121*z211 + x121*y211*z211 + x211*y211*z211",
         "-x121*y121*z121 - x211*y121*z121 - x121*y211*z121 - x211*y211*z121 - x121*y121*z211 - x211*y121*z211",
         "-x121*y121*z121 - x211*y121*z121 + x121*y211*z211 + x211*y211*z211"),
        ("-2*x212*y121*z121 - x212*y211*z121 - x212*y121*z211 + x212*y211*z211",
         "x212*y121*z121 + 2*x212*y211*z121 - x212*y121*z211 + x212*y211*z211",
         "-x212*y121*z121 + x212*y211*z121 - 2*x212*y121*z211 - x212*y211*z211",
         "-x212*y121*z121 + x212*y211*z121 + x212*y121*z211 + 2*x212*y211*z211",
         "-x221*y121*z121 - x221*y211*z121 - x221*y211*z211",
         "-x221*y121*z121 - x221*y121*z211 - x221*y211*z211",
         "x221*y121*z121 + x221*y211*z121 + x221*y121*z211",
         "x221*y121*z121 - x221*y211*z211"),
        ("-x121*y212*z121 + x121*y221*z121 - 2*x121*y212*z211 - x121*y221*z211",
         "-x121*y212*z121 - 2*x121*y221*z121 - 2*x121*y212*z211 - x121*y221*z211",
         "-2*x121*y212*z121 - x121*y221*z121 - x121*y212*z211 + x121*y221*z211",
         "-2*x121*y212*z121 - x121*y221*z121 - x121*y212*z211 - 2*x121*y221*z211",
         "-x121*y221*z121 - x211*y221*z121 - x121*y212*z211 - x211*y212*z211 - x121*y221*z211 - x211*y221*z211",
         "x121*y212*z121 + x211*y212*z121 - x121*y221*z211 - x211*y221*z211",
         "x121*y221*z121 + x211*y221*z121 - x121*y212*z211 - x211*y212*z211",
         "-x121*y212*z121 - x211*y212*z121 - x121*y212*z211 - x211*y212*z211 - x121*y221*z211 - x211*y221*z211"),
        ("-x121*y121*z212 - 2*x121*y211*z212 + x121*y121*z221 - x121*y211*z221",
         "2*x121*y121*z212 + x121*y211*z212 + x121*y121*z221 - x121*y211*z221",
         "x121*y121*z212 + 2*x121*y211*z212 + 2*x121*y121*z221 + x121*y211*z221",
         "-2*x121*y121*z212 - x121*y211*z212 - x121*y121*z221 - 2*x121*y211*z221",
         "x121*y121*z212 + x211*y121*z212 - x121*y211*z221 - x211*y211*z221",
         "-x121*y211*z212 - x211*y211*z212 - x121*y121*z221 - x211*y121*z221 - x121*y211*z221 - x211*y211*z221",
         "-x121*y211*z212 - x211*y211*z212 + x121*y121*z221 + x211*y121*z221",
         "-x121*y121*z212 - x211*y121*z212 - x121*y211*z212 - x211*y211*z212 - x121*y211*z221 - x211*y211*z221"),
        ("x212*y212*z121 - x212*y221*z121 + 2*x212*y212*z211 + x212*y221*z211",
         "x212*y212*z121 + 2*x212*y221*z121 + 2*x212*y212*z211 + x212*y221*z211",
         "2*x212*y212*z121 + x212*y221*z121 + x212*y212*z211 - x212*y221*z211",
         "2*x212*y212*z121 + x212*y221*z121 + x212*y212*z211 + 2*x212*y221*z211",
         "-x221*y221*z121 - x221*y212*z211 - x221*y221*z211",
         "x221*y212*z121 - x221*y221*z211",
         "x221*y221*z121 - x221*y212*z211",
         "-x221*y212*z121 - x221*y212*z211 - x221*y221*z211"),
        ("x212*y121*z212 + 2*x212*y211*z212 - x212*y121*z221 + x212*y211*z221",
         "-2*x212*y121*z212 - x212*y211*z212 - x212*y121*z221 + x212*y211*z221",
         "-x212*y121*z212 - 2*x212*y211*z212 - 2*x212*y121*z221 - x212*y211*z221",
         "2*x212*y121*z212 + x212*y211*z212 + x212*y121*z221 + 2*x212*y211*z221",
         "x221*y121*z212 - x221*y211*z221",
         "-x221*y211*z212 - x221*y121*z221 - x221*y211*z221",
         "-x221*y211*z212 + x221*y121*z221",
         "-x221*y121*z212 - x221*y211*z212 - x221*y211*z221"),
        ("-x121*y212*z212 - 2*x121*y221*z212 - 2*x121*y212*z221 - x121*y221*z221",
         "-x121*y212*z212 + x121*y221*z212 - 2*x121*y212*z221 - x121*y221*z221",
         "x121*y212*z212 + 2*x121*y221*z212 - x121*y212*z221 + x121*y221*z221",
         "x121*y212*z212 - x121*y221*z212 - x121*y212*z221 - 2*x121*y221*z221",
         "-x121*y212*z212 - x211*y212*z212 - x121*y212*z221 - x211*y212*z221 - x121*y221*z221 - x211*y221*z221",
         "-x121*y212*z212 - x211*y212*z212 - x121*y221*z212 - x211*y221*z212 - x121*y221*z221 - x211*y221*z221",
         "-x121*y212*z212 - x211*y212*z212 - x121*y221*z212 - x211*y221*z212 - x121*y212*z221 - x211*y212*z221",
         "-x121*y221*z212 - x211*y221*z212 - x121*y212*z221 - x211*y212*z221 - x121*y221*z221 - x211*y221*z221"),
        ("-x212*y212*z212 - 2*x212*y221*z212 - 2*x212*y212*z221 - x212*y221*z221",
         "-x212*y212*z212 + x212*y221*z212 - 2*x212*y212*z221 - x212*y221*z221",
         "x212*y212*z212 + 2*x212*y221*z212 - x212*y212*z221 + x212*y221*z221",
         "x212*y212*z212 - x212*y221*z212 - x212*y212*z221 - 2*x212*y221*z221",
         "x221*y212*z212 + x221*y212*z221 + x221*y221*z221",
         "x221*y212*z212 + x221*y221*z212 + x221*y221*z221",
         "x221*y212*z212 + x221*y221*z212 + x221*y212*z221",
         "x221*y221*z212 + x221*y212*z221 + x221*y221*z221"),
    ),
}

_FACTOR_RE = re.compile(r"([xyz])(\d{3})")


def _parse_m_entry(spec: str) -> Poly9:
    total = Poly9.zero()
    for piece in spec.replace("-", "+-").split("+"):
        piece = piece.strip()
        if not piece:
            continue
        sign = 1
        if piece.startswith("-"):
            sign, piece = -1, piece[1:].strip()
        coeff = 1
        factors = []
        for f in piece.split("*"):
            f = f.strip()
            if f.isdigit():
                coeff = int(f)
                continue
            m = _FACTOR_RE.fullmatch(f)
            if not m:
                raise ValueError(f"bad factor {f!r}")
            factors.append((m.group(1), tuple(int(ch) for ch in m.group(2))))
        term = Poly9.constant(sign * coeff)
        for axis, klm in factors:
            term = term * harmonic_poly(axis, *klm)
        total = total + term
    return total


@lru_cache(maxsize=None)
def m_matrix(which: int):
    """The inverse-system matrix M4..M10 with Poly9 entries."""
    if which not in _M_SPECS:
        raise ValueError("which must be 4..10")
    return tuple(tuple(_parse_m_entry(s) for s in row) for row in _M_SPECS[which])


# Block layout: (chi row, variable sets, shape indices, denominator axes, scale)
# Phi_block = scale * M . g_block / product(Vandermonde(axes))
BLOCK_SYSTEMS = {
    4: (4, VSETS_XY, (1, 4, 6, 11), ("x", "y", "z"), Fraction(4, 243)),
    5: (5, VSETS_XY, (22, 29, 31, 35), ("x", "y"), Fraction(2, 729)),
    6: (6, VSETS_XZ, (2, 5, 8, 13), ("x", "y", "z"), Fraction(4, 243)),
    7: (7, VSETS_XZ, (20, 27, 30, 34), ("x", "z"), Fraction(2, 729)),
}

# chi8 sub-blocks: (M index, Gg row slice, shape indices, axes, scale)
CHI8_SYSTEMS = (
    (8, slice(0, 4), (3, 9, 10, 16), ("x", "y", "z"), Fraction(8, 243)),
    (9, slice(4, 8), (17, 24, 25, 33), ("y", "z"), Fraction(4, 243)),
    (10, slice(8, 16), (7, 12, 14, 15, 18, 19, 21, 28), ("x", "y", "z"), Fraction(8, 729)),
)


def chi8_system():
    """The 16 variable sets, Gg combination table and block-diagonal inverse."""
    return CHI8_VSETS, GG_ROWS, CHI8_SYSTEMS


@dataclass
class BosonicVector:
    """The 36 bosonic coefficients, symbolic (Poly9) or numeric (floats)."""

    phi: list
    mode: str  # "symbolic" | "numeric"


# ---------------------------------------------------------------------------
# Extraction contexts: one block-algebra code path, two value backends
# ---------------------------------------------------------------------------

class _SymbolicContext:
    mode = "symbolic"

    def __init__(self, psi: Poly9):
        self.permuted = [psi.permute(g) for g in GROUP36]
        self.shapes = canonical_shapes().shapes
        self._g_cache = {}

    def g(self, k: int, j: int):
        key = (k, j)
        if key not in self._g_cache:
            row = CHI_TABLE[k]
            self._g_cache[key] = linear_combination(
                (row[s], self.permuted[COMPOSE36[j][s]])
                for s in range(36)
                if row[s]
            )
        return self._g_cache[key]

    def shape(self, i: int):
        return self.shapes[i]

    def m_entry(self, which: int, r: int, c: int):
        return m_matrix(which)[r][c]

    def delta_product(self, axes):
        out = Poly9.constant(1)
        for a in axes:
            out = out * vandermonde(a)
        return out

    def div(self, numerator, denominator):
        return numerator.divide_exact(denominator)

    def zero(self):
        return Poly9.zero()


class _NumericContext:
    mode = "numeric"

    def __init__(self, psi_values, point):
        # psi_values[j] = psi evaluated at the j-th permuted point; may be
        # scalars or numpy arrays over a batch of points.
        self.values = psi_values
        self.point = point
        ss = canonical_shapes()
        self._shape_vals = [s.evaluate(point) for s in ss.shapes]
        self._g_cache = {}
        self._delta = {a: vandermonde(a).evaluate(point) for a in "xyz"}

    def g(self, k: int, j: int):
        key = (k, j)
        if key not in self._g_cache:
            row = CHI_TABLE[k]
            total = 0.0
            for s in range(36):
                if row[s]:
                    total = total + row[s] * self.values[COMPOSE36[j][s]]
            self._g_cache[key] = total
        return self._g_cache[key]

    def shape(self, i: int):
        return self._shape_vals[i]

    def m_entry(self, which: int, r: int, c: int):
        return m_matrix(which)[r][c].evaluate(self.point)

    def delta_product(self, axes):
        out = 1.0
        for a in axes:
            out = out * self._delta[a]
        return out

    def div(self, numerator, denominator):
        return numerator / denominator

    def zero(self):
        return 0.0


def _extract_blocks(ctx) -> list:
    """Shared block algebra: runs on Poly9 values or on floats."""
    phi = [ctx.zero()] * 36

    # one-dimensional blocks: a single exact division each
    for chi_row, idx in ((0, 32), (1, 0), (2, 23), (3, 26)):
        phi[idx] = ctx.div(ctx.g(chi_row, 0), ctx.shape(idx) * 36)

    # three four-dimensional systems per planar symmetry class
    for which, (chi_row, vsets, members, axes, scale) in BLOCK_SYSTEMS.items():
        gvec = [ctx.g(chi_row, j) for j in vsets]
        den = ctx.delta_product(axes)
        for r, i in enumerate(members):
            numer = ctx.zero()
            for t in range(4):
                numer = numer + ctx.m_entry(which, r, t) * gvec[t]
            phi[i] = ctx.div(numer, den) * scale

    # the sixteen-dimensional chi8 sector via the Gg elimination rows
    g8 = {j: ctx.g(8, j) for j in CHI8_VSETS}
    gg = []
    for divisor, combo in GG_ROWS:
        total = ctx.zero()
        for c, j in combo:
            total = total + g8[j] * c
        gg.append(total * Fraction(1, 3 * divisor))
    for which, rows, members, axes, scale in CHI8_SYSTEMS:
        sub = gg[rows]
        den = ctx.delta_product(axes)
        for r, i in enumerate(members):
            numer = ctx.zero()
            for t in range(len(sub)):
                numer = numer + ctx.m_entry(which, r, t) * sub[t]
            phi[i] = ctx.div(numer, den) * scale
    return phi


def extract_bosonic_symbolic(psi: Poly9) -> BosonicVector:
    """Exact bosonic coefficients of a diagonally alternating polynomial."""
    if not psi.is_alternating():
        raise NotAlternatingError("input is not diagonally alternating")
    phi = _extract_blocks(_SymbolicContext(psi))
    return BosonicVector(phi, "symbolic")


PERM_GATHER = np.array(
    [[0, 1, 2,
      3 + g.py[0], 3 + g.py[1], 3 + g.py[2],
      6 + g.pz[0], 6 + g.pz[1], 6 + g.pz[2]] for g in GROUP36],
    dtype=np.intp,
)


def permuted_points(points):
    """All 36 permuted copies of points with shape (..., 9) -> (36, ..., 9)."""
    pts = np.asarray(points, dtype=float)
    return pts[..., PERM_GATHER].swapaxes(0, -2) if pts.ndim == 1 else \
        np.stack([pts[..., PERM_GATHER[j]] for j in range(36)])


def coincidence_guard(points, eps: float = DEFAULT_EPS):
    """True where all same-axis pairwise gaps and Vandermonde magnitudes
    exceed eps."""
    pts = np.asarray(points, dtype=float)
    ok = np.ones(pts.shape[:-1], dtype=bool)
    for base in (0, 3, 6):
        a, b, c = pts[..., base], pts[..., base + 1], pts[..., base + 2]
        d1, d2, d3 = a - b, a - c, b - c
        ok &= (np.abs(d1) > eps) & (np.abs(d2) > eps) & (np.abs(d3) > eps)
        ok &= np.abs(d1 * d2 * d3) > eps
    return ok


def extract_bosonic_numeric(psi, point, eps: float = DEFAULT_EPS) -> BosonicVector:
    """Pointwise bosonic coefficients of a black-box evaluator.

    psi must accept an array of shape (..., 9).  Raises NearSingularError
    when the point violates the coincidence guard; the caller re-samples.
    """
    point = np.asarray(point, dtype=float)
    if point.shape != (9,):
        raise ValueError("point must be a 9-vector")
    if not bool(coincidence_guard(point, eps)):
        raise NearSingularError(f"coincident coordinates within eps={eps}")
    perm_pts = point[PERM_GATHER]
    values = np.asarray(psi(perm_pts), dtype=float)
    ctx = _NumericContext([values[j] for j in range(36)], list(point))
    phi = _extract_blocks(ctx)
    return BosonicVector([float(v) for v in phi], "numeric")


def extract_bosonic_numeric_batch(psi, points, eps: float = DEFAULT_EPS):
    """Vectorized numeric extraction over points of shape (n, 9).

    Returns an array (n, 36).  Points failing the guard raise; filter first.
    """
    pts = np.asarray(points, dtype=float)
    if not bool(np.all(coincidence_guard(pts, eps))):
        raise NearSingularError("batch contains near-coincident points")
    perm = np.stack([pts[:, PERM_GATHER[j]] for j in range(36)])  # (36, n, 9)
    values = np.asarray(psi(perm), dtype=float)  # (36, n)
    ctx = _NumericContext([values[j] for j in range(36)],
                          [pts[:, i] for i in range(9)])
    phi = _extract_blocks(ctx)
    return np.stack([np.broadcast_to(np.asarray(p, dtype=float), pts.shape[:1])
                     for p in phi], axis=1)


def transform_g(psi, k: int, j: int):
    """g_k(v_j): character transform of a Poly9 or of 36 permuted values."""
    if isinstance(psi, Poly9):
        return _SymbolicContext(psi).g(k, j)
    values = list(psi)
    if len(values) != 36:
        raise ValueError("numeric transform_g needs the 36 permuted values")
    ctx = _NumericContext(values, None)
    return ctx.g(k, j)


def reconstruct(phi) -> Poly9:
    """Assemble sum(phi_i * S_i) from a symbolic BosonicVector or list."""
    values = phi.phi if isinstance(phi, BosonicVector) else list(phi)
    ss = canonical_shapes()
    out = Poly9.zero()
    for p, s in zip(values, ss.shapes):
        if isinstance(p, Poly9):
            if not p.is_zero():
                out = out + p * s
        elif p:
            out = out + s * Fraction(p)
    return out


def reconstruct_numeric(phi, point) -> float:
    ss = canonical_shapes()
    vals = phi.phi if isinstance(phi, BosonicVector) else phi
    point = list(point)
    return float(sum(v * s.evaluate(point) for v, s in zip(vals, ss.shapes)))


def inversion_delta_identity() -> bool:
    """Column sums of eta-bar reproduce the Kronecker delta of the inversion."""
    return all(
        sum(ETA_BAR_TABLE[k][j] for k in range(11)) == (36 if j == 0 else 0)
        for j in range(36)
    )


# ---------------------------------------------------------------------------
# Forward systems and their verification against the inverse matrices
# ---------------------------------------------------------------------------

def forward_matrix(which: int):
    """Matrix of shape evaluations S_c(v_j) for the 4x4 block systems."""
    if which not in BLOCK_SYSTEMS:
        raise ValueError("which must be 4..7")
    _, vsets, members, _, _ = BLOCK_SYSTEMS[which]
    ss = canonical_shapes()
    return tuple(
        tuple(ss.shapes[c].permute(GROUP36[j]) for c in members) for j in vsets
    )


def chi8_forward_matrix():
    ss = canonical_shapes()
    return tuple(
        tuple(ss.shapes[c].permute(GROUP36[j]) for c in PHI16) for j in CHI8_VSETS
    )


def _eval_matrix(mat, point):
    return [[e.evaluate(point) if isinstance(e, Poly9) else e for e in row]
            for row in mat]


def _mat_mul_vals(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)]
            for i in range(n)]


def verify_block_inverses(points) -> dict:
    """Exact check at rational points that each inverse composes with its
    forward matrix to the identity (acceptance-style polynomial identity test).
    """
    report = {}
    for which, (chi_row, vsets, members, axes, scale) in BLOCK_SYSTEMS.items():
        fw = forward_matrix(which)
        for pt in points:
            dvals = {a: vandermonde(a).evaluate(pt) for a in "xyz"}
            den = Fraction(1)
            for a in axes:
                den *= dvals[a]
            m = _eval_matrix(m_matrix(which), pt)
            f = _eval_matrix(fw, pt)
            prod = _mat_mul_vals(m, f)
            want = den / (18 * scale)
            for i in range(4):
                for j in range(4):
                    expect = want if i == j else 0
                    if prod[i][j] != expect:
                        raise TableMismatch(
                            f"M{which} inverse check failed at entry {i},{j}"
                        )
        report[f"M{which}"] = "pass"

    # chi8: W U = I with W the scaled block-diagonal inverse times G
    fw16 = chi8_forward_matrix()
    vpos = {j: t for t, j in enumerate(CHI8_VSETS)}
    for pt in points:
        dvals = {a: vandermonde(a).evaluate(pt) for a in "xyz"}
        u = [[Fraction(9) * e for e in row] for row in _eval_matrix(fw16, pt)]
        g = [[Fraction(0)] * 16 for _ in range(16)]
        for r, (divisor, combo) in enumerate(GG_ROWS):
            for c, j in combo:
                g[r][vpos[j]] += Fraction(c, 3 * divisor)
        w = [[Fraction(0)] * 16 for _ in range(16)]
        for which, rows, members, axes, scale in CHI8_SYSTEMS:
            den = Fraction(1)
            for a in axes:
                den *= dvals[a]
            m = _eval_matrix(m_matrix(which), pt)
            base = rows.start
            for r in range(len(members)):
                for c in range(len(members)):
                    w[base + r][base + c] = scale * m[r][c] / den
        prod = _mat_mul_vals(_mat_mul_vals(w, g), u)
        for i in range(16):
            for j in range(16):
                if prod[i][j] != (1 if i == j else 0):
                    raise TableMismatch(f"chi8 inverse check failed at {i},{j}")
    report["chi8"] = "pass"
    return report


# ---------------------------------------------------------------------------
# The extraction matrix F and the eta-bar cross-derivation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def extraction_matrix():
    """F as (numerator Poly9, denominator Poly9) with Phi_i = sum_j F_ij Psi(v_j).

    Denominators are the per-block Vandermonde products; numerators absorb
    all rational prefactors.
    """
    ss = canonical_shapes()
    dvp = {a: vandermonde(a) for a in "xyz"}

    def dprod(axes):
        out = Poly9.constant(1)
        for a in axes:
            out = out * dvp[a]
        return out

    f_num = [[Poly9.zero() for _ in range(36)] for _ in range(36)]
    f_den = [Poly9.constant(1)] * 36

    for chi_row, idx in ((0, 32), (1, 0), (2, 23), (3, 26)):
        den = ss.shapes[idx] * 36
        f_den[idx] = den
        for j in range(36):
            f_num[idx][j] = Poly9.constant(CHI_TABLE[chi_row][j])

    for which, (chi_row, vsets, members, axes, scale) in BLOCK_SYSTEMS.items():
        den = dprod(axes)
        m = m_matrix(which)
        for r, i in enumerate(members):
            f_den[i] = den
            for j in range(36):
                total = Poly9.zero()
                for t, jt in enumerate(vsets):
                    c = CHI_TABLE[chi_row][COMPOSE36[INVERSE36[jt]][j]]
                    if c:
                        total = total + m[r][t] * c
                f_num[i][j] = total * scale

    # chi8 sector: W = scaled blockdiag(M8, M9, M10) . G over the 16 sets
    vpos = {j: t for t, j in enumerate(CHI8_VSETS)}
    gmat = [[Fraction(0)] * 16 for _ in range(16)]
    for r, (divisor, combo) in enumerate(GG_ROWS):
        for c, j in combo:
            gmat[r][vpos[j]] += Fraction(c, 3 * divisor)
    for which, rows, members, axes, scale in CHI8_SYSTEMS:
        den = dprod(axes)
        m = m_matrix(which)
        base = rows.start
        for r, i in enumerate(members):
            f_den[i] = den
            w_row = [Poly9.zero()] * 16
            for t in range(len(members)):
                mrt = m[r][t]
                for q in range(16):
                    g = gmat[base + t][q]
                    if g:
                        w_row[q] = w_row[q] + mrt * g
            for j in range(36):
                total = Poly9.zero()
                for q, jq in enumerate(CHI8_VSETS):
                    c = CHI_TABLE[8][COMPOSE36[INVERSE36[jq]][j]]
                    if c and not w_row[q].is_zero():
                        total = total + w_row[q] * c
                f_num[i][j] = total * scale
    return f_num, f_den


def eta_bar_from_extraction() -> tuple:
    """Re-derive eta-bar as 36 * sum_{i in I_k} S_i F_ij, exact simplification.

    Independent of the transcribed eta-bar table; both sources must agree.
    """
    ss = canonical_shapes()
    f_num, f_den = extraction_matrix()
    rows = []
    for members in BLOCKS:
        row = []
        den = f_den[members[0]]
        for j in range(36):
            numer = Poly9.zero()
            for i in members:
                if f_den[i] != den:
                    raise TableMismatch("inconsistent denominators within a block")
                numer = numer + ss.shapes[i] * f_num[i][j]
            q = (numer * 36).divide_exact(den)
            if q.degree() > 0:
                raise TableMismatch(f"eta-bar entry k,j={len(rows)},{j} not constant")
            row.append(int(q.coefficient((0,) * 9)) if not q.is_zero() else 0)
        rows.append(tuple(row))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Pedagogical decompositions: two fermions, and three particles on a line
# ---------------------------------------------------------------------------

def decompose_two_fermion(psi: Poly9, numeric_point=None):
    """Split a two-particle antisymmetric function into its four bosonic parts.

    Uses variables x1,x2,y1,y2,z1,z2 only.  Returns [Phi0, Phi1, Phi2, Phi3]
    with psi = Phi0*xyz + Phi1*x + Phi2*y + Phi3*z, x = x1-x2 and so on.
    """
    swap = (1, 0, 2)
    if psi.diag_permute(swap) != -psi:
        raise NotAlternatingError("two-fermion input must be antisymmetric")
    px = psi.axis_permute("x", swap)
    py = psi.axis_permute("y", swap)
    pz = psi.axis_permute("z", swap)
    diffs = {
        a: Poly9.variable(a, 1) - Poly9.variable(a, 2) for a in "xyz"
    }
    if numeric_point is not None:
        pt = list(numeric_point)
        vals = {a: float(diffs[a].evaluate(pt)) for a in "xyz"}
        xyz = vals["x"] * vals["y"] * vals["z"]
        if abs(xyz) < 1e-12:
            raise SingularPointError("xyz = 0 at the evaluation point")
        f = [float(q.evaluate(pt)) for q in (psi, px, py, pz)]
        phi0 = (f[0] - f[1] - f[2] - f[3]) / (4 * xyz)
        out = [phi0]
        for val, fa in zip((vals["x"], vals["y"], vals["z"]), f[1:]):
            out.append(((f[0] - fa) / 2 - xyz * phi0) / val)
        return out
    xyz = diffs["x"] * diffs["y"] * diffs["z"]
    phi0 = (psi - px - py - pz).divide_exact(xyz * 4)
    out = [phi0]
    for a, pa in (("x", px), ("y", py), ("z", pz)):
        out.append(
            ((psi - pa) * Fraction(1, 2) - xyz * phi0).divide_exact(diffs[a])
        )
    return out


# Variable orderings at which the mixed-symmetry 1D transform is evaluated:
# (123), (132), (213), (312) as index lists.
_G_E_ORDERS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (2, 0, 1))
_H1D = ((2, 1, 2), (2, 2, 1), (2, 1, 1), (1, 2, 1))


def _g_transform_1d(psi: Poly9, rep: str, order: tuple) -> Poly9:
    chars = S3_CHARS[rep]
    pieces = []
    for i, p in enumerate(S3_PERMS):
        net = tuple(order[p[k]] for k in range(3))
        pieces.append((chars[i], psi.axis_permute("x", net)))
    return linear_combination(pieces)


def one_dim_e_matrix():
    """The 4x4 system matrix of the mixed-symmetry 1D transform (exact)."""
    rows = []
    for order in _G_E_ORDERS:
        row = []
        for klm in _H1D:
            h = harmonic_poly("x", *klm)
            row.append(_g_transform_1d(h, "E", order) * Fraction(1, 3))
        rows.append(tuple(row))
    return tuple(rows)


def _det(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    total = Poly9.zero()
    for c in range(n):
        minor = [row[:c] + row[c + 1:] for row in mat[1:]]
        term = mat[0][c] * _det(minor)
        total = total + (term if c % 2 == 0 else -term)
    return total


def decompose_1d_three(psi: Poly9) -> list[Poly9]:
    """Six symmetric coefficients of a 1D three-particle function of any
    symmetry, exact: psi = sum Phi_i h_i over the degree-descending basis
    (222, 212, 221, 211, 121, 210).
    """
    g_s = _g_transform_1d(psi, "S", (0, 1, 2))
    g_a = _g_transform_1d(psi, "A", (0, 1, 2))
    phi5 = g_s * Fraction(-1, 6)
    phi0 = g_a.divide_exact(harmonic_poly("x", 2, 2, 2) * 6)

    mat = one_dim_e_matrix()
    gvec = [_g_transform_1d(psi, "E", order) * Fraction(1, 3)
            for order in _G_E_ORDERS]
    det = _det([list(r) for r in mat])
    mids = []
    for c in range(4):
        rep = [[gvec[r] if cc == c else mat[r][cc] for cc in range(4)]
               for r in range(4)]
        mids.append(_det(rep).divide_exact(det))
    return [phi0] + mids + [phi5]
