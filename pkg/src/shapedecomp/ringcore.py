"""Exact sparse polynomial arithmetic in the nine coordinates of three particles.

A :class:`Poly9` is a sparse multivariate polynomial over exact rationals in
the fixed variable list x1, x2, x3, y1, y2, y3, z1, z2, z3 (slots 0..8).
Internally coefficients are stored as integer numerators over a single
positive denominator, which keeps the hot loops (merging, multiplying,
relabelling) in machine-int arithmetic while preserving exact rational
semantics.  Values are immutable by convention: no public method mutates an
existing polynomial, so instances are safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping

AXES = ("x", "y", "z")
VARIABLE_NAMES = tuple(f"{a}{i}" for a in AXES for i in (1, 2, 3))

Exps = tuple  # 9 non-negative ints

_ZERO_EXPS = (0,) * 9


class NotDivisibleError(ArithmeticError):
    """Exact polynomial division left a nonzero remainder.

    For the divisions mandated by the theory (Vandermonde factors) this
    signals a violated identity, not a user error.
    """


class NotAlternatingError(ValueError):
    """Input wave function is not diagonally alternating."""


@dataclass(frozen=True)
class Variable:
    """One of the nine coordinates, e.g. Variable('y', 2)."""

    axis: str
    index: int

    def __post_init__(self):
        if self.axis not in AXES or self.index not in (1, 2, 3):
            raise ValueError(f"no such variable: {self.axis}{self.index}")

    @property
    def slot(self) -> int:
        return 3 * AXES.index(self.axis) + self.index - 1


def _normalized(num: dict, den: int):
    if not num:
        return {}, 1
    g = den
    for c in num.values():
        g = gcd(g, c)
        if g == 1:
            break
    if den < 0:
        g = -g
    if g != 1:
        num = {e: c // g for e, c in num.items()}
        den //= g
    return num, den


class Poly9:
    """Sparse exact-rational polynomial in the nine fixed variables."""

    __slots__ = ("_num", "_den")

    def __init__(self, num: Mapping[Exps, int] | None = None, den: int = 1):
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        num = {e: c for e, c in (num or {}).items() if c != 0}
        self._num, self._den = _normalized(num, den)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "Poly9":
        return cls()

    @classmethod
    def constant(cls, value) -> "Poly9":
        f = Fraction(value)
        return cls({_ZERO_EXPS: f.numerator}, f.denominator)

    @classmethod
    def variable(cls, axis: str, index: int) -> "Poly9":
        e = [0] * 9
        e[Variable(axis, index).slot] = 1
        return cls({tuple(e): 1})

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[Exps, Fraction]]) -> "Poly9":
        num: dict = {}
        den = 1
        for e, c in terms:
            f = Fraction(c)
            if f == 0:
                continue
            d = f.denominator
            if d != den:
                step = d // gcd(den, d)
                if step != 1:
                    num = {k: v * step for k, v in num.items()}
                    den *= step
            scaled = f.numerator * (den // f.denominator)
            num[tuple(e)] = num.get(tuple(e), 0) + scaled
        return cls(num, den)

    # -- inspection --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self._num

    def coefficient(self, exps: Exps) -> Fraction:
        return Fraction(self._num.get(tuple(exps), 0), self._den)

    def terms(self) -> list[tuple[Exps, Fraction]]:
        """Terms in descending graded-lexicographic order (canonical)."""
        order = sorted(self._num, key=lambda e: (sum(e),) + e, reverse=True)
        return [(e, Fraction(self._num[e], self._den)) for e in order]

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._num), default=-1)

    def n_terms(self) -> int:
        return len(self._num)

    def leading_term(self) -> tuple[Exps, Fraction]:
        if not self._num:
            raise ValueError("zero polynomial has no leading term")
        e = max(self._num, key=lambda e: (sum(e),) + e)
        return e, Fraction(self._num[e], self._den)

    def __bool__(self) -> bool:
        return bool(self._num)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly9):
            return self._den == other._den and self._num == other._num
        if isinstance(other, (int, Fraction)):
            return self == Poly9.constant(other)
        return NotImplemented

    def __hash__(self):
        return hash((self._den, frozenset(self._num.items())))

    def __repr__(self) -> str:
        if not self._num:
            return "Poly9(0)"
        parts = []
        for e, c in self.terms()[:6]:
            mono = "*".join(
                f"{VARIABLE_NAMES[i]}^{p}" if p > 1 else VARIABLE_NAMES[i]
                for i, p in enumerate(e)
                if p
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        tail = " + ..." if len(self._num) > 6 else ""
        return "Poly9(" + " + ".join(parts) + tail + ")"

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> "Poly9":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self, other
        if a._den == b._den:
            num = dict(a._num)
            for e, c in b._num.items():
                num[e] = num.get(e, 0) + c
            return Poly9(num, a._den)
        la = b._den // gcd(a._den, b._den)
        lb = a._den * la // b._den
        num = {e: c * la for e, c in a._num.items()}
        for e, c in b._num.items():
            num[e] = num.get(e, 0) + c * lb
        return Poly9(num, a._den * la)

    __radd__ = __add__

    def __neg__(self) -> "Poly9":
        return Poly9({e: -c for e, c in self._num.items()}, self._den)

    def __sub__(self, other) -> "Poly9":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Poly9":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Poly9":
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            if f == 0:
                return Poly9()
            return Poly9(
                {e: c * f.numerator for e, c in self._num.items()},
                self._den * f.denominator,
            )
        if not isinstance(other, Poly9):
            return NotImplemented
        num: dict = {}
        get = num.get
        for ea, ca in self._num.items():
            for eb, cb in other._num.items():
                e = (
                    ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2],
                    ea[3] + eb[3], ea[4] + eb[4], ea[5] + eb[5],
                    ea[6] + eb[6], ea[7] + eb[7], ea[8] + eb[8],
                )
                num[e] = get(e, 0) + ca * cb
        return Poly9(num, self._den * other._den)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly9":
        if n < 0:
            raise ValueError("negative power")
        out = Poly9.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    # -- calculus and actions ----------------------------------------------

    def diff(self, var: Variable, order: int = 1) -> "Poly9":
        """Exact partial derivative of the given order (order 0 is identity)."""
        if order < 0:
            raise ValueError("negative derivative order")
        s = var.slot
        num = self._num
        for _ in range(order):
            nxt: dict = {}
            for e, c in num.items():
                p = e[s]
                if p:
                    nxt[e[:s] + (p - 1,) + e[s + 1:]] = c * p
            num = nxt
            if not num:
                break
        return Poly9(num, self._den)

    def permute(self, pair: "PermPair") -> "Poly9":
        """Relabel y-indices by pair.py and z-indices by pair.pz (x fixed).

        Matches evaluation at the permuted variable list: for any point,
        permute(pair).evaluate(pt) == evaluate(pair applied to pt).
        """
        py, pz = pair.py, pair.pz
        num = {}
        for e, c in self._num.items():
            t = [e[0], e[1], e[2], 0, 0, 0, 0, 0, 0]
            t[3 + py[0]] = e[3]
            t[3 + py[1]] = e[4]
            t[3 + py[2]] = e[5]
            t[6 + pz[0]] = e[6]
            t[6 + pz[1]] = e[7]
            t[6 + pz[2]] = e[8]
            num[tuple(t)] = c
        return Poly9(num, self._den)

    def axis_permute(self, axis: str, p: tuple) -> "Poly9":
        """Relabel the indices of a single axis triplet by the S3 element p."""
        base = 3 * AXES.index(axis)
        num = {}
        for e, c in self._num.items():
            t = list(e)
            t[base + p[0]] = e[base]
            t[base + p[1]] = e[base + 1]
            t[base + p[2]] = e[base + 2]
            num[tuple(t)] = c
        return Poly9(num, self._den)

    def diag_permute(self, p: tuple) -> "Poly9":
        """Relabel x-, y- and z-indices simultaneously by the S3 element p."""
        num = {}
        for e, c in self._num.items():
            t = [0] * 9
            t[p[0]] = e[0]
            t[p[1]] = e[1]
            t[p[2]] = e[2]
            t[3 + p[0]] = e[3]
            t[3 + p[1]] = e[4]
            t[3 + p[2]] = e[5]
            t[6 + p[0]] = e[6]
            t[6 + p[1]] = e[7]
            t[6 + p[2]] = e[8]
            num[tuple(t)] = c
        return Poly9(num, self._den)

    def relabel_axes(self, mapping: Mapping[str, str]) -> "Poly9":
        """Apply an axis relabelling such as {'x': 'y', 'y': 'x', 'z': 'z'}."""
        dest = [AXES.index(mapping.get(a, a)) for a in AXES]
        if sorted(dest) != [0, 1, 2]:
            raise ValueError("axis mapping must be a bijection")
        num = {}
        for e, c in self._num.items():
            t = [0] * 9
            for a in range(3):
                d = 3 * dest[a]
                t[d] = e[3 * a]
                t[d + 1] = e[3 * a + 1]
                t[d + 2] = e[3 * a + 2]
            num[tuple(t)] = c
        return Poly9(num, self._den)

    def evaluate(self, point):
        """Evaluate at a 9-point; exact for Fraction/int inputs, float for floats."""
        point = list(point)
        if len(point) != 9:
            raise ValueError("point must have 9 coordinates")
        exact = all(isinstance(v, (int, Fraction)) for v in point)
        total = Fraction(0) if exact else 0.0
        for e, c in self._num.items():
            term = Fraction(c, self._den) if exact else c / self._den
            for i, p in enumerate(e):
                if p:
                    term = term * point[i] ** p
            total += term
        return total

    def divide_exact(self, divisor: "Poly9") -> "Poly9":
        """Exact quotient self / divisor; raises NotDivisibleError on remainder.

        Multivariate long division with respect to the graded-lex term order.
        The divisors used by the theory are exact factors, so a nonzero
        remainder indicates a broken identity upstream.
        """
        if divisor.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        if self.is_zero():
            return Poly9()
        dlead_e, dlead_c = divisor.leading_term()
        rem = {e: Fraction(c, self._den) for e, c in self._num.items()}
        quo: dict = {}
        key = lambda e: (sum(e),) + e
        while rem:
            e = max(rem, key=key)
            c = rem[e]
            qe = tuple(a - b for a, b in zip(e, dlead_e))
            if any(p < 0 for p in qe):
                raise NotDivisibleError(
                    f"remainder has leading monomial {e} not divisible by {dlead_e}"
                )
            qc = c / dlead_c
            quo[qe] = quo.get(qe, 0) + qc
            for de, dc in divisor._num.items():
                ne = tuple(a + b for a, b in zip(qe, de))
                nc = rem.get(ne, Fraction(0)) - qc * Fraction(dc, divisor._den)
                if nc:
                    rem[ne] = nc
                else:
                    rem.pop(ne, None)
        return Poly9.from_terms(quo.items())

    # -- symmetry ----------------------------------------------------------

    def is_bosonic(self) -> bool:
        """Invariant under all permutations within each axis triplet separately.

        Adjacent transpositions per axis generate the full per-axis action,
        so checking the six generators suffices.
        """
        for pair in _BOSONIC_GENERATORS:
            if self.permute(pair) != self:
                return False
        for p in ((1, 0, 2), (0, 2, 1)):
            moved = {}
            for e, c in self._num.items():
                t = list(e)
                t[p[0]], t[p[1]], t[p[2]] = e[0], e[1], e[2]
                moved[tuple(t)] = c
            if Poly9(moved, self._den) != self:
                return False
        return True

    def is_alternating(self) -> bool:
        """Sign flip under every diagonal transposition of two particles."""
        neg = -self
        return all(
            self.diag_permute(p) == neg
            for p in ((1, 0, 2), (0, 2, 1), (2, 1, 0))
        )

    def symmetry_check(self, mode: str) -> bool:
        if mode == "bosonic":
            return self.is_bosonic()
        if mode == "alternating":
            return self.is_alternating()
        raise ValueError(f"unknown symmetry mode {mode!r}")

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "terms": [
                {"exp": list(e), "num": str(c.numerator), "den": str(c.denominator)}
                for e, c in self.terms()
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Poly9":
        return cls.from_terms(
            (tuple(t["exp"]), Fraction(int(t["num"]), int(t["den"])))
            for t in obj["terms"]
        )

    @classmethod
    def from_json(cls, text: str) -> "Poly9":
        return cls.from_json_obj(json.loads(text))


def _coerce(value):
    if isinstance(value, Poly9):
        return value
    if isinstance(value, (int, Fraction)):
        return Poly9.constant(value)
    return NotImplemented


def poly_arith(a: Poly9, b: Poly9, op: str) -> Poly9:
    """Dispatch add/sub/mul by name (convenience for scripted pipelines)."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def linear_combination(pairs: Iterable[tuple[int, Poly9]]) -> Poly9:
    """Sum of coeff*poly over pairs, merging in one pass (hot path)."""
    num: dict = {}
    den = 1
    for coeff, poly in pairs:
        if coeff == 0 or poly.is_zero():
            continue
        f = Fraction(coeff) if not isinstance(coeff, (int, Fraction)) else Fraction(coeff)
        pden = poly._den * f.denominator
        if pden != den:
            step = pden // gcd(den, pden)
            if step != 1:
                num = {e: c * step for e, c in num.items()}
                den *= step
        scale = f.numerator * (den // pden)
        get = num.get
        for e, c in poly._num.items():
            num[e] = get(e, 0) + c * scale
    return Poly9(num, den)


# ---------------------------------------------------------------------------
# The S3 x S3 variable-set group (Table A1 ordering)
# ---------------------------------------------------------------------------

# S3 elements as one-line maps p, meaning slot i of the permuted triplet holds
# the variable of original index p[i].  Order matches the character table:
# e, (23), (12), (13), (123), (132).
S3_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0), (2, 0, 1))
S3_NAMES = ("e", "(23)", "(12)", "(13)", "(123)", "(132)")
S3_SIGNS = (1, -1, -1, -1, 1, 1)


def s3_compose(a: tuple, b: tuple) -> tuple:
    """Composition a∘b: apply b first, then a."""
    return (a[b[0]], a[b[1]], a[b[2]])


def s3_inverse(a: tuple) -> tuple:
    inv = [0, 0, 0]
    for i, v in enumerate(a):
        inv[v] = i
    return tuple(inv)


@dataclass(frozen=True)
class PermPair:
    """Element of S3 x S3 acting on the y- and z-triplets (x fixed)."""

    py: tuple
    pz: tuple
    index: int = -1

    @property
    def sigma_y(self) -> tuple:
        return self.py

    @property
    def sigma_z(self) -> tuple:
        return self.pz

    def sign(self) -> int:
        return S3_SIGNS[S3_PERMS.index(self.py)] * S3_SIGNS[S3_PERMS.index(self.pz)]


def _build_group36():
    # Table A1 order: v0..v5 run over z with y fixed, then y transpositions
    # with z = e, then mixed transpositions, transposition*cycle, cycles.
    order = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5),
             (1, 0), (2, 0), (3, 0),
             (1, 1), (2, 1), (3, 1),
             (1, 2), (1, 3), (2, 2), (2, 3), (3, 2), (3, 3),
             (1, 4), (2, 4), (3, 4), (1, 5), (2, 5), (3, 5),
             (4, 0), (5, 0), (4, 1), (5, 1), (4, 2), (4, 3), (5, 2), (5, 3),
             (4, 4), (5, 4), (4, 5), (5, 5)]
    return tuple(
        PermPair(S3_PERMS[iy], S3_PERMS[iz], j) for j, (iy, iz) in enumerate(order)
    )


GROUP36 = _build_group36()

_PAIR_INDEX = {(g.py, g.pz): g.index for g in GROUP36}


def pair_index(py: tuple, pz: tuple) -> int:
    return _PAIR_INDEX[(py, pz)]


def pair_compose(a: PermPair, b: PermPair) -> PermPair:
    """a∘b, apply b first: permute(permute(f, b), a) == permute(f, a∘b)."""
    return GROUP36[pair_index(s3_compose(a.py, b.py), s3_compose(a.pz, b.pz))]


def pair_inverse(a: PermPair) -> PermPair:
    return GROUP36[pair_index(s3_inverse(a.py), s3_inverse(a.pz))]


COMPOSE36 = tuple(
    tuple(pair_compose(GROUP36[i], GROUP36[j]).index for j in range(36))
    for i in range(36)
)
INVERSE36 = tuple(pair_inverse(g).index for g in GROUP36)

_BOSONIC_GENERATORS = (
    PermPair(S3_PERMS[2], S3_PERMS[0]),  # y-(12)
    PermPair(S3_PERMS[1], S3_PERMS[0]),  # y-(23)
    PermPair(S3_PERMS[0], S3_PERMS[2]),  # z-(12)
    PermPair(S3_PERMS[0], S3_PERMS[1]),  # z-(23)
)


def permute_point(point, pair: PermPair):
    """Reorder a 9-point the way the pair reorders the variable list v0."""
    pt = list(point)
    out = list(pt[:3]) + [0] * 6
    for i in range(3):
        out[3 + i] = pt[3 + pair.py[i]]
        out[6 + i] = pt[6 + pair.pz[i]]
    return out


def diag_permute_point(point, p: tuple):
    pt = list(point)
    out = [0] * 9
    for i in range(3):
        out[i] = pt[p[i]]
        out[3 + i] = pt[3 + p[i]]
        out[6 + i] = pt[6 + p[i]]
    return out
