"""Harmonic polynomials: determinant values, syzygies, counting, rewriting."""

from fractions import Fraction

import pytest

from shapedecomp.harmonics import (
    BASIS_INDICES,
    SyzygyViolation,
    all_harmonic_indices,
    check_syzygies,
    degree_dimensions,
    exact_rank,
    harmonic_poly,
    independent_harmonics,
    rewrite_to_basis,
    solve_in_span,
    vandermonde,
)
from shapedecomp.ringcore import Poly9


def test_vandermonde_anchors():
    d = vandermonde("x")
    assert d.evaluate([0, 1, 2, 0, 0, 0, 0, 0, 0]) == -2
    assert d.evaluate([3, 3, 1, 0, 0, 0, 0, 0, 0]) == 0
    assert harmonic_poly("x", 2, 2, 2) * 2 == d


def test_harmonic_values():
    assert harmonic_poly("x", 2, 1, 0) == Poly9.constant(-1)
    x2, x3 = Poly9.variable("x", 2), Poly9.variable("x", 3)
    assert harmonic_poly("x", 2, 1, 1) == x2 - x3
    x1 = Poly9.variable("x", 1)
    assert harmonic_poly("x", 1, 2, 1) == x3 - x1


def test_index_range_validation():
    with pytest.raises(ValueError):
        harmonic_poly("x", 3, 0, 0)


def test_syzygies_vanish():
    for axis in "xyz":
        residuals = check_syzygies(axis)
        assert all(r.is_zero() for r in residuals.values())


def test_degree_dimensions():
    assert degree_dimensions(3) == (1, 2, 2, 1)
    assert sum(degree_dimensions(3)) == 6
    assert degree_dimensions(1) == (1,)
    assert degree_dimensions(2) == (1, 1)


def test_independent_basis():
    basis = independent_harmonics("x")
    assert len(basis) == 6
    assert [p.degree() for p in basis] == [3, 2, 2, 1, 1, 0]
    assert exact_rank(basis) == 6


def test_rewrite_all_nonzero_triples():
    # every nonzero harmonic is an integer combination of the 6-basis
    count = 0
    for klm in all_harmonic_indices():
        p = harmonic_poly("y", *klm)
        if p.is_zero():
            continue
        count += 1
        coeffs = rewrite_to_basis("y", *klm)
        rebuilt = Poly9.zero()
        for c, b in zip(coeffs, independent_harmonics("y")):
            rebuilt = rebuilt + b * c
        assert rebuilt == p
        assert all(c.denominator == 1 for c in coeffs)
    assert count == 16


def test_linear_syzygy_rewrites():
    # x112 = -x121 - x211 and x122 = -x212 - x221
    assert rewrite_to_basis("x", 1, 1, 2) == [
        Fraction(0), Fraction(0), Fraction(0), Fraction(-1), Fraction(-1),
        Fraction(0),
    ]
    assert rewrite_to_basis("x", 1, 2, 2) == [
        Fraction(0), Fraction(-1), Fraction(-1), Fraction(0), Fraction(0),
        Fraction(0),
    ]


def test_h222_symmetry():
    h = harmonic_poly("z", 2, 2, 2)
    # alternating under transpositions of its own axis indices
    for p in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
        assert h.axis_permute("z", p) == -h
    # invariant under permutations of the other axes (no dependence)
    assert h.axis_permute("x", (1, 0, 2)) == h
    assert h.axis_permute("y", (2, 0, 1)) == h


def test_solve_in_span_detects_outside():
    basis = independent_harmonics("x")
    outside = Poly9.variable("y", 1)
    sols = solve_in_span([outside], basis)
    assert sols[0] is None


def test_basis_indices_are_the_documented_six():
    assert BASIS_INDICES == (
        (2, 2, 2), (2, 1, 2), (2, 2, 1), (2, 1, 1), (1, 2, 1), (2, 1, 0),
    )
