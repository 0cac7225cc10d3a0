"""Extraction pipeline: transforms, M systems, round trips, both backends."""

import random
from fractions import Fraction

import numpy as np
import pytest

from shapedecomp.decompose import (
    CHI8_VSETS,
    GG_ROWS,
    PHI16,
    VSETS_XY,
    VSETS_XZ,
    NearSingularError,
    SingularPointError,
    chi8_system,
    decompose_1d_three,
    decompose_two_fermion,
    eta_bar_from_extraction,
    extract_bosonic_numeric,
    extract_bosonic_numeric_batch,
    extract_bosonic_symbolic,
    forward_matrix,
    m_matrix,
    one_dim_e_matrix,
    reconstruct,
    reconstruct_numeric,
    transform_g,
    verify_block_inverses,
)
from shapedecomp.harmonics import harmonic_poly, vandermonde
from shapedecomp.ringcore import (
    GROUP36,
    NotAlternatingError,
    Poly9,
    Variable,
    linear_combination,
)
from shapedecomp.shapes import BLOCKS, canonical_shapes
from shapedecomp.symgroup import ETA_BAR_TABLE

H = harmonic_poly


def sym_e1(axis):
    return (
        Poly9.variable(axis, 1) + Poly9.variable(axis, 2) + Poly9.variable(axis, 3)
    )


def poly_psi_evaluator(psi):
    return lambda pts: np.asarray(
        psi.evaluate([np.asarray(pts, dtype=float)[..., i] for i in range(9)])
    )


def separated_point(rng, gap=0.15):
    while True:
        pt = rng.uniform(-1.0, 1.0, 9)
        ok = True
        for b in (0, 3, 6):
            for i in range(3):
                for j in range(i + 1, 3):
                    if abs(pt[b + i] - pt[b + j]) < gap:
                        ok = False
        if ok:
            return pt


def test_transform_g_paper_anchors():
    ss = canonical_shapes()
    assert transform_g(ss.shapes[0], 1, 0) == ss.shapes[0] * 36
    assert transform_g(ss.shapes[0], 0, 0).is_zero()
    g2 = transform_g(ss.shapes[23], 2, 0)
    assert g2 == H("z", 2, 2, 2) * 216


def test_m_matrix_entries():
    m4 = m_matrix(4)
    want_12 = -H("x", 1, 2, 1) * H("y", 1, 2, 1) + H("x", 2, 1, 1) * H("y", 2, 1, 1)
    assert m4[0][1] == want_12
    m9 = m_matrix(9)
    want_31 = -H("y", 1, 2, 1) * H("z", 2, 1, 2) + H("y", 2, 1, 1) * H("z", 2, 2, 1)
    assert m9[2][0] == want_31


def test_m4_is_z_independent():
    for row in m_matrix(4):
        for entry in row:
            for k in (1, 2, 3):
                assert entry.diff(Variable("z", k)).is_zero()


def test_block_variable_sets():
    assert VSETS_XY == (0, 6, 7, 24)
    assert VSETS_XZ == (0, 1, 2, 4)
    vsets, gg, systems = chi8_system()
    assert vsets == (0, 1, 2, 4, 6, 7, 9, 10, 12, 14, 18, 23, 24, 26, 28, 32)
    assert gg[0] == (2, ((1, 4), (-1, 10), (1, 12), (-1, 24)))
    assert PHI16[:4] == (3, 9, 10, 16)
    prefs = [(s[0], str(s[4])) for s in systems]
    assert prefs == [(8, "8/243"), (9, "4/243"), (10, "8/729")]


def test_forward_inverse_products():
    rng = random.Random(17)
    pts = []
    while len(pts) < 5:
        pt = [Fraction(rng.randrange(-8, 9), rng.randrange(1, 6)) for _ in range(9)]
        if all(vandermonde(a).evaluate(pt) != 0 for a in "xyz"):
            pts.append(pt)
    report = verify_block_inverses(pts)
    assert set(report.values()) == {"pass"}


def test_forward_matrix_entries_are_permuted_shapes():
    ss = canonical_shapes()
    fw = forward_matrix(4)
    assert fw[0][0] == ss.shapes[1]
    assert fw[1][2] == ss.shapes[6].permute(GROUP36[6])


def test_extract_single_generators():
    ss = canonical_shapes()
    for i in (0, 7, 17, 23, 28, 32, 35):
        bv = extract_bosonic_symbolic(ss.shapes[i])
        assert bv.phi[i] == Poly9.constant(1)
        assert all(bv.phi[k].is_zero() for k in range(36) if k != i)


def test_extract_symmetric_multiple():
    ss = canonical_shapes()
    p = sym_e1("x")
    bv = extract_bosonic_symbolic(p * ss.shapes[32])
    assert bv.phi[32] == p
    assert all(bv.phi[k].is_zero() for k in range(36) if k != 32)


def test_extract_rejects_non_alternating():
    with pytest.raises(NotAlternatingError):
        extract_bosonic_symbolic(Poly9.variable("x", 1))


def test_full_round_trip_exact():
    rng = random.Random(123)
    ss = canonical_shapes()
    coeffs = []
    for i in range(36):
        c = Poly9.constant(rng.randrange(1, 6))
        if rng.random() < 0.5:
            c = c * sym_e1(rng.choice("xyz"))
        coeffs.append(c)
    psi = linear_combination((1, c * s) for c, s in zip(coeffs, ss.shapes))
    bv = extract_bosonic_symbolic(psi)
    for i in range(36):
        assert bv.phi[i] == coeffs[i]
        assert bv.phi[i].is_bosonic()
    assert reconstruct(bv) == psi


def test_block_independence():
    ss = canonical_shapes()
    for k in (2, 5, 9):
        psi = linear_combination((1, ss.shapes[i]) for i in BLOCKS[k])
        bv = extract_bosonic_symbolic(psi)
        for i in range(36):
            if i in BLOCKS[k]:
                assert bv.phi[i] == Poly9.constant(1)
            else:
                assert bv.phi[i].is_zero()


def test_extracted_phi_bosonic_full_sweep():
    # 18 per-axis permutation checks on each extracted coefficient
    from shapedecomp.ringcore import S3_PERMS

    ss = canonical_shapes()
    psi = linear_combination(
        (1, ss.shapes[i] * sym_e1("z")) for i in (3, 12, 22)
    )
    bv = extract_bosonic_symbolic(psi)
    for phi in bv.phi:
        if phi.is_zero():
            continue
        for axis in "xyz":
            for p in S3_PERMS:
                assert phi.axis_permute(axis, p) == phi


def test_numeric_extraction_matches_symbolic():
    ss = canonical_shapes()
    psi = ss.shapes[7] * sym_e1("x") + ss.shapes[23] * 2 + ss.shapes[33] * sym_e1("y")
    sym = extract_bosonic_symbolic(psi)
    rng = np.random.default_rng(42)
    fn = poly_psi_evaluator(psi)
    for _ in range(5):
        pt = separated_point(rng)
        num = extract_bosonic_numeric(fn, pt)
        want = [float(p.evaluate(list(pt))) for p in sym.phi]
        scale = max(1.0, max(abs(w) for w in want))
        assert max(abs(a - b) for a, b in zip(num.phi, want)) < 1e-10 * scale


def test_numeric_guard_triggers():
    ss = canonical_shapes()
    fn = poly_psi_evaluator(ss.shapes[0])
    pt = np.array([0.1, 0.1 + 5e-7, 0.9, 0.0, 0.5, 1.0, -0.3, 0.2, 0.7])
    with pytest.raises(NearSingularError):
        extract_bosonic_numeric(fn, pt)


def test_numeric_batch_path():
    ss = canonical_shapes()
    psi = ss.shapes[23] * 3
    fn = poly_psi_evaluator(psi)
    rng = np.random.default_rng(3)
    pts = np.stack([separated_point(rng) for _ in range(8)])
    phi = extract_bosonic_numeric_batch(fn, pts)
    assert phi.shape == (8, 36)
    assert np.allclose(phi[:, 23], 3.0, atol=1e-9)
    others = np.delete(phi, 23, axis=1)
    assert np.max(np.abs(others)) < 1e-9


def test_reconstruct_numeric():
    ss = canonical_shapes()
    psi = ss.shapes[5] * 2 + ss.shapes[26]
    bv = extract_bosonic_symbolic(psi)
    rng = np.random.default_rng(11)
    pt = separated_point(rng)
    vals = [float(p.evaluate(list(pt))) for p in bv.phi]
    got = reconstruct_numeric(vals, pt)
    assert abs(got - float(psi.evaluate(list(pt)))) < 1e-10


def test_eta_bar_rederivation():
    assert eta_bar_from_extraction() == ETA_BAR_TABLE


def test_g4_block_transforms_divisible_by_delta_z():
    ss = canonical_shapes()
    psi = linear_combination((1, ss.shapes[i]) for i in BLOCKS[4])
    dz = vandermonde("z")
    for j in VSETS_XY:
        g = transform_g(psi, 4, j)
        assert g.divide_exact(dz) * dz == g


def test_two_fermion_examples():
    x1, x2 = Poly9.variable("x", 1), Poly9.variable("x", 2)
    y1, y2 = Poly9.variable("y", 1), Poly9.variable("y", 2)
    z1, z2 = Poly9.variable("z", 1), Poly9.variable("z", 2)
    phi = decompose_two_fermion(x1 - x2)
    assert phi[1] == Poly9.constant(1)
    assert phi[0].is_zero() and phi[2].is_zero() and phi[3].is_zero()
    phi = decompose_two_fermion((x1 - x2) * (y1 - y2) * (z1 - z2))
    assert phi[0] == Poly9.constant(1)
    phi = decompose_two_fermion((z1 + z2) * (y1 - y2))
    assert phi[2] == z1 + z2
    with pytest.raises(NotAlternatingError):
        decompose_two_fermion(x1 + x2)


def test_two_fermion_numeric_and_singular():
    x1, x2 = Poly9.variable("x", 1), Poly9.variable("x", 2)
    y1, y2 = Poly9.variable("y", 1), Poly9.variable("y", 2)
    psi = (x1 - x2) * (y1 + y2) * 2
    pt = [0.4, -0.3, 0.0, 0.6, 0.1, 0.0, 0.9, -0.2, 0.0]
    vals = decompose_two_fermion(psi, numeric_point=pt)
    assert abs(vals[1] - 2 * (0.6 + 0.1)) < 1e-12
    bad = [0.4, 0.4, 0.0] + pt[3:]
    with pytest.raises(SingularPointError):
        decompose_two_fermion(psi, numeric_point=bad)


def test_one_dim_matrix_matches_published_form():
    mat = one_dim_e_matrix()
    printed = (
        (H("x", 2, 1, 2), H("x", 2, 2, 1), H("x", 2, 1, 1), H("x", 1, 2, 1)),
        (-H("x", 2, 2, 1), -H("x", 2, 1, 2), -H("x", 2, 1, 1),
         H("x", 2, 1, 1) + H("x", 1, 2, 1)),
        (H("x", 2, 1, 2) + H("x", 2, 2, 1), -H("x", 2, 2, 1),
         -H("x", 1, 2, 1), -H("x", 2, 1, 1)),
        (-H("x", 2, 1, 2) - H("x", 2, 2, 1), H("x", 2, 1, 2),
         -H("x", 2, 1, 1) - H("x", 1, 2, 1), H("x", 2, 1, 1)),
    )
    for r in range(4):
        for c in range(4):
            assert mat[r][c] == printed[r][c]


def test_one_dim_determinant_is_discriminant():
    from shapedecomp.decompose import _det

    det = _det([list(r) for r in one_dim_e_matrix()])
    dx = vandermonde("x")
    ratio = det.divide_exact(dx * dx)
    assert ratio == Poly9.constant(Fraction(27, 4))


def test_decompose_1d_examples():
    phi = decompose_1d_three(H("x", 2, 2, 2))
    assert phi[0] == Poly9.constant(1)
    assert all(p.is_zero() for p in phi[1:])
    phi = decompose_1d_three(Poly9.constant(1))
    assert phi[5] == Poly9.constant(-1)
    phi = decompose_1d_three(H("x", 2, 1, 2) + H("x", 2, 2, 1) * 2)
    assert phi[1] == Poly9.constant(1)
    assert phi[2] == Poly9.constant(2)


def test_decompose_1d_any_symmetry_round_trip():
    rng = random.Random(31)
    basis = [H("x", *klm) for klm in
             ((2, 2, 2), (2, 1, 2), (2, 2, 1), (2, 1, 1), (1, 2, 1), (2, 1, 0))]
    sym = sym_e1("x")
    coeffs = [Poly9.constant(rng.randrange(-4, 5)) for _ in range(6)]
    coeffs[1] = coeffs[1] * sym
    psi = Poly9.zero()
    for c, b in zip(coeffs, basis):
        psi = psi + c * b
    got = decompose_1d_three(psi)
    for g, c in zip(got, coeffs):
        assert g == c
