"""ECG engine: closed-form integrals, secular solve, optimizer, weights."""

import json

import numpy as np
import pytest

from shapedecomp.ecg import (
    ECGBasis,
    ECGPrimitive,
    IllConditionedOverlapError,
    NotNegativeDefiniteError,
    all_permuted_overlaps,
    block_amplitudes,
    ecg_value,
    energy_components,
    expand_terms,
    gaussian_moment_integral,
    matrix_elements,
    mc_matrix_element,
    narayana_sizes,
    normalize,
    optimize_basis,
    permuted_overlap,
    solve_secular,
    split_matrix_elements,
    validate_size_schedule,
    xi_orthonormality_residual,
)
from shapedecomp.ringcore import COMPOSE36, INVERSE36


def test_moment_integral_identity_cases():
    q = -np.eye(9)
    assert np.isclose(gaussian_moment_integral(q, np.zeros(9)), np.pi ** 4.5)
    b = np.zeros(9)
    b[0] = 1.0
    assert np.isclose(
        gaussian_moment_integral(q, b), np.pi ** 4.5 * np.exp(0.25)
    )


def test_moment_integral_rejects_indefinite():
    q = np.eye(9)
    with pytest.raises(NotNegativeDefiniteError):
        gaussian_moment_integral(q, np.zeros(9))


@pytest.mark.slow
def test_moment_integral_against_monte_carlo():
    rng = np.random.default_rng(8)
    m = rng.normal(size=(9, 9))
    q = -(m @ m.T + 0.5 * np.eye(9))
    b = rng.normal(size=9) * 0.5
    exact = gaussian_moment_integral(q, b)
    # sample from an inflated matched Gaussian
    cov = -0.5 * np.linalg.inv(q) * 1.5
    mean = -0.5 * np.linalg.solve(q, b)
    chol = np.linalg.cholesky(cov)
    n = 400_000
    u = mean + rng.standard_normal((n, 9)) @ chol.T
    logq = -0.5 * np.einsum(
        "ni,ij,nj->n", u - mean, np.linalg.inv(cov), u - mean
    ) - 0.5 * np.log(np.linalg.det(2 * np.pi * cov))
    f = np.exp(np.einsum("ni,ij,nj->n", u, q, u) + u @ b)
    w = f / np.exp(logq)
    est = w.mean()
    se = w.std(ddof=1) / np.sqrt(n)
    assert abs(est - exact) < max(3 * se, 0.005 * exact)


def test_primitive_validity():
    good = ECGPrimitive([-1, -1, -1], [0, 0, 0], [0, 0, 1])
    assert good.is_valid()
    # a positive beta this large overwhelms the diagonal
    bad = ECGPrimitive([-0.1, -0.1, -0.1], [1.0, 0, 0], [0, 0, 1])
    assert not bad.is_valid()
    basis = ECGBasis([bad])
    with pytest.raises(NotNegativeDefiniteError):
        matrix_elements(basis)


def test_one_by_one_secular(small_basis):
    basis = ECGBasis([small_basis.primitives[0]])
    s, h = matrix_elements(basis)
    assert s[0, 0] > 0
    e, c = solve_secular(h, s)
    assert np.isclose(e, h[0, 0] / s[0, 0])
    assert np.isclose(c[0] ** 2 * s[0, 0], 1.0)


def test_antisymmetry_of_value(small_basis):
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, (10, 9))
    swapped = pts.copy()
    swapped[:, [0, 1, 3, 4, 6, 7]] = swapped[:, [1, 0, 4, 3, 7, 6]]
    v1 = ecg_value(small_basis, pts)
    v2 = ecg_value(small_basis, swapped)
    assert np.allclose(v1, -v2, rtol=1e-12, atol=1e-15)


def test_sinh_zero_gives_zero():
    prim = ECGPrimitive([-1, -1, -1], [0, 0, 0], [0, 0, 0])
    basis = ECGBasis([prim], coefficients=np.array([1.0]))
    pts = np.random.default_rng(0).uniform(-1, 1, (5, 9))
    assert np.allclose(ecg_value(basis, pts), 0.0)


def test_value_matches_direct_six_term_expansion(small_basis):
    # independent oracle: brute-force signed sum over the diagonal
    # permutations of one primitive at random points
    from itertools import permutations

    prim = small_basis.primitives[1]
    basis = ECGBasis([prim], coefficients=np.array([1.0]))
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, (10, 9))
    a = prim.matrix()
    direct = np.zeros(10)
    sign_of = {(0, 1, 2): 1, (0, 2, 1): -1, (1, 0, 2): -1,
               (2, 1, 0): -1, (1, 2, 0): 1, (2, 0, 1): 1}
    for perm in permutations(range(3)):
        p = np.zeros((3, 3))
        for i in range(3):
            p[i, perm[i]] = 1.0
        ap = p.T @ a @ p
        gp = p.T @ prim.gamma
        for k in range(10):
            x, y, z = pts[k, :3], pts[k, 3:6], pts[k, 6:]
            quad = x @ ap @ x + y @ ap @ y + z @ ap @ z
            direct[k] += sign_of[perm] * np.exp(quad) * np.sinh(gp @ z)
    assert np.allclose(ecg_value(basis, pts), direct, rtol=1e-12)


def test_variational_monotonicity(small_basis):
    prims = small_basis.primitives
    energies = []
    for n in (1, 2, 3):
        s, h = matrix_elements(ECGBasis(prims[:n]))
        e, _ = solve_secular(h, s)
        energies.append(e)
    assert energies[1] <= energies[0] + 1e-12
    assert energies[2] <= energies[1] + 1e-12


def test_ill_conditioned_duplicates(small_basis):
    p = small_basis.primitives[0]
    dup = ECGPrimitive(p.alpha.copy(), p.beta.copy(), p.gamma.copy())
    s, h = matrix_elements(ECGBasis([p, dup]))
    with pytest.raises(IllConditionedOverlapError):
        solve_secular(h, s)


def test_permuted_overlap_identity(small_basis):
    assert np.isclose(permuted_overlap(small_basis, 0), 1.0, atol=1e-10)


def test_permuted_overlap_group_consistency(small_basis):
    o = all_permuted_overlaps(small_basis)
    for j in range(36):
        assert np.isclose(o[j], o[INVERSE36[j]], rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_permuted_overlap_against_monte_carlo(two_primitive_basis):
    for j in (1, 7, 32):
        ana = permuted_overlap(two_primitive_basis, j)
        mc, se = mc_matrix_element(two_primitive_basis, "O", 0, 0, j=j,
                                   n_samples=150_000, seed=21 + j)
        assert abs(mc - ana) < 0.005 * abs(ana) + 3 * se


def test_block_weights_properties(small_basis):
    bw = block_amplitudes(small_basis)
    assert abs(bw.w.sum() - 1.0) < 1e-8
    assert np.all(bw.w >= 0)
    assert abs(bw.w[0] - bw.w[3]) < 1e-6
    assert abs(bw.w[6] - bw.w[8]) < 1e-6
    assert abs(bw.w[7] - bw.w[9]) < 1e-6
    assert np.allclose(bw.a, np.sqrt(bw.w))
    res = xi_orthonormality_residual(bw.overlaps)
    assert res < 1e-8


def test_weights_invariant_under_rescaling(small_basis):
    bw1 = block_amplitudes(small_basis)
    scaled = ECGBasis([p for p in small_basis.primitives])
    s, h = matrix_elements(scaled)
    _, c = solve_secular(h, s)
    scaled.coefficients = 2.0 * c
    norm = float(scaled.coefficients @ s @ scaled.coefficients)
    scaled.coefficients = scaled.coefficients / np.sqrt(norm)
    scaled.energy = small_basis.energy
    bw2 = block_amplitudes(scaled)
    assert np.max(np.abs(bw1.w - bw2.w)) < 1e-10


def test_narayana_sequence():
    assert narayana_sizes(8) == [1, 2, 3, 4, 6, 9, 13, 19]
    validate_size_schedule([1, 2, 3, 4, 6])
    with pytest.raises(ValueError):
        validate_size_schedule([1, 2, 3, 5])


def test_stage_history_monotone(small_basis):
    hist = small_basis.stage_history
    assert [s for s, _ in hist] == [1, 2, 3]
    energies = [e for _, e in hist]
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))


def test_virial_theorem_after_optimization(small_basis):
    _, tk, vv = energy_components(small_basis)
    assert abs(vv / tk + 2.0) < 1e-3


def test_basis_json_round_trip(small_basis):
    blob = small_basis.to_json()
    back = ECGBasis.from_dict(json.loads(blob))
    assert back.size == small_basis.size
    assert np.allclose(back.coefficients, small_basis.coefficients)
    assert back.energy == small_basis.energy
    s1, h1 = matrix_elements(small_basis)
    s2, h2 = matrix_elements(back)
    assert np.allclose(s1, s2) and np.allclose(h1, h2)


def test_kinetic_positive_potential_negative(small_basis):
    _, tk, vv = energy_components(small_basis)
    assert tk > 0 and vv < 0


def test_split_matrices_symmetric(small_basis):
    s, t, v = split_matrix_elements(small_basis)
    for m in (s, t, v):
        assert np.allclose(m, m.T, rtol=1e-12)


@pytest.mark.slow
def test_hamiltonian_entries_against_monte_carlo(two_primitive_basis):
    s, h = matrix_elements(two_primitive_basis)
    for kind, ana_mat in (("S", s), ("H", h)):
        for (m, n) in ((0, 0), (0, 1), (1, 1)):
            mc, se = mc_matrix_element(two_primitive_basis, kind, m, n,
                                       n_samples=150_000, seed=5)
            ana = ana_mat[m, n]
            assert abs(mc - ana) < 0.005 * abs(ana) + 3 * se


def test_xi_residual_uses_composition(small_basis):
    # the Gram identity needs the composed overlaps; a wrong table would
    # leave residuals of order one
    o = all_permuted_overlaps(small_basis)
    comp = np.array([[COMPOSE36[INVERSE36[j]][jp] for jp in range(36)]
                     for j in range(36)])
    assert comp.shape == (36, 36)
    assert xi_orthonormality_residual(o) < 1e-8
