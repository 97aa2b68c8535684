"""Tests for symmetric third-order tensor ops and the robust power method."""

import itertools

import numpy as np
import pytest

from ldsmix.errors import DecompositionError, ZeroUpdateError
from ldsmix.tensor3 import (SymTensor3, TensorFactor, apply_matrix3, contract,
                            op_norm_estimate, outer3, power_update, robust_tpm,
                            symmetrize)


def contract_oracle(values, a, b, c):
    """Literal triple loop, kept independent of the einsum implementation."""
    d = values.shape[0]
    total = 0.0
    for i in range(d):
        for j in range(d):
            for k in range(d):
                total += values[i, j, k] * a[i] * b[j] * c[k]
    return total


def apply_oracle(values, V):
    d, K = V.shape
    out = np.zeros((K, K, K))
    for a in range(K):
        for b in range(K):
            for c in range(K):
                out[a, b, c] = contract_oracle(values, V[:, a], V[:, b], V[:, c])
    return out


def random_sym(rng, d):
    return SymTensor3(symmetrize(rng.normal(size=(d, d, d))))


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def orthonormal(rng, d, K):
    return np.linalg.qr(rng.normal(size=(d, d)))[0][:, :K]


def test_outer3_basis_vector():
    t = outer3([1.0, 0.0])
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 1.0
    assert np.array_equal(t.values, expected)


def test_outer3_zero_vector():
    assert np.array_equal(outer3([0.0, 0.0, 0.0]).values, np.zeros((3, 3, 3)))


def test_outer3_hand_entry():
    # v = (1,2): entry (0,1,1) = 1*2*2
    t = outer3([1.0, 2.0])
    assert t.values[0, 1, 1] == 4.0
    assert t.values[1, 1, 1] == 8.0
    assert t.values[0, 0, 1] == 2.0


def test_outer3_matches_triple_loop():
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = rng.normal(size=4)
        t = outer3(v)
        i, j, k = rng.integers(0, 4, size=3)
        assert t.values[i, j, k] == pytest.approx(v[i] * v[j] * v[k], abs=1e-14)


def test_symtensor3_rejects_bad_shape():
    with pytest.raises(ValueError):
        SymTensor3(np.zeros((2, 3, 2)))
    with pytest.raises(ValueError):
        SymTensor3(np.zeros((2, 2)))


def test_symtensor3_rejects_asymmetric():
    values = np.zeros((2, 2, 2))
    values[0, 1, 0] = 1.0
    with pytest.raises(ValueError):
        SymTensor3(values)


def test_symtensor3_dim_and_copy():
    t = random_sym(np.random.default_rng(0), 3)
    assert t.dim == 3
    c = t.copy()
    c.values[0, 0, 0] += 1.0
    assert t.values[0, 0, 0] != c.values[0, 0, 0]


def test_symmetrize_fixes_random_tensor():
    rng = np.random.default_rng(5)
    raw = rng.normal(size=(4, 4, 4))
    sym = symmetrize(raw)
    # brute-force average over the 6 permutations
    expected = np.zeros_like(raw)
    for perm in itertools.permutations(range(3)):
        expected += np.transpose(raw, perm)
    expected /= 6.0
    assert np.allclose(sym, expected, atol=1e-14)


def test_contract_rank1_identity():
    rng = np.random.default_rng(7)
    for _ in range(10):
        v = rng.normal(size=5)
        a = rng.normal(size=5)
        assert contract(outer3(v), a, a, a) == pytest.approx(np.dot(v, a) ** 3, rel=1e-10)


def test_contract_basis_extraction():
    t = random_sym(np.random.default_rng(3), 3)
    e1 = np.array([1.0, 0.0, 0.0])
    assert contract(t, e1, e1, e1) == t.values[0, 0, 0]


def test_contract_matches_triple_loop():
    rng = np.random.default_rng(19)
    for _ in range(10):
        t = random_sym(rng, 3)
        a, b, c = rng.normal(size=(3, 3))
        assert contract(t, a, b, c) == pytest.approx(
            contract_oracle(t.values, a, b, c), abs=1e-12)


def test_contract_dimension_mismatch():
    t = random_sym(np.random.default_rng(1), 3)
    with pytest.raises(ValueError):
        contract(t, np.ones(4), np.ones(3), np.ones(3))


def test_contract_multilinearity():
    rng = np.random.default_rng(23)
    for _ in range(25):
        t = random_sym(rng, 4)
        a, b, c, d = rng.normal(size=(4, 4))
        alpha = rng.normal()
        lhs = contract(t, alpha * a + b, c, d)
        rhs = alpha * contract(t, a, c, d) + contract(t, b, c, d)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_apply_matrix3_identity():
    t = random_sym(np.random.default_rng(2), 4)
    out = apply_matrix3(t, np.eye(4))
    assert np.allclose(out.values, t.values, atol=1e-12)


def test_apply_matrix3_rank1():
    rng = np.random.default_rng(13)
    v = rng.normal(size=4)
    V = rng.normal(size=(4, 2))
    out = apply_matrix3(outer3(v), V)
    assert np.allclose(out.values, outer3(V.T @ v).values, atol=1e-12)


def test_apply_matrix3_matches_triple_loop():
    rng = np.random.default_rng(29)
    for _ in range(5):
        t = random_sym(rng, 4)
        V = rng.normal(size=(4, 2))
        out = apply_matrix3(t, V)
        assert np.allclose(out.values, apply_oracle(t.values, V), atol=1e-12)


def test_apply_matrix3_dimension_mismatch():
    t = random_sym(np.random.default_rng(1), 3)
    with pytest.raises(ValueError):
        apply_matrix3(t, np.ones((4, 2)))


def test_symmetry_closure():
    # outer3, apply_matrix3 and deflation land inside the symmetry check
    rng = np.random.default_rng(31)
    for _ in range(10):
        t = random_sym(rng, 5)
        V = rng.normal(size=(5, 3))
        SymTensor3(apply_matrix3(t, V).values)
        v = unit(rng.normal(size=5))
        SymTensor3(t.values - 0.3 * outer3(v).values)


def test_power_update_rank1_fixed_point():
    t = outer3([1.0, 0.0])
    for theta in (0.1, 0.7, 1.2):
        u = np.array([np.cos(theta), np.sin(theta)])
        out = power_update(t, u)
        assert np.allclose(out, [1.0, 0.0], atol=1e-12)


def test_power_update_orthogonal_start_raises():
    t = outer3([1.0, 0.0])
    with pytest.raises(ZeroUpdateError):
        power_update(t, np.array([0.0, 1.0]))


def test_power_update_two_component_oracle():
    # M(I,u,u) = (0.6 u1^2, 0.4 u2^2) for the orthogonal basis tensor
    t = SymTensor3(0.6 * outer3([1.0, 0.0]).values + 0.4 * outer3([0.0, 1.0]).values)
    u = unit([0.8, 0.6])
    raw = np.array([0.6 * 0.64, 0.4 * 0.36])
    expected = raw / np.linalg.norm(raw)
    assert np.allclose(power_update(t, u), expected, atol=1e-12)


def test_power_update_converges_fast_on_rank1():
    rng = np.random.default_rng(37)
    for _ in range(20):
        d = int(rng.integers(2, 6))
        v = unit(rng.normal(size=d))
        lam = float(rng.uniform(0.2, 3.0))
        t = SymTensor3(lam * outer3(v).values)
        u = unit(rng.normal(size=d))
        if abs(np.dot(u, v)) < 1e-3:
            continue
        for _ in range(3):
            u = power_update(t, u)
        assert min(np.linalg.norm(u - v), np.linalg.norm(u + v)) < 1e-10


def test_op_norm_rank1():
    assert op_norm_estimate(outer3([1.0, 0.0, 0.0])) == pytest.approx(1.0, abs=1e-9)


def test_op_norm_zero_tensor():
    assert op_norm_estimate(SymTensor3(np.zeros((3, 3, 3)))) == 0.0


def test_op_norm_orthogonal_pair():
    t = SymTensor3(0.6 * outer3([1.0, 0.0]).values + 0.4 * outer3([0.0, 1.0]).values)
    assert op_norm_estimate(t, n_restarts=50, n_iters=100, seed=2) == pytest.approx(0.6, abs=1e-6)


def test_op_norm_matches_dense_grid_on_circle():
    # d=2 lets us check the sup over the sphere by brute force
    rng = np.random.default_rng(41)
    t = random_sym(rng, 2)
    grid = np.linspace(0.0, 2.0 * np.pi, 20001)
    vals = [abs(contract(t, u, u, u)) for u in np.column_stack([np.cos(grid), np.sin(grid)])]
    dense = max(vals)
    est = op_norm_estimate(t, n_restarts=100, n_iters=200, seed=3)
    assert est <= dense + 1e-6
    assert est == pytest.approx(dense, abs=1e-4)


def test_norm_sandwich_flag_only():
    # the estimate is a lower bound, so violations are flagged, not failed
    rng = np.random.default_rng(43)
    flagged = 0
    for _ in range(20):
        t = random_sym(rng, 4)
        bound = 5.0 * op_norm_estimate(t, n_restarts=50, n_iters=100, seed=7)
        for _ in range(10):
            a, b, c = (unit(rng.normal(size=4)) for _ in range(3))
            if abs(contract(t, a, b, c)) > bound:
                flagged += 1
    if flagged:
        print(f"norm sandwich flagged {flagged} violations")


def test_robust_tpm_single_component():
    facs = robust_tpm(outer3([1.0, 0.0]), 1, seed=0)
    assert len(facs) == 1
    lam, v = facs[0].weight, facs[0].vector
    assert lam == pytest.approx(1.0, abs=1e-9)
    assert min(np.linalg.norm(v - [1, 0]), np.linalg.norm(v + [1, 0])) < 1e-9


def test_robust_tpm_two_components():
    t = SymTensor3(0.6 * outer3([1.0, 0.0]).values + 0.4 * outer3([0.0, 1.0]).values)
    facs = robust_tpm(t, 2, seed=0)
    # canonicalized: weights {0.6, 0.4}, vectors {e1, e2}
    lams = sorted(abs(f.weight) for f in facs)
    assert lams == pytest.approx([0.4, 0.6], abs=1e-6)
    for f in facs:
        axis = np.argmax(np.abs(f.vector))
        assert abs(abs(f.vector[axis]) - 1.0) < 1e-6


def match_factors(facs, V, p):
    """Brute-force permutation/sign match; returns worst deviation."""
    K = len(p)
    best = np.inf
    for perm in itertools.permutations(range(K)):
        worst = 0.0
        for k, j in enumerate(perm):
            lam, v = facs[j].weight, facs[j].vector
            if lam < 0:
                lam, v = -lam, -v
            dv = min(np.linalg.norm(v - V[:, k]), np.linalg.norm(v + V[:, k]))
            worst = max(worst, abs(lam - p[k]), dv)
        best = min(best, worst)
    return best


def test_robust_tpm_three_random_orthonormal():
    rng = np.random.default_rng(47)
    V = orthonormal(rng, 3, 3)
    p = np.array([0.5, 0.3, 0.2])
    t = SymTensor3(sum(p[k] * outer3(V[:, k]).values for k in range(3)))
    facs = robust_tpm(t, 3, seed=1)
    assert match_factors(facs, V, p) < 1e-6


def test_robust_tpm_exact_recovery_property():
    rng = np.random.default_rng(53)
    for trial in range(15):
        K = int(rng.integers(1, 6))
        d = int(rng.integers(K, K + 3))
        V = orthonormal(rng, d, K)
        p = rng.uniform(0.05, 1.0, size=K)
        t = SymTensor3(symmetrize(sum(p[k] * outer3(V[:, k]).values for k in range(K))))
        facs = robust_tpm(t, K, n_restarts=max(20, 20 * K), n_iters=100, seed=trial)
        assert match_factors(facs, V, p) < 1e-6, f"trial {trial} K={K} d={d}"


def test_robust_tpm_negative_weight_reconstruction():
    # odd tensors absorb a sign flip into the vector; reconstruction is exact
    t = SymTensor3(-0.6 * outer3([1.0, 0.0]).values + 0.4 * outer3([0.0, 1.0]).values)
    facs = robust_tpm(t, 2, seed=5)
    recon = sum(f.weight * outer3(f.vector).values for f in facs)
    assert np.allclose(recon, t.values, atol=1e-8)


def test_robust_tpm_deterministic():
    rng = np.random.default_rng(59)
    V = orthonormal(rng, 4, 3)
    p = np.array([0.5, 0.4, 0.1])
    t = SymTensor3(symmetrize(sum(p[k] * outer3(V[:, k]).values for k in range(3))))
    a = robust_tpm(t, 3, seed=9)
    b = robust_tpm(t, 3, seed=9)
    for fa, fb in zip(a, b):
        assert fa.weight == fb.weight
        assert np.array_equal(fa.vector, fb.vector)


def test_robust_tpm_zero_tensor_raises():
    with pytest.raises(DecompositionError) as exc:
        robust_tpm(SymTensor3(np.zeros((2, 2, 2))), 2, seed=0)
    assert exc.value.round_index == 0


def test_robust_tpm_factor_type():
    facs = robust_tpm(outer3([0.0, 1.0]), 1, seed=0)
    assert isinstance(facs[0], TensorFactor)
    assert facs[0].vector.shape == (2,)
