import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixcomp import math_core as mc
from mixcomp.ensemble import builtin_trine
from mixcomp.errors import NotPSDError, ShapeError, SizeError, ValidationError

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 8)


def _pair(seed, dim):
    rng = np.random.default_rng(seed)
    rank_a, rank_b = rng.integers(1, dim + 1, size=2)
    return mc.random_density_matrix(dim, rng, int(rank_a)), mc.random_density_matrix(dim, rng, int(rank_b))


KET0 = mc.projector([1, 0])
KET1 = mc.projector([0, 1])
HALF_I = np.eye(2) / 2


def test_identity_tensor():
    np.testing.assert_array_equal(mc.tensor_product(np.eye(2), np.eye(2)).real, np.eye(4))


def test_basis_projector_tensor():
    out = mc.tensor_product(KET0, KET1)
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    np.testing.assert_array_equal(out.real, expected)


def test_trine_letter_tensor_matches_entry_loop():
    e = builtin_trine()
    r1, r2 = e.derived().rho_letters
    out = mc.tensor_product(r1, r2)
    brute = np.empty((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    brute[2 * i + k, 2 * j + l] = r1[i, j] * r2[k, l]
    np.testing.assert_allclose(out, brute, atol=1e-15)
    assert abs(np.trace(out) - 1) < 1e-12


def test_tensor_cap():
    with pytest.raises(SizeError):
        mc.tensor_product(np.eye(64), np.eye(128))
    with pytest.raises(SizeError):
        mc.tensor_power(np.eye(2), 13)


def test_eig_diagonal():
    lam, v = mc.hermitian_eig(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(lam, [3, 1])
    np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]])


def test_eig_pauli_x():
    lam, _ = mc.hermitian_eig([[0, 1], [1, 0]])
    np.testing.assert_allclose(lam, [1, -1], atol=1e-15)


@given(seeds)
def test_eig_reconstruction(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    h = a + a.conj().T
    lam, v = mc.hermitian_eig(h)
    assert np.all(np.diff(lam) <= 0)
    assert np.max(np.abs(v @ np.diag(lam) @ v.conj().T - h)) <= 1e-9 * 8
    np.testing.assert_allclose(v.conj().T @ v, np.eye(8), atol=1e-12)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        mc.hermitian_eig([[0, 1], [0, 0]])


def test_sqrt_examples():
    np.testing.assert_allclose(mc.psd_sqrt(HALF_I), np.eye(2) / math.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(mc.psd_sqrt(KET0), KET0, atol=1e-15)
    rho1 = builtin_trine().derived().rho_letters[0]
    s = mc.psd_sqrt(rho1)
    assert np.max(np.abs(s @ s - rho1)) <= 1e-10


def test_sqrt_clamps_small_negative_and_rejects_large():
    m = np.diag([1.0 + 5e-9, -5e-9])
    np.testing.assert_allclose(mc.psd_sqrt(m), np.diag([math.sqrt(1 + 5e-9), 0]), atol=1e-15)
    with pytest.raises(NotPSDError):
        mc.psd_sqrt(np.diag([1.1, -0.1]))


@given(seeds, dims)
def test_sqrt_squares_back(seed, dim):
    rho, _ = _pair(seed, dim)
    s = mc.psd_sqrt(rho)
    assert np.max(np.abs(s @ s - rho)) <= 1e-9


def test_fidelity_examples():
    psi = builtin_trine().psi
    assert mc.fidelity(KET0, KET0) == pytest.approx(1, abs=1e-12)
    assert mc.fidelity(mc.projector(psi[0]), mc.projector(psi[1])) == pytest.approx(0.25, abs=1e-12)
    assert mc.fidelity(KET0, HALF_I) == pytest.approx(0.5, abs=1e-12)


def test_fidelity_shape_mismatch():
    with pytest.raises(ShapeError):
        mc.fidelity(HALF_I, np.eye(4) / 4)
    with pytest.raises(ShapeError):
        mc.trace_distance(HALF_I, np.eye(3) / 3)


def test_trace_distance_examples():
    assert mc.trace_distance(HALF_I, HALF_I) == 0
    assert mc.trace_distance(KET0, KET1) == pytest.approx(1)
    assert mc.trace_distance(KET0, HALF_I) == pytest.approx(0.5)


@given(seeds, dims)
def test_fidelity_trace_distance_sandwich(seed, dim):
    s, w = _pair(seed, dim)
    f, d = mc.fidelity(s, w), mc.trace_distance(s, w)
    assert 0 <= f <= 1 and 0 <= d <= 1
    assert abs(f - mc.fidelity(w, s)) <= 1e-9
    assert 1 - math.sqrt(f) <= d + 1e-9
    assert d <= math.sqrt(1 - f) + 1e-9
    assert d <= math.sqrt(1 - f * f) + 1e-9


def test_linear_lower_bound_needs_root_fidelity():
    # with F the squared overlap, 1 - F <= D fails: here F = 1/4, D = 1/2
    p = np.diag([0.5, 0.5, 0.0])
    q = np.diag([0.0, 0.5, 0.5])
    f, d = mc.fidelity(p, q), mc.trace_distance(p, q)
    assert f == pytest.approx(0.25) and d == pytest.approx(0.5)
    assert 1 - f > d
    assert 1 - math.sqrt(f) <= d + 1e-12


@given(seeds, st.integers(2, 5))
def test_triangle_inequality(seed, dim):
    rng = np.random.default_rng(seed)
    a, b, c = (mc.random_density_matrix(dim, rng) for _ in range(3))
    assert mc.trace_distance(a, c) <= mc.trace_distance(a, b) + mc.trace_distance(b, c) + 1e-9


@given(seeds, st.integers(2, 6), st.integers(1, 4))
def test_strong_convexity(seed, dim, k):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    om = [mc.random_density_matrix(dim, rng) for _ in range(k)]
    sg = [mc.random_density_matrix(dim, rng) for _ in range(k)]
    lhs = mc.trace_distance(sum(pi * o for pi, o in zip(p, om)), sum(qi * s for qi, s in zip(q, sg)))
    rhs = 0.5 * np.abs(p - q).sum() + sum(pi * mc.trace_distance(o, s) for pi, o, s in zip(p, om, sg))
    assert lhs <= rhs + 1e-9
    joint = mc.trace_distance(sum(pi * o for pi, o in zip(p, om)), sum(pi * s for pi, s in zip(p, sg)))
    assert joint <= sum(pi * mc.trace_distance(o, s) for pi, o, s in zip(p, om, sg)) + 1e-9


@given(seeds, st.integers(2, 8))
def test_commuting_fidelity_is_overlap(seed, dim):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(dim)), rng.dirichlet(np.ones(dim))
    assert mc.fidelity(np.diag(p), np.diag(q)) == pytest.approx(np.sum(np.sqrt(p * q)) ** 2, abs=1e-9)


def test_entropy_examples():
    assert mc.von_neumann_entropy(HALF_I) == pytest.approx(1)
    assert mc.von_neumann_entropy(KET0) == 0
    lam = 0.5 - math.sqrt(3) / 6
    h = -lam * math.log2(lam) - (1 - lam) * math.log2(1 - lam)
    rho1 = builtin_trine().derived().rho_letters[0]
    assert mc.von_neumann_entropy(rho1) == pytest.approx(h, abs=1e-12)


@given(seeds, dims)
def test_entropy_range(seed, dim):
    rho, _ = _pair(seed, dim)
    assert -1e-12 <= mc.von_neumann_entropy(rho) <= math.log2(dim) + 1e-12


def test_density_validation():
    with pytest.raises(ValidationError):
        mc.density_matrix(np.eye(2))
    with pytest.raises(ShapeError):
        mc.density_matrix(np.ones((2, 3)) / 2)
    with pytest.raises(NotPSDError):
        mc.density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        mc.pure_state([1, 1])


def test_mixture_bound_examples():
    assert mc.mixture_approx_bound(0, 0, 1)
    assert mc.mixture_approx_bound(0.1, 0, 0.95)
    assert not mc.mixture_approx_bound(0.1, 0, 0.85)


@given(seeds)
def test_mixture_bound_on_random_qubits(seed):
    rng = np.random.default_rng(seed)
    s, e = mc.random_density_matrix(2, rng), mc.random_density_matrix(2, rng)
    f = mc.fidelity(s, 0.1 * e + 0.9 * s)
    assert mc.mixture_approx_bound(0.1, 0.0, f)
