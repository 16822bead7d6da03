import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixcomp import classical as cs
from mixcomp import info_measures as im
from mixcomp import protocol as pr
from mixcomp import types_engine as te
from mixcomp.ensemble import builtin_trine, builtin_two_coins
from mixcomp.errors import DomainError, InfeasibleCoverError, ShapeError, SolverError
from mixcomp.math_core import fidelity

seeds = st.integers(0, 2**32 - 1)


def test_bw_overlap_examples():
    assert cs.bw_overlap([0.2, 0.8], [0.2, 0.8]) == pytest.approx(1)
    assert cs.bw_overlap([1, 0], [0, 1]) == 0
    assert cs.bw_overlap([0.5, 0.5], [0.25, 0.75]) == pytest.approx((math.sqrt(1 / 8) + math.sqrt(3 / 8)) ** 2)
    assert cs.bw_overlap([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.9330, abs=1e-4)
    with pytest.raises(ShapeError):
        cs.bw_overlap([1.0], [0.5, 0.5])


@given(seeds, st.integers(2, 6))
def test_overlap_and_total_variation(seed, k):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    f = cs.bw_overlap(p, q)
    d = 0.5 * np.abs(p - q).sum()
    assert 1 - math.sqrt(f) <= d + 1e-12
    assert d <= math.sqrt(1 - f) + 1e-12
    assert f == pytest.approx(fidelity(np.diag(p), np.diag(q)), abs=1e-9)


def test_commuting_fidelity_open_gates():
    e = builtin_two_coins(0.2)
    cfg = pr.ProtocolConfig(n=5, list_size=10**9, delta=2.0, delta_prime=2.0)
    assert cs.commuting_fidelity_exact(e, [0, 1, 1, 0, 1], cfg) == pytest.approx(1, abs=1e-9)


def test_commuting_fidelity_rejects_nonorthogonal():
    with pytest.raises(DomainError):
        cs.commuting_fidelity_exact(builtin_trine(), [0, 1], pr.ProtocolConfig(n=2, rate=1.0))


@pytest.mark.parametrize("n", range(1, 9))
def test_commuting_fidelity_matches_matrix(n):
    e = builtin_two_coins(0.25)
    cfg = pr.ProtocolConfig(n=n, rate=0.6)
    for t in te.enumerate_types(n, 2):
        x = t.canonical_sequence()
        mat = fidelity(e.sequence_density(x), pr.bob_density_exact(e, x, cfg))
        assert cs.commuting_fidelity_exact(e, x, cfg) == pytest.approx(mat, abs=1e-9)


def test_commuting_fidelity_large_n_rate_ordering(oracles):
    e = builtin_two_coins(0.1)
    mi = im.mutual_information(e.P, e.W)
    hi = pr.expected_fidelity_exact(e, pr.ProtocolConfig(n=200, rate=mi + 0.2))
    lo = pr.expected_fidelity_exact(e, pr.ProtocolConfig(n=200, rate=mi - 0.2))
    assert hi.fidelity > lo.fidelity
    assert hi.fidelity == pytest.approx(oracles["two_coins_n200_fidelity"]["R=I+0.2"], rel=1e-9)
    assert lo.fidelity == pytest.approx(oracles["two_coins_n200_fidelity"]["R=I-0.2"], rel=1e-9)
    x = np.array([0, 1] * 100)
    assert cs.commuting_fidelity_exact(e, x, pr.ProtocolConfig(n=200, rate=mi + 0.2)) > 0.99


def test_joint_overlap_examples():
    w = np.array([[0, 1, 0], [0, 0, 1]])
    x = [0, 1, 1, 0]
    assert cs.joint_overlap(x, [1, 2, 2, 1], w) == pytest.approx(1)
    bsc = np.array([[1.0, 0.0], [0.5, 0.5]])
    # y = 1 under x = 0 is a forbidden transition: that mass drops out
    f = cs.joint_overlap([0, 0, 1, 1], [1, 0, 0, 1], bsc)
    assert f < 1
    assert f == pytest.approx(((math.sqrt(2 * 1 * 1) + 2 * math.sqrt(2 * 0.5 * 1)) / 4) ** 2)
    with pytest.raises(ShapeError):
        cs.joint_overlap([0, 1], [0], bsc)


def test_joint_overlap_for_rounded_expected_counts():
    w = np.array([[0.7, 0.3], [0.2, 0.8]])
    x = np.array([0] * 10 + [1] * 10)
    y = np.array([0] * 7 + [1] * 3 + [0] * 2 + [1] * 8)
    delta = 0.01
    assert te.is_conditionally_typical(x, y, w, delta)
    assert cs.joint_overlap(x, y, w) >= 1 - delta * 2 * 2 / 2


def test_certificate_examples():
    x = [0, 1, 1, 0]
    assert cs.conditional_typicality_from_overlap(x, [1, 0, 0, 1], [[0, 1], [1, 0]], 1.0) == 0
    w = np.array([[0.5, 0.5], [0.5, 0.5 - 1e-3 + 1e-3]])
    w = np.array([[0.6, 0.4], [0.3, 0.7]])
    x = np.array([0] * 10 + [1] * 10)
    y = np.array([0] * 6 + [1] * 4 + [0] * 3 + [1] * 7)
    assert cs.conditional_typicality_from_overlap(x, y, w, 0.98) == pytest.approx(0.4)


@given(seeds)
def test_certificate_always_passes(seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(3), size=2)
    x = rng.integers(0, 2, 12)
    y = np.array([rng.choice(3, p=w[a]) for a in x])
    delta = cs.conditional_typicality_from_overlap(x, y, w)
    assert te.is_conditionally_typical(x, y, w, delta)


def test_cover_identity_channel():
    # deterministic W: each typical x is covered only by its own image
    p = np.array([0.5, 0.5])
    code = cs.build_cover_greedy(p, np.eye(2), 6, 0.2, 0.2, 0.2)
    typical = cs.typical_sequences(p, 6, 0.2)
    assert sorted(code.members) == sorted(tuple(int(v) for v in x) for x in typical)
    assert code.rate == pytest.approx(math.log2(len(typical)) / 6)
    assert cs.verify_cover(code, p, np.eye(2))


def test_cover_two_coins_n8():
    e = builtin_two_coins(0.25)
    code = cs.build_cover_greedy(e.P, e.W, 8, 0.2, 0.2, 0.3)
    assert cs.verify_cover(code, e.P, e.W)
    lo, hi = cs.jsl_bound(code.n_rows, code.n_cols, code.v_min, code.a_max)
    assert lo <= code.size <= hi
    q = e.P @ e.W
    assert all(te.is_typical(m, q, code.delta_y) for m in code.members)


def test_cover_infeasible():
    with pytest.raises(InfeasibleCoverError):
        cs.build_cover_greedy([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]], 6, 0.2, 0.2, 0.01)


def test_cover_json_roundtrip():
    e = builtin_two_coins(0.25)
    code = cs.build_cover_greedy(e.P, e.W, 6, 0.2, 0.2, 0.3)
    back = cs.CoverCode.from_json(code.to_json())
    assert back.members == code.members and back.n == 6 and back.delta_xy == 0.3


def test_jsl_examples():
    assert cs.jsl_bound(3, 3, 1, 1) == (3, 3)
    assert cs.jsl_bound(5, 4, 4, 5)[0] == 1
    with pytest.raises(DomainError):
        cs.jsl_bound(3, 3, 0, 1)


def test_greedy_on_all_ones_matrix():
    # every column covers every row: greedy stops after one column
    code = cs.build_cover_greedy([0.5, 0.5], [[0.5, 0.5], [0.25, 0.75]], 4, 1.0, 1.0, 1.0)
    assert code.size == 1


def test_cover_rate_bound_limits():
    p, w = [0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]]
    lo, hi = cs.cover_rate_bounds(p, w, 10**9)
    assert lo == pytest.approx(1 - im.binary_entropy(0.1), abs=1e-12)
    assert hi == pytest.approx(lo, abs=1e-6)
    assert lo == pytest.approx(0.5310, abs=1e-4)


def test_cover_rate_within_sandwich_n10():
    e = builtin_two_coins(0.25)
    code = cs.build_cover_greedy(e.P, e.W, 10, 0.2, 0.2, 0.3)
    lo, hi = cs.cover_rate_bounds(e.P, e.W, 10, cs.CoverEpsilons.measured(code, e.P, e.W))
    assert lo - 0.1 <= code.rate <= hi + 0.1


def test_cover_fidelity_bound():
    e = builtin_two_coins(0.25)
    code = cs.build_cover_greedy(e.P, e.W, 8, 0.2, 0.2, 0.3)
    delta = code.delta
    bound = (1 - 2 / (4 * 8 * code.delta_x**2)) * (1 - delta * 2 * 2 / 2)
    assert cs.cover_expected_overlap(code, e.P, e.W) >= bound


def test_distortion_examples():
    spec = cs.bhattacharyya_distortion([[0.75, 0.25], [0.25, 0.75]])
    assert spec.matrix[0, 1] == pytest.approx(-math.log2(math.sqrt(0.75)), abs=1e-12)
    assert spec.matrix[0, 1] == pytest.approx(0.2075, abs=1e-4)
    assert spec.matrix[0, 0] == 0
    same = cs.bhattacharyya_distortion([[0.5, 0.5, 0.0], [0.5, 0.5 - 1e-3, 1e-3]])
    assert same.matrix[0, 1] < 1e-3
    with pytest.raises(DomainError):
        cs.bhattacharyya_distortion([[1, 0], [0, 1]])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=10), st.lists(st.integers(0, 1), min_size=10, max_size=10))
def test_sequence_distortion_is_scaled_hamming(x, x2):
    x2 = x2[: len(x)]
    spec = cs.bhattacharyya_distortion([[0.75, 0.25], [0.25, 0.75]])
    ham = sum(a != b for a, b in zip(x, x2))
    assert cs.sequence_distortion(x, x2, spec) == pytest.approx(ham / len(x) * spec.matrix[0, 1])


@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_fidelity_distortion_identity(n):
    w = np.array([[0.8, 0.2], [0.3, 0.7]])
    spec = cs.bhattacharyya_distortion(w)
    rng = np.random.default_rng(n)
    x, x2 = rng.integers(0, 2, n), rng.integers(0, 2, n)
    # direct sum over y of sqrt(W^n(y|x) W^n(y|x')), in the log domain
    logs = []
    for y in itertools.product(range(2), repeat=n):
        logs.append(0.5 * sum(math.log(w[a, b]) + math.log(w[c, b]) for a, c, b in zip(x, x2, y)))
    log_bc = np.logaddexp.reduce(logs)
    assert cs.sequence_fidelity(x, x2, spec) == pytest.approx(math.exp(2 * log_bc), rel=1e-10)


def test_rd_binary_closed_form():
    e = builtin_two_coins(0.25)
    spec = cs.bhattacharyya_distortion(e.W)
    d = spec.matrix[0, 1]
    grid = np.linspace(0, d / 2, 20)
    curve = cs.rate_distortion_fn(e.P, spec, grid)
    ref = [1 - im.binary_entropy(v / d) for v in grid]
    np.testing.assert_allclose(curve.R, ref, atol=1e-4)
    assert curve.R[0] == pytest.approx(1, abs=1e-6)
    full = cs.rate_distortion_fn(e.P, spec, [d / 2, 0.75 * d, d])
    np.testing.assert_allclose(full.R, 0, atol=1e-12)


def test_rd_skewed_prior():
    p = np.array([0.8, 0.2])
    spec = cs.bhattacharyya_distortion([[0.9, 0.1], [0.1, 0.9]])
    d = spec.matrix[0, 1]
    grid = np.linspace(0, 0.2 * d, 12)
    curve = cs.rate_distortion_fn(p, spec, grid)
    ref = [im.entropy(p) - im.binary_entropy(v / d) for v in grid]
    np.testing.assert_allclose(curve.R, ref, atol=1e-4)


@given(seeds)
def test_rd_monotone_convex(seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(3), size=3)
    p = rng.dirichlet(np.ones(3))
    spec = cs.bhattacharyya_distortion(w)
    grid = np.linspace(0, spec.d0, 9)
    curve = cs.rate_distortion_fn(p, spec, grid)
    assert np.all(np.diff(curve.R) <= 1e-12)
    assert np.all(curve.R[1:-1] <= 0.5 * (curve.R[:-2] + curve.R[2:]) + 1e-6)
    assert curve.R[0] == pytest.approx(im.entropy(p), abs=1e-6)
    assert np.all(curve.gap <= 1e-7)


def test_rd_grid_domain_and_csv():
    spec = cs.bhattacharyya_distortion([[0.75, 0.25], [0.25, 0.75]])
    with pytest.raises(DomainError):
        cs.rate_distortion_fn([0.5, 0.5], spec, [-0.1])
    text = cs.rate_distortion_fn([0.5, 0.5], spec, [0, 0.05]).to_csv()
    assert text.splitlines()[0].startswith("# schema:")
    assert text.splitlines()[1] == "D,R,iterations,gap"


def test_blahut_arimoto_iteration_cap():
    spec = cs.bhattacharyya_distortion([[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]])
    with pytest.raises(SolverError) as err:
        cs.blahut_arimoto([0.3, 0.3, 0.4], spec.matrix, 3.0, tol=1e-15, max_iter=3)
    assert err.value.diagnostics["iterations"] == 3


def test_random_code_exhaustive_codebook():
    spec = cs.bhattacharyya_distortion([[0.9, 0.1], [0.1, 0.9]])
    res = cs.random_code_experiment([0.5, 0.5], spec, 3.0, 3, 50, 0)
    assert res.mean_fidelity == pytest.approx(1)
    d, f = res
    assert d == 0


def test_random_code_modes_agree():
    spec = cs.bhattacharyya_distortion([[0.9, 0.1], [0.1, 0.9]])
    p = [0.8, 0.2]
    a = cs.random_code_experiment(p, spec, 0.5, 10, 2000, 4)
    b = cs.random_code_experiment(p, spec, 0.5, 10, 2000, 4, materialize_limit=0)
    assert a.mode == "materialized" and b.mode == "order-statistic"
    se = math.hypot(a.fidelities.std(), b.fidelities.std()) / math.sqrt(2000)
    assert abs(a.mean_fidelity - b.mean_fidelity) <= 4 * se


def test_random_code_rate_ordering_small():
    spec = cs.bhattacharyya_distortion([[0.9, 0.1], [0.1, 0.9]])
    p = [0.8, 0.2]
    hi = cs.random_code_experiment(p, spec, 0.9, 8, 200, 1)
    lo = cs.random_code_experiment(p, spec, 0.5, 8, 200, 1)
    assert hi.mean_fidelity > lo.mean_fidelity
    assert hi.mean_distortion < lo.mean_distortion
