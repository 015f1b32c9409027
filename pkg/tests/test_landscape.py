import csv
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polebench.errors import DomainError, IdentityPermutation, NonFiniteValue, NotPSD, UnstableCandidate, UnstablePole, ZeroResponse
from polebench.landscape import (
    Objective,
    coord_index,
    eval_objective,
    from_vector,
    hessian_json,
    midpoint_gap,
    midpoint_pole_norm,
    numerical_hessian,
    restriction_condition_bound,
    surface_grid,
    to_vector,
    two_pole_f,
    two_pole_hessian,
)
from polebench.signal_core import OrderedParams, ParamSet

TWO = ParamSet([(1, 0.5), (1, 0.25)])


def series_f(x, y, c, d, n=4000):
    k = np.arange(n)
    return float(np.sum((x**k + y**k - c**k - d**k) ** 2))


def series_hessian(c, d, n=4000):
    # d^2/dx dy of the series at the optimum: 2 sum n^2 a^(n-1) b^(n-1)
    k = np.arange(1, n)

    def g(a, b):
        return 2 * float(np.sum(k**2 * a ** (k - 1) * b ** (k - 1)))

    return np.array([[g(c, c), g(c, d)], [g(d, c), g(d, d)]])


def sum_sq_geometric(gains, poles):
    # sum_n |sum_k g_k p_k^n|^2 = sum_{j,k} g_j conj(g_k) / (1 - p_j conj(p_k))
    g, p = np.asarray(gains, complex), np.asarray(poles, complex)
    return float(np.real(np.sum(np.outer(g, g.conj()) / (1 - np.outer(p, p.conj())))))


# ---- objectives

def test_time_domain_zero_at_both_orderings():
    obj = Objective.time_domain(TWO)
    assert obj(OrderedParams([1, 1], [0.5, 0.25])) == pytest.approx(0, abs=1e-14)
    assert obj(OrderedParams([1, 1], [0.25, 0.5])) == pytest.approx(0, abs=1e-14)


def test_time_domain_midpoint_matches_closed_form():
    obj = Objective.time_domain(TWO)
    gap = midpoint_gap(obj, TWO.ordered(), [1, 0], 0.5)
    oracle = sum_sq_geometric([1, 1, -1, -1], [0.375, 0.375, 0.5, 0.25])
    assert gap == pytest.approx(oracle, rel=1e-12)
    assert gap == pytest.approx(0.00338971, rel=1e-5)


def test_time_domain_finite_data():
    x = np.array([1, 0.3, -0.2, 0.1])
    obj = Objective.time_domain(TWO, x=x)
    assert obj(OrderedParams([1, 1], [0.25, 0.5])) == pytest.approx(0, abs=1e-28)
    assert obj(OrderedParams([1, 1], [0.3, 0.5])) > 0


def test_frequency_objectives_agree_with_series():
    cand = OrderedParams([1.2, 0.8], [0.4, -0.3j])
    oracle = sum_sq_geometric([1.2, 0.8, -1, -1], [0.4, -0.3j, 0.5, 0.25])
    assert Objective.freq_mse(TWO)(cand) == pytest.approx(oracle, rel=1e-10)
    assert Objective.time_domain(TWO)(cand) == pytest.approx(oracle, rel=1e-10)
    w = Objective.weighted_freq(TWO, lambda om: np.ones_like(om))
    assert w(cand) == pytest.approx(oracle, rel=1e-10)


def test_equalization_ratio_zero_at_truth():
    obj = Objective.equalization_ratio(TWO)
    assert obj(OrderedParams([1, 1], [0.25, 0.5])) == pytest.approx(0, abs=1e-20)
    assert obj(OrderedParams([1, 1], [0.2, 0.5])) > 0


def test_equalization_ratio_needs_nonvanishing_response():
    # 1/(1 - 0.5) - 2 = 0 at omega = 0
    with pytest.raises(ZeroResponse):
        Objective.equalization_ratio(ParamSet([(1, 0.5), (-2, 0.0)]))


def test_frequency_objectives_reject_unstable():
    with pytest.raises(UnstablePole):
        Objective.freq_mse(ParamSet([(1, 1.1)]))
    with pytest.raises(UnstableCandidate):
        Objective.freq_mse(TWO)(OrderedParams([1, 1], [0.5, 1.0]))
    with pytest.raises(UnstableCandidate):
        Objective.freq_mse(TWO)(OrderedParams([1, 1], [0.5, 1 - 1e-10]))


def test_weighted_freq_rejects_nonpositive_weight():
    with pytest.raises(ValueError):
        Objective.weighted_freq(TWO, lambda om: np.cos(om))


def test_candidate_length_checked():
    with pytest.raises(ValueError):
        Objective.freq_mse(TWO)(OrderedParams([1], [0.5]))


@given(st.integers(0, 2**32 - 1))
def test_parseval_time_vs_frequency(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))

    def draw():
        p = 0.9 * np.sqrt(rng.uniform(0, 1, k)) * np.exp(1j * rng.uniform(-np.pi, np.pi, k))
        g = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        return g, p

    truth = ParamSet(list(zip(*draw())))
    cand = OrderedParams(*draw())
    td = Objective.time_domain(truth)(cand)
    fd = Objective.freq_mse(truth)(cand)
    assert fd == pytest.approx(td, rel=1e-6, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_zero_set_characterisation(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    poles = rng.uniform(-0.9, 0.9, k) + 1j * rng.uniform(-0.3, 0.3, k)
    gains = rng.uniform(0.5, 2, k)
    truth = ParamSet(list(zip(gains, poles)))
    op = truth.ordered()
    for obj in (Objective.time_domain(truth), Objective.freq_mse(truth)):
        for perm in itertools.permutations(range(k)):
            assert obj(op.permuted(perm)) <= 1e-12
        moved = OrderedParams(op.gains, op.poles + 0.01)
        assert obj(moved) > 1e-10


# ---- two-pole example

def test_two_pole_optima():
    assert two_pole_f(0.75, 0.8, 0.75, 0.8) == pytest.approx(0, abs=1e-12)
    assert two_pole_f(0.8, 0.75, 0.75, 0.8) == pytest.approx(0, abs=1e-12)


def test_two_pole_midpoint():
    val = two_pole_f(0.775, 0.775, 0.75, 0.8)
    assert val == pytest.approx(series_f(0.775, 0.775, 0.75, 0.8, 2000), rel=1e-9)
    assert val == pytest.approx(5.869203174e-4, rel=1e-8)


def test_two_pole_domain():
    with pytest.raises(DomainError):
        two_pole_f(1.0, 0.5, 0.75, 0.8)
    with pytest.raises(DomainError):
        Objective.two_pole(0.0, 0.5)


@given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95), st.floats(0.01, 0.95), st.floats(0.01, 0.95))
def test_closed_form_matches_series(x, y, c, d):
    val = two_pole_f(x, y, c, d)
    assert abs(val - series_f(x, y, c, d)) / (1 + val) <= 1e-9


def test_two_pole_hessian_matches_series_oracle():
    rep = two_pole_hessian(0.75, 0.8)
    np.testing.assert_allclose(rep.matrix, series_hessian(0.75, 0.8), rtol=1e-10)
    np.testing.assert_allclose(rep.matrix, [[37.3178, 50.0], [50.0, 70.3018]], rtol=1e-5)
    eig = np.linalg.eigvalsh(rep.matrix)
    assert rep.condition == pytest.approx(eig[1] / eig[0], rel=1e-10)
    assert rep.condition == pytest.approx((1 + rep.gamma) / (1 - rep.gamma), rel=1e-10)
    assert rep.condition == pytest.approx(91.7650981, rel=1e-8)


def test_two_pole_hessian_separated_poles():
    # well-separated (0.1, 0.9) is worse conditioned than (0.75, 0.8): the 0.9 pole dominates the trace
    rep = two_pole_hessian(0.1, 0.9)
    eig = np.linalg.eigvalsh(series_hessian(0.1, 0.9))
    assert rep.condition == pytest.approx(eig[1] / eig[0], rel=1e-8)
    assert rep.condition == pytest.approx(255.4750, rel=1e-6)


def test_two_pole_hessian_equal_poles():
    rep = two_pole_hessian(0.5, 0.5)
    assert rep.D == 0 and rep.condition_infinite and not rep.positive_definite
    doc = rep.to_json()
    assert doc["condition"] is None and doc["condition_infinite"] is True
    json.dumps(doc)


def test_condition_blow_up_sequence():
    ks = [two_pole_hessian(0.5, 0.5 + d).condition for d in (0.2, 0.1, 0.05, 0.01, 0.001)]
    assert all(a < b for a, b in zip(ks, ks[1:]))
    np.testing.assert_allclose(ks, [20.05, 63.96, 256.8, 6625.9, 668906], rtol=1e-3)


@given(st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_hessian_positive_definite_off_diagonal(c, d):
    if abs(c - d) < 0.01:
        return
    rep = two_pole_hessian(c, d)
    assert rep.positive_definite and 0 <= rep.gamma < 1 and rep.condition >= 1


# ---- numerical Hessian

def test_numerical_hessian_of_quadratic():
    A = np.array([[2.0, 0.5, 0], [0.5, 1.0, -0.3], [0, -0.3, 4.0]])
    rep = numerical_hessian(lambda v: v @ A @ v, np.array([0.3, -0.2, 0.1]), step=1e-3)
    np.testing.assert_allclose(rep.matrix, 2 * A, atol=1e-6)


def test_numerical_vs_analytic_two_pole():
    obj = Objective.two_pole(0.75, 0.8)
    num = numerical_hessian(obj, OrderedParams([1, 1], [0.75, 0.8]), step=1e-4, coords="real_poles")
    ana = two_pole_hessian(0.75, 0.8)
    np.testing.assert_allclose(num.matrix, ana.matrix, rtol=1e-4)


def test_numerical_hessian_psd_at_optimum():
    obj = Objective.time_domain(TWO)
    rep = numerical_hessian(obj, TWO.ordered(), step=1e-4)
    assert rep.eigen_min >= -1e-6 * rep.eigen_max


def test_numerical_hessian_non_finite():
    with pytest.raises(NonFiniteValue):
        numerical_hessian(lambda v: math.inf if v[0] > 0 else 0.0, np.zeros(1))


def test_restriction_examples():
    diag = np.diag([1.0, 10.0, 100.0])
    f = lambda v: 0.5 * v @ diag @ v
    full, sub = restriction_condition_bound(f, np.zeros(3), [0, 1], step=1e-2)
    assert full == pytest.approx(100, rel=1e-8) and sub == pytest.approx(10, rel=1e-8)
    full, sub = restriction_condition_bound(f, np.zeros(3), [0, 1, 2], step=1e-2)
    assert full == sub


def test_restriction_complex_poles_to_real_pole_coordinates():
    truth = ParamSet([(1 + 0.2j, 0.6 + 0.2j), (0.7, -0.3 - 0.1j)])
    obj = Objective.time_domain(truth)
    subset = [coord_index(0, "pole_re"), coord_index(1, "pole_re")]
    full, sub = restriction_condition_bound(obj, truth.ordered(), subset, step=1e-4)
    assert full >= sub - 1e-6 * full


def test_restriction_rejects_indefinite():
    with pytest.raises(NotPSD):
        restriction_condition_bound(lambda v: v[0] ** 2 - v[1] ** 2, np.zeros(2), [0])


# ---- permutation probes

def test_identity_permutation_rejected():
    with pytest.raises(IdentityPermutation):
        midpoint_gap(Objective.time_domain(TWO), TWO.ordered(), [0, 1])


def test_midpoint_gap_vanishes_at_endpoint():
    obj = Objective.time_domain(TWO)
    gaps = [midpoint_gap(obj, TWO.ordered(), [1, 0], lam) for lam in (0.5, 0.1, 0.01, 0.001, 0.0)]
    assert all(a > b for a, b in zip(gaps, gaps[1:-1]))
    assert gaps[-1] <= 1e-14


def test_pole_norm_identity():
    beta = np.array([0.5, 0.25])
    lam = 0.5
    rhs = np.sum(np.abs(beta) ** 2) - lam * (1 - lam) * np.sum(np.abs(beta - beta[[1, 0]]) ** 2)
    assert midpoint_pole_norm(beta, [1, 0], lam) == pytest.approx(rhs, abs=1e-15)
    assert midpoint_pole_norm(beta, [1, 0], lam) == pytest.approx(0.28125, abs=1e-15)


@pytest.mark.parametrize("coords", ["cartesian", "polar"])
def test_coordinate_round_trip(coords):
    op = OrderedParams([1 + 1j, -0.5], [0.3 - 0.4j, 0.7])
    back = from_vector(to_vector(op, coords), coords)
    np.testing.assert_allclose(back.gains, op.gains, atol=1e-15)
    np.testing.assert_allclose(back.poles, op.poles, atol=1e-15)


# ---- surfaces

def test_surface_grid_default_window(tmp_path):
    grid = surface_grid(Objective.two_pole(0.75, 0.8), step=0.01)
    assert grid.values.shape == (96, 96)
    assert sorted(grid.local_minima()) == [(0.75, 0.8), (0.8, 0.75)]
    assert sorted(grid.optima) == [(0.75, 0.8), (0.8, 0.75)]
    np.testing.assert_allclose(grid.values, grid.values.T, rtol=1e-12, atol=1e-13)
    grid.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    rows = list(csv.reader(rows))
    assert rows[0] == ["x", "y", "f"] and len(rows) == 96 * 96 + 1


def test_surface_grid_without_optima():
    grid = surface_grid(Objective.two_pole(0.75, 0.8), xrange=(0, 0.5), yrange=(0, 0.5), step=0.05)
    assert grid.argmin()[2] > 0 and grid.optima == []


def test_surface_grid_records_missing_cells():
    grid = surface_grid(Objective.two_pole(0.75, 0.8), xrange=(0.9, 1.0), yrange=(0.5, 0.5), step=0.05)
    assert np.isnan(grid.values[-1, 0]) and np.isfinite(grid.values[0, 0])


def test_hessian_json(tmp_path):
    hessian_json(two_pole_hessian(0.75, 0.8), tmp_path / "h.json")
    doc = json.loads((tmp_path / "h.json").read_text())
    assert doc["condition_infinite"] is False and doc["condition"] > 1
