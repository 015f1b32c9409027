import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polebench.errors import EmptyAfterSimplification, UnstablePole
from polebench.signal_core import (
    OrderedParams,
    ParamSet,
    convolve,
    dtft,
    impulse_response,
    params_equal,
    sequence_from_json,
    sequence_to_json,
    simplify,
)

TWO = ParamSet([(1, 0.5), (1, 0.25)])


def exact_response(pairs, n):
    # rational oracle for real-valued examples
    return [float(sum(Fraction(b) * Fraction(p) ** k for b, p in pairs)) for k in range(n)]


def test_single_geometric_term():
    np.testing.assert_array_equal(impulse_response(ParamSet([(1, 0.5)]), 3), [1, 0.5, 0.25])


def test_two_term_response_matches_rational_oracle():
    expected = exact_response([("1", "0.5"), ("1", "0.25")], 4)
    assert expected == [2, 0.75, 0.3125, 0.140625]
    np.testing.assert_allclose(impulse_response(TWO, 4), expected, rtol=0, atol=1e-15)


def test_cancelling_gains_rejected():
    with pytest.raises(EmptyAfterSimplification):
        ParamSet([(1, 0.3), (-1, 0.3)])


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        simplify([])


def test_simplify_merges_and_drops():
    s = simplify([(1, 0.5), (2, 0.5)])
    assert s.size == 1 and s.pairs() == [(3, 0.5)]
    s = simplify([(1, 0.5), (0, 0.9)])
    assert s.pairs() == [(1, 0.5)]
    with pytest.raises(EmptyAfterSimplification):
        simplify([(1, 0.5), (-1, 0.5)])


def test_exact_equality_does_not_merge_nearby_poles():
    assert simplify([(1, 0.5), (1, 0.5 + 1e-15)]).size == 2
    assert simplify([(1, 0.5), (1, 0.5 + 1e-15)], tol=1e-12).size == 1


def test_paramset_is_immutable():
    with pytest.raises(AttributeError):
        TWO.poles = np.zeros(2)
    with pytest.raises(ValueError):
        TWO.poles[0] = 0.1


def test_convolve_examples():
    np.testing.assert_array_equal(convolve([1, 0.5], [1, 0]), [1, 0.5])
    np.testing.assert_array_equal(convolve([1, 1], [1, 1]), [1, 2])
    h = impulse_response(TWO, 4)
    np.testing.assert_array_equal(convolve(h, [1, 0, 0, 0]), [2, 0.75, 0.3125, 0.140625])


def test_convolve_truncates_to_shorter_input():
    assert len(convolve([1, 2, 3], [1, 1])) == 2


def test_dtft_examples():
    assert dtft(ParamSet([(1, 0)]), 1.234) == pytest.approx(1)
    assert dtft(ParamSet([(1, 0.5)]), 0.0) == pytest.approx(2)
    assert dtft(ParamSet([(1, 0.5)]), np.pi) == pytest.approx(2 / 3)


def test_dtft_rejects_unstable():
    with pytest.raises(UnstablePole):
        dtft(ParamSet([(1, 1.0)]), 0.0)


def test_params_equal_examples():
    assert params_equal(ParamSet([(1, 0.5)]), ParamSet([(1, 0.5)]))
    assert params_equal(TWO, ParamSet([(1, 0.25), (1, 0.5)]))
    assert not params_equal(ParamSet([(1, 0.5)]), ParamSet([(1, 0.6)]), tol=1e-6)
    assert not params_equal(TWO, ParamSet([(1, 0.5)]))
    assert not params_equal(TWO, ParamSet([(1, 0.5), (2, 0.25)]), tol=1e-6)


def test_ordered_params_permutation():
    op = OrderedParams([1, 2, 3], [0.1, 0.2, 0.3])
    q = op.permuted([2, 0, 1])
    np.testing.assert_array_equal(q.poles, [0.3, 0.1, 0.2])
    np.testing.assert_array_equal(q.gains, [3, 1, 2])
    assert params_equal(op.to_set(), q.to_set())


def test_json_round_trip():
    b = ParamSet([(1 + 2j, 0.5 - 0.1j), (-0.3, 0.25)])
    doc = json.loads(json.dumps(b.to_json()))
    assert params_equal(ParamSet.from_json(doc), b, tol=0)
    assert set(doc) == {"pairs"} and set(doc["pairs"][0]) == {"gain", "pole"}
    x = np.array([1, 2j, -0.5])
    np.testing.assert_array_equal(sequence_from_json(json.loads(json.dumps(sequence_to_json(x)))), x)


# ---- properties

cplx = st.complex_numbers(max_magnitude=0.95, allow_nan=False, allow_infinity=False)
gain = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)
pairs = st.lists(st.tuples(gain, cplx), min_size=1, max_size=5, unique_by=lambda t: t[1])


@given(pairs, st.integers(1, 40))
def test_first_sample_is_gain_sum(raw, n):
    b = ParamSet(raw)
    assert impulse_response(b, n)[0] == pytest.approx(np.sum(b.gains), rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_convolve_with_delta_is_identity(h):
    delta = np.zeros(len(h))
    delta[0] = 1
    np.testing.assert_array_equal(convolve(h, delta), h)


@given(pairs, pairs, st.integers(1, 30))
def test_response_is_linear_over_disjoint_union(ra, rb, n):
    poles_a = {p for _, p in ra}
    rb = [(g, p) for g, p in rb if p not in poles_a]
    if not rb:
        return
    a, b = ParamSet(ra), ParamSet(rb)
    union = ParamSet(list(a.pairs()) + list(b.pairs()))
    np.testing.assert_allclose(impulse_response(union, n), impulse_response(a, n) + impulse_response(b, n),
                               rtol=1e-12, atol=1e-12)


@given(pairs, st.floats(-np.pi, np.pi))
def test_dtft_matches_truncated_series(raw, omega):
    b = ParamSet(raw)
    rmax = float(np.max(np.abs(b.poles)))
    n = int(np.ceil(np.log(1e-14) / np.log(rmax))) + 1 if rmax > 0 else 1
    h = impulse_response(b, n)
    series = np.sum(h * np.exp(-1j * omega * np.arange(n)))
    scale = np.sum(np.abs(b.gains)) / (1 - rmax)
    assert abs(dtft(b, omega) - series) <= 1e-9 * scale


@given(st.lists(st.tuples(st.integers(-3, 3), st.sampled_from([0.1, 0.2, 0.5, -0.5, 0.3j])), min_size=1, max_size=8))
def test_simplify_idempotent(raw):
    try:
        once = simplify(raw)
    except EmptyAfterSimplification:
        return
    twice = simplify(once.pairs())
    assert params_equal(once, twice, tol=0)
    assert np.all(once.gains != 0)
    assert len(set(once.poles.tolist())) == once.size
