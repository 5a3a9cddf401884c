import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovtrace.errors import InsufficientDataError, ParameterError
from besovtrace.experiments import cone_field, sine_oracle_G
from besovtrace.fields import BesovParams
from besovtrace.probe import synthesize_g
from besovtrace.regularity import (
    a1_membership,
    classify_dyadic,
    cone_leaders,
    estimate_holder,
    estimate_spectrum,
    holder_candidate_ratio,
    holder_candidate_test,
    lacunary_point,
    liminf_leaders,
    regress_leaders,
    wavelet_leaders,
)
from besovtrace.trace import TraceField, trace


def _power_trace(h, j_max=12, d=1):
    bands = {(j, 1): np.full(2 ** (j * d), 2.0 ** (-h * j)) for j in range(1, j_max + 1)}
    return TraceField(d, (0.5,), j_max, bands)


@given(st.floats(0.1, 3.0))
@settings(max_examples=20, deadline=None)
def test_exact_power_law(h):
    tf = _power_trace(h)
    assert estimate_holder(tf, [0.3]).h == pytest.approx(h, abs=1e-9)
    assert estimate_holder(tf, [0.3], method="liminf").h == pytest.approx(h, abs=1e-9)


@given(st.floats(0.5, 2.5), st.floats(-20, 20))
@settings(max_examples=20, deadline=None)
def test_regression_ignores_amplitude(h0, c):
    tf = cone_field(1, 12, [0.37], h0, seed=1)
    a = estimate_holder(tf, [0.37]).h
    b = estimate_holder(tf.scaled(2.0**c), [0.37]).h
    assert a == pytest.approx(b, abs=1e-9)


@pytest.mark.parametrize("h0", [0.5, 1.0, 1.5, 2.5])
def test_cone_field_calibration(h0):
    for n, x0 in enumerate([0.1234, 0.77, 0.5001]):
        assert abs(estimate_holder(cone_field(1, 14, [x0], h0, n), [x0]).h - h0) <= 0.05


def test_zero_trace_is_capped():
    tf = TraceField(1, (0.5,), 10, {})
    est = estimate_holder(tf, [0.2])
    assert est.capped and est.h == 20.0
    assert liminf_leaders(cone_leaders(tf, [0.2])).capped


def test_too_few_scales():
    with pytest.raises(InsufficientDataError):
        estimate_holder(_power_trace(1.0, j_max=6), [0.2])
    with pytest.raises(ParameterError):
        estimate_holder(_power_trace(1.0), [0.2], method="other")
    with pytest.raises(ParameterError):
        cone_leaders(_power_trace(1.0), [0.2], L=0.5)


def test_leaders_on_torus():
    # a single coefficient at k = 0 is inside the cone of x = 0.999
    tf = TraceField(1, (0.5,), 6, {(6, 1): np.eye(1, 64, 0).ravel()})
    assert cone_leaders(tf, [0.999], 2.0).values[-1] == 1.0


@given(st.floats(1.0, 4.0), st.integers(2, 5))
@settings(max_examples=30, deadline=None)
def test_lacunary_witnesses(alpha, n_terms):
    x, wit = lacunary_point(alpha, n_terms, J1=3, K1=5)
    for J, (K,) in wit:
        assert K % 2 == 1
        assert abs(x - Fraction(K, 2**J)) <= Fraction(1, 2) ** math.floor(alpha * J)


@given(st.floats(1.0, 3.0), st.floats(1.0, 3.0))
@settings(max_examples=30, deadline=None)
def test_classify_monotone_in_alpha(a1, a2):
    lo, hi = sorted((a1, a2))
    x, _ = lacunary_point(hi + 1, 8, J1=2, K1=1)
    if classify_dyadic(x, hi, 64).accepted:
        assert classify_dyadic(x, lo, 64).accepted
    assert classify_dyadic(x, lo, 64).hits >= classify_dyadic(x, hi, 64).hits


def test_classify_dyadic_cases():
    w = classify_dyadic(Fraction(3, 8), 2.0, 10)
    assert w.dyadic and math.isinf(w.alpha) and w.accepted
    x, _ = lacunary_point(3.0, 6)
    w = classify_dyadic(x, 2.0, 64)
    assert w.accepted and w.hits >= 6
    assert all(K % 2 for _, (K,) in w.witnesses)
    assert not classify_dyadic(1 / 3, 2.0, 40).accepted
    with pytest.raises(ParameterError):
        classify_dyadic(0.3, 0.5, 10)
    assert '"alpha": "inf"' in classify_dyadic(0.5, 1.0, 8).to_json()


def test_a1_membership_sine():
    G = sine_oracle_G(14)
    res = a1_membership(G, [0.3], (1, 20))
    assert res.accepted
    vals = [abs(math.sin(2 * math.pi * ((0.3 * 2**j) % 1))) for j in range(res.j_a, 21)]
    assert all(v > j**-2 for v, j in zip(vals, range(res.j_a, 21)))
    # a = 0 sits on a zero of sin at every scale
    assert not a1_membership(G, [0.0], (1, 20)).accepted


@given(st.floats(0.3, 2.5), st.floats(0.1, 1.0), st.floats(0.1, 10.0), st.floats(0.0, 1.0, exclude_max=True))
@settings(max_examples=30, deadline=None)
def test_candidate_test_monotonicity(gamma, dgamma, N, x):
    tf = cone_field(1, 10, [0.4], 1.2, seed=2)
    r = holder_candidate_ratio(tf, gamma, N, [x])
    assert holder_candidate_ratio(tf, gamma, 2 * N, [x]) == pytest.approx(r / 2)
    if holder_candidate_test(tf, gamma + dgamma, N, [x]):
        assert holder_candidate_test(tf, gamma, N, [x])
    if holder_candidate_test(tf, gamma, N, [x]):
        assert holder_candidate_test(tf, gamma, 1.5 * N, [x])


def test_wavelet_leaders_dominate_children():
    rng = np.random.default_rng(1)
    bands = {(j, 1): rng.random(2**j) * 2.0**-j for j in range(1, 9)}
    L = wavelet_leaders(TraceField(1, (0.5,), 8, bands))
    for j in range(1, 8):
        assert np.all(L[j] >= L[j + 1].reshape(-1, 2).max(axis=1))
        assert np.all(L[j] >= np.abs(bands[(j, 1)]))


def test_spectrum_of_g_is_line(db8):
    g = synthesize_g(BesovParams(2.0, 2.0, 2.0, 2), 1, 14)
    est = estimate_spectrum(trace(g, [0.3141], 1, db8))
    assert np.nanmax(est.dhat) <= 1.0
    assert est.slope_two_point() == pytest.approx(2.0, rel=0.1)
    assert est.mass_below(1.0) == 0.0
    assert len(est.pairs()) > 3


def test_spectrum_needs_scales():
    with pytest.raises(InsufficientDataError):
        estimate_spectrum(_power_trace(1.0, j_max=4))


def test_spectrum_csv(tmp_path):
    est = estimate_spectrum(_power_trace(1.0))
    est.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("h,dhat")
    # every finest-scale exponent is exactly 1
    assert est.dhat[np.argmin(np.abs(est.h - 1.0))] == pytest.approx(1.0)
    assert regress_leaders(cone_leaders(_power_trace(1.0), [0.1])).r2 == pytest.approx(1.0)
