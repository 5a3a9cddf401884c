import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovtrace.errors import ConvergenceError, FormatError, ParameterError, UnsupportedWaveletError
from besovtrace.wavelets import (
    PeriodizedG,
    build_G,
    cascade_evaluate,
    check_hypothesis_HN,
    daubechies,
    generate_filter,
    highpass,
    load_wavelet_system,
    orthonormality_residual,
    save_wavelet_system,
)

SQ3 = math.sqrt(3.0)


def test_db2_filter_closed_form():
    # h normalized to sum 1
    expected = np.array([1 + SQ3, 3 + SQ3, 3 - SQ3, 1 - SQ3]) / 8
    np.testing.assert_allclose(generate_filter(2), expected, atol=1e-15)


def test_db2_phi_at_integers():
    # phi(1) = (1 + sqrt 3)/2, phi(2) = (1 - sqrt 3)/2
    s = daubechies(2, 10)
    n = 2**10
    assert s.phi_samples[n] == pytest.approx((1 + SQ3) / 2, abs=1e-13)
    assert s.phi_samples[2 * n] == pytest.approx((1 - SQ3) / 2, abs=1e-13)


def test_haar_is_box():
    s = daubechies(1, 8)
    n = 2**8
    assert np.all(s.phi_samples[:n] == 1.0)
    assert np.all(s.psi_samples[: n // 2] == 1.0)
    assert np.all(s.psi_samples[n // 2 : n] == -1.0)


@given(st.integers(1, 16))
@settings(max_examples=16, deadline=None)
def test_filter_orthonormal_and_moments(N):
    h = generate_filter(N)
    assert len(h) == 2 * N
    assert orthonormality_residual(h) < 1e-13
    g = highpass(h)
    k = np.arange(len(g), dtype=float)
    scale = np.abs(g) @ (k ** np.arange(N)[:, None]).T
    for n in range(N):
        assert abs(np.sum(g * k**n)) <= 1e-10 * max(1.0, scale[n])


@pytest.mark.parametrize("N", [0, 17, 2.5, "4"])
def test_filter_rejects_bad_order(N):
    with pytest.raises(ParameterError):
        generate_filter(N)


@pytest.mark.parametrize("N", [2, 4, 8])
def test_residuals(N):
    s = daubechies(N, 12)
    assert s.refinement_residual() <= 1e-8
    assert np.max(np.abs(s.moment_residuals())) <= 1e-6
    assert s.partition_of_unity_residual() <= 1e-6
    assert s.support_residual() <= 1e-12
    assert s.support_length == 2 * N - 1


def test_regularity_increases_with_N():
    r = [daubechies(N, 10).regularity_estimate for N in (2, 4, 8)]
    assert r[0] < r[1] < r[2] <= 2.0
    assert daubechies(1, 8).regularity_estimate == 0.0


def test_cascade_rejects_nonconvergent_filter():
    # passes the orthonormality test, but 1 is not a dominant eigenvalue
    with pytest.raises(ConvergenceError):
        cascade_evaluate([0.5, 0.0, 0.0, 0.5], 8)


def test_cascade_rejects_bad_input():
    with pytest.raises(ParameterError):
        cascade_evaluate([0.3, 0.3, 0.4], 8)
    with pytest.raises(ParameterError):
        cascade_evaluate(generate_filter(2), 4)
    with pytest.raises(ParameterError):
        cascade_evaluate([0.6, 0.6], 8)


def test_evaluate_matches_samples(db4):
    u = db4.grid[::37]
    np.testing.assert_allclose(db4.evaluate(1, u), db4.psi_samples[::37], atol=1e-15)
    assert db4.evaluate(0, np.array([-0.5, 100.0])).tolist() == [0.0, 0.0]


@given(st.integers(1, 8), st.floats(0, 1, exclude_max=True))
@settings(max_examples=40, deadline=None)
def test_periodized_scaling_sums_to_one(j, x):
    s = daubechies(4, 10)
    k, w = s.periodized_weights(0, j, x)
    assert np.all(np.diff(k) > 0)
    assert np.all((k >= 0) & (k < 2**j))
    assert abs(w.sum() - 1.0) < 1e-9


def test_G_properties(G8):
    assert abs(np.mean(G8.samples)) < 1e-12  # zero mean
    t = np.linspace(0, 1, 101)
    np.testing.assert_allclose(G8.eval1(t), G8.eval1(t + 3.0), atol=1e-12)
    G2 = G8.tensorized(2)
    assert G2.d_prime == 2


def test_HN_holds_for_db8():
    rep = check_hypothesis_HN(build_G(daubechies(8, 14), 1))
    assert rep.verdict == "holds"
    assert rep.margin > 0
    assert rep.zero_count == len(rep.zeros) >= 2
    assert set(rep.to_dict()) >= {"zero_set", "min_derivative_at_zeros", "verdict"}


def test_HN_rejects_haar():
    with pytest.raises(UnsupportedWaveletError):
        check_hypothesis_HN(build_G(daubechies(1, 10), 1))


def test_HN_sine_oracle():
    n = 2**12
    t = np.arange(n) / n
    G = PeriodizedG.from_samples(np.sin(2 * np.pi * t), 2 * np.pi * np.cos(2 * np.pi * t))
    rep = check_hypothesis_HN(G)
    assert rep.verdict == "holds"
    np.testing.assert_allclose(sorted(rep.zeros), [0.0, 0.5], atol=2.0**-12)
    # conservative: min over the neighbouring nodes
    assert rep.min_derivative_at_zeros == pytest.approx(2 * np.pi * np.cos(2 * np.pi / n), rel=1e-9)


def test_HN_flags_tangency():
    # (sin)^2 - tiny: zeros far too close to be separated on the grid
    n = 2**10
    t = np.arange(n) / n
    g = np.sin(2 * np.pi * t) ** 2 - 1e-9
    dg = 4 * np.pi * np.sin(2 * np.pi * t) * np.cos(2 * np.pi * t)
    rep = check_hypothesis_HN(PeriodizedG.from_samples(g, dg))
    assert rep.verdict != "holds"


def test_wavelet_roundtrip(tmp_path, db4):
    path = tmp_path / "w.bin"
    save_wavelet_system(db4, path)
    back = load_wavelet_system(path)
    np.testing.assert_array_equal(back.psi_samples, db4.psi_samples)
    np.testing.assert_array_equal(back.filter, db4.filter)
    assert back.regularity_estimate == db4.regularity_estimate
    path.write_bytes(b"JUNK" + path.read_bytes()[4:])
    with pytest.raises(FormatError):
        load_wavelet_system(path)
