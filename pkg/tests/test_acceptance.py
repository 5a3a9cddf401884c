"""Acceptance gate: ten criteria at their stated tolerances and runtime budgets.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the pytest terminal summary.  Run standalone with
``python tests/test_acceptance.py`` for just the summary.
"""

import math
import time

import numpy as np
import pytest

from besovtrace.config import ExperimentConfig
from besovtrace.errors import UnsupportedWaveletError
from besovtrace.experiments import (
    Context,
    exp_holder,
    exp_lower_bound,
    exp_protr1,
    exp_spectrum_line,
    exp_trace_decay,
    exp_volume_bound,
)
from besovtrace.fields import BesovParams, all_positions, per_scale_energy, synthesize_random_field
from besovtrace.probe import build_probe_family, choose_J0, probe_trace_closed_form, synthesize_g
from besovtrace.trace import pointwise_consistency, trace_coefficients
from besovtrace.wavelets import build_G, check_hypothesis_HN, daubechies

LINES = []
CFG = ExperimentConfig()


def _gate(num, title, ok, detail, t0, budget):
    elapsed = time.perf_counter() - t0
    in_time = elapsed < budget
    status = "PASS" if ok and in_time else "FAIL"
    line = f"[{status}] {num:>2}. {title}: {detail} ({elapsed:.1f} s / {budget:.0f} s)"
    LINES.append(line)
    print(line)
    assert ok, line
    assert in_time, line


@pytest.fixture(scope="module")
def ctx():
    return Context(CFG)


def test_01_wavelet_validity():
    t0 = time.perf_counter()
    worst = {"refinement": 0.0, "moments": 0.0, "unity": 0.0}
    for N in (2, 4, 8):
        s = daubechies(N, 12)
        worst["refinement"] = max(worst["refinement"], s.refinement_residual())
        worst["moments"] = max(worst["moments"], float(np.max(np.abs(s.moment_residuals()))))
        worst["unity"] = max(worst["unity"], s.partition_of_unity_residual())
    ok = worst["refinement"] <= 1e-8 and worst["moments"] <= 1e-6 and worst["unity"] <= 1e-6
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    _gate(1, "wavelet validity N=2,4,8", ok, detail, t0, 10)


def test_02_hypothesis_HN():
    t0 = time.perf_counter()
    rep = check_hypothesis_HN(build_G(daubechies(8, 14), 1))
    try:
        check_hypothesis_HN(build_G(daubechies(1, 12), 1))
        haar = "accepted"
    except UnsupportedWaveletError:
        haar = "UnsupportedWaveletError"
    ok = rep.verdict == "holds" and rep.margin > 0 and haar == "UnsupportedWaveletError"
    detail = f"N=8 {rep.verdict}, {rep.zero_count} zeros, margin {rep.margin:.3g}; Haar -> {haar}"
    _gate(2, "hypothesis (H_N)", ok, detail, t0, 30)


def _g_energy_oracle(j, s, p, q, d_prime):
    """sum over Z_j of |e_k|^p from gcd denominators, times the 2^{j d'} frozen copies."""
    expo = (q + 2) / (q * p)
    total = 0.0
    for k in range(1, 2**j):
        J = j - ((k & -k).bit_length() - 1)
        total += (j**-expo * 2.0 ** ((1 / p - s) * j) * 2.0 ** (-J / p)) ** p
    return 2.0 ** (j * d_prime) * total


def test_03_g_besov_bound():
    t0 = time.perf_counter()
    s, p, q = CFG.s, CFG.p, CFG.q
    g = synthesize_g(BesovParams(s, p, q, CFG.D), CFG.d, 14)
    A = per_scale_energy(g, p, s)
    js = np.arange(1, 15)
    bound_ok = bool(np.all(A <= js ** (-2.0 / q)))
    oracle = np.array([_g_energy_oracle(int(j), s, p, q, CFG.d_prime) for j in js])
    raw = np.array([g.scale_energy(int(j), p) for j in js])
    rel = float(np.max(np.abs(raw - oracle) / oracle))
    # explicit enumeration of every stored coefficient where it fits in memory
    for j in range(1, 11):
        K = all_positions(j, CFG.D)
        brute = sum(float(np.sum(np.abs(g.values(j, m, K)) ** p)) for m in range(1, 2**CFG.D))
        rel = max(rel, abs(brute - raw[j - 1]) / raw[j - 1])
    ok = bound_ok and rel <= 1e-12
    detail = f"max A_j j^(2/q) = {float(np.max(A * js ** (2 / q))):.4f}, oracle rel err {rel:.1e}"
    _gate(3, "g Besov bound", ok, detail, t0, 30)


def test_04_trace_identity(ctx):
    t0 = time.perf_counter()
    system = daubechies(CFG.N, 12)
    f = synthesize_random_field(BesovParams(CFG.s, CFG.p, CFG.q, 2), 12, CFG.seed, CFG.delta)
    rng = np.random.default_rng(CFG.seed + 4)
    resid = 0.0
    for _ in range(50):
        x, a = rng.random(), rng.random()
        resid = max(resid, pointwise_consistency(f, system, [a], [x]))
    H = CFG.s - CFG.d / CFG.p
    fam = build_probe_family(synthesize_g(ctx.params(), CFG.d, CFG.j_max), choose_J0(CFG.d, H + CFG.gamma_gap, H))
    gap = 0.0
    for _ in range(100):
        i = int(rng.integers(0, fam.d1))
        j = int(rng.integers(fam.J0 + 1, CFG.j_max + 1))
        k = int(rng.integers(0, 2**j))
        a = float(rng.random())
        closed = probe_trace_closed_form(fam, i, j, [k], [a], ctx.G)
        generic = trace_coefficients(fam.fields[i], ctx.system, [a], CFG.d, j, 1, np.array([[k]]))[0]
        gap = max(gap, abs(closed - generic))
    ok = resid <= 1e-8 and gap <= 1e-10
    _gate(4, "trace identity", ok, f"pointwise {resid:.1e}, closed form {gap:.1e}", t0, 60)


def test_05_protr1(ctx):
    t0 = time.perf_counter()
    res = exp_protr1(CFG, ctx)
    expo = res.measured["dprime_1"]["exponent"]
    ok = expo >= 1.8
    _gate(5, "slice measure decay", ok, f"fitted exponent {expo:.3f} (>= 1.8), {CFG.mc_samples} samples", t0, 60)


def test_06_markov_decay(ctx):
    t0 = time.perf_counter()
    res = exp_trace_decay(CFG, ctx)
    frac = res.measured["fractions"]
    eps, p = CFG.eps, CFG.p
    js = range(6, 13)
    worst = max(frac[j] / (4.0 * 2.0 ** (-j * eps * p)) for j in js)
    ok = CFG.eps == 0.2 and CFG.a_grid_log2 == 12 and worst <= 1.0
    detail = f"max fraction / (4 2^(-j eps p)) = {worst:.3f}, fraction at j=6: {frac[6]:.4f}"
    _gate(6, "bad-set decay", ok, detail, t0, 120)


def test_07_lower_bound(ctx):
    t0 = time.perf_counter()
    res = exp_lower_bound(CFG, ctx)
    m = res.measured
    Cs = [m["C_by_jmax"].get(jm, math.nan) for jm in (10, 12, 14)]
    ok = (
        m["triples"] == 20
        and m["all_cone_ok"]
        and all(np.isfinite(Cs))
        and min(Cs) > 0
        and m["stability_ratio"] <= 2.0
    )
    detail = f"{m['triples']} triples, cones {'ok' if m['all_cone_ok'] else 'violated'}, C = " + ", ".join(
        f"{c:.3f}" for c in Cs) + f", ratio {m['stability_ratio']:.3f}"
    _gate(7, "dyadic lower bound", ok, detail, t0, 120)


def test_08_spectrum_line(ctx):
    t0 = time.perf_counter()
    res = exp_spectrum_line(CFG, ctx)
    m = res.measured
    ok = m["interior_covered"] and m["max_interior_deviation"] <= 0.15 and m["max_upper_excess"] <= 0.1
    detail = f"interior deviation {m['max_interior_deviation']:.3f} (<= 0.15), upper excess {m['max_upper_excess']:.3f} (<= 0.1)"
    _gate(8, "spectrum line", ok, detail, t0, 300)


def test_09_holder_estimator(ctx):
    t0 = time.perf_counter()
    res = exp_holder(CFG, ctx)
    m = res.measured
    alpha_ok = all(v["points"] > 0 and v["max_excess"] <= CFG.holder_alpha_tol for v in m["alpha_check"].values())
    ok = m["calibration_max_error"] <= 0.05 and alpha_ok
    worst = max(v["max_excess"] for v in m["alpha_check"].values())
    detail = f"calibration error {m['calibration_max_error']:.3f} (<= 0.05), max h - H(alpha) {worst:.3f}"
    _gate(9, "Hoelder estimator", ok, detail, t0, 60)


def test_10_volume_bound(ctx):
    t0 = time.perf_counter()
    res = exp_volume_bound(CFG, ctx)
    kappa = res.measured["min_kappa"]
    target = CFG.gamma_gap - 0.1
    _gate(10, "volume bound", kappa >= target, f"min pinch exponent {kappa:.3f} (>= {target:.2f})", t0, 120)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
