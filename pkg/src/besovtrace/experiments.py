"""End-to-end numerical experiments and the aggregated report."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .config import ExperimentConfig
from .errors import InsufficientDataError, ParameterError
from .fields import BesovParams, IntermittentField, RandomField
from .probe import build_probe_family, choose_J0, h_alpha, synthesize_g, verify_lower_bound
from .regularity import (
    a1_membership,
    classify_dyadic,
    estimate_holder,
    estimate_spectrum,
    g_along_scales,
    holder_candidate_test,
    lacunary_point,
)
from .trace import TraceField, slice_energy, trace, trace_coefficients
from .wavelets import PeriodizedG, WaveletSystem, build_G, daubechies

SCHEMA_VERSION = 1


def linear_fit(x, y) -> dict:
    """Least-squares line with its RMS residual."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise InsufficientDataError("need at least two points for a fit")
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return {"slope": float(slope), "intercept": float(icpt), "residual": resid, "points": int(len(x))}


def sobol(n: int, dim: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence in ``[0, 1)^dim``."""
    m = max(0, math.ceil(math.log2(n)))
    return qmc.Sobol(dim, scramble=True, seed=seed, bits=64).random_base2(m)[:n]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    runtime: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": self.measured,
            "tolerances": self.tolerances,
            "fits": self.fits,
        }


@dataclass
class ExperimentReport:
    config: dict
    results: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "passed": self.passed,
            "results": [r.to_dict() for r in self.results],
        }
        if timing:
            out["timing"] = self.timing
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(timing)), indent=2, sort_keys=True)

    def write(self, directory) -> list:
        """Write ``report.json`` and one CSV per table; returns the paths."""
        os.makedirs(directory, exist_ok=True)
        paths = [os.path.join(directory, "report.json")]
        with open(paths[0], "w") as fh:
            fh.write(self.to_json())
        for r in self.results:
            for tname, (header, rows) in r.tables.items():
                path = os.path.join(directory, f"{r.name}_{tname}.csv")
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(header)
                    w.writerows(rows)
                paths.append(path)
        return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Context:
    """Lazily built objects shared by the experiments of one configuration."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    @cached_property
    def system(self) -> WaveletSystem:
        return daubechies(self.cfg.N, self.cfg.r)

    @cached_property
    def G(self) -> PeriodizedG:
        return build_G(self.system, 1)

    def params(self, dim: Optional[int] = None) -> BesovParams:
        c = self.cfg
        return BesovParams(c.s, c.p, c.q, c.D if dim is None else dim)

    def pick_slice(self, j_range: tuple, seed: int, n: Optional[int] = None) -> tuple:
        """The Sobol candidate ``a`` maximizing ``min_j |G_{d'}(2^j a)| j^{2d'}`` over ``j_range``.

        Candidates that are dyadic at the depth of the test are skipped.
        """
        c = self.cfg
        n = n or c.spectrum_candidates
        cand = sobol(n, c.d_prime, seed)
        js = np.arange(j_range[0], j_range[1] + 1)
        best, best_m = None, -1.0
        for a in cand:
            if np.any(np.mod(a * 2.0 ** (j_range[1] + 8), 1.0) == 0):
                continue
            vals = np.abs(g_along_scales(self.G, a, js))
            m = float(np.min(vals * js.astype(float) ** (2.0 * c.d_prime)))
            if m > best_m:
                best, best_m = a, m
        return tuple(float(x) for x in best), best_m


def _timed(name: str, fn: Callable[[], CheckResult]) -> CheckResult:
    t0 = time.perf_counter()
    res = fn()
    res.runtime = time.perf_counter() - t0
    res.name = name
    return res


# ---------------------------------------------------------------------------
# the slice condition: measure of {|G(2^j a)| <= j^{-2 d'}}


def sine_oracle_G(r: int = 14) -> PeriodizedG:
    t = np.arange(2**r) / 2**r
    return PeriodizedG.from_samples(np.sin(2 * np.pi * t), 2 * np.pi * np.cos(2 * np.pi * t))


def rejection_fractions(G: PeriodizedG, a: np.ndarray, js) -> np.ndarray:
    """Fraction of rows of ``a`` with ``|G_{d'}(2^j a)| <= j^{-2d'}`` for each ``j``."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    dp = a.shape[1]
    out = []
    for j in js:
        vals = np.prod(G.eval1(np.mod(a * 2.0**j, 1.0)), axis=1)
        out.append(float(np.mean(np.abs(vals) <= float(j) ** (-2.0 * dp))))
    return np.array(out)


def exp_protr1(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> CheckResult:
    ctx = ctx or Context(cfg)
    j1, j2 = cfg.protr1_range
    js = np.arange(j1, j2 + 1)
    res = CheckResult("protr1", True)
    res.tolerances = {"min_exponent": cfg.protr1_min_exponent, "oracle_sigmas": 3.0}
    rows = []
    for dp in range(1, cfg.protr1_max_dprime + 1):
        a = sobol(cfg.mc_samples, dp, cfg.seed + dp)
        frac = rejection_fractions(ctx.G, a, js)
        ok = frac > 0
        key = f"dprime_{dp}"
        if ok.sum() >= 2:
            fit = linear_fit(np.log2(js[ok]), np.log2(frac[ok]))
            expo = -fit["slope"]
        else:
            fit, expo = {"slope": -math.inf, "intercept": 0.0, "residual": 0.0, "points": int(ok.sum())}, math.inf
        res.fits[key] = fit
        # measure <= C j^{-2}: the constant read off the worst scale
        C = float(np.max(frac * js.astype(float) ** 2))
        res.measured[key] = {"exponent": expo, "C": C, "fractions": frac.tolist()}
        rows += [(dp, int(j), f) for j, f in zip(js, frac)]
        if dp == 1:
            res.passed &= expo >= cfg.protr1_min_exponent
        else:
            # tensor version: informational, still required to be summable
            res.passed &= expo > 1.0
    # analytic oracle: |sin 2 pi t| <= eps has measure 2 arcsin(eps) / pi
    Gs = sine_oracle_G()
    a = sobol(cfg.mc_samples, 1, cfg.seed + 101)
    frac = rejection_fractions(Gs, a, js)
    exact = 2.0 * np.arcsin(js.astype(float) ** -2.0) / np.pi
    sigma = np.sqrt(exact * (1 - exact) / len(a))
    z = np.abs(frac - exact) / sigma
    res.measured["sine_oracle"] = {"max_z": float(np.max(z)), "exact": exact.tolist(), "fractions": frac.tolist()}
    res.passed &= bool(np.max(z) <= 3.0)
    res.tables["rejection"] = (["dprime", "j", "fraction"], rows)
    return res


# ---------------------------------------------------------------------------
# Markov decay of the slice energies


def decay_field(cfg: ExperimentConfig, ctx: Context, j_max: int):
    P = ctx.params()
    return RandomField(P, j_max, cfg.seed, cfg.delta) + IntermittentField(
        P, cfg.d, j_max, cfg.seed + 1, cfg.intermittent_beta, cfg.delta
    )


def bad_set_fractions(S: dict, C_f: float, s: float, p: float, d: int, eps: float) -> dict:
    """Fraction of slices with ``S_j(a) > C_f 2^{-((s - eps) p - d) j}``."""
    return {j: float(np.mean(v > C_f * 2.0 ** (-((s - eps) * p - d) * j))) for j, v in S.items()}


def exp_trace_decay(cfg: ExperimentConfig, ctx: Optional[Context] = None, field_=None) -> CheckResult:
    ctx = ctx or Context(cfg)
    j1, j2 = cfg.decay_range
    js = list(range(j1, j2 + 1))
    f = field_ if field_ is not None else decay_field(cfg, ctx, j2)
    a = sobol(2**cfg.a_grid_log2, cfg.d_prime, cfg.seed + 7)
    s, p, d = cfg.s, cfg.p, cfg.d
    S = {j: slice_energy(f, ctx.system, a, d, j, p) for j in js}
    normalized = {j: float(2.0 ** ((s * p - d) * j) * np.mean(S[j])) for j in js}
    C_f = max(normalized.values())
    res = CheckResult("trace_decay", True)
    res.tolerances = {"slack": cfg.decay_slack, "exponent_tol": cfg.decay_exponent_tol, "eps": cfg.eps}
    eps_all = sorted(set(cfg.eps_grid) | {cfg.eps})
    fr_by_eps = {e: bad_set_fractions(S, C_f, s, p, d, e) for e in eps_all}
    frac = fr_by_eps[cfg.eps]
    bound = {j: cfg.decay_slack * 2.0 ** (-j * cfg.eps * p) for j in js}
    within = all(frac[j] <= bound[j] for j in js)
    jj = np.array([j for j in js if frac[j] > 0])
    if len(jj) >= 2:
        fit = linear_fit(jj, np.log2([frac[j] for j in jj]))
        expo = -fit["slope"]
    else:
        fit, expo = {"slope": -math.inf, "intercept": 0.0, "residual": 0.0, "points": int(len(jj))}, math.inf
    monotone = all(
        fr_by_eps[e1][j] >= fr_by_eps[e2][j] for e1, e2 in zip(eps_all, eps_all[1:]) for j in js
    )
    res.fits["decay"] = fit
    res.measured = {
        "C_f": C_f,
        "normalized_energy": normalized,
        "fractions": frac,
        "bound": bound,
        "decay_exponent": expo,
        "monotone_in_eps": monotone,
        "fractions_by_eps": {str(e): v for e, v in fr_by_eps.items()},
    }
    res.passed = within and expo >= cfg.eps * p - cfg.decay_exponent_tol and monotone
    res.tables["fractions"] = (["j", "fraction", "bound"], [(j, frac[j], bound[j]) for j in js])
    return res


# ---------------------------------------------------------------------------
# lower bound along dyadic approximations


def dyadic_point(alpha: float, d: int, rng: np.random.Generator, depth: int) -> tuple:
    """A point approximated at rate ``alpha + 1`` (so certainly in ``X^alpha``) and its witnesses."""
    J1 = int(rng.integers(1, 3))
    n_terms = 2
    while True:
        probe_x, _ = lacunary_point(alpha + 1, n_terms + 1, J1)
        if (probe_x * 2**depth).denominator != 1:
            break
        n_terms += 1
    coords, wits = [], None
    for _ in range(d):
        K1 = int(2 * rng.integers(0, 2 ** (J1 - 1)) + 1) if J1 > 1 else 1
        x, w = lacunary_point(alpha + 1, n_terms + 1, J1, K1)
        coords.append(x)
        wits = [(J, [K[0]]) for J, K in w] if wits is None else [(J, wk + [K[0]]) for (J, wk), (_, K) in zip(wits, w)]
    return coords, wits


def exp_lower_bound(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> CheckResult:
    ctx = ctx or Context(cfg)
    P = ctx.params()
    jm_top = max(cfg.lower_bound_jmax)
    res = CheckResult("lower_bound", True)
    res.tolerances = {"stability_factor": cfg.lower_bound_stability}
    rng = np.random.default_rng(cfg.seed + 11)
    families = {}
    cand = sobol(4 * cfg.lower_bound_triples, cfg.d_prime, cfg.seed + 13)
    slices = []
    for a in cand:
        r = a1_membership(ctx.G, a, (1, jm_top + 6))
        if r.accepted and r.j_a <= 4:
            slices.append((tuple(float(v) for v in a), r.j_a))
    if not slices:
        raise InsufficientDataError("no slice offset passes the membership test")
    triples = []
    attempts = 0
    while len(triples) < cfg.lower_bound_triples and attempts < 10 * cfg.lower_bound_triples:
        attempts += 1
        alpha = cfg.alpha_grid[len(triples) % len(cfg.alpha_grid)]
        a, j_a = slices[len(triples) % len(slices)]
        coords, wits = dyadic_point(alpha, cfg.d, rng, cfg.classify_depth)
        cls = classify_dyadic(coords, alpha, cfg.classify_depth)
        if cls.accepted and not cls.dyadic:
            triples.append((a, coords, alpha, wits, j_a))
    H_gap = cfg.gamma_gap
    C_by_jmax = {}
    per_triple = []
    cone_ok = True
    rows = []
    for t, (a, coords, alpha, wits, j_a) in enumerate(triples):
        H = h_alpha(alpha, cfg.s, cfg.d, cfg.p)
        J0 = choose_J0(cfg.d, H + H_gap, H)
        if J0 not in families:
            families[J0] = build_probe_family(synthesize_g(P, cfg.d, jm_top), J0)
        fam = families[J0]
        x = [float(c) for c in coords]
        Cs = {}
        for jm in cfg.lower_bound_jmax:
            try:
                rep = verify_lower_bound(fam, ctx.system, a, x, alpha, wits, j_a, jm)
            except InsufficientDataError:
                continue
            Cs[jm] = rep.C
            cone_ok &= rep.all_cone_ok
            for row in rep.rows:
                rows.append((t, jm, alpha, row.n, row.J, row.j, row.i, int(row.cone_ok), row.ratio))
        per_triple.append({"a": list(a), "x": x, "alpha": alpha, "J0": J0, "j_a": j_a, "C": Cs})
        for jm, c in Cs.items():
            C_by_jmax[jm] = min(C_by_jmax.get(jm, math.inf), c)
    finite = [c for c in C_by_jmax.values() if np.isfinite(c)]
    ratio = max(finite) / min(finite) if finite and min(finite) > 0 else math.inf
    res.measured = {
        "triples": len(triples),
        "attempts": attempts,
        "C_by_jmax": C_by_jmax,
        "stability_ratio": ratio,
        "all_cone_ok": cone_ok,
        "per_triple": per_triple,
    }
    res.passed = (
        len(triples) == cfg.lower_bound_triples
        and cone_ok
        and len(finite) == len(cfg.lower_bound_jmax)
        and min(finite) > 0
        and ratio <= cfg.lower_bound_stability
    )
    res.tables["rows"] = (["triple", "j_max", "alpha", "n", "J", "j", "i", "cone_ok", "ratio"], rows)
    return res


# ---------------------------------------------------------------------------
# volume of the pointwise-regular probe coefficients


def _coeff_bound(N_const, gamma, j, k, x):
    n = 2.0**j
    off = np.abs(np.mod(x * n - k + n / 2, n) - n / 2)
    return N_const * 2.0 ** (-gamma * j) * (1.0 + off) ** gamma


def _intervals(tc: TraceField, tps: list, gamma: float, N_const: float, x: float) -> tuple:
    """Per-coordinate admissible intervals for ``beta`` at a fixed ``x`` (``d = 1``).

    Each wavelet-band coefficient involves one probe only, so the admissible
    set is a product of intervals; coefficients with no probe term must pass
    on their own.
    """
    lo = np.full(len(tps), -np.inf)
    hi = np.full(len(tps), np.inf)
    free_ok = True
    owned = {}
    for i, tp in enumerate(tps):
        for (j, l), e in tp.bands.items():
            if l == 0:
                continue
            nz = np.flatnonzero(e)
            owned.setdefault(j, []).append(nz)
            c = tc.band(j, l)[nz]
            b = _coeff_bound(N_const, gamma, j, nz, x)
            v1, v2 = (-b - c) / e[nz], (b - c) / e[nz]
            if len(nz):
                lo[i] = max(lo[i], float(np.max(np.minimum(v1, v2))))
                hi[i] = min(hi[i], float(np.min(np.maximum(v1, v2))))
    for (j, l), arr in tc.bands.items():
        mask = np.ones(len(arr), dtype=bool)
        if l != 0:
            for nz in owned.get(j, []):
                mask[nz] = False
        k = np.flatnonzero(mask)
        if len(k) and np.any(np.abs(arr[k]) > _coeff_bound(N_const, gamma, j, k, x)):
            free_ok = False
    return lo, hi, free_ok


def volume_pinch(cfg: ExperimentConfig, ctx: Context, gap: float, alpha: float) -> dict:
    """Pinch widths of the probe coefficients along ``j_1 = floor(alpha j_0)``."""
    if cfg.d != 1:
        raise ParameterError("the volume experiment is implemented for d = 1")
    P = ctx.params()
    jm = cfg.j_max
    H = h_alpha(alpha, cfg.s, cfg.d, cfg.p)
    gamma = H + gap
    J0 = choose_J0(cfg.d, gamma, H)
    fam = build_probe_family(synthesize_g(P, cfg.d, jm), J0)
    a, _ = ctx.pick_slice((1, jm + J0), cfg.seed + 17, 128)
    tc = trace(RandomField(P, jm, cfg.seed, cfg.delta), a, cfg.d, ctx.system)
    tps = [trace(f, a, cfg.d, ctx.system) for f in fam.fields]
    rng = np.random.default_rng(cfg.seed + 19)
    q, p = cfg.q, cfg.p
    log_expo = 1.0 / p if math.isinf(q) else (q + 2) / (q * p)
    m_bound = 2 * cfg.d_prime + log_expo
    levels = []
    j0 = 1
    while math.floor(alpha * j0) + J0 <= jm:
        j1 = int(math.floor(alpha * j0))
        k0 = int(2 * rng.integers(0, 2 ** (j0 - 1)) + 1) if j0 > 1 else 1
        xs = k0 * 2.0**-j0 + np.linspace(-1.0, 1.0, cfg.volume_x_points) * 2.0 ** (-alpha * j0)
        levels.append((j0, j1, k0, np.mod(xs, 1.0)))
        j0 += 1
    if len(levels) < 2:
        raise InsufficientDataError("fewer than two pinch scales fit below j_max")
    # one N for the whole experiment, large enough that beta = 0 is admissible
    from .regularity import holder_candidate_ratio

    N_const = 1.25 * max(holder_candidate_ratio(tc, gamma, 1.0, [x]) for *_, xs in levels for x in xs)
    widths, pair_ok, samples = [], True, 0
    rows = []
    for j0, j1, k0, xs in levels:
        js = j1 + J0
        subs = fam.subcubes(j1, [k0 << (j1 - j0)])
        e = np.array([trace_coefficients(fam.fields[i], ctx.system, a, 1, js, 1, subs[i][None, :])[0] for i in range(fam.d1)])
        c = np.array([trace_coefficients(RandomField(P, jm, cfg.seed, cfg.delta), ctx.system, a, 1, js, 1, subs[i][None, :])[0] for i in range(fam.d1)])
        bmax = np.array([max(_coeff_bound(N_const, gamma, js, subs[i][0], x) for x in xs) for i in range(fam.d1)])
        # admissible values of beta_i from the lambda_1 constraint alone, union over x
        w = 2.0 * bmax / np.abs(e)
        widths.append(w)
        # sampled pairs from the full admissible set must respect the pinch
        accepted = []
        for x in xs[:: max(1, len(xs) // 8)]:
            lo, hi, free_ok = _intervals(tc, tps, gamma, N_const, x)
            if not free_ok or np.any(lo > hi):
                continue
            for _ in range(max(1, cfg.volume_samples // 8)):
                beta = lo + (hi - lo) * rng.random(fam.d1)
                tf = tc
                for bi, tp in zip(beta, tps):
                    tf = tf + tp.scaled(float(bi))
                samples += 1
                if holder_candidate_test(tf, gamma, N_const, [x]):
                    accepted.append(beta)
                else:
                    pair_ok = False
        if len(accepted) >= 2:
            B = np.array(accepted)
            spread = B.max(axis=0) - B.min(axis=0)
            pair_ok &= bool(np.all(spread <= w * (1 + 1e-9)))
        rows += [(j0, j1, i, float(w[i]), float(e[i]), float(c[i])) for i in range(fam.d1)]
    W = np.array(widths)
    j1s = np.array([lv[1] for lv in levels])
    Gv = np.abs(g_along_scales(ctx.G, a, j1s + J0))
    norm = W * Gv[:, None] / j1s[:, None].astype(float) ** log_expo
    fits = [linear_fit(j1s, np.log2(norm[:, i])) for i in range(fam.d1)]
    kappa = [-f["slope"] for f in fits]
    C_emp = float(np.max(W / (2.0 ** (-gap * j1s[:, None]) * j1s[:, None].astype(float) ** m_bound)))
    return {
        "alpha": alpha,
        "gap": gap,
        "gamma": gamma,
        "H": H,
        "J0": J0,
        "a": list(a),
        "N_const": N_const,
        "j1": j1s.tolist(),
        "widths": W.tolist(),
        "kappa": kappa,
        "fits": fits,
        "C_emp": C_emp,
        "pairs_within_pinch": pair_ok,
        "samples": samples,
        "rows": rows,
    }


def exp_volume_bound(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> CheckResult:
    ctx = ctx or Context(cfg)
    base = volume_pinch(cfg, ctx, cfg.gamma_gap, cfg.volume_alpha)
    double = volume_pinch(cfg, ctx, 2 * cfg.gamma_gap, cfg.volume_alpha)
    k1, k2 = float(np.mean(base["kappa"])), float(np.mean(double["kappa"]))
    ratio = k2 / k1 if k1 > 0 else math.inf
    res = CheckResult("volume_bound", True)
    res.tolerances = {"exponent_tol": cfg.volume_tol, "doubling_tol": cfg.volume_doubling_tol}
    res.measured = {
        "min_kappa": min(base["kappa"]),
        "target": cfg.gamma_gap - cfg.volume_tol,
        "doubling_ratio": ratio,
        "base": {k: v for k, v in base.items() if k not in ("fits", "rows")},
        "doubled": {k: v for k, v in double.items() if k not in ("fits", "rows")},
    }
    for name, run in (("base", base), ("doubled", double)):
        for i, f in enumerate(run["fits"]):
            res.fits[f"{name}_coord_{i}"] = f
    res.passed = (
        min(base["kappa"]) >= cfg.gamma_gap - cfg.volume_tol
        and abs(ratio - 2.0) <= 2.0 * cfg.volume_doubling_tol
        and base["pairs_within_pinch"]
        and double["pairs_within_pinch"]
    )
    res.tables["pinch"] = (["j0", "j1", "i", "width", "e", "c"], base["rows"])
    return res


# ---------------------------------------------------------------------------
# spectrum of a trace


def spectrum_field(cfg: ExperimentConfig, ctx: Context):
    """Random saturating field plus a random combination of the probes."""
    P = ctx.params()
    H = cfg.s - cfg.d / cfg.p
    J0 = choose_J0(cfg.d, H + cfg.gamma_gap, H)
    fam = build_probe_family(synthesize_g(P, cfg.d, cfg.j_max), J0)
    rng = np.random.default_rng(cfg.seed + 100)
    lo, hi = cfg.beta_range
    beta = rng.choice([-1.0, 1.0], fam.d1) * rng.uniform(lo, hi, fam.d1)
    return RandomField(P, cfg.j_max, cfg.seed, cfg.delta) + fam.combination(beta), beta, J0


def exp_spectrum_line(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> CheckResult:
    ctx = ctx or Context(cfg)
    s, p, d = cfg.s, cfg.p, cfg.d
    f, beta, J0 = spectrum_field(cfg, ctx)
    a, margin = ctx.pick_slice((6, cfg.j_max), cfg.seed)
    tf = trace(f, a, d, ctx.system)
    h_lo, h_hi = s - d / p + 0.1, s - 0.1
    n = int(round((h_hi - h_lo) / cfg.spectrum_step))
    interior = np.round(h_lo + cfg.spectrum_step * np.arange(n + 1), 10)
    full_grid = np.round(np.arange(0.0, s + 1.0 + 1e-9, cfg.spectrum_bin), 10)
    est_in = estimate_spectrum(tf, h_grid=interior, bin_width=cfg.spectrum_bin)
    est = estimate_spectrum(tf, h_grid=full_grid, bin_width=cfg.spectrum_bin)
    line = d + (interior - s) * p
    dev = np.abs(est_in.dhat - line)
    max_dev = float(np.nanmax(dev)) if np.any(np.isfinite(dev)) else math.inf
    covered = bool(np.all(np.isfinite(est_in.dhat)))
    upper = np.minimum(d, d + (full_grid - s) * p)
    excess = est.dhat - upper
    max_excess = float(np.nanmax(excess)) if np.any(np.isfinite(excess)) else -math.inf
    mass = est.mass_below(s - d / p - cfg.spectrum_mass_gap)
    # pure g: the trace spectrum is a line of slope p
    g = synthesize_g(ctx.params(), d, cfg.j_max)
    tg = trace(g, a, d, ctx.system)
    slope = estimate_spectrum(tg, bin_width=cfg.spectrum_bin).slope_two_point()
    res = CheckResult("spectrum_line", True)
    res.tolerances = {
        "interior_tol": cfg.spectrum_tol,
        "upper_tol": cfg.spectrum_upper_tol,
        "mass_tol": cfg.spectrum_mass_tol,
        "slope_tol": cfg.spectrum_slope_tol,
    }
    res.measured = {
        "a": list(a),
        "a_margin": margin,
        "J0": J0,
        "beta": beta.tolist(),
        "max_interior_deviation": max_dev,
        "interior_covered": covered,
        "max_upper_excess": max_excess,
        "mass_below": mass,
        "pure_g_slope": slope,
        "interior": list(zip(interior.tolist(), est_in.dhat.tolist())),
    }
    ok = np.isfinite(est_in.dhat)
    if ok.sum() >= 2:
        res.fits["interior_line"] = linear_fit(interior[ok], est_in.dhat[ok])
    res.passed = (
        covered
        and max_dev <= cfg.spectrum_tol
        and max_excess <= cfg.spectrum_upper_tol
        and mass <= cfg.spectrum_mass_tol
        and abs(slope / p - 1.0) <= cfg.spectrum_slope_tol
    )
    res.tables["spectrum"] = (["h", "dhat"], [(float(h), float(v)) for h, v in zip(est.h, est.dhat) if np.isfinite(v)])
    return res


# ---------------------------------------------------------------------------
# Hoelder estimator


def cone_field(d: int, j_max: int, x0, h0: float, seed: int = 0) -> TraceField:
    """Coefficients ``~ 2^{-h0 j}`` on the cone ``|2^j x0 - k| <= 1`` over a weaker background.

    Cone values carry a multiplicative jitter in ``[0.75, 1.25]``; the
    background is ``2^{-(h0 + 0.5) j}`` times a uniform draw.
    """
    rng = np.random.default_rng(seed)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    tf = TraceField(d, (0.0,), j_max, {})
    for j in range(1, j_max + 1):
        from .fields import all_positions

        K = all_positions(j, d)
        n = 2.0**j
        off = np.abs(np.mod(x0[None, :] * n - K + n / 2, n) - n / 2).max(axis=1)
        vals = 2.0 ** (-(h0 + 0.5) * j) * rng.random(len(K))
        on = off <= 1.0
        vals[on] = 2.0 ** (-h0 * j) * rng.uniform(0.75, 1.25, on.sum())
        tf.bands[(j, (1 << d) - 1)] = vals
    return tf


def probe_saturated_field(d: int, j_max: int, s: float, p: float) -> TraceField:
    """``d_lambda = 2^{(d/p - s) j} 2^{-(d/p) J}`` with ``J`` the irreducible level of ``k 2^-j``.

    The coefficients of the traced probe function with the logarithmic
    factor and the slice factor removed.
    """
    from .fields import all_positions, irreducible_level

    tf = TraceField(d, (0.0,), j_max, {})
    for j in range(1, j_max + 1):
        J = irreducible_level(j, all_positions(j, d))
        tf.bands[(j, (1 << d) - 1)] = np.where(J > 0, 2.0 ** ((d / p - s) * j - (d / p) * J), 0.0)
    return tf


def exp_holder(cfg: ExperimentConfig, ctx: Optional[Context] = None) -> CheckResult:
    ctx = ctx or Context(cfg)
    res = CheckResult("holder", True)
    res.tolerances = {"calibration_tol": cfg.holder_tol, "alpha_tol": cfg.holder_alpha_tol}
    x0s = sobol(cfg.holder_points, cfg.d, cfg.seed + 23)
    worst = 0.0
    rows = []
    for h0 in cfg.holder_h0:
        for n, x0 in enumerate(x0s):
            tf = cone_field(cfg.d, cfg.j_max, x0, h0, cfg.seed + n)
            est = estimate_holder(tf, x0)
            worst = max(worst, abs(est.h - h0))
            rows.append(("cone", h0, n, est.h, est.r2))
    res.measured["calibration_max_error"] = worst
    # probe-saturated coefficients: points of X^alpha are at most H(alpha) regular
    tg = probe_saturated_field(cfg.d, cfg.j_max, cfg.s, cfg.p)
    rng = np.random.default_rng(cfg.seed + 31)
    excess = {}
    for alpha in cfg.alpha_grid:
        H = h_alpha(alpha, cfg.s, cfg.d, cfg.p)
        tested = 0
        worst_a = -math.inf
        for _ in range(4 * cfg.holder_points):
            if tested >= cfg.holder_points:
                break
            coords, _w = dyadic_point(alpha, cfg.d, rng, cfg.classify_depth)
            if not classify_dyadic(coords, alpha, cfg.classify_depth).accepted:
                continue
            est = estimate_holder(tg, [float(c) for c in coords], method="liminf")
            worst_a = max(worst_a, est.h - H)
            rows.append(("probe", alpha, tested, est.h, est.r2))
            tested += 1
        excess[str(alpha)] = {"H": H, "max_excess": worst_a, "points": tested}
    res.measured["alpha_check"] = excess
    alpha_ok = all(v["points"] > 0 and v["max_excess"] <= cfg.holder_alpha_tol for v in excess.values())
    res.passed = worst <= cfg.holder_tol and alpha_ok
    res.tables["estimates"] = (["kind", "parameter", "index", "h_hat", "r2"], rows)
    return res


# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "protr1": exp_protr1,
    "trace-decay": exp_trace_decay,
    "lower-bound": exp_lower_bound,
    "volume-bound": exp_volume_bound,
    "spectrum-line": exp_spectrum_line,
    "holder": exp_holder,
}


def _run_one(name: str, cfg: ExperimentConfig) -> CheckResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _timed(name, lambda: EXPERIMENTS[name](cfg, Context(cfg)))


def run_all(cfg: ExperimentConfig, names=None, jobs: int = 1) -> ExperimentReport:
    """Run the selected experiments (all by default) and aggregate them."""
    cfg.validate(probes=True)
    names = list(EXPERIMENTS) if names is None else list(names)
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise ParameterError(f"unknown experiments: {unknown}")
    started = datetime.now(timezone.utc).isoformat()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, names, [cfg] * len(names)))
    else:
        results = [_run_one(n, cfg) for n in names]
    report = ExperimentReport(cfg.to_dict(), results)
    report.timing = {
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "runtimes": {r.name: r.runtime for r in results},
    }
    return report
