"""Pointwise regularity from trace coefficients.

Cone leaders and Hoelder regression, dyadic approximation witnesses, the
set where ``|G_{d'}(2^j a)|`` stays above ``j^{-2d'}``, the pointwise
coefficient test, and a coarse-grained spectrum estimator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .fields import _linear, _tensor_weights
from .trace import TraceField
from .wavelets import PeriodizedG

H_CAP = 20.0


def _cone_positions(x: np.ndarray, j: int, L: float) -> np.ndarray:
    """Positions ``k`` with ``|x - k 2^-j|_inf <= L 2^-j`` on the torus."""
    n = 2**j
    per = []
    for xi in x:
        t = xi * n
        lo, hi = math.ceil(t - L), math.floor(t + L)
        ks = np.unique(np.mod(np.arange(lo, hi + 1, dtype=np.int64), n))
        per.append((ks, np.ones(len(ks))))
    K, _ = _tensor_weights(per)
    return K


def _torus_offset(x: np.ndarray, K: np.ndarray, j: int) -> np.ndarray:
    """``|2^j x - k|`` measured on the torus, max over coordinates."""
    n = 2.0**j
    diff = np.abs(np.mod(x[None, :] * n - K + n / 2, n) - n / 2)
    return diff.max(axis=1)


@dataclass
class ConeLeaders:
    x: tuple
    L: float
    scales: np.ndarray
    values: np.ndarray
    empty: np.ndarray

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "L": self.L,
            "scales": self.scales.tolist(),
            "values": self.values.tolist(),
            "empty": self.empty.tolist(),
        }


def cone_leaders(tf: TraceField, x, L: float = 2.0, j_range: Optional[tuple] = None) -> ConeLeaders:
    """``M_j = max |d_lambda|`` over both bands inside the width-``L`` cone above ``x``."""
    if L < 1:
        raise ParameterError("cone width L must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != tf.d:
        raise ParameterError(f"x must have {tf.d} coordinates")
    j1, j2 = j_range if j_range is not None else (1, tf.j_max)
    js = np.arange(j1, j2 + 1)
    M = np.zeros(len(js))
    for n, j in enumerate(js):
        K = _cone_positions(x, int(j), L)
        idx = _linear(K, int(j))
        best = 0.0
        for (jj, _), arr in tf.bands.items():
            if jj == j:
                best = max(best, float(np.max(np.abs(arr[idx]))))
        M[n] = best
    return ConeLeaders(tuple(x.tolist()), float(L), js, M, M == 0.0)


@dataclass
class HolderEstimate:
    h: float
    window: tuple
    r2: float
    method: str = "cone-leader regression"
    capped: bool = False
    intercept: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def regress_leaders(leaders: ConeLeaders, window: Optional[tuple] = None, h_cap: float = H_CAP) -> HolderEstimate:
    js, M = leaders.scales, leaders.values
    if window is None:
        lo, hi = int(js[0]) + 2, int(js[-1]) - 2
    else:
        lo, hi = window
    sel = (js >= lo) & (js <= hi)
    jw, Mw = js[sel], M[sel]
    if len(jw) == 0:
        raise InsufficientDataError("empty regression window")
    if np.all(Mw < 2.0 ** (-h_cap * lo)):
        return HolderEstimate(h_cap, (lo, hi), 1.0, capped=True)
    good = Mw > 0
    if good.sum() < 5:
        raise InsufficientDataError(f"only {int(good.sum())} scales with nonzero leaders in [{lo}, {hi}]")
    y = np.log2(Mw[good])
    xj = jw[good].astype(float)
    slope, icpt = np.polyfit(xj, y, 1)
    resid = y - (slope * xj + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    h = float(np.clip(-slope, 0.0, h_cap))
    return HolderEstimate(h, (lo, hi), r2, capped=h >= h_cap, intercept=float(icpt))


def liminf_leaders(leaders: ConeLeaders, window: Optional[tuple] = None, h_cap: float = H_CAP) -> HolderEstimate:
    """``min_j -log2 M_j / j`` over the window: the lower envelope of the leader ratios.

    The regression slope averages over oscillations of ``M_j``; at points
    with lacunary dyadic approximations it tracks the mean rate instead of
    the liminf, and this estimate is the one to compare with upper bounds.
    """
    js, M = leaders.scales, leaders.values
    lo, hi = window if window is not None else (int(js[0]) + 2, int(js[-1]) - 2)
    sel = (js >= lo) & (js <= hi) & (M > 0)
    if sel.sum() < 5:
        if np.all(M[(js >= lo) & (js <= hi)] == 0):
            return HolderEstimate(h_cap, (lo, hi), 1.0, "cone-leader liminf", capped=True)
        raise InsufficientDataError(f"only {int(sel.sum())} scales with nonzero leaders in [{lo}, {hi}]")
    ratio = -np.log2(M[sel]) / js[sel]
    h = float(np.clip(np.min(ratio), 0.0, h_cap))
    return HolderEstimate(h, (lo, hi), float("nan"), "cone-leader liminf", capped=h >= h_cap)


def estimate_holder(
    tf: TraceField,
    x,
    L: float = 2.0,
    j_range: Optional[tuple] = None,
    h_cap: float = H_CAP,
    method: str = "regression",
) -> HolderEstimate:
    """Slope of ``log2 M_j`` against ``-j``, dropping the two coarsest and two finest scales.

    ``method="liminf"`` returns the smallest ratio ``-log2 M_j / j`` in the
    same window instead.
    """
    leaders = cone_leaders(tf, x, L, j_range)
    if method == "regression":
        return regress_leaders(leaders, None, h_cap)
    if method == "liminf":
        return liminf_leaders(leaders, None, h_cap)
    raise ParameterError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# dyadic approximation


@dataclass
class DyadicWitness:
    x: tuple
    alpha: float
    witnesses: list
    accepted: bool
    dyadic: bool = False
    j_max: int = 0
    hits: int = 0

    def to_json(self) -> str:
        d = asdict(self)
        d["alpha"] = "inf" if math.isinf(self.alpha) else self.alpha
        return json.dumps(d)


def _pow2_le(diff: Fraction, alpha: float, J: int) -> bool:
    """``diff <= 2^{-alpha J}`` without overflow, exact when ``alpha J`` is an integer."""
    e = alpha * J
    if float(e).is_integer():
        return diff <= Fraction(1, 2 ** int(e))
    if diff == 0:
        return True
    return math.log2(diff.numerator) - math.log2(diff.denominator) <= -e


def _torus_gap(x: Fraction, y: Fraction) -> Fraction:
    d = (x - y) % 1
    return min(d, 1 - d)


def _as_fractions(x) -> list:
    if isinstance(x, Fraction):
        return [x % 1]
    if isinstance(x, (list, tuple)) and x and all(isinstance(v, Fraction) for v in x):
        return [v % 1 for v in x]
    return [Fraction(float(v)) % 1 for v in np.atleast_1d(x)]


def classify_dyadic(x, alpha: float, j_max: int) -> DyadicWitness:
    """Scan scales ``1..j_max`` for ``|x - k 2^-j| <= 2^{-alpha j}`` and reduce hits.

    Accepts when the number of scales carrying a hit reaches ``log2 j_max``.
    Arithmetic is exact on the binary value of ``x``; pass ``Fraction``
    coordinates to go beyond double precision.
    """
    if not alpha >= 1:
        raise ParameterError("alpha must be >= 1")
    if j_max < 2:
        raise ParameterError("j_max must be >= 2")
    xs = _as_fractions(x)
    if all((v * 2**j_max).denominator == 1 for v in xs):
        return DyadicWitness(tuple(float(v) for v in xs), math.inf, [], True, True, j_max)
    found: dict = {}
    hits = 0
    for j in range(1, j_max + 1):
        n = 2**j
        ks = [round(v * n) % n for v in xs]
        if all(k == 0 for k in ks):
            continue
        gap = max(_torus_gap(v, Fraction(k, n)) for v, k in zip(xs, ks))
        if not _pow2_le(gap, alpha, j):
            continue
        hits += 1
        # lowest terms of k 2^-j
        v = min((k & -k).bit_length() - 1 for k in ks if k)
        J = j - v
        found.setdefault(J, tuple(k >> v for k in ks))
    wit = [(J, list(found[J])) for J in sorted(found)]
    accepted = hits >= math.log2(j_max)
    return DyadicWitness(tuple(float(v) for v in xs), float(alpha), wit, accepted, False, j_max, hits)


def lacunary_point(alpha: float, n_terms: int, J1: int = 1, K1: int = 1) -> tuple[Fraction, list]:
    """``x = K1 2^-J1 + sum_{n>=2} 2^{-J_n}`` with ``J_{n+1} = ceil(alpha J_n) + 1``.

    Returns the exact value and the irreducible partial sums ``(J_n, [K_n])``,
    each within ``2^{-alpha J_n}`` of ``x``.
    """
    if K1 % 2 == 0 or not 0 < K1 < 2**J1:
        raise ParameterError("K1 must be odd and below 2^J1")
    Js = [J1]
    while len(Js) < n_terms:
        Js.append(math.ceil(alpha * Js[-1]) + 1)
    x = Fraction(K1, 2**J1)
    wit = [(J1, [K1])]
    for J in Js[1:]:
        x += Fraction(1, 2**J)
        wit.append((J, [int(x * 2**J)]))
    return x, wit


# ---------------------------------------------------------------------------
# the slice condition on G


@dataclass
class A1Result:
    accepted: bool
    j_a: Optional[int]
    failures: list
    margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def g_along_scales(G: PeriodizedG, a, js: np.ndarray) -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    t = np.mod(a[None, :] * (2.0 ** np.asarray(js, dtype=float))[:, None], 1.0)
    return np.prod(G.eval1(t), axis=1)


def a1_membership(G: PeriodizedG, a, j_range: tuple) -> A1Result:
    """Smallest ``j_a`` with ``|G_{d'}(2^j a)| > j^{-2d'}`` on all of ``[j_a, j_hi]``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    dp = len(a)
    j_lo, j_hi = j_range
    js = np.arange(j_lo, j_hi + 1)
    vals = np.abs(g_along_scales(G, a, js))
    ok = vals > js.astype(float) ** (-2.0 * dp)
    failures = [int(j) for j in js[~ok]]
    if not ok[-1]:
        return A1Result(False, None, failures, 0.0)
    bad = np.flatnonzero(~ok)
    start = int(js[bad[-1] + 1]) if len(bad) else int(j_lo)
    sel = js >= start
    margin = float(np.min(vals[sel] * js[sel].astype(float) ** (2.0 * dp)))
    return A1Result(True, start, failures, margin)


# ---------------------------------------------------------------------------
# pointwise coefficient test


def holder_candidate_ratio(tf: TraceField, gamma: float, N_const: float, x, j_max: Optional[int] = None) -> float:
    """``max |d_lambda| / (N 2^{-gamma j} (1 + |2^j x - k|)^gamma)`` over stored coefficients."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j_max = tf.j_max if j_max is None else j_max
    worst = 0.0
    for (j, _), arr in tf.bands.items():
        if j > j_max:
            continue
        nz = np.flatnonzero(arr)
        if len(nz) == 0:
            continue
        from .fields import _unlinear

        K = _unlinear(nz, j, tf.d)
        bound = N_const * 2.0 ** (-gamma * j) * (1.0 + _torus_offset(x, K, j)) ** gamma
        worst = max(worst, float(np.max(np.abs(arr[nz]) / bound)))
    return worst


def holder_candidate_test(tf: TraceField, gamma: float, N_const: float, x, j_max: Optional[int] = None) -> bool:
    """True iff every coefficient satisfies ``|d| <= N 2^{-gamma j} (1 + |2^j x - k|)^gamma``."""
    return holder_candidate_ratio(tf, gamma, N_const, x, j_max) <= 1.0


# ---------------------------------------------------------------------------
# spectrum


def wavelet_leaders(tf: TraceField, neighbours: int = 0) -> dict:
    """Leaders per scale: max over both bands and all finer descendants.

    With ``neighbours = 1`` the max also runs over the ``3^d`` adjacent cubes.
    """
    d = tf.d
    out = {tf.j_max: tf.scale_max(tf.j_max).reshape((2**tf.j_max,) * d)}
    for j in range(tf.j_max - 1, 0, -1):
        fine = out[j + 1]
        for axis in range(d):
            shape = fine.shape[:axis] + (fine.shape[axis] // 2, 2) + fine.shape[axis + 1:]
            fine = fine.reshape(shape).max(axis=axis + 1)
        out[j] = np.maximum(tf.scale_max(j).reshape((2**j,) * d), fine)
    if neighbours:
        for j, v in out.items():
            acc = v.copy()
            for axis in range(d):
                base = acc.copy()
                for s in range(1, neighbours + 1):
                    acc = np.maximum(acc, np.maximum(np.roll(base, s, axis), np.roll(base, -s, axis)))
            out[j] = acc
    return {j: v.ravel() for j, v in out.items()}


@dataclass
class SpectrumEstimate:
    h: np.ndarray
    dhat: np.ndarray
    scales: tuple
    bin_width: float
    per_scale: np.ndarray
    fit: np.ndarray
    counts: np.ndarray
    d: int
    exponents: np.ndarray = field(repr=False, default=None)

    def pairs(self) -> list:
        return [(float(h), float(v)) for h, v in zip(self.h, self.dhat) if np.isfinite(v)]

    def mass_below(self, h0: float) -> float:
        """Fraction of finest-scale positions with coarse exponent below ``h0``."""
        e = self.exponents
        return float(np.mean(e < h0)) if e is not None and len(e) else 0.0

    def cumulative(self, h: float) -> float:
        """``log2 #{h_lambda <= h} / j`` at the finest scale."""
        e = self.exponents
        n = int(np.sum(e <= h))
        return math.log2(n) / self.scales[1] if n else -math.inf

    def slope_two_point(self, lo: float = 0.25, hi: float = 0.75) -> float:
        """Slope of the cumulative spectrum between the levels ``lo*d`` and ``hi*d``.

        The two h-values are read off the sorted exponents (inverse form),
        which is insensitive to where bin edges fall.
        """
        e = np.sort(self.exponents)
        j = self.scales[1]
        n1, n2 = int(round(2 ** (lo * self.d * j))), int(round(2 ** (hi * self.d * j)))
        n1, n2 = max(n1, 1), min(n2, len(e))
        if n2 <= n1:
            raise InsufficientDataError("too few exponents for a two-point fit")
        h1, h2 = e[n1 - 1], e[n2 - 1]
        if h2 <= h1:
            return math.inf
        return (math.log2(n2) - math.log2(n1)) / j / (h2 - h1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "dhat"])
            for h, v in zip(self.h, self.dhat):
                w.writerow([f"{h:.6g}", f"{v:.6g}" if np.isfinite(v) else "nan"])

    def to_dict(self) -> dict:
        return {
            "h": self.h.tolist(),
            "dhat": [float(v) if np.isfinite(v) else None for v in self.dhat],
            "scales": list(self.scales),
            "bin_width": self.bin_width,
        }


def estimate_spectrum(
    tf: TraceField,
    j_range: Optional[tuple] = None,
    h_grid: Optional[Sequence[float]] = None,
    bin_width: float = 0.05,
    neighbours: int = 0,
) -> SpectrumEstimate:
    """Coarse-grained histogram of leader exponents ``h_lambda = -log2 L_lambda / j``.

    For each scale the bin counts give ``log2 N_j(h) / j``; the reported
    ``dhat`` is the finest-scale value (clipped at ``d``), the most
    resolved approximation of the large-deviation limit.  ``fit`` holds a
    least-squares line in ``j`` through the per-scale values evaluated at the
    finest scale, kept as a diagnostic.
    """
    j1, j2 = j_range if j_range is not None else (max(1, tf.j_max - 4), tf.j_max)
    leaders = wavelet_leaders(tf, neighbours)
    usable = [j for j in range(1, tf.j_max + 1) if np.any(leaders[j] > 0)]
    if len(usable) < 6:
        raise InsufficientDataError(f"only {len(usable)} scales carry nonzero coefficients")
    if h_grid is None:
        h_grid = np.round(np.arange(0.0, 4.0 + 1e-9, bin_width), 10)
    hs = np.asarray(h_grid, dtype=float)
    scales = np.arange(j1, j2 + 1)
    per = np.full((len(scales), len(hs)), np.nan)
    counts = np.zeros((len(scales), len(hs)), dtype=np.int64)
    fin = None
    for r, j in enumerate(scales):
        Lj = leaders[int(j)]
        e = np.full(len(Lj), np.inf)
        pos = Lj > 0
        e[pos] = -np.log2(Lj[pos]) / j
        lo = np.searchsorted(np.sort(e), hs - bin_width / 2, side="left")
        hi = np.searchsorted(np.sort(e), hs + bin_width / 2, side="left")
        n = hi - lo
        counts[r] = n
        per[r] = np.where(n > 0, np.log2(np.maximum(n, 1)) / j, np.nan)
        if j == j2:
            fin = e[np.isfinite(e)]
    per = np.minimum(per, tf.d)
    dhat = per[-1].copy()
    fit = np.full(len(hs), np.nan)
    for c in range(len(hs)):
        ok = ~np.isnan(per[:, c])
        if ok.sum() >= 3:
            fit[c] = min(np.polyval(np.polyfit(scales[ok], per[ok, c], 1), j2), tf.d)
    return SpectrumEstimate(hs, dhat, (int(j1), int(j2)), float(bin_width), per, fit, counts, tf.d, fin)
