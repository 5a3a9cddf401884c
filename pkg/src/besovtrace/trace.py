"""Restriction of a coefficient field on ``T^D`` to the slice ``x' = a``.

The trace keeps the mixed representation: wavelet bands ``l != 0^d`` collect
every ``l'`` in ``{0,1}^{d'}``, and a scaling band ``l = 0^d`` collects the
``l' != 0^{d'}`` terms.  Nothing is re-expanded onto coarser wavelets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DependencyError, FormatError, ParameterError
from .fields import (
    BesovParams,
    CoeffField,
    SparseField,
    _combine,
    _pack_header,
    _record_dtype,
    _tensor_weights,
    _unpack_header,
    _linear,
    _unlinear,
    all_positions,
    reconstruct_at,
    split_mask,
    wavelet_weights,
)
from .wavelets import WaveletSystem


@dataclass
class TraceField:
    """Dense per-band arrays ``d_lambda(a)``; ``bands[(j, l)]`` has length ``2^{jd}``."""

    d: int
    a: tuple
    j_max: int
    bands: dict = field(default_factory=dict)
    params: Optional[BesovParams] = None

    def band(self, j: int, l: int) -> np.ndarray:
        arr = self.bands.get((j, l))
        return np.zeros(2 ** (j * self.d)) if arr is None else arr

    def coefficient(self, j: int, l: int, k) -> float:
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        return float(self.band(j, l)[_linear(k[None, :], j)[0]])

    def values(self, j: int, l: int, K) -> np.ndarray:
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.d)
        return self.band(j, l)[_linear(K, j)]

    def scale_energy(self, j: int, p: float, scaling: bool = True) -> float:
        total = 0.0
        for (jj, l), arr in self.bands.items():
            if jj == j and (scaling or l != 0):
                total += float(np.sum(np.abs(arr) ** p))
        return total

    def scale_max(self, j: int) -> np.ndarray:
        """Pointwise max of ``|d_lambda|`` over both bands at scale ``j``."""
        out = np.zeros(2 ** (j * self.d))
        for (jj, _), arr in self.bands.items():
            if jj == j:
                np.maximum(out, np.abs(arr), out=out)
        return out

    def wavelet_part(self) -> SparseField:
        """The ``l != 0^d`` bands as an ordinary coefficient field on ``T^d``."""
        bands = {}
        for (j, l), arr in self.bands.items():
            if l != 0:
                idx = np.flatnonzero(arr)
                bands[(j, l)] = (_unlinear(idx, j, self.d), arr[idx])
        return SparseField.from_bands(self.d, self.j_max, bands, self.params)

    def __add__(self, other: "TraceField") -> "TraceField":
        if self.d != other.d or not np.allclose(self.a, other.a, rtol=0, atol=0):
            raise ParameterError("traces taken on different slices")
        out = TraceField(self.d, self.a, max(self.j_max, other.j_max), {}, self.params)
        for key in set(self.bands) | set(other.bands):
            j, l = key
            out.bands[key] = self.band(j, l) + other.band(j, l)
        return out

    def scaled(self, t: float) -> "TraceField":
        return TraceField(self.d, self.a, self.j_max, {k: t * v for k, v in self.bands.items()}, self.params)


def _slice_weights(system: WaveletSystem, j: int, a) -> list:
    return [(system.periodized_weights(0, j, ai), system.periodized_weights(1, j, ai)) for ai in a]


def _check(field: CoeffField, a, d: int, system):
    if system is None:
        raise DependencyError("trace needs a WaveletSystem to evaluate Psi at the slice")
    if not 1 <= d < field.dim:
        raise ParameterError(f"need 1 <= d < D, got d={d}, D={field.dim}")
    a = tuple(float(x) for x in np.atleast_1d(a))
    if len(a) != field.dim - d:
        raise ParameterError(f"offset a must have {field.dim - d} coordinates")
    if any(not 0.0 <= x < 1.0 for x in a):
        raise ParameterError("offset a must lie in [0, 1)^{d'}")
    return a


def trace_coefficients(field: CoeffField, system: WaveletSystem, a, d: int, j: int, l: int, Kd) -> np.ndarray:
    """``d_lambda(a)`` for ``lambda = (j, k, l)`` at the rows ``k`` of ``Kd`` only."""
    a = _check(field, a, d, system)
    Kd = np.asarray(Kd, dtype=np.int64).reshape(-1, d)
    weights = _slice_weights(system, j, a)
    out = np.zeros(len(Kd))
    for jj, m in field.bands():
        if jj != j:
            continue
        lm, lp = split_mask(m, d)
        if lm != l:
            continue
        Kp, W = _tensor_weights([weights[i][(lp >> i) & 1] for i in range(len(a))])
        if len(W):
            out += field.trace_block(j, m, Kd, Kp, W)
    return out


def trace(field: CoeffField, a, d: int, system: WaveletSystem, j_max: Optional[int] = None) -> TraceField:
    """Trace coefficients ``d_lambda(a)`` of ``field`` on every band up to ``j_max``."""
    a = _check(field, a, d, system)
    j_max = field.j_max if j_max is None else min(j_max, field.j_max)
    params = field.params.with_dim(d) if field.params is not None else None
    tf = TraceField(d, a, j_max, {}, params)
    by_scale: dict[int, list[int]] = {}
    for j, m in field.bands():
        if j <= j_max:
            by_scale.setdefault(j, []).append(m)
    for j, masks in sorted(by_scale.items()):
        Kd = all_positions(j, d)
        weights = _slice_weights(system, j, a)
        for m in masks:
            l, lp = split_mask(m, d)
            Kp, W = _tensor_weights([weights[i][(lp >> i) & 1] for i in range(len(a))])
            if len(W) == 0:
                continue
            contrib = field.trace_block(j, m, Kd, Kp, W)
            if (j, l) in tf.bands:
                tf.bands[(j, l)] += contrib
            else:
                tf.bands[(j, l)] = contrib
    return tf


def slice_energy(
    field: CoeffField, system: WaveletSystem, a_points, d: int, j: int, p: float, dense_limit: int = 24
) -> np.ndarray:
    """``sum_{k, l} |d_lambda(a)|^p`` at scale ``j`` (both bands) for each row of ``a_points``.

    When ``j D <= dense_limit`` each band is materialized once as a
    ``(k', k)`` table and every slice becomes a small gather; otherwise the
    field's ``trace_block`` is called per slice.
    """
    a_points = np.asarray(a_points, dtype=float).reshape(len(a_points), -1)
    masks = [m for jj, m in field.bands() if jj == j]
    dp = field.dim - d
    Kd = all_positions(j, d)
    tables = {}
    if j * field.dim <= dense_limit:
        K = all_positions(j, field.dim)
        for m in masks:
            tables[m] = np.ascontiguousarray(field.values(j, m, K).reshape(2 ** (j * d), 2 ** (j * dp)).T)
    out = np.zeros(len(a_points))
    for n, a in enumerate(a_points):
        a = _check(field, a, d, system)
        weights = _slice_weights(system, j, a)
        acc: dict[int, np.ndarray] = {}
        for m in masks:
            l, lp = split_mask(m, d)
            Kp, W = _tensor_weights([weights[i][(lp >> i) & 1] for i in range(dp)])
            if not len(W):
                continue
            if m in tables:
                contrib = W @ tables[m][_linear(Kp, j)]
            else:
                contrib = field.trace_block(j, m, Kd, Kp, W)
            acc[l] = acc[l] + contrib if l in acc else contrib
        out[n] = sum(float(np.sum(np.abs(v) ** p)) for v in acc.values())
    return out


def reconstruct_trace_at(tf: TraceField, system: WaveletSystem, x) -> float:
    """``sum_{j, l in {0,1}^d, k} d_lambda(a) prod_i Psi^{l_i}(2^j x_i - k_i)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != tf.d:
        raise ParameterError(f"x must have {tf.d} coordinates")
    total = 0.0
    for (j, l), arr in tf.bands.items():
        K, W = wavelet_weights(system, j, l, x)
        if len(W):
            total += float(np.dot(arr[_linear(K, j)], W))
    return total


def pointwise_consistency(field: CoeffField, system: WaveletSystem, a, x, tf: Optional[TraceField] = None) -> float:
    """``|f(x, a) - f_a(x)|`` computed through the D-dimensional and the traced series."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if tf is None:
        tf = trace(field, a, len(x), system)
    full = reconstruct_at(field, system, np.concatenate([x, a]))
    return abs(full - reconstruct_trace_at(tf, system, x))


def mixed_besov_norm(tf: TraceField, s: float, p: float, q: float) -> float:
    """Besov quasi-norm with the sum over types extended to ``{0,1}^d``."""
    js = np.arange(1, tf.j_max + 1)
    raw = np.array([tf.scale_energy(int(j), p) for j in js])
    return _combine(2.0 ** (js * (s * p - tf.d)) * raw, p, q)


# ---------------------------------------------------------------------------
# persistence


def save_trace(tf: TraceField, path) -> None:
    dt = _record_dtype(tf.d, extra_band=True)
    chunks = []
    for (j, l), arr in sorted(tf.bands.items()):
        idx = np.flatnonzero(arr)
        rec = np.zeros(len(idx), dtype=dt)
        rec["j"], rec["k"], rec["l"] = j, _unlinear(idx, j, tf.d), l
        rec["band"] = 0 if l == 0 else 1
        rec["value"] = arr[idx]
        chunks.append(rec)
    recs = np.concatenate(chunks) if chunks else np.zeros(0, dtype=dt)
    with open(path, "wb") as fh:
        fh.write(_pack_header(tf.d, tf.j_max, tf.params, len(recs)))
        fh.write(struct.pack("<I", len(tf.a)))
        fh.write(np.asarray(tf.a, dtype="<f8").tobytes())
        fh.write(recs.tobytes())


def load_trace(path) -> TraceField:
    with open(path, "rb") as fh:
        data = fh.read()
    d, j_max, params, count, off = _unpack_header(data)
    (dp,) = struct.unpack_from("<I", data, off)
    off += 4
    a = tuple(np.frombuffer(data, dtype="<f8", count=dp, offset=off).tolist())
    off += 8 * dp
    dt = _record_dtype(d, extra_band=True)
    if len(data) != off + count * dt.itemsize:
        raise FormatError("record count does not match file length")
    recs = np.frombuffer(data, dtype=dt, count=count, offset=off)
    if np.any((recs["band"] == 0) != (recs["l"] == 0)):
        raise FormatError("band flag inconsistent with type bits")
    tf = TraceField(d, a, j_max, {}, params)
    for j, l in sorted(set(zip(recs["j"].tolist(), recs["l"].tolist()))):
        sel = (recs["j"] == j) & (recs["l"] == l)
        arr = np.zeros(2 ** (j * d))
        arr[_linear(recs["k"][sel].astype(np.int64), j)] = recs["value"][sel]
        tf.bands[(j, l)] = arr
    return tf
