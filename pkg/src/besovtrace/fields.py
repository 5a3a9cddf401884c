"""Multiscale coefficient fields on the torus and the Besov quasi-norm.

Indices are ``(j, k, lmask)``: scale ``j >= 1``, position ``k`` in
``{0..2^j-1}^dim`` and a bitmask whose bit ``i`` is the type ``l_i`` of
coordinate ``i``.  For a field on ``T^D`` traced along ``T^d``, the first ``d``
coordinates are the kept ones and the last ``d' = D - d`` are frozen.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _kernels_py, kernels
from .errors import FormatError, ParameterError
from .wavelets import WaveletSystem

_BCF_MAGIC = b"BCF1"
_BCF_HEADER = "<4sIIdddQ"
DENSE_FILL = 0.25


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    q: float
    dim: int

    def __post_init__(self):
        if not self.p > 0:
            raise ParameterError(f"p must be positive, got {self.p}")
        if not self.q > 0:
            raise ParameterError(f"q must be positive (inf allowed), got {self.q}")
        if self.dim < 1:
            raise ParameterError("dim must be >= 1")

    @property
    def gap(self) -> float:
        """``s - dim/p``; positive for spaces embedded in the continuous functions."""
        return self.s - self.dim / self.p

    def require_gap(self):
        if not self.gap > 0:
            raise ParameterError(f"need s > dim/p, got s={self.s}, dim/p={self.dim / self.p}")
        return self

    def with_dim(self, dim: int) -> "BesovParams":
        return BesovParams(self.s, self.p, self.q, dim)


@dataclass(frozen=True)
class IrreducibleIndex:
    J: int
    K: tuple
    flagged: bool = False


def _valuation(k: np.ndarray, j: int) -> np.ndarray:
    """2-adic valuation of each entry, with ``v(0) = j``."""
    k = np.asarray(k, dtype=np.int64)
    low = k & -k
    v = np.where(k == 0, j, np.log2(np.where(low == 0, 1, low)).astype(np.int64))
    return np.minimum(v, j)


def irreducible_level(j: int, K) -> np.ndarray:
    """Vectorized irreducible level ``J`` of ``k 2^-j`` for rows of ``K`` (0 for the origin)."""
    K = np.atleast_2d(np.asarray(K, dtype=np.int64))
    v = _valuation(K, j).min(axis=1)
    return j - v


def irreducible(j: int, k) -> IrreducibleIndex:
    """Lowest-terms form ``(J, K)`` of the dyadic point ``k 2^-j``.

    The zero vector has no odd coordinate; it is returned as ``J = 0`` and flagged.
    """
    kk = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if j < 0 or np.any(kk < 0) or np.any(kk >= 2**j):
        raise ParameterError(f"k={k!r} is not in Z_{j}")
    if np.all(kk == 0):
        return IrreducibleIndex(0, tuple(int(c) for c in kk), True)
    J = int(irreducible_level(j, kk[None, :])[0])
    K = tuple(int(c) >> (j - J) for c in kk)
    return IrreducibleIndex(J, K, False)


def split_mask(lmask: int, d: int) -> tuple[int, int]:
    """Split a bitmask into the parts for the first ``d`` and the remaining coordinates."""
    return lmask & ((1 << d) - 1), lmask >> d


def all_positions(j: int, dim: int) -> np.ndarray:
    """Every ``k`` in ``Z_j^dim`` as rows, in row-major order."""
    if dim == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([np.arange(2**j, dtype=np.int64)] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _linear(K: np.ndarray, j: int) -> np.ndarray:
    K = np.asarray(K, dtype=np.int64)
    out = np.zeros(K.shape[0], dtype=np.int64)
    for c in range(K.shape[1]):
        out = (out << j) | K[:, c]
    return out


def _unlinear(idx: np.ndarray, j: int, dim: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    cols = []
    mask = (1 << j) - 1
    for c in range(dim):
        cols.append((idx >> (j * (dim - 1 - c))) & mask)
    return np.stack(cols, axis=1) if cols else np.zeros((len(idx), 0), dtype=np.int64)


def _tensor_weights(per_coord):
    """Cartesian product of per-coordinate ``(k, w)`` lists -> ``(K, W)``."""
    if not per_coord:
        return np.zeros((1, 0), dtype=np.int64), np.ones(1)
    ks = [k for k, _ in per_coord]
    ws = [w for _, w in per_coord]
    if any(len(k) == 0 for k in ks):
        return np.zeros((0, len(ks)), dtype=np.int64), np.zeros(0)
    grids = np.meshgrid(*ks, indexing="ij")
    K = np.stack([g.ravel() for g in grids], axis=1)
    W = ws[0]
    for w in ws[1:]:
        W = np.multiply.outer(W, w)
    return K, np.asarray(W, dtype=float).ravel()


class CoeffField:
    """Abstract coefficient field ``lambda -> c_lambda`` up to scale ``j_max``."""

    dim: int
    j_max: int
    params: Optional[BesovParams]

    def bands(self) -> list[tuple[int, int]]:
        """Bands ``(j, lmask)`` that may hold nonzero coefficients."""
        return [(j, m) for j in range(1, self.j_max + 1) for m in range(1, 2**self.dim)]

    def values(self, j: int, lmask: int, K) -> np.ndarray:
        raise NotImplementedError

    def entries(self, j: int, lmask: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero coefficients of one band as ``(K, values)``."""
        if j * self.dim > 26:
            raise ParameterError(f"band at j={j} in dimension {self.dim} is too large to enumerate")
        K = all_positions(j, self.dim)
        v = self.values(j, lmask, K)
        keep = v != 0.0
        return K[keep], v[keep]

    def scale_energy(self, j: int, p: float) -> float:
        """``sum_{k,l} |c_lambda|^p`` at scale ``j``."""
        total = 0.0
        for jj, m in self.bands():
            if jj == j:
                _, v = self.entries(j, m)
                total += float(np.sum(np.abs(v) ** p))
        return total

    def trace_block(self, j: int, lmask: int, Kd, Kp, W) -> np.ndarray:
        """``out[n] = sum_m W[m] c_{(j, (Kd[n], Kp[m]), lmask)}``."""
        Kd = np.asarray(Kd, dtype=np.int64)
        Kp = np.asarray(Kp, dtype=np.int64)
        n, m = Kd.shape[0], Kp.shape[0]
        if n == 0 or m == 0:
            return np.zeros(n)
        full = np.concatenate([np.repeat(Kd, m, axis=0), np.tile(Kp, (n, 1))], axis=1)
        vals = self.values(j, lmask, full).reshape(n, m)
        return vals @ np.asarray(W, dtype=float)

    def materialize(self) -> "SparseField":
        bands = {}
        for j, m in self.bands():
            K, v = self.entries(j, m)
            if len(v):
                bands[(j, m)] = (K, v)
        return SparseField.from_bands(self.dim, self.j_max, bands, self.params)

    # linear structure
    def __add__(self, other: "CoeffField") -> "LinearCombination":
        return LinearCombination([(1.0, self), (1.0, other)])

    def __mul__(self, t: float) -> "LinearCombination":
        return LinearCombination([(float(t), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class SparseField(CoeffField):
    """Explicitly stored coefficients; a band is dense when more than a quarter full."""

    def __init__(self, dim: int, j_max: int, params: Optional[BesovParams] = None):
        if dim < 1 or j_max < 0:
            raise ParameterError("invalid field shape")
        self.dim = dim
        self.j_max = j_max
        self.params = params
        self._bands: dict[tuple[int, int], tuple] = {}

    @classmethod
    def from_bands(cls, dim, j_max, bands: dict, params=None) -> "SparseField":
        out = cls(dim, j_max, params)
        for (j, m), (K, v) in bands.items():
            out._set_band(j, m, np.asarray(K, dtype=np.int64).reshape(-1, dim), np.asarray(v, dtype=float))
        return out

    @classmethod
    def from_entries(cls, dim, j_max, entries: Iterable, params=None) -> "SparseField":
        """Build from ``(j, k, lmask, value)`` tuples; repeated indices are summed."""
        grouped: dict = {}
        for j, k, m, val in entries:
            grouped.setdefault((int(j), int(m)), ([], []))
            grouped[(int(j), int(m))][0].append(np.atleast_1d(k))
            grouped[(int(j), int(m))][1].append(float(val))
        bands = {key: (np.array(ks), np.array(vs)) for key, (ks, vs) in grouped.items()}
        return cls.from_bands(dim, j_max, bands, params)

    def _set_band(self, j, m, K, v):
        if not 1 <= j <= self.j_max:
            raise ParameterError(f"scale {j} outside 1..{self.j_max}")
        if not 1 <= m < 2**self.dim:
            raise ParameterError(f"lmask {m} is not a wavelet type in dimension {self.dim}")
        if K.shape[1] != self.dim or np.any(K < 0) or np.any(K >= 2**j):
            raise ParameterError(f"positions out of range for scale {j}")
        idx = _linear(K, j)
        uniq, inv = np.unique(idx, return_inverse=True)
        vals = np.bincount(inv, weights=v, minlength=len(uniq))
        keep = vals != 0.0
        uniq, vals = uniq[keep], vals[keep]
        if len(uniq) == 0:
            self._bands.pop((j, m), None)
            return
        size = 2 ** (j * self.dim)
        if len(uniq) > DENSE_FILL * size:
            dense = np.zeros(size)
            dense[uniq] = vals
            self._bands[(j, m)] = ("dense", dense)
        else:
            self._bands[(j, m)] = ("sparse", uniq, vals)

    def bands(self):
        return sorted(self._bands)

    def is_dense(self, j, m) -> bool:
        return self._bands[(j, m)][0] == "dense"

    def entries(self, j, m):
        band = self._bands.get((j, m))
        if band is None:
            return np.zeros((0, self.dim), dtype=np.int64), np.zeros(0)
        if band[0] == "dense":
            idx = np.flatnonzero(band[1])
            vals = band[1][idx]
        else:
            idx, vals = band[1], band[2]
        return _unlinear(idx, j, self.dim), vals.copy()

    def values(self, j, m, K):
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.dim)
        band = self._bands.get((j, m))
        if band is None:
            return np.zeros(len(K))
        idx = _linear(K, j)
        if band[0] == "dense":
            return band[1][idx]
        uniq, vals = band[1], band[2]
        pos = np.searchsorted(uniq, idx)
        pos = np.minimum(pos, len(uniq) - 1)
        return np.where(uniq[pos] == idx, vals[pos], 0.0)

    def trace_block(self, j, m, Kd, Kp, W):
        Kd = np.asarray(Kd, dtype=np.int64)
        Kp = np.asarray(Kp, dtype=np.int64)
        d = Kd.shape[1]
        K, v = self.entries(j, m)
        if len(v) == 0 or len(Kp) == 0:
            return np.zeros(Kd.shape[0])
        # repeated rows: merge weights of equal k', broadcast back over equal k
        lp, inv_p = np.unique(_linear(Kp, j), return_inverse=True)
        w = np.bincount(inv_p, weights=np.asarray(W, dtype=float), minlength=len(lp))
        ld, inv_d = np.unique(_linear(Kd, j), return_inverse=True)
        ek_p, ek_d = _linear(K[:, d:], j), _linear(K[:, :d], j)
        ip = np.minimum(np.searchsorted(lp, ek_p), len(lp) - 1)
        id_ = np.minimum(np.searchsorted(ld, ek_d), len(ld) - 1)
        hit = (lp[ip] == ek_p) & (ld[id_] == ek_d)
        out = np.zeros(len(ld))
        np.add.at(out, id_[hit], (v * w[ip])[hit])
        return out[inv_d.ravel()]

    def scale_energy(self, j, p):
        total = 0.0
        for (jj, m) in self._bands:
            if jj == j:
                total += float(np.sum(np.abs(self.entries(j, m)[1]) ** p))
        return total

    def count(self) -> int:
        return sum(len(self.entries(j, m)[1]) for j, m in self._bands)

    def scaled(self, t: float) -> "SparseField":
        bands = {key: (K, t * v) for key in self._bands for K, v in [self.entries(*key)]}
        return SparseField.from_bands(self.dim, self.j_max, bands, self.params)


class RandomField(CoeffField):
    """Rademacher field ``c = xi * j^-(2/q + delta) * 2^{-s j}``, generated on demand.

    Signs come from a counter-based hash of ``(seed, j, lmask, k)``, so any
    coefficient can be evaluated without materializing the field, and the
    same seed always reproduces the same field bit for bit.
    """

    def __init__(self, params: BesovParams, j_max: int, seed: int = 0, delta: float = 0.01):
        self.params = params
        self.dim = params.dim
        self.j_max = j_max
        self.seed = int(seed)
        self.delta = float(delta)

    def amplitude(self, j: int) -> float:
        inv_q = 0.0 if math.isinf(self.params.q) else 1.0 / self.params.q
        return float(j ** -(2 * inv_q + self.delta) * 2.0 ** (-self.params.s * j))

    def values(self, j, m, K):
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.dim)
        if not (1 <= j <= self.j_max and 1 <= m < 2**self.dim):
            return np.zeros(len(K))
        return self.amplitude(j) * kernels.rademacher(self.seed, j, m, K)

    def trace_block(self, j, m, Kd, Kp, W):
        Kd = np.asarray(Kd, dtype=np.int64)
        if not (1 <= j <= self.j_max and 1 <= m < 2**self.dim) or len(W) == 0:
            return np.zeros(Kd.shape[0])
        return self.amplitude(j) * kernels.signed_block_sum(self.seed, j, m, Kd, Kp, W)

    def scale_energy(self, j, p):
        if not 1 <= j <= self.j_max:
            return 0.0
        return (2**self.dim - 1) * 2.0 ** (j * self.dim) * self.amplitude(j) ** p


class IntermittentField(CoeffField):
    """Random field carried by a sparse set of frozen columns.

    For a split ``R^D = R^d x R^{d'}`` each frozen position ``k'`` at scale
    ``j`` is kept with probability ``2^{-beta j d'}``; kept columns carry
    signs times ``j^-(2/q + delta) 2^{(beta d'/p - s) j}``, the rest are 0.
    Expected per-scale energy matches :class:`RandomField`, but a slice
    ``x' = a`` sees either nothing or a column much larger than average.
    """

    def __init__(self, params: BesovParams, d: int, j_max: int, seed: int = 0, beta: float = 0.5, delta: float = 0.01):
        if not 1 <= d < params.dim:
            raise ParameterError(f"need 1 <= d < D, got d={d}, D={params.dim}")
        if not 0 <= beta <= 1:
            raise ParameterError("beta must lie in [0, 1]")
        self.params = params
        self.dim = params.dim
        self.d = d
        self.j_max = j_max
        self.seed = int(seed)
        self.beta = float(beta)
        self.delta = float(delta)

    def amplitude(self, j: int) -> float:
        inv_q = 0.0 if math.isinf(self.params.q) else 1.0 / self.params.q
        dp = self.dim - self.d
        return float(j ** -(2 * inv_q + self.delta) * 2.0 ** ((self.beta * dp / self.params.p - self.params.s) * j))

    def selected(self, j: int, Kp) -> np.ndarray:
        Kp = np.asarray(Kp, dtype=np.int64).reshape(-1, self.dim - self.d)
        u = _kernels_py.uniform(self.seed ^ 0x5F3759DF, j, 0, Kp)
        return u < 2.0 ** (-self.beta * j * (self.dim - self.d))

    def values(self, j, m, K):
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.dim)
        if not (1 <= j <= self.j_max and 1 <= m < 2**self.dim):
            return np.zeros(len(K))
        keep = self.selected(j, K[:, self.d :])
        return np.where(keep, self.amplitude(j) * kernels.rademacher(self.seed, j, m, K), 0.0)

    def trace_block(self, j, m, Kd, Kp, W):
        Kd = np.asarray(Kd, dtype=np.int64)
        if not (1 <= j <= self.j_max and 1 <= m < 2**self.dim) or len(W) == 0:
            return np.zeros(Kd.shape[0])
        keep = self.selected(j, Kp)
        if not keep.any():
            return np.zeros(Kd.shape[0])
        Kp = np.asarray(Kp, dtype=np.int64)[keep]
        W = np.asarray(W, dtype=float)[keep]
        return self.amplitude(j) * kernels.signed_block_sum(self.seed, j, m, Kd, Kp, W)

    def scale_energy(self, j, p):
        if not 1 <= j <= self.j_max:
            return 0.0
        if j * (self.dim - self.d) > 26:
            raise ParameterError("too many frozen columns to count")
        n_cols = int(self.selected(j, all_positions(j, self.dim - self.d)).sum())
        return (2**self.dim - 1) * 2.0 ** (j * self.d) * n_cols * self.amplitude(j) ** p


class LinearCombination(CoeffField):
    """``sum_i t_i f_i`` evaluated lazily."""

    def __init__(self, terms):
        flat = []
        for t, f in terms:
            if isinstance(f, LinearCombination):
                flat.extend((t * tt, ff) for tt, ff in f.terms)
            else:
                flat.append((float(t), f))
        dims = {f.dim for _, f in flat}
        if len(dims) != 1:
            raise ParameterError("cannot combine fields of different dimensions")
        self.terms = flat
        self.dim = dims.pop()
        self.j_max = max(f.j_max for _, f in flat)
        self.params = next((f.params for _, f in flat if f.params is not None), None)

    def bands(self):
        out = set()
        for _, f in self.terms:
            out.update(f.bands())
        return sorted(out)

    def values(self, j, m, K):
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.dim)
        out = np.zeros(len(K))
        for t, f in self.terms:
            if t != 0.0:
                out += t * f.values(j, m, K)
        return out

    def trace_block(self, j, m, Kd, Kp, W):
        out = np.zeros(np.asarray(Kd).shape[0])
        for t, f in self.terms:
            if t != 0.0:
                out += t * f.trace_block(j, m, Kd, Kp, W)
        return out


# ---------------------------------------------------------------------------
# norms


def per_scale_energy(field: CoeffField, p: float, s: float) -> np.ndarray:
    """``A_j = 2^{j(sp - dim)} sum |c|^p`` for ``j = 1..j_max`` (index 0 holds ``j = 1``)."""
    js = np.arange(1, field.j_max + 1)
    raw = np.array([field.scale_energy(int(j), p) for j in js])
    return 2.0 ** (js * (s * p - field.dim)) * raw


def _combine(A: np.ndarray, p: float, q: float) -> float:
    if len(A) == 0:
        return 0.0
    a = A ** (1.0 / p)
    if math.isinf(q):
        return float(a.max())
    return float(np.sum(a**q) ** (1.0 / q))


def besov_quasinorm(field: CoeffField, params: BesovParams) -> float:
    if field.dim != params.dim:
        raise ParameterError(f"field dimension {field.dim} does not match params.dim={params.dim}")
    return _combine(per_scale_energy(field, params.p, params.s), params.p, params.q)


@dataclass(frozen=True)
class EmbeddingCheck:
    norm_q_fine: float  # ||f||_{s,p,q'}
    norm_q: float  # ||f||_{s,p,q}
    norm_shifted: float  # ||f||_{s-eps,p,q}
    shifted_bound: float  # c * ||f||_{s,p,q'}

    @property
    def holds(self) -> bool:
        tol = 1e-12 * max(1.0, self.norm_q, self.shifted_bound)
        return self.norm_q_fine <= self.norm_q + tol and self.norm_shifted <= self.shifted_bound + tol


def embedding_check(field: CoeffField, s: float, p: float, q: float, q_fine: float, eps: float) -> EmbeddingCheck:
    """Norms witnessing ``B^s_{p,q} in B^s_{p,q'} in B^{s-eps}_{p,q}`` for ``q < q'``."""
    if not q < q_fine:
        raise ParameterError("need q < q'")
    if not eps > 0:
        raise ParameterError("need eps > 0")
    A = per_scale_energy(field, p, s)
    A_eps = per_scale_energy(field, p, s - eps)
    n_fine = _combine(A, p, q_fine)
    n_q = _combine(A, p, q)
    n_shift = _combine(A_eps, p, q)
    # (sum_j 2^{-eps j q})^{1/q} bounds the shifted norm by the sup over scales
    c = (2.0 ** (-eps * q) / (1.0 - 2.0 ** (-eps * q))) ** (1.0 / q)
    return EmbeddingCheck(n_fine, n_q, n_shift, c * n_fine)


def synthesize_random_field(params: BesovParams, j_max: int, seed: int = 0, delta: float = 0.01) -> RandomField:
    params.require_gap()
    if j_max < 1:
        raise ParameterError("j_max must be >= 1")
    return RandomField(params, j_max, seed, delta)


# ---------------------------------------------------------------------------
# synthesis


def wavelet_weights(system: WaveletSystem, j: int, lmask: int, point) -> tuple[np.ndarray, np.ndarray]:
    """Tensor weights ``prod_i Psi^{l_i}(2^j x_i - k_i)`` (periodized) at ``point``."""
    per = [system.periodized_weights((lmask >> i) & 1, j, float(x)) for i, x in enumerate(point)]
    return _tensor_weights(per)


def reconstruct_at(field: CoeffField, system: WaveletSystem, point) -> float:
    """Truncated wavelet series ``sum c_lambda Psi_lambda(point)``."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if len(point) != field.dim:
        raise ParameterError(f"point has {len(point)} coordinates, field has dim {field.dim}")
    empty = np.zeros((1, 0), dtype=np.int64)
    total = 0.0
    for j, m in field.bands():
        K, W = wavelet_weights(system, j, m, point)
        if len(W):
            total += float(field.trace_block(j, m, empty, K, W)[0])
    return total


# ---------------------------------------------------------------------------
# persistence


def _record_dtype(dim: int, extra_band: bool = False) -> np.dtype:
    fields = [("j", "u1"), ("k", "<u4", (dim,)), ("l", "<u2")]
    if extra_band:
        fields.append(("band", "u1"))
    fields.append(("value", "<f8"))
    return np.dtype(fields)


def _pack_header(dim, j_max, params, count) -> bytes:
    s, p, q = (params.s, params.p, params.q) if params is not None else (math.nan,) * 3
    return struct.pack(_BCF_HEADER, _BCF_MAGIC, dim, j_max, s, p, q, count)


def _unpack_header(data: bytes):
    if len(data) < struct.calcsize(_BCF_HEADER):
        raise FormatError("file too short for a BCF1 header")
    magic, dim, j_max, s, p, q, count = struct.unpack_from(_BCF_HEADER, data, 0)
    if magic != _BCF_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    params = None if math.isnan(s) else BesovParams(s, p, q, dim)
    return dim, j_max, params, count, struct.calcsize(_BCF_HEADER)


def save_field(field: CoeffField, path) -> None:
    sparse = field if isinstance(field, SparseField) else field.materialize()
    chunks = []
    for j, m in sparse.bands():
        K, v = sparse.entries(j, m)
        rec = np.zeros(len(v), dtype=_record_dtype(field.dim))
        rec["j"], rec["k"], rec["l"], rec["value"] = j, K, m, v
        chunks.append(rec)
    recs = np.concatenate(chunks) if chunks else np.zeros(0, dtype=_record_dtype(field.dim))
    with open(path, "wb") as fh:
        fh.write(_pack_header(field.dim, field.j_max, field.params, len(recs)))
        fh.write(recs.tobytes())


def load_field(path) -> SparseField:
    with open(path, "rb") as fh:
        data = fh.read()
    dim, j_max, params, count, off = _unpack_header(data)
    dt = _record_dtype(dim)
    if len(data) != off + count * dt.itemsize:
        raise FormatError("record count does not match file length")
    recs = np.frombuffer(data, dtype=dt, count=count, offset=off)
    bands = {}
    for j, m in sorted(set(zip(recs["j"].tolist(), recs["l"].tolist()))):
        sel = (recs["j"] == j) & (recs["l"] == m)
        bands[(j, m)] = (recs["k"][sel].astype(np.int64), recs["value"][sel].astype(float))
    return SparseField.from_bands(dim, j_max, bands, params)


def write_energy_csv(field: CoeffField, path, p: float, s: float) -> None:
    A = per_scale_energy(field, p, s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "A_j"])
        for j, a in enumerate(A, start=1):
            w.writerow([j, repr(float(a))])
