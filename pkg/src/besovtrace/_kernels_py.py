"""Pure numpy implementation of the hot kernels (reference and fallback)."""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _prefix(seed, j, lmask):
    h = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    h = _mix(h ^ np.uint64(j))
    return _mix(h ^ np.uint64(lmask))


def _chain(h, cols):
    for c in cols:
        h = _mix(h ^ np.asarray(c, dtype=np.int64).astype(np.uint64))
    return h


def rademacher(seed, j, lmask, K):
    """+-1 signs keyed by ``(seed, j, lmask, k_1, ..., k_dim)``; ``K`` has shape (n, dim)."""
    K = np.asarray(K, dtype=np.int64)
    h = np.full(K.shape[0], _prefix(seed, j, lmask), dtype=np.uint64)
    h = _chain(h, K.T)
    return np.where((h >> np.uint64(63)) == 0, 1.0, -1.0)


def signed_block_sum(seed, j, lmask, Kd, Kp, W):
    """``out[n] = sum_m W[m] * sign(seed, j, lmask, (Kd[n], Kp[m]))``."""
    Kd = np.asarray(Kd, dtype=np.int64)
    Kp = np.asarray(Kp, dtype=np.int64)
    W = np.asarray(W, dtype=float)
    base = np.full(Kd.shape[0], _prefix(seed, j, lmask), dtype=np.uint64)
    base = _chain(base, Kd.T)
    out = np.zeros(Kd.shape[0])
    for m in range(Kp.shape[0]):
        h = _chain(base, [np.full(Kd.shape[0], c, dtype=np.int64) for c in Kp[m]])
        out += np.where((h >> np.uint64(63)) == 0, W[m], -W[m])
    return out


def uniform(seed, j, lmask, K):
    """Uniform draws in [0, 1) keyed like :func:`rademacher` (53 random bits)."""
    K = np.asarray(K, dtype=np.int64)
    h = np.full(K.shape[0], _prefix(seed, j, lmask), dtype=np.uint64)
    h = _chain(h, K.T)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
