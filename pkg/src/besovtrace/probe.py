"""The explicit function g, its probe family g^(i), and the trace lower bound."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError
from .fields import (
    BesovParams,
    CoeffField,
    irreducible_level,
    save_field,
    split_mask,
)
from .trace import trace_coefficients
from .wavelets import PeriodizedG, WaveletSystem


@dataclass(frozen=True)
class HAlpha:
    """Exponent ``H(alpha) = s - d/p + d/(alpha p)``."""

    alpha: float
    s: float
    d: int
    p: float

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ParameterError(f"alpha must be >= 1, got {self.alpha}")

    @property
    def value(self) -> float:
        return self.s - self.d / self.p + self.d / (self.alpha * self.p)

    def __float__(self) -> float:
        return self.value


def h_alpha(alpha: float, s: float, d: int, p: float) -> float:
    return HAlpha(alpha, s, d, p).value


def choose_J0(d: int, gamma: float, H) -> int:
    """Smallest ``J0 >= 1`` with ``d - 2^{d J0} (gamma - H) < 0``."""
    gap = gamma - float(H)
    if not gap > 0:
        raise ParameterError(f"need gamma > H(alpha), got gamma - H = {gap}")
    J0 = 1
    while d - 2 ** (d * J0) * gap >= 0:
        J0 += 1
    return J0


def _lex_offset_index(offsets: np.ndarray, J0: int) -> np.ndarray:
    idx = np.zeros(offsets.shape[0], dtype=np.int64)
    for c in range(offsets.shape[1]):
        idx = (idx << J0) | offsets[:, c]
    return idx


class ProbeField(CoeffField):
    """Coefficients of ``g`` (``J0 = 0``) or of one probe ``g^(i)``.

    The coefficient only depends on the kept position ``k``; it is the same
    for every frozen position ``k'`` and vanishes unless ``l != 0^d`` and
    ``l' = 1^{d'}``.  The origin ``k = 0`` has no irreducible form and gets 0.
    """

    def __init__(self, params: BesovParams, d: int, j_max: int, J0: int = 0, index: Optional[int] = None):
        if not 1 <= d < params.dim:
            raise ParameterError(f"need 1 <= d < D, got d={d}, D={params.dim}")
        if J0 and (index is None or not 0 <= index < 2 ** (d * J0)):
            raise ParameterError(f"probe index must be in [0, {2 ** (d * J0)})")
        self.params = params
        self.dim = params.dim
        self.d = d
        self.j_max = j_max
        self.J0 = J0
        self.index = index

    @property
    def d_prime(self) -> int:
        return self.dim - self.d

    def _active(self, lmask: int) -> bool:
        l, lp = split_mask(lmask, self.d)
        return l != 0 and lp == (1 << self.d_prime) - 1

    def bands(self):
        return [(j, m) for j in range(self.J0 + 1, self.j_max + 1) for m in range(1, 2**self.dim) if self._active(m)]

    def base_coefficient(self, j: int, Kd) -> np.ndarray:
        """``e`` of the base function g at scale ``j`` for kept positions ``Kd``."""
        s, p, q = self.params.s, self.params.p, self.params.q
        d = self.d
        Kd = np.asarray(Kd, dtype=np.int64).reshape(-1, d)
        J = irreducible_level(j, Kd)
        expo = 1.0 / p if math.isinf(q) else (q + 2) / (q * p)
        amp = j ** -expo * 2.0 ** ((d / p - s) * j)
        return np.where(J > 0, amp * 2.0 ** (-(d / p) * J), 0.0)

    def kept_coefficient(self, j: int, Kd) -> np.ndarray:
        Kd = np.asarray(Kd, dtype=np.int64).reshape(-1, self.d)
        if j > self.j_max or j <= self.J0:
            return np.zeros(len(Kd))
        if self.J0 == 0:
            return self.base_coefficient(j, Kd)
        offsets = Kd & ((1 << self.J0) - 1)
        mine = _lex_offset_index(offsets, self.J0) == self.index
        parent = Kd >> self.J0
        return np.where(mine, self.base_coefficient(j - self.J0, parent), 0.0)

    def values(self, j, m, K):
        K = np.asarray(K, dtype=np.int64).reshape(-1, self.dim)
        if not self._active(m):
            return np.zeros(len(K))
        return self.kept_coefficient(j, K[:, : self.d])

    def trace_block(self, j, m, Kd, Kp, W):
        Kd = np.asarray(Kd, dtype=np.int64).reshape(-1, self.d)
        if not self._active(m):
            return np.zeros(len(Kd))
        return self.kept_coefficient(j, Kd) * float(np.sum(W))

    def _kept_energy(self, j: int, p: float) -> float:
        """``sum_{k in Z_j^d} |e_k|^p`` for the base function, by level counting."""
        if j < 1:
            return 0.0
        d = self.d
        total = 0.0
        for J in range(1, j + 1):
            n_J = 2 ** (d * J) - 2 ** (d * (J - 1))
            e = self.base_coefficient(j, np.full((1, d), 1 << (j - J), dtype=np.int64))[0]
            total += n_J * abs(e) ** p
        return total

    def scale_energy(self, j, p):
        if j > self.j_max or j <= self.J0:
            return 0.0
        n_types = 2**self.d - 1
        return n_types * 2.0 ** (j * self.d_prime) * self._kept_energy(j - self.J0, p)


def synthesize_g(params: BesovParams, d: int, j_max: int) -> ProbeField:
    """The base function g on ``T^D`` (``D = params.dim``) for traces along ``T^d``."""
    if j_max < 1:
        raise ParameterError("j_max must be >= 1")
    return ProbeField(params, d, j_max)


@dataclass
class ProbeFamily:
    g: ProbeField
    J0: int
    fields: list

    @property
    def d1(self) -> int:
        return len(self.fields)

    @property
    def d(self) -> int:
        return self.g.d

    def offsets(self) -> np.ndarray:
        """Offset vectors in lexicographic order; row ``i`` belongs to ``g^(i)``."""
        side = np.arange(2**self.J0, dtype=np.int64)
        grids = np.meshgrid(*([side] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def subcubes(self, j: int, k) -> np.ndarray:
        """Positions at scale ``j + J0`` of the ``d1`` sub-cubes of ``(j, k)``, in probe order."""
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        return (k[None, :] << self.J0) + self.offsets()

    def owner(self, k) -> int:
        """Index ``i`` of the probe carrying position ``k`` (any scale > J0)."""
        k = np.atleast_2d(np.asarray(k, dtype=np.int64))
        return int(_lex_offset_index(k & ((1 << self.J0) - 1), self.J0)[0])

    def combination(self, beta: Sequence[float]) -> CoeffField:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.d1,):
            raise ParameterError(f"need {self.d1} coefficients")
        from .fields import LinearCombination

        return LinearCombination(list(zip(beta.tolist(), self.fields)))

    def manifest(self) -> dict:
        P = self.g.params
        return {
            "J0": self.J0,
            "d1": self.d1,
            "d": self.d,
            "D": self.g.dim,
            "j_max": self.g.j_max,
            "enumeration": "lexicographic offsets in {0..2^J0-1}^d",
            "params": {"s": P.s, "p": P.p, "q": P.q},
        }


def build_probe_family(g: ProbeField, J0: int, j_max: Optional[int] = None) -> ProbeFamily:
    j_max = g.j_max if j_max is None else j_max
    if J0 < 1:
        raise ParameterError("J0 must be >= 1")
    if j_max <= J0:
        raise ParameterError("need j_max > J0")
    d1 = 2 ** (g.d * J0)
    base = ProbeField(g.params, g.d, j_max)
    fields_ = [ProbeField(g.params, g.d, j_max, J0, i) for i in range(d1)]
    return ProbeFamily(base, J0, fields_)


def save_probe_family(family: ProbeFamily, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    save_field(family.g, os.path.join(directory, "g.bcf"))
    for i, f in enumerate(family.fields):
        save_field(f, os.path.join(directory, f"g_{i:04d}.bcf"))
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(family.manifest(), fh, indent=2, sort_keys=True)


def probe_trace_closed_form(family: ProbeFamily, i: int, j: int, k, a, G: PeriodizedG) -> float:
    """``e^(i)_{(j,(k,1),(1,1))} G_{d'}(2^j a)`` for a wavelet-band trace coefficient."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    e = family.fields[i].kept_coefficient(j, np.atleast_2d(k))[0]
    if e == 0.0:
        return 0.0
    t = np.mod(a * 2.0**j, 1.0)
    return float(e * np.prod(G.eval1(t)))


# ---------------------------------------------------------------------------
# lower bound along dyadic approximations


@dataclass
class LowerBoundRow:
    n: int
    J: int
    j: int
    i: int
    cone_ok: bool
    magnitude: float
    envelope: float
    ratio: float


@dataclass
class LowerBoundReport:
    rows: list = field(default_factory=list)
    C: float = 0.0
    all_cone_ok: bool = True
    cone_width: float = 0.0
    exponent: float = 0.0

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "all_cone_ok": self.all_cone_ok,
            "cone_width": self.cone_width,
            "log_exponent": self.exponent,
            "rows": [r.__dict__ for r in self.rows],
        }


def _torus_dist(u: np.ndarray, v: np.ndarray) -> float:
    diff = np.abs(np.mod(u - v + 0.5, 1.0) - 0.5)
    return float(np.max(diff))


def verify_lower_bound(
    family: ProbeFamily,
    system: WaveletSystem,
    a,
    x,
    alpha: float,
    witnesses: Sequence[tuple],
    j_a: int,
    j_max: Optional[int] = None,
) -> LowerBoundReport:
    """Check cone containment and the lower envelope along ``j_n = floor(alpha J_n)``.

    ``witnesses`` are irreducible pairs ``(J_n, K_n)`` with
    ``|x - K_n 2^-J_n| <= 2^{-alpha J_n}``.  Trace coefficients are computed
    through the generic trace operator, not the closed form.
    """
    g = family.g
    P = g.params
    d, dp, J0 = g.d, g.d_prime, family.J0
    j_max = g.j_max if j_max is None else j_max
    x = np.atleast_1d(np.asarray(x, dtype=float))
    H = h_alpha(alpha, P.s, d, P.p)
    expo = 2 * dp + (1.0 / P.p if math.isinf(P.q) else (P.q + 2) / (P.q * P.p))
    width = 2.0 ** (J0 + 2)
    report = LowerBoundReport(cone_width=width, exponent=expo)
    ratios = []
    for n, (J, K) in enumerate(witnesses):
        jn = int(math.floor(alpha * J))
        if jn < j_a or jn + J0 > j_max:
            continue
        kn = np.atleast_1d(np.asarray(K, dtype=np.int64)) << (jn - J)
        subs = family.subcubes(jn, kn)
        envelope = jn ** -expo * 2.0 ** (-H * jn)
        for i, ksub in enumerate(subs):
            js = jn + J0
            cone_ok = _torus_dist(x, ksub * 2.0**-js) <= width * 2.0**-js
            val = trace_coefficients(family.fields[i], system, a, d, js, (1 << d) - 1, ksub[None, :])[0]
            mag = abs(val)
            ratio = mag / envelope
            report.rows.append(LowerBoundRow(n, int(J), jn, i, bool(cone_ok), mag, envelope, ratio))
            report.all_cone_ok &= bool(cone_ok)
            ratios.append(ratio)
    if not ratios:
        raise InsufficientDataError("no witness scale lies in [j_a, j_max - J0]")
    report.C = float(min(ratios))
    return report
