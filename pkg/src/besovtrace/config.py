"""Experiment configuration: defaults, ``key = value`` files and overrides.

Every acceptance threshold used by the experiments lives here and nowhere
else.  A config file is plain text, one ``key = value`` per line, ``#``
starts a comment, tuples are comma separated::

    j_max = 12
    alpha_grid = 1, 2, 4

The environment variable ``BESOVTRACE_CONFIG`` may name such a file; it is
only consulted for the path, never for individual values.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from .errors import FormatError, ParameterError

ENV_CONFIG = "BESOVTRACE_CONFIG"


@dataclass(frozen=True)
class ExperimentConfig:
    # wavelet
    N: int = 8
    r: int = 14
    # space B^s_{p,q}(T^D), traces on T^d
    D: int = 2
    d: int = 1
    s: float = 2.0
    p: float = 2.0
    q: float = 2.0
    j_max: int = 14
    seed: int = 0
    delta: float = 0.01
    output_dir: str = "besovtrace-out"

    # slice condition on G
    mc_samples: int = 100_000
    protr1_range: tuple = (6, 14)
    protr1_min_exponent: float = 1.8
    protr1_max_dprime: int = 2

    # Markov decay along slices
    eps: float = 0.2
    eps_grid: tuple = (0.1, 0.2, 0.3)
    a_grid_log2: int = 12
    decay_range: tuple = (6, 12)
    decay_slack: float = 4.0
    decay_exponent_tol: float = 0.1
    intermittent_beta: float = 0.8

    # lower bound along dyadic approximations
    alpha_grid: tuple = (1.0, 1.25, 1.5, 2.0, 3.0, 4.0)
    lower_bound_triples: int = 20
    lower_bound_jmax: tuple = (10, 12, 14)
    lower_bound_stability: float = 2.0
    classify_depth: int = 64

    # probe family / volume bound
    gamma_gap: float = 0.3
    gamma_gaps: tuple = (0.3, 0.6)
    volume_alpha: float = 3.0
    volume_tol: float = 0.1
    volume_doubling_tol: float = 0.25
    volume_samples: int = 24
    volume_x_points: int = 33

    # spectrum
    spectrum_bin: float = 0.05
    spectrum_step: float = 0.05
    spectrum_tol: float = 0.15
    spectrum_upper_tol: float = 0.1
    spectrum_mass_tol: float = 0.01
    spectrum_mass_gap: float = 0.2
    spectrum_slope_tol: float = 0.10
    spectrum_candidates: int = 256
    beta_range: tuple = (0.5, 1.5)

    # Hoelder estimator
    holder_h0: tuple = (0.5, 1.0, 1.5, 2.5)
    holder_tol: float = 0.05
    holder_points: int = 8
    holder_alpha_tol: float = 0.1

    @property
    def d_prime(self) -> int:
        return self.D - self.d

    def validate(self, probes: bool = True) -> "ExperimentConfig":
        """Raise :class:`ParameterError` unless the hypotheses of the experiments hold."""
        if not 1 <= self.d < self.D:
            raise ParameterError(f"need 1 <= d < D, got d={self.d}, D={self.D}")
        if self.p <= 0 or self.q <= 0:
            raise ParameterError("p and q must be positive")
        if not self.s - self.d / self.p > 0:
            raise ParameterError(f"trace experiments need s > d/p, got s={self.s}, d/p={self.d / self.p}")
        if probes and not self.s - self.D / self.p > 0:
            raise ParameterError(f"probe experiments need s > D/p, got s={self.s}, D/p={self.D / self.p}")
        for name in ("N", "r", "j_max", "mc_samples", "a_grid_log2", "lower_bound_triples", "volume_samples",
                     "volume_x_points", "spectrum_candidates", "holder_points"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.eps <= 0:
            raise ParameterError("eps must be positive")
        if any(a < 1 for a in self.alpha_grid):
            raise ParameterError("alpha grid values must be >= 1")
        if self.gamma_gap <= 0 or any(g <= 0 for g in self.gamma_gaps):
            raise ParameterError("gamma - H(alpha) must be positive")
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and math.isinf(v):
                out[k] = "inf"
            elif isinstance(v, tuple):
                out[k] = list(v)
        return out


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw, default):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, tuple):
            items = raw.split(",") if isinstance(raw, str) else list(raw)
            items = [x.strip() if isinstance(x, str) else x for x in items if not (isinstance(x, str) and not x.strip())]
            kind = type(default[0]) if default else float
            return tuple(kind(float(x)) if kind is int else kind(x) for x in items)
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise FormatError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(key, value, getattr(base, key))
    return replace(base, **updates)


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Defaults, then the file (``path`` or ``$BESOVTRACE_CONFIG``), then ``overrides``."""
    cfg = ExperimentConfig()
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        with open(path) as fh:
            cfg = parse_config_text(fh.read(), cfg)
    if overrides:
        clean = {}
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in _FIELDS:
                raise ParameterError(f"unknown config key {k!r}")
            clean[k] = _coerce(k, v, getattr(cfg, k))
        cfg = replace(cfg, **clean)
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
