"""Compare the compiled and the numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Reports the best-of-N wall time of each kernel on identical inputs and checks
that both implementations return the same numbers.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from besovtrace import _kernels_py
from besovtrace.fields import BesovParams, RandomField
from besovtrace.trace import trace
from besovtrace.wavelets import daubechies

try:
    from besovtrace import _kernels as _cy
except ImportError:
    _cy = None


class _Swap:
    """Temporarily route ``besovtrace.kernels`` to one implementation."""

    def __init__(self, impl):
        from besovtrace import kernels

        self.kernels, self.impl = kernels, impl

    def __enter__(self):
        self.saved = (self.kernels.rademacher, self.kernels.signed_block_sum)
        self.kernels.rademacher = self.impl.rademacher
        self.kernels.signed_block_sum = self.impl.signed_block_sum

    def __exit__(self, *exc):
        self.kernels.rademacher, self.kernels.signed_block_sum = self.saved


def cases(rng):
    K = rng.integers(0, 2**14, size=(1 << 20, 2))
    Kd = rng.integers(0, 2**12, size=(4096, 1))
    Kp = rng.integers(0, 2**12, size=(15, 1))
    W = rng.standard_normal(15)
    system = daubechies(8, 12)
    field = RandomField(BesovParams(2.0, 2.0, 2.0, 2), 12, seed=1)
    return {
        "rademacher 2^20 x 2": lambda impl: impl.rademacher(7, 14, 3, K),
        "signed_block_sum 4096 x 15": lambda impl: impl.signed_block_sum(7, 12, 3, Kd, Kp, W),
        "trace of a D=2 field, j_max=12": lambda impl: _traced(impl, field, system),
    }


def _traced(impl, field, system):
    with _Swap(impl):
        tf = trace(field, [0.3], 1, system)
    return np.concatenate([tf.bands[k] for k in sorted(tf.bands)])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)
    if _cy is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        same = np.allclose(fn(_kernels_py), fn(_cy), rtol=1e-12, atol=1e-14)
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: fn(_cy), number=1, repeat=args.repeat))
        rows.append({"kernel": name, "python_s": t_py, "cython_s": t_cy, "speedup": t_py / t_cy, "agree": bool(same)})
        flag = "" if same else "  MISMATCH"
        print(f"{name:34s} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:7.1f}x{flag}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
