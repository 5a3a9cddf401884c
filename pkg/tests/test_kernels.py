import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovtrace import _kernels_py, kernels

try:
    from besovtrace import _kernels as _cy
except ImportError:  # pragma: no cover
    _cy = None

needs_cython = pytest.mark.skipif(_cy is None, reason="compiled kernels not built")


def test_selected_implementation():
    assert kernels.IMPLEMENTATION in ("cython", "python")
    if _cy is not None:
        assert kernels.IMPLEMENTATION == "cython"


def test_env_forces_fallback(monkeypatch):
    monkeypatch.setenv("BESOVTRACE_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.IMPLEMENTATION == "python"
        assert mod.rademacher is _kernels_py.rademacher
    finally:
        monkeypatch.delenv("BESOVTRACE_PURE_PYTHON")
        importlib.reload(kernels)


def test_rademacher_is_balanced():
    K = np.arange(200000, dtype=np.int64)[:, None]
    s = _kernels_py.rademacher(7, 5, 1, K)
    assert set(np.unique(s)) == {-1.0, 1.0}
    assert abs(s.mean()) < 4 / np.sqrt(len(s))


def test_uniform_range_and_mean():
    K = np.arange(100000, dtype=np.int64)[:, None]
    u = _kernels_py.uniform(3, 4, 0, K)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))


def test_signs_depend_on_every_key():
    K = np.array([[3, 5]])
    ref = _kernels_py.rademacher(1, 4, 2, np.arange(64).reshape(32, 2))
    for args in [(2, 4, 2), (1, 5, 2), (1, 4, 3)]:
        other = _kernels_py.rademacher(*args, np.arange(64).reshape(32, 2))
        assert not np.array_equal(ref, other)
    assert _kernels_py.rademacher(1, 4, 2, K).shape == (1,)


@needs_cython
@given(
    st.integers(0, 2**63 - 1),
    st.integers(1, 20),
    st.integers(1, 7),
    st.integers(1, 3),
    st.integers(1, 40),
)
@settings(max_examples=60, deadline=None)
def test_cython_matches_python_rademacher(seed, j, lmask, dim, n):
    rng = np.random.default_rng(seed % 1000)
    K = rng.integers(0, 2**j, size=(n, dim), dtype=np.int64)
    np.testing.assert_array_equal(_cy.rademacher(seed, j, lmask, K), _kernels_py.rademacher(seed, j, lmask, K))


@needs_cython
@given(st.integers(0, 2**32), st.integers(1, 12), st.integers(1, 2), st.integers(1, 2), st.integers(0, 30))
@settings(max_examples=60, deadline=None)
def test_cython_matches_python_block_sum(seed, j, d, dp, m):
    rng = np.random.default_rng(seed)
    Kd = rng.integers(0, 2**j, size=(17, d), dtype=np.int64)
    Kp = rng.integers(0, 2**j, size=(m, dp), dtype=np.int64)
    W = rng.standard_normal(m)
    a = _cy.signed_block_sum(seed, j, 3, Kd, Kp, W)
    b = _kernels_py.signed_block_sum(seed, j, 3, Kd, Kp, W)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_block_sum_definition():
    rng = np.random.default_rng(0)
    Kd = rng.integers(0, 64, size=(9, 1))
    Kp = rng.integers(0, 64, size=(5, 1))
    W = rng.standard_normal(5)
    out = kernels.signed_block_sum(11, 6, 3, Kd, Kp, W)
    for n in range(9):
        full = np.hstack([np.repeat(Kd[n : n + 1], 5, axis=0), Kp])
        assert out[n] == pytest.approx(np.dot(kernels.rademacher(11, 6, 3, full), W), abs=1e-12)


@needs_cython
def test_benchmark_script_runs(capsys):
    import pathlib
    import runpy

    path = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    mod = runpy.run_path(str(path))
    assert mod["main"](["--repeat", "1"]) == 0
    assert "speedup" in capsys.readouterr().out
