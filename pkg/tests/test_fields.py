from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besovtrace.errors import FormatError, ParameterError
from besovtrace.fields import (
    BesovParams,
    IntermittentField,
    LinearCombination,
    RandomField,
    SparseField,
    _linear,
    all_positions,
    besov_quasinorm,
    embedding_check,
    irreducible,
    irreducible_level,
    load_field,
    per_scale_energy,
    reconstruct_at,
    save_field,
    split_mask,
    synthesize_random_field,
    write_energy_csv,
)


@given(st.integers(1, 20), st.data())
def test_irreducible_matches_fractions(j, data):
    dim = data.draw(st.integers(1, 3))
    k = [data.draw(st.integers(0, 2**j - 1)) for _ in range(dim)]
    idx = irreducible(j, k)
    if all(c == 0 for c in k):
        assert idx.flagged and idx.J == 0
        return
    fr = [Fraction(c, 2**j) for c in k]
    J = max(f.denominator for f in fr).bit_length() - 1
    assert idx.J == J
    assert [Fraction(K, 2**J) for K in idx.K] == fr
    assert any(K % 2 for K in idx.K)
    assert irreducible_level(j, np.array([k]))[0] == J


def test_irreducible_rejects_out_of_range():
    with pytest.raises(ParameterError):
        irreducible(3, [8])
    with pytest.raises(ParameterError):
        irreducible(3, [-1])


@given(st.integers(0, 6), st.integers(1, 3))
@settings(max_examples=30)
def test_all_positions_row_major(j, dim):
    K = all_positions(j, dim)
    assert K.shape == (2 ** (j * dim), dim)
    np.testing.assert_array_equal(_linear(K, j), np.arange(2 ** (j * dim)))


def test_split_mask():
    # bit i is l_i; first d bits are kept
    assert split_mask(0b101, 1) == (1, 0b10)
    assert split_mask(0b110, 2) == (0b10, 1)


def test_params_validation():
    with pytest.raises(ParameterError):
        BesovParams(1.0, 0.0, 1.0, 2)
    with pytest.raises(ParameterError):
        BesovParams(1.0, 2.0, -1.0, 2)
    with pytest.raises(ParameterError):
        BesovParams(0.5, 2.0, 2.0, 2).require_gap()
    assert BesovParams(2.0, 2.0, float("inf"), 2).gap == 1.0


def test_sparse_sums_duplicates_and_switches_storage():
    f = SparseField.from_entries(2, 3, [(1, (0, 1), 3, 1.0), (1, (0, 1), 3, 2.0), (1, (1, 1), 3, 4.0), (2, (3, 3), 1, -1.0)])
    assert f.values(1, 3, [[0, 1]])[0] == 3.0
    assert f.count() == 3
    assert f.is_dense(1, 3) and not f.is_dense(2, 1)
    # cancellation removes the entry
    g = SparseField.from_entries(1, 2, [(2, 1, 1, 1.0), (2, 1, 1, -1.0)])
    assert g.bands() == []


def test_sparse_rejects_bad_indices():
    with pytest.raises(ParameterError):
        SparseField.from_entries(1, 2, [(3, 0, 1, 1.0)])
    with pytest.raises(ParameterError):
        SparseField.from_entries(1, 2, [(1, 2, 1, 1.0)])
    with pytest.raises(ParameterError):
        SparseField.from_entries(1, 2, [(1, 0, 0, 1.0)])


@given(st.integers(0, 2**31), st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_sparse_trace_block_matches_generic(seed, j):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 2 ** (2 * j) + 1))
    K = rng.integers(0, 2**j, size=(n, 2))
    f = SparseField.from_bands(2, 4, {(j, 3): (K, rng.standard_normal(n))})
    Kd = rng.integers(0, 2**j, size=(6, 1))
    Kp = rng.integers(0, 2**j, size=(4, 1))
    W = rng.standard_normal(len(Kp))
    generic = super(SparseField, f).trace_block(j, 3, Kd, Kp, W)
    np.testing.assert_allclose(f.trace_block(j, 3, Kd, Kp, W), generic, atol=1e-13)


def test_random_field_energy_closed_form(params2d):
    f = synthesize_random_field(params2d, 6, seed=3, delta=0.01)
    js = np.arange(1, 7)
    # A_j = (2^D - 1) j^{-(2/q + delta) p}
    expected = 3.0 * js ** (-(1.0 + 0.01) * 2.0)
    np.testing.assert_allclose(per_scale_energy(f, 2.0, 2.0), expected, rtol=1e-12)
    brute = [float(np.sum(np.abs(f.entries(int(j), m)[1]) ** 2)) for j in js for m in (1, 2, 3)]
    np.testing.assert_allclose(np.add.reduceat(brute, range(0, 18, 3)), [f.scale_energy(int(j), 2.0) for j in js])
    assert besov_quasinorm(f, params2d) == pytest.approx(np.sqrt(np.sum(expected)), rel=1e-12)


def test_random_field_is_reproducible(params2d):
    a = RandomField(params2d, 5, seed=9).values(5, 2, all_positions(5, 2))
    b = RandomField(params2d, 5, seed=9).values(5, 2, all_positions(5, 2))
    c = RandomField(params2d, 5, seed=10).values(5, 2, all_positions(5, 2))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_intermittent_field(params2d):
    f = IntermittentField(params2d, 1, 8, seed=1, beta=0.5)
    cols = all_positions(8, 1)
    frac = f.selected(8, cols).mean()
    assert abs(frac - 2.0**-4) < 4 * np.sqrt(2.0**-4 / 256)
    K, v = f.entries(6, 3)
    assert f.scale_energy(6, 2.0) == pytest.approx(sum(np.sum(f.entries(6, m)[1] ** 2) for m in (1, 2, 3)))
    assert len(np.unique(K[:, 1])) == int(f.selected(6, all_positions(6, 1)).sum())
    with pytest.raises(ParameterError):
        IntermittentField(params2d, 1, 4, beta=1.5)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20, deadline=None)
def test_linear_combination(t, u):
    P = BesovParams(2.0, 2.0, 2.0, 2)
    f, g = RandomField(P, 4, 1), RandomField(P, 4, 2)
    K = all_positions(4, 2)
    h = t * f + u * g
    np.testing.assert_allclose(h.values(4, 1, K), t * f.values(4, 1, K) + u * g.values(4, 1, K), atol=1e-15)
    assert isinstance(-f, LinearCombination)


def test_combination_rejects_mixed_dims():
    with pytest.raises(ParameterError):
        RandomField(BesovParams(2, 2, 2, 2), 3) + RandomField(BesovParams(2, 2, 2, 3), 3)


def test_embedding_check(params2d):
    f = synthesize_random_field(params2d, 10)
    chk = embedding_check(f, 2.0, 2.0, 1.0, 2.0, 0.25)
    assert chk.holds
    with pytest.raises(ParameterError):
        embedding_check(f, 2.0, 2.0, 2.0, 1.0, 0.25)


def test_reconstruct_single_coefficient(db4):
    j, k, m = 3, (5, 2), 0b10
    f = SparseField.from_entries(2, 3, [(j, k, m, 1.5)])
    x = np.array([0.3, 0.71])
    # Psi^0(2^j x_0 - k_0) Psi^1(2^j x_1 - k_1), periodized by hand
    n = 2**j
    part = [sum(db4.evaluate(l, n * xi - ki + n * r) for r in range(-3, 4)) for l, xi, ki in zip((0, 1), x, k)]
    assert reconstruct_at(f, db4, x) == pytest.approx(1.5 * part[0] * part[1], abs=1e-12)


def test_field_roundtrip(tmp_path, params2d):
    f = synthesize_random_field(params2d, 4, seed=2)
    path = tmp_path / "f.bcf"
    save_field(f, path)
    g = load_field(path)
    assert g.params == params2d
    for j, m in f.bands():
        np.testing.assert_array_equal(g.values(j, m, all_positions(j, 2)), f.values(j, m, all_positions(j, 2)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(FormatError):
        load_field(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        load_field(path)


def test_energy_csv(tmp_path, params2d):
    path = tmp_path / "e.csv"
    write_energy_csv(synthesize_random_field(params2d, 3), path, 2.0, 2.0)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,A_j" and len(lines) == 4
