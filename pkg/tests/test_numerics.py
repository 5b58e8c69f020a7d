from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasidet.errors import NonFiniteError, NonHermitianError, ParameterError, ShapeError
from quasidet.states import pauli_matrix
from quasidet.numerics import (
    MAX_DIM,
    SeededRng,
    adjoint,
    as_matrix,
    degenerate_clusters,
    eigh,
    exact_sum,
    haar_random_state,
    haar_random_unitary,
    inner,
    matmul,
    max_abs,
    outer,
    random_hermitian,
    sample_gaussian,
    trace,
)


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)


def test_eigh_pauli_y():
    values, vectors = eigh([[0, -1j], [1j, 0]])
    assert values == pytest.approx([-1.0, 1.0], abs=1e-15)
    assert max_abs(adjoint(vectors) @ vectors - np.eye(2)) < 1e-15


def test_eigh_x_plus_y_is_plus_minus_sqrt2():
    values, _ = eigh([[0, 1 - 1j], [1 + 1j, 0]])
    assert abs(values[0] + math.sqrt(2)) < 1e-12
    assert abs(values[1] - math.sqrt(2)) < 1e-12


@pytest.mark.parametrize("dim", [1, 2, 3, 5, 8, 16])
def test_eigh_reconstructs_random_hermitian(dim):
    rng = SeededRng(7, dim)
    for _ in range(10):
        h = random_hermitian(dim, rng)
        values, vectors = eigh(h)
        assert np.all(np.diff(values) >= 0)
        assert max_abs(adjoint(vectors) @ vectors - np.eye(dim)) < 1e-12
        scale = max(1.0, max_abs(h))
        assert max_abs(vectors @ np.diag(values) @ adjoint(vectors) - h) < 1e-12 * scale
        assert np.allclose(values, np.linalg.eigvalsh(h), atol=1e-12 * scale)


def test_eigh_degenerate_spectrum_has_orthonormal_vectors():
    rng = SeededRng(3)
    u = haar_random_unitary(4, rng)
    h = u @ np.diag([1.0, 1.0, 1.0, -2.0]) @ adjoint(u)
    values, vectors = eigh((h + adjoint(h)) / 2)
    assert values == pytest.approx([-2.0, 1.0, 1.0, 1.0], abs=1e-12)
    assert max_abs(adjoint(vectors) @ vectors - np.eye(4)) < 1e-12
    clusters = degenerate_clusters(values, 2.0)
    assert [len(c) for c in clusters] == [1, 3]


def test_eigh_outputs_are_read_only():
    values, vectors = eigh(np.eye(2))
    with pytest.raises(ValueError):
        values[0] = 3.0
    with pytest.raises(ValueError):
        vectors[0, 0] = 3.0


def test_eigh_rejects_non_hermitian():
    with pytest.raises(NonHermitianError) as exc:
        eigh([[0, 1], [0, 0]])
    assert exc.value.deviation == pytest.approx(1.0)


def test_eigh_rejects_oversized():
    with pytest.raises(ShapeError):
        eigh(np.eye(MAX_DIM + 1))


def test_as_matrix_rejects_nan_and_bad_shapes():
    with pytest.raises(NonFiniteError):
        as_matrix([[1.0, float("nan")], [0.0, 1.0]])
    with pytest.raises(ShapeError):
        as_matrix([[1.0, 2.0, 3.0]])
    with pytest.raises(ShapeError):
        as_matrix([1.0, 2.0])


def test_outer_and_inner_conventions():
    ket = np.array([1.0, 1j]) / math.sqrt(2)
    bra = np.array([1.0, 0.0])
    m = outer(ket, bra)
    assert m[1, 0] == pytest.approx(1j / math.sqrt(2))
    assert inner(ket, bra) == pytest.approx(1 / math.sqrt(2))
    assert inner(bra, ket) == pytest.approx(1 / math.sqrt(2))
    # <ket|ket> conjugates the bra
    assert inner(ket, ket) == pytest.approx(1.0)
    assert trace(outer(ket, ket)) == pytest.approx(1.0)


@given(st.lists(complexes, min_size=4, max_size=4))
def test_adjoint_is_an_involution(entries):
    m = np.array(entries, dtype=complex).reshape(2, 2)
    assert np.array_equal(adjoint(adjoint(m)), m)


@given(complexes, complexes)
@settings(max_examples=50)
def test_inner_is_conjugate_linear_in_the_bra(a, b):
    u = np.array([1.0, 2j, -0.5])
    v = np.array([0.3, -1.0, 1j])
    w = np.array([2.0, 0.5, 0.25j])
    lhs = inner(a * u + b * v, w)
    rhs = np.conj(a) * inner(u, w) + np.conj(b) * inner(v, w)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_exact_sum_cancels_exactly():
    assert exact_sum([1e16 + 1j, 1.0, -1e16 - 1j]) == 1.0


def test_seeded_rng_is_reproducible():
    a = SeededRng(42, 3).standard_normal(5)
    b = SeededRng(42, 3).standard_normal(5)
    c = SeededRng(42, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_derived_streams_are_stable_and_distinct():
    base = SeededRng(9)
    s1 = base.derive(0).uniform(4)
    s2 = SeededRng(9).derive(0).uniform(4)
    s3 = base.derive(1).uniform(4)
    assert np.array_equal(s1, s2)
    assert not np.array_equal(s1, s3)


def test_seeded_rng_rejects_negative_seed():
    with pytest.raises(ParameterError):
        SeededRng(-1)


def test_sample_gaussian_moments():
    rng = SeededRng(11)
    xs = np.array([sample_gaussian(1.5, 0.5, rng) for _ in range(20000)])
    assert abs(xs.mean() - 1.5) < 5 * 0.5 / math.sqrt(len(xs))
    assert abs(xs.std() - 0.5) < 0.02
    with pytest.raises(ParameterError):
        sample_gaussian(0.0, 0.0, rng)


def test_haar_generators():
    rng = SeededRng(5)
    psi = haar_random_state(6, rng)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-14
    u = haar_random_unitary(6, rng)
    assert max_abs(adjoint(u) @ u - np.eye(6)) < 1e-12


def test_matmul_checks_shapes():
    a = np.array([[1, 1j], [0, 2]])
    assert max_abs(matmul(a, np.eye(2)) - a) == 0.0
    with pytest.raises(ShapeError):
        matmul(a, np.ones((3, 1)))
    with pytest.raises(ShapeError):
        matmul(np.ones(2), a)


def test_pauli_products():
    x, y, z = (pauli_matrix(n) for n in "XYZ")
    assert max_abs(matmul(x, y) - 1j * z) == 0.0
    assert max_abs(matmul(y, x) + 1j * z) == 0.0


def _naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m, p = a.shape[0], a.shape[1], b.shape[1]
    out = np.zeros((n, p), dtype=complex)
    for r in range(n):
        for c in range(p):
            acc = 0j
            for k in range(m):
                acc += a[r, k] * b[k, c]
            out[r, c] = acc
    return out


@pytest.mark.parametrize("dim", [1, 2, 5, 9])
def test_matmul_matches_triple_loop(dim):
    rng = SeededRng(17, dim)
    a = random_hermitian(dim, rng) + 1j * random_hermitian(dim, rng)
    b = haar_random_unitary(dim, rng)
    assert max_abs(matmul(a, b) - _naive_matmul(a, b)) <= 1e-12


def test_matmul_is_associative_and_trace_is_cyclic():
    rng = SeededRng(23)
    for dim in (2, 4, 7):
        a, b, c = (random_hermitian(dim, rng) + 1j * random_hermitian(dim, rng) for _ in range(3))
        assert max_abs(matmul(matmul(a, b), c) - matmul(a, matmul(b, c))) <= 1e-12 * max_abs(a) * max_abs(b) * max_abs(c) * dim**2
        abc = trace(matmul(matmul(a, b), c))
        assert abs(abc - trace(matmul(matmul(b, c), a))) <= 1e-12 * max(1.0, abs(abc))
        assert abs(abc - trace(matmul(matmul(c, a), b))) <= 1e-12 * max(1.0, abs(abc))


@pytest.mark.parametrize("dim", [2, 4])
def test_haar_states_have_uniform_first_moment(dim):
    rng = SeededRng(8, dim)
    n = 100_000
    weights = np.array([abs(haar_random_state(dim, rng)[0]) ** 2 for _ in range(n)])
    # |psi_0|^2 ~ Beta(1, d - 1)
    std = math.sqrt((dim - 1) / (dim**2 * (dim + 1)))
    assert abs(weights.mean() - 1.0 / dim) <= 5 * std / math.sqrt(n)


def test_sample_gaussian_with_tiny_sigma_returns_the_mean():
    rng = SeededRng(2)
    for _ in range(10):
        assert round(sample_gaussian(5.0, 1e-9, rng), 8) == 5.0


def test_clusters_do_not_chain_across_evenly_spaced_values():
    # neighbours are 0.6e-9 apart; chaining would merge all five
    values = np.array([0.0, 0.6e-9, 1.2e-9, 1.8e-9, 2.4e-9])
    groups = [g.tolist() for g in degenerate_clusters(values, 1.0)]
    assert groups == [[0, 1], [2, 3], [4]]
    for g in degenerate_clusters(values, 1.0):
        assert values[g[-1]] - values[g[0]] <= 1e-9
