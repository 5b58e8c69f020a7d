"""Dense complex linear algebra and seeded randomness for small Hilbert spaces (d <= 64)."""

from __future__ import annotations

import logging
import math
from typing import Iterable, List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NonFiniteError, NonHermitianError, ParameterError, ShapeError


logger = logging.getLogger(__name__)


ComplexMatrix = NDArray[np.complex128]
ComplexVector = NDArray[np.complex128]
RealVector = NDArray[np.float64]

MAX_DIM = 64
DEFAULT_HERMITICITY_TOL = 1e-10
DEGENERACY_RTOL = 1e-9
_JACOBI_MAX_SWEEPS = 100
_JACOBI_OFF_RTOL = 1e-15
_U64 = 2**64


def as_matrix(a: ArrayLike, *, square: bool = True) -> ComplexMatrix:
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix has NaN or Inf entries")
    m.setflags(write=False)
    return m


def as_vector(v: ArrayLike) -> ComplexVector:
    x = np.array(v, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ShapeError(f"expected a non-empty 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("vector has NaN or Inf entries")
    x.setflags(write=False)
    return x


def matmul(a: ArrayLike, b: ArrayLike) -> ComplexMatrix:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def adjoint(a: ArrayLike) -> ComplexMatrix:
    return np.conj(np.asarray(a, dtype=np.complex128)).T


def trace(a: ArrayLike) -> complex:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace needs a square matrix, got shape {a.shape}")
    return complex(np.trace(a))


def max_abs(a: ArrayLike) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


def hermiticity_deviation(h: ArrayLike) -> float:
    h = np.asarray(h, dtype=np.complex128)
    return max_abs(h - adjoint(h))


def outer(ket: ArrayLike, bra: ArrayLike) -> ComplexMatrix:
    """|ket><bra| (the bra argument is given as a ket and conjugated here)."""
    return np.outer(np.asarray(ket, dtype=np.complex128), np.conj(np.asarray(bra, dtype=np.complex128)))


def inner(bra: ArrayLike, ket: ArrayLike) -> complex:
    bra = np.asarray(bra, dtype=np.complex128)
    ket = np.asarray(ket, dtype=np.complex128)
    if bra.shape != ket.shape:
        raise ShapeError(f"vector dimensions differ: {bra.shape} vs {ket.shape}")
    return complex(np.vdot(bra, ket))


def exact_sum(values: Iterable[complex]) -> complex:
    """Correctly rounded complex sum; the result does not depend on the order of `values`."""
    vals = [complex(v) for v in values]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def _jacobi_rotate(a: ComplexMatrix, v: ComplexMatrix, p: int, q: int) -> None:
    apq = a[p, q]
    mag = abs(apq)
    alpha = a[p, p].real
    beta = a[q, q].real
    phase_c = np.conj(apq / mag)

    theta = (beta - alpha) / (2.0 * mag)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(1.0 + t * t)
    s = t * c

    # phase removal diag(1, e^{-i phi}) followed by the real rotation [[c, s], [-s, c]]
    u2 = np.array([[c, s], [-s * phase_c, c * phase_c]], dtype=np.complex128)
    idx = [p, q]
    a[:, idx] = a[:, idx] @ u2
    a[idx, :] = u2.conj().T @ a[idx, :]
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = alpha - t * mag
    a[q, q] = beta + t * mag
    v[:, idx] = v[:, idx] @ u2


def _jacobi_hermitian(h: ComplexMatrix) -> Tuple[RealVector, ComplexMatrix, int]:
    n = h.shape[0]
    a = np.array((h + adjoint(h)) / 2.0, dtype=np.complex128)
    v = np.eye(n, dtype=np.complex128)
    frob = float(np.linalg.norm(a))
    if n == 1 or frob == 0.0:
        return np.real(np.diag(a)).copy(), v, 0

    off_mask = ~np.eye(n, dtype=bool)
    target = _JACOBI_OFF_RTOL * n * frob
    previous = math.inf
    sweeps = 0
    for sweeps in range(1, _JACOBI_MAX_SWEEPS + 1):
        off = float(np.sqrt(np.sum(np.abs(a[off_mask]) ** 2)))
        # stop at the target, or once rounding noise stops the decrease
        if off <= target or off >= previous:
            break
        previous = off
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                _jacobi_rotate(a, v, p, q)
    else:
        logger.warning("jacobi did not reach the off-diagonal target after %d sweeps", _JACOBI_MAX_SWEEPS)

    logger.debug("jacobi converged: n=%d sweeps=%d", n, sweeps)
    return np.real(np.diag(a)).copy(), v, sweeps


def degenerate_clusters(eigenvalues: RealVector, scale: float) -> List[NDArray[np.intp]]:
    """Index groups of ascending eigenvalues within DEGENERACY_RTOL * scale of the group's first member."""
    tol = DEGENERACY_RTOL * scale
    groups: List[List[int]] = []
    for k, lam in enumerate(eigenvalues):
        if groups and abs(lam - eigenvalues[groups[-1][0]]) <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return [np.asarray(g, dtype=np.intp) for g in groups]


def eigh(h: ArrayLike, tol: float = DEFAULT_HERMITICITY_TOL) -> Tuple[RealVector, ComplexMatrix]:
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Returns ascending eigenvalues and eigenvectors as orthonormal columns. Columns inside a
    degenerate cluster are re-orthonormalized; only the spanned eigenspace is meaningful.
    """
    m = as_matrix(h)
    if m.shape[0] > MAX_DIM:
        raise ShapeError(f"dimension {m.shape[0]} exceeds the supported maximum {MAX_DIM}")
    deviation = hermiticity_deviation(m)
    if deviation > tol:
        raise NonHermitianError(deviation, tol)

    values, vectors, _ = _jacobi_hermitian(m)
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    for group in degenerate_clusters(values, max_abs(m)):
        if len(group) > 1:
            q, _ = np.linalg.qr(vectors[:, group])
            vectors[:, group] = q

    values.setflags(write=False)
    vectors.setflags(write=False)
    return values, vectors


class SeededRng:
    """A reproducible random stream keyed by (seed, stream_id).

    One instance per logical task; derive substreams for shards instead of sharing.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed < _U64) or not (0 <= stream_id < _U64):
            raise ParameterError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream_id])))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def derive(self, *keys: int) -> "SeededRng":
        state = np.random.SeedSequence([self.seed, self.stream_id, *(int(k) for k in keys)]).generate_state(
            1, np.uint64
        )
        return SeededRng(self.seed, int(state[0]))

    def standard_normal(self, size: int | None = None):
        return self._gen.standard_normal(size)

    def uniform(self, size: int | None = None):
        return self._gen.random(size)


def sample_gaussian(mean: float, sigma: float, rng: SeededRng) -> float:
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be positive and finite, got {sigma}")
    return float(mean + sigma * rng.standard_normal())


def haar_random_state(dim: int, rng: SeededRng) -> ComplexVector:
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    re = rng.standard_normal(dim)
    im = rng.standard_normal(dim)
    z = re + 1j * im
    return z / np.linalg.norm(z)


def haar_random_unitary(dim: int, rng: SeededRng) -> ComplexMatrix:
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: SeededRng, scale: float = 1.0) -> ComplexMatrix:
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (z + adjoint(z)) / 2.0
