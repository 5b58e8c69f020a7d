from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import OrthogonalPostselectionError, ShapeError
from .numerics import ComplexMatrix, adjoint, exact_sum, inner, max_abs, outer, trace
from .states import FinalBasis, Observable, PureState, born_weight


logger = logging.getLogger(__name__)


DEFAULT_ORTHO_EPS = 1e-12


@dataclass(frozen=True)
class WeakValue:
    value: complex
    initial_label: str
    final_label: str
    observable_label: str
    post_selection_prob: float

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


@dataclass(frozen=True, eq=False)
class TransientDensity:
    matrix: ComplexMatrix
    trace_check: complex
    initial_label: str = ""
    final_label: str = ""
    post_selection_prob: float = 1.0

    def expectation(self, a: ComplexMatrix) -> complex:
        return trace(self.matrix @ a)


@dataclass(frozen=True)
class QuasiProbRow:
    entries: Tuple[Tuple[float, complex], ...]
    final_label: str

    @property
    def total(self) -> complex:
        return exact_sum(q for _, q in self.entries)

    def mean(self) -> complex:
        return exact_sum(a * q for a, q in self.entries)

    def min_real(self) -> float:
        return min(q.real for _, q in self.entries)


@dataclass(frozen=True, eq=False)
class JointQuasiTable:
    # p(A_k, f) = <i|f><f|P_k|i>; rows are outcomes f, columns eigenvalues A_k
    eigenvalues: Tuple[float, ...]
    final_labels: Tuple[str, ...]
    table: ComplexMatrix

    def outcome_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def eigenvalue_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


@dataclass(frozen=True, eq=False)
class DecompositionCheck:
    residual: float
    skipped: Tuple[str, ...] = ()
    trace_errors: Tuple[float, ...] = field(default_factory=tuple)


def _check_dims(a_dim: int, i: PureState, f: PureState) -> None:
    if not (a_dim == i.dim == f.dim):
        raise ShapeError(f"dimension mismatch: observable {a_dim}, initial {i.dim}, final {f.dim}")


def _overlap(i: PureState, f: PureState, ortho_eps: float) -> Tuple[complex, float]:
    amp = inner(f.ket, i.ket)
    p = born_weight(i, f)
    if p < ortho_eps:
        raise OrthogonalPostselectionError(p, ortho_eps, f.label)
    return amp, p


def weak_value_of_matrix(
    m: ComplexMatrix, i: PureState, f: PureState, ortho_eps: float = DEFAULT_ORTHO_EPS, label: str = ""
) -> WeakValue:
    _check_dims(m.shape[0], i, f)
    amp, p = _overlap(i, f, ortho_eps)
    value = inner(f.ket, m @ i.ket) / amp
    return WeakValue(
        value=complex(value),
        initial_label=i.label,
        final_label=f.label,
        observable_label=label,
        post_selection_prob=p,
    )


def weak_value(a: Observable, i: PureState, f: PureState, ortho_eps: float = DEFAULT_ORTHO_EPS) -> WeakValue:
    return weak_value_of_matrix(a.matrix, i, f, ortho_eps=ortho_eps, label=a.label)


def transient_density(i: PureState, f: PureState, ortho_eps: float = DEFAULT_ORTHO_EPS) -> TransientDensity:
    if i.dim != f.dim:
        raise ShapeError(f"state dimensions differ: {i.dim} vs {f.dim}")
    amp, p = _overlap(i, f, ortho_eps)
    # |i><i|f><f| / |<f|i>|^2 = |i><f| / <f|i>
    r = outer(i.ket, f.ket) / amp
    r.setflags(write=False)
    return TransientDensity(
        matrix=r,
        trace_check=trace(r),
        initial_label=i.label,
        final_label=f.label,
        post_selection_prob=p,
    )


def hermitian_part(r: TransientDensity) -> ComplexMatrix:
    return (r.matrix + adjoint(r.matrix)) / 2.0


def verify_decomposition(
    i: PureState, basis: FinalBasis, ortho_eps: float = DEFAULT_ORTHO_EPS, orthogonal_terms: str = "limit"
) -> DecompositionCheck:
    # |i><i|f><f| equals p(f) R_if wherever R_if exists
    if basis.dim != i.dim:
        raise ShapeError(f"basis dim {basis.dim} does not match state dim {i.dim}")
    total = np.zeros((i.dim, i.dim), dtype=np.complex128)
    skipped: List[str] = []
    trace_errors: List[float] = []
    for f in basis:
        p = born_weight(i, f)
        if p < ortho_eps:
            skipped.append(f.label)
            if orthogonal_terms == "skip":
                continue
        else:
            r = transient_density(i, f, ortho_eps=ortho_eps)
            trace_errors.append(abs(r.trace_check - 1.0))
        total = total + inner(i.ket, f.ket) * outer(i.ket, f.ket)
    if len(skipped) == len(basis):
        raise OrthogonalPostselectionError(0.0, ortho_eps)
    if skipped:
        logger.info("decomposition: outcomes below ortho_eps %s", skipped)
    residual = max_abs(total - i.projector())
    return DecompositionCheck(residual=residual, skipped=tuple(skipped), trace_errors=tuple(trace_errors))


def weak_conditional_probs(
    a: Observable, i: PureState, f: PureState, ortho_eps: float = DEFAULT_ORTHO_EPS
) -> QuasiProbRow:
    _check_dims(a.dim, i, f)
    amp, _ = _overlap(i, f, ortho_eps)
    entries = []
    for space in a.eigenspaces:
        q = inner(f.ket, space.projector @ i.ket) / amp
        entries.append((space.value, complex(q)))
    return QuasiProbRow(entries=tuple(entries), final_label=f.label)


def joint_quasi_distribution(a: Observable, i: PureState, basis: FinalBasis) -> JointQuasiTable:
    if not (a.dim == i.dim == basis.dim):
        raise ShapeError(f"dimension mismatch: observable {a.dim}, initial {i.dim}, basis {basis.dim}")
    rows = []
    for f in basis:
        fi = inner(i.ket, f.ket)
        rows.append([fi * inner(f.ket, space.projector @ i.ket) for space in a.eigenspaces])
    table = np.array(rows, dtype=np.complex128)
    table.setflags(write=False)
    return JointQuasiTable(
        eigenvalues=tuple(s.value for s in a.eigenspaces),
        final_labels=tuple(basis.labels),
        table=table,
    )


def transient_moments(r: TransientDensity, a: Observable) -> Tuple[complex, complex, complex]:
    mean = r.expectation(a.matrix)
    second = r.expectation(a.squared())
    return mean, second, second - abs(mean) ** 2


def is_anomalous(wv: WeakValue, a: Observable, tol: float = 1e-10) -> bool:
    lo, hi = a.spectral_range
    scale = max(1.0, abs(lo), abs(hi))
    return wv.real < lo - tol * scale or wv.real > hi + tol * scale or abs(wv.imag) > tol * scale


def weak_values_for_basis(
    a: Observable, i: PureState, basis: FinalBasis, ortho_eps: float = DEFAULT_ORTHO_EPS
) -> List[Optional[WeakValue]]:
    out: List[Optional[WeakValue]] = []
    for f in basis:
        if born_weight(i, f) < ortho_eps:
            out.append(None)
            continue
        out.append(weak_value(a, i, f, ortho_eps=ortho_eps))
    return out
