from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Tuple

import numpy as np

from .errors import ShapeError
from .numerics import exact_sum, inner
from .states import FinalBasis, Observable, PureState, expectation
from .weak import DEFAULT_ORTHO_EPS, weak_value, weak_value_of_matrix


logger = logging.getLogger(__name__)


DEFAULT_IDENTITY_TOL = 1e-10

OrthogonalTerms = Literal["limit", "skip"]


@dataclass(frozen=True)
class ConditionalUncertainty:
    value: complex
    final_label: str
    weak_mean: complex
    weak_second_moment: complex

    def imag_flagged(self, tol: float = DEFAULT_IDENTITY_TOL) -> bool:
        return abs(self.value.imag) > tol


@dataclass(frozen=True)
class UncertaintyBudget:
    observable_label: str
    mean: float
    total_variance: float
    weak_value_variance: float
    avg_conditional: complex
    per_f: Tuple[Tuple[float, ConditionalUncertainty], ...]
    skipped: Tuple[str, ...] = ()

    @property
    def decomposition_residual(self) -> float:
        """total - (weak value variance + Re avg_conditional)."""
        return self.total_variance - (self.weak_value_variance + self.avg_conditional.real)

    @property
    def variance_transfer_residual(self) -> float:
        return self.weak_value_variance - self.total_variance


@dataclass(frozen=True)
class QuasiDeterminismReport:
    observable_label: str
    avg_conditional: complex
    passed: bool
    tolerance: float


def conditional_uncertainty(
    a: Observable, i: PureState, f: PureState, ortho_eps: float = DEFAULT_ORTHO_EPS
) -> ConditionalUncertainty:
    mean = weak_value(a, i, f, ortho_eps=ortho_eps).value
    second = weak_value_of_matrix(a.squared(), i, f, ortho_eps=ortho_eps, label=f"{a.label}^2").value
    return ConditionalUncertainty(
        value=second - abs(mean) ** 2,
        final_label=f.label,
        weak_mean=mean,
        weak_second_moment=second,
    )


def uncertainty_budget(
    a: Observable,
    i: PureState,
    basis: FinalBasis,
    ortho_eps: float = DEFAULT_ORTHO_EPS,
    orthogonal_terms: OrthogonalTerms = "limit",
    imag_flag: float = DEFAULT_IDENTITY_TOL,
) -> UncertaintyBudget:
    if not (a.dim == i.dim == basis.dim):
        raise ShapeError(f"dimension mismatch: observable {a.dim}, initial {i.dim}, basis {basis.dim}")

    mean = expectation(a, i)
    a_i = a.matrix @ i.ket
    a2_i = a.matrix @ a_i
    total_variance = float(np.linalg.norm(a_i - mean * i.ket) ** 2)

    weighted_uncertainty: List[complex] = []
    weighted_deviation: List[float] = []
    per_f: List[Tuple[float, ConditionalUncertainty]] = []
    skipped: List[str] = []

    for f in basis:
        amp = inner(f.ket, i.ket)
        p = abs(amp) ** 2
        f_a_i = inner(f.ket, a_i)
        if p < ortho_eps:
            skipped.append(f.label)
            if orthogonal_terms == "skip":
                continue
        else:
            cu = conditional_uncertainty(a, i, f, ortho_eps=ortho_eps)
            if cu.imag_flagged(imag_flag):
                logger.warning(
                    "conditional uncertainty of %s at f=%s has imaginary part %.3e",
                    a.label,
                    f.label,
                    cu.value.imag,
                )
            per_f.append((p, cu))
        # p(f) * dA^2_w(f) and p(f) * |<A>_w(f) - <A>|^2 with the weight cancelled
        weighted_uncertainty.append(amp.conjugate() * inner(f.ket, a2_i) - abs(f_a_i) ** 2)
        weighted_deviation.append(abs(f_a_i - mean * amp) ** 2)

    if skipped:
        logger.warning("uncertainty budget for %s: outcomes below ortho_eps %s", a.label, skipped)

    return UncertaintyBudget(
        observable_label=a.label,
        mean=mean,
        total_variance=total_variance,
        weak_value_variance=math.fsum(weighted_deviation),
        avg_conditional=exact_sum(weighted_uncertainty),
        per_f=tuple(per_f),
        skipped=tuple(skipped),
    )


def check_quasi_determinism(
    a: Observable,
    i: PureState,
    basis: FinalBasis,
    tolerance: float = DEFAULT_IDENTITY_TOL,
    ortho_eps: float = DEFAULT_ORTHO_EPS,
    orthogonal_terms: OrthogonalTerms = "limit",
) -> QuasiDeterminismReport:
    budget = uncertainty_budget(a, i, basis, ortho_eps=ortho_eps, orthogonal_terms=orthogonal_terms)
    passed = abs(budget.avg_conditional) <= tolerance
    if not passed:
        logger.warning(
            "quasi-determinism check failed for %s: |avg| = %.3e > %.1e",
            a.label,
            abs(budget.avg_conditional),
            tolerance,
        )
    return QuasiDeterminismReport(
        observable_label=a.label,
        avg_conditional=budget.avg_conditional,
        passed=passed,
        tolerance=tolerance,
    )
