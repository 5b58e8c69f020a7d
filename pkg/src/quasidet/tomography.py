from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .config import SimConfig
from .errors import OrthogonalPostselectionError, ParameterError, ShapeError
from .numerics import ComplexMatrix, SeededRng, adjoint, max_abs, trace
from .simulator import extrapolate_weak_value
from .states import Observable, PureState, Scenario, born_weight
from .weak import DEFAULT_ORTHO_EPS, hermitian_part, transient_density, weak_value_of_matrix


logger = logging.getLogger(__name__)


ReconstructionMode = Literal["complex", "hermitian-part"]
ReconstructionSource = Literal["exact", "simulated"]

BASIS_ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    elements: Tuple[ComplexMatrix, ...]
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.elements:
            raise ShapeError("operator basis is empty")
        d = self.elements[0].shape[0]
        if len(self.elements) != d * d:
            raise ShapeError(f"operator basis for dim {d} needs {d * d} elements, got {len(self.elements)}")
        if len(self.labels) != len(self.elements):
            raise ShapeError("operator basis labels do not match elements")
        err = max_abs(self.gram() - np.eye(d * d))
        if err > BASIS_ORTHONORMALITY_TOL:
            raise ParameterError(f"operator basis is not Hilbert-Schmidt orthonormal (error {err:.3e})")

    @property
    def dim(self) -> int:
        return int(self.elements[0].shape[0])

    def __len__(self) -> int:
        return len(self.elements)

    def gram(self) -> np.ndarray:
        stacked = np.array([b.reshape(-1) for b in self.elements])
        # Tr(B_j^dagger B_k) as a single product of flattened matrices
        return stacked.conj() @ stacked.T

    def rotated(self, u: ComplexMatrix) -> "OperatorBasis":
        elems = []
        for b in self.elements:
            m = u @ b @ adjoint(u)
            m = (m + adjoint(m)) / 2.0
            m.setflags(write=False)
            elems.append(m)
        return OperatorBasis(elements=tuple(elems), labels=tuple(f"U{lab}U*" for lab in self.labels))

    def expand(self, coefficients: Sequence[complex]) -> ComplexMatrix:
        if len(coefficients) != len(self.elements):
            raise ShapeError(f"expected {len(self.elements)} coefficients, got {len(coefficients)}")
        total = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for c, b in zip(coefficients, self.elements):
            total = total + c * b
        return total


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    reconstructed: ComplexMatrix
    target: ComplexMatrix
    max_abs_error: float
    mode: str
    source: str
    final_label: str = ""
    weak_values: Tuple[complex, ...] = ()
    cis: Tuple[float, ...] = ()

    @property
    def max_ci(self) -> float:
        return max(self.cis) if self.cis else 0.0

    @property
    def trace_error(self) -> float:
        return abs(trace(self.reconstructed) - 1.0)


def build_operator_basis(dim: int) -> OperatorBasis:
    # I/sqrt(d) then Gell-Mann matrices / sqrt(2); for dim=2 this is {I, X, Y, Z}/sqrt(2)
    if dim < 2:
        raise ParameterError(f"operator basis needs dim >= 2, got {dim}")

    elems: List[ComplexMatrix] = [np.eye(dim, dtype=np.complex128) / math.sqrt(dim)]
    labels: List[str] = ["I"]
    sym: List[ComplexMatrix] = []
    anti: List[ComplexMatrix] = []
    sym_labels: List[str] = []
    anti_labels: List[str] = []
    r = 1.0 / math.sqrt(2.0)
    for j in range(dim):
        for k in range(j + 1, dim):
            s = np.zeros((dim, dim), dtype=np.complex128)
            s[j, k] = s[k, j] = r
            a = np.zeros((dim, dim), dtype=np.complex128)
            a[j, k] = -1j * r
            a[k, j] = 1j * r
            sym.append(s)
            anti.append(a)
            sym_labels.append(f"S{j}{k}")
            anti_labels.append(f"A{j}{k}")
    diag: List[ComplexMatrix] = []
    diag_labels: List[str] = []
    for l in range(1, dim):
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[np.arange(l), np.arange(l)] = 1.0
        m[l, l] = -float(l)
        diag.append(m / math.sqrt(l * (l + 1)))
        diag_labels.append(f"D{l}")

    elems += sym + anti + diag
    labels += sym_labels + anti_labels + diag_labels
    if dim == 2:
        labels = ["I", "X", "Y", "Z"]
    for m in elems:
        m.setflags(write=False)
    return OperatorBasis(elements=tuple(elems), labels=tuple(labels))


def exact_weak_values(
    i: PureState, f: PureState, basis: OperatorBasis, ortho_eps: float = DEFAULT_ORTHO_EPS
) -> List[complex]:
    return [
        weak_value_of_matrix(b, i, f, ortho_eps=ortho_eps, label=lab).value
        for b, lab in zip(basis.elements, basis.labels)
    ]


def reconstruct_transient(
    i: PureState,
    f: PureState,
    basis: OperatorBasis,
    weak_values: Sequence[complex],
    mode: ReconstructionMode = "complex",
    source: ReconstructionSource = "exact",
    cis: Sequence[float] = (),
    ortho_eps: float = DEFAULT_ORTHO_EPS,
) -> ReconstructionReport:
    if len(weak_values) != len(basis):
        raise ShapeError(f"need {len(basis)} weak values for the operator basis, got {len(weak_values)}")
    if basis.dim != i.dim:
        raise ShapeError(f"operator basis dim {basis.dim} does not match state dim {i.dim}")

    r = transient_density(i, f, ortho_eps=ortho_eps)
    if mode == "complex":
        reconstructed = basis.expand([complex(w) for w in weak_values])
        target = np.array(r.matrix)
    elif mode == "hermitian-part":
        m = basis.expand([complex(w).real for w in weak_values])
        reconstructed = (m + adjoint(m)) / 2.0
        target = hermitian_part(r)
    else:
        raise ParameterError(f"unknown reconstruction mode {mode!r}")

    reconstructed.setflags(write=False)
    target.setflags(write=False)
    return ReconstructionReport(
        reconstructed=reconstructed,
        target=target,
        max_abs_error=max_abs(reconstructed - target),
        mode=mode,
        source=source,
        final_label=f.label,
        weak_values=tuple(complex(w) for w in weak_values),
        cis=tuple(float(c) for c in cis),
    )


def _pick_final(scenario: Scenario, final_label: Optional[str], ortho_eps: float) -> PureState:
    for f in scenario.final_basis:
        if final_label is not None:
            if f.label == final_label:
                return f
        elif born_weight(scenario.initial, f) >= ortho_eps:
            return f
    if final_label is not None:
        raise ParameterError(f"final basis has no outcome labelled {final_label!r}")
    raise OrthogonalPostselectionError(0.0, ortho_eps)


def tomography_from_simulation(
    scenario: Scenario,
    cfg: SimConfig,
    couplings: Optional[Sequence[float]] = None,
    mode: ReconstructionMode = "hermitian-part",
    final_label: Optional[str] = None,
    basis: Optional[OperatorBasis] = None,
    ortho_eps: float = DEFAULT_ORTHO_EPS,
) -> ReconstructionReport:
    f = _pick_final(scenario, final_label, ortho_eps)
    basis = basis if basis is not None else build_operator_basis(scenario.dim)
    rng = SeededRng(cfg.seed, stream_id=1)
    pos_cfg = cfg.model_copy(update={"readout": "position"})
    mom_cfg = cfg.model_copy(update={"readout": "momentum"})

    values: List[complex] = []
    cis: List[float] = []
    for k, (b, lab) in enumerate(zip(basis.elements, basis.labels)):
        obs = Observable(b, label=lab)
        re = extrapolate_weak_value(obs, scenario.initial, f, pos_cfg, couplings, rng=rng.derive(k, 0))
        if mode == "complex":
            im = extrapolate_weak_value(obs, scenario.initial, f, mom_cfg, couplings, rng=rng.derive(k, 1))
            values.append(complex(re.estimate, im.estimate))
            cis.append(math.hypot(re.ci, im.ci))
        else:
            values.append(complex(re.estimate, 0.0))
            cis.append(re.ci)

    report = reconstruct_transient(
        scenario.initial, f, basis, values, mode=mode, source="simulated", cis=cis, ortho_eps=ortho_eps
    )
    logger.info(
        "tomography %s f=%s mode=%s: max_abs_error=%.3e max_ci=%.3e",
        scenario.name or "<scenario>",
        f.label,
        mode,
        report.max_abs_error,
        report.max_ci,
    )
    if report.max_abs_error > 5.0 * report.max_ci:
        logger.warning("tomography error %.3e exceeds 5x the largest ci %.3e", report.max_abs_error, report.max_ci)
    return report
