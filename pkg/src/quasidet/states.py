from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .config import SimConfig
from .errors import NonHermitianError, ParameterError, ScenarioError, ShapeError
from .numerics import (
    DEFAULT_HERMITICITY_TOL,
    ComplexMatrix,
    ComplexVector,
    RealVector,
    adjoint,
    as_matrix,
    as_vector,
    degenerate_clusters,
    eigh,
    inner,
    max_abs,
    outer,
)


logger = logging.getLogger(__name__)


DEFAULT_BASIS_TOL = 1e-10
_SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class PureState:
    ket: ComplexVector
    label: str = ""
    # factor applied to the input amplitudes to reach unit norm
    norm_factor: float = 1.0

    @classmethod
    def from_amplitudes(cls, amplitudes: ArrayLike, label: str = "") -> "PureState":
        v = as_vector(amplitudes)
        norm = float(np.linalg.norm(v))
        if norm < 1e-300:
            raise ParameterError(f"state {label or '<unnamed>'} has zero norm")
        # already unit norm up to rounding: keep the amplitudes bit-for-bit
        if abs(norm - 1.0) <= 4 * np.finfo(float).eps:
            v.setflags(write=False)
            return cls(ket=v, label=label, norm_factor=1.0)
        ket = v / norm
        ket.setflags(write=False)
        return cls(ket=ket, label=label, norm_factor=1.0 / norm)

    @property
    def dim(self) -> int:
        return int(self.ket.shape[0])

    def projector(self) -> ComplexMatrix:
        return outer(self.ket, self.ket)

    def relabel(self, label: str) -> "PureState":
        return PureState(ket=self.ket, label=label, norm_factor=self.norm_factor)


@dataclass(frozen=True, eq=False)
class Eigenspace:
    value: float
    projector: ComplexMatrix
    multiplicity: int


class Observable:
    """Hermitian matrix with its spectral decomposition grouped into eigenspaces."""

    def __init__(self, matrix: ArrayLike, label: str = "", tol: float = DEFAULT_HERMITICITY_TOL):
        m = as_matrix(matrix)
        values, vectors = eigh(m, tol=tol)
        sym = (m + adjoint(m)) / 2.0
        sym.setflags(write=False)
        self.matrix: ComplexMatrix = sym
        self.label = label
        self.eigenvalues: RealVector = values
        self.eigenvectors: ComplexMatrix = vectors

        spaces = []
        for group in degenerate_clusters(values, max_abs(sym)):
            cols = vectors[:, group]
            proj = cols @ adjoint(cols)
            proj.setflags(write=False)
            spaces.append(Eigenspace(value=float(np.mean(values[group])), projector=proj, multiplicity=len(group)))
        self.eigenspaces: Tuple[Eigenspace, ...] = tuple(spaces)

    def __repr__(self) -> str:
        return f"Observable(label={self.label!r}, dim={self.dim}, eigenvalues={np.round(self.eigenvalues, 6).tolist()})"

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def spectral_range(self) -> Tuple[float, float]:
        return float(self.eigenvalues[0]), float(self.eigenvalues[-1])

    def squared(self) -> ComplexMatrix:
        return self.matrix @ self.matrix

    def eigenstate(self, k: int, label: str = "") -> PureState:
        return PureState.from_amplitudes(self.eigenvectors[:, k], label=label)


@dataclass(frozen=True, eq=False)
class FinalBasis:
    vectors: Tuple[PureState, ...]

    @classmethod
    def from_states(cls, states: Sequence[PureState], tol: float = DEFAULT_BASIS_TOL) -> "FinalBasis":
        states = tuple(states)
        if not states:
            raise ShapeError("final basis is empty")
        dim = states[0].dim
        if any(s.dim != dim for s in states):
            raise ShapeError("final basis vectors have different dimensions")
        if len(states) != dim:
            raise ShapeError(f"final basis needs {dim} vectors, got {len(states)}")

        cols = np.column_stack([s.ket for s in states])
        eye = np.eye(dim)
        gram_err = max_abs(adjoint(cols) @ cols - eye)
        if gram_err > tol:
            raise ParameterError(f"final basis is not orthonormal (max |<f|f'> - delta| = {gram_err:.3e})")
        completeness_err = max_abs(cols @ adjoint(cols) - eye)
        if completeness_err > tol:
            raise ParameterError(f"final basis is not complete (max |sum |f><f| - I| = {completeness_err:.3e})")

        labels = [s.label or f"f{k}" for k, s in enumerate(states)]
        if len(set(labels)) != len(labels):
            raise ParameterError(f"final basis labels are not unique: {labels}")
        return cls(vectors=tuple(s.relabel(lab) for s, lab in zip(states, labels)))

    @classmethod
    def from_columns(
        cls, columns: ArrayLike, labels: Optional[Sequence[str]] = None, tol: float = DEFAULT_BASIS_TOL
    ) -> "FinalBasis":
        cols = as_matrix(columns)
        n = cols.shape[1]
        labels = list(labels) if labels is not None else [f"f{k}" for k in range(n)]
        return cls.from_states([PureState.from_amplitudes(cols[:, k], label=labels[k]) for k in range(n)], tol=tol)

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    @property
    def labels(self) -> list[str]:
        return [v.label for v in self.vectors]

    def __iter__(self) -> Iterator[PureState]:
        return iter(self.vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    def completeness_error(self) -> float:
        cols = np.column_stack([s.ket for s in self.vectors])
        return max_abs(cols @ adjoint(cols) - np.eye(self.dim))


@dataclass(frozen=True, eq=False)
class Scenario:
    dim: int
    initial: PureState
    final_basis: FinalBasis
    observables: Tuple[Observable, ...]
    sim: Optional[SimConfig] = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.initial.dim != self.dim:
            raise ScenarioError("initial", f"dimension {self.initial.dim} does not match dim={self.dim}")
        if self.final_basis.dim != self.dim:
            raise ScenarioError("final_basis", f"dimension {self.final_basis.dim} does not match dim={self.dim}")
        names = []
        for k, obs in enumerate(self.observables):
            if obs.dim != self.dim:
                raise ScenarioError(f"observables.{k}", f"dimension {obs.dim} does not match dim={self.dim}")
            if not obs.label:
                raise ScenarioError(f"observables.{k}.name", "observable needs a name")
            names.append(obs.label)
        if len(set(names)) != len(names):
            raise ScenarioError("observables", f"observable names are not unique: {names}")

    def observable(self, name: str) -> Observable:
        for obs in self.observables:
            if obs.label == name:
                return obs
        raise KeyError(name)


def born_weight(i: PureState, f: PureState) -> float:
    if i.dim != f.dim:
        raise ShapeError(f"state dimensions differ: {i.dim} vs {f.dim}")
    p = abs(inner(f.ket, i.ket)) ** 2
    return min(1.0, max(0.0, p))


def expectation(a: Observable, s: PureState) -> float:
    if a.dim != s.dim:
        raise ShapeError(f"observable dim {a.dim} does not match state dim {s.dim}")
    val = inner(s.ket, a.matrix @ s.ket)
    tol = 1e-12 * max(1.0, max_abs(a.matrix))
    if abs(val.imag) > tol:
        raise NonHermitianError(abs(val.imag), tol)
    return val.real


_PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def pauli_matrix(name: str) -> ComplexMatrix:
    try:
        return _PAULI[name.upper()].copy()
    except KeyError:
        raise ParameterError(f"unknown Pauli operator {name!r} (expected one of I, X, Y, Z)") from None


def pauli_product_matrix(word: str) -> ComplexMatrix:
    """Tensor product for a Pauli word such as "XZ" (leftmost factor acts on the first qubit)."""
    if not word:
        raise ParameterError("empty Pauli word")
    m = pauli_matrix(word[0])
    for ch in word[1:]:
        m = np.kron(m, pauli_matrix(ch))
    return m


def pauli(name: str) -> Observable:
    return Observable(pauli_matrix(name), label=name.upper())


def pauli_sum(coeffs: Mapping[str, float], label: str = "") -> Observable:
    if not coeffs:
        raise ParameterError("pauli_sum needs at least one term")
    words = list(coeffs)
    n = len(words[0])
    if any(len(w) != n for w in words):
        raise ParameterError(f"Pauli words have different lengths: {words}")
    total = np.zeros((2**n, 2**n), dtype=np.complex128)
    for word, c in coeffs.items():
        if isinstance(c, complex) or not np.isrealobj(c):
            raise ParameterError(f"coefficient of {word} must be real, got {c!r}")
        total = total + float(c) * pauli_product_matrix(word)
    return Observable(total, label=label or _default_sum_label(coeffs))


def _default_sum_label(coeffs: Mapping[str, float]) -> str:
    parts = []
    for word, c in coeffs.items():
        c = float(c)
        if c == 1.0:
            term = word
        elif c == -1.0:
            term = f"-{word}"
        else:
            term = f"{c:g}*{word}"
        parts.append(term)
    return "+".join(parts).replace("+-", "-")


_PRESET_AMPLITUDES = {
    "z+": (1.0, 0.0),
    "z-": (0.0, 1.0),
    "x+": (_SQRT_HALF, _SQRT_HALF),
    "x-": (_SQRT_HALF, -_SQRT_HALF),
    "y+": (_SQRT_HALF, 1j * _SQRT_HALF),
    "y-": (_SQRT_HALF, -1j * _SQRT_HALF),
}

PRESET_STATE_NAMES = tuple(_PRESET_AMPLITUDES)
PRESET_BASIS_NAMES = ("x", "y", "z", "computational")


def preset_state(name: str) -> PureState:
    try:
        amps = _PRESET_AMPLITUDES[name]
    except KeyError:
        raise ParameterError(f"unknown state preset {name!r} (expected one of {', '.join(PRESET_STATE_NAMES)})") from None
    return PureState.from_amplitudes(amps, label=name)


def preset_basis(name: str, dim: int = 2) -> FinalBasis:
    if name == "computational":
        return FinalBasis.from_columns(np.eye(dim), labels=[str(k) for k in range(dim)])
    if name in ("x", "y", "z"):
        if dim != 2:
            raise ParameterError(f"basis preset {name!r} needs dim=2, got {dim}")
        return FinalBasis.from_states([preset_state(f"{name}+"), preset_state(f"{name}-")])
    raise ParameterError(f"unknown basis preset {name!r} (expected one of {', '.join(PRESET_BASIS_NAMES)})")


def eigenbasis(a: Observable) -> FinalBasis:
    labels = [f"{a.label or 'A'}[{k}]" for k in range(a.dim)]
    return FinalBasis.from_columns(a.eigenvectors, labels=labels)


def pauli_demo_scenario(sim: Optional[SimConfig] = None) -> Scenario:
    """Initial |x+>, post-selection on the Y eigenbasis, observables X, Y and X+Y."""
    return Scenario(
        dim=2,
        initial=preset_state("x+"),
        final_basis=preset_basis("y"),
        observables=(pauli("X"), pauli("Y"), pauli_sum({"X": 1.0, "Y": 1.0}, label="X+Y")),
        sim=sim,
        name="pauli_demo",
    )
