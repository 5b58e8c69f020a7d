"""YAML scenario documents: parse into a Scenario, serialize back to canonical text.

Complex numbers are written as two-element [re, im] lists everywhere.
"""

from __future__ import annotations

import hashlib
import logging
import re
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import SimConfig
from .errors import QuasidetError, ScenarioError
from .numerics import DEFAULT_HERMITICITY_TOL, MAX_DIM, ComplexMatrix, ComplexVector
from .states import (
    DEFAULT_BASIS_TOL,
    PRESET_BASIS_NAMES,
    FinalBasis,
    Observable,
    PureState,
    Scenario,
    eigenbasis,
    pauli_demo_scenario,
    pauli_sum,
    preset_basis,
    preset_state,
)


logger = logging.getLogger(__name__)


BUILTIN_SCENARIOS = ("pauli_demo",)

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
ComplexPair = Tuple[FiniteFloat, FiniteFloat]


class StateDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: Optional[str] = None
    amplitudes: Optional[List[ComplexPair]] = None
    preset: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "StateDoc":
        if (self.amplitudes is None) == (self.preset is None):
            raise ValueError("give exactly one of 'amplitudes' or 'preset'")
        return self


class BasisVectorDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: Optional[str] = None
    amplitudes: List[ComplexPair]


class FinalBasisDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vectors: Optional[List[BasisVectorDoc]] = None
    preset: Optional[str] = None
    # only for preset 'eigenbasis'
    observable: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "FinalBasisDoc":
        if (self.vectors is None) == (self.preset is None):
            raise ValueError("give exactly one of 'vectors' or 'preset'")
        if self.preset == "eigenbasis" and not self.observable:
            raise ValueError("preset 'eigenbasis' needs 'observable'")
        return self


class ObservableDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    matrix: Optional[List[List[ComplexPair]]] = None
    pauli_string: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "ObservableDoc":
        if (self.matrix is None) == (self.pauli_string is None):
            raise ValueError("give exactly one of 'matrix' or 'pauli_string'")
        return self


class ScenarioDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = ""
    dim: int = Field(ge=1, le=MAX_DIM)
    initial: StateDoc
    final_basis: FinalBasisDoc
    observables: List[ObservableDoc] = Field(min_length=1)
    sim: Optional[SimConfig] = None


_PAULI_TERM = re.compile(
    r"\s*([+-])?\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)\s*\*?\s*)?([IXYZ]+)\s*"
)


def parse_pauli_string(text: str) -> Dict[str, float]:
    """'X+Y' -> {'X': 1, 'Y': 1}; '0.5*ZZ - XI' -> {'ZZ': 0.5, 'XI': -1}. Repeated words add up."""
    coeffs: Dict[str, float] = {}
    pos = 0
    first = True
    text = text.strip().upper()
    if not text:
        raise ValueError("empty Pauli string")
    while pos < len(text):
        m = _PAULI_TERM.match(text, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse Pauli string {text!r} at position {pos}")
        sign, coeff, word = m.groups()
        if sign is None and not first:
            raise ValueError(f"missing '+' or '-' before {word!r} in {text!r}")
        c = float(coeff) if coeff is not None else 1.0
        if sign == "-":
            c = -c
        coeffs[word] = coeffs.get(word, 0.0) + c
        pos = m.end()
        first = False
    lengths = {len(w) for w in coeffs}
    if len(lengths) != 1:
        raise ValueError(f"Pauli words in {text!r} have different lengths")
    return coeffs


def _complex_vector(pairs: List[Tuple[float, float]]) -> ComplexVector:
    return np.array([complex(re_, im_) for re_, im_ in pairs], dtype=np.complex128)


def _pairs(values: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values).reshape(-1)]


def _build_state(doc: StateDoc, dim: int, path: str) -> PureState:
    try:
        if doc.preset is not None:
            s = preset_state(doc.preset)
        else:
            s = PureState.from_amplitudes(_complex_vector(doc.amplitudes), label=doc.label or "i")
    except QuasidetError as exc:
        raise ScenarioError(path, str(exc)) from exc
    if s.dim != dim:
        raise ScenarioError(path, f"state has {s.dim} amplitudes, expected dim={dim}")
    if doc.label:
        s = s.relabel(doc.label)
    return s


def _build_observable(doc: ObservableDoc, dim: int, path: str, tol_hermiticity: float) -> Observable:
    field = "pauli_string" if doc.pauli_string is not None else "matrix"
    try:
        if doc.pauli_string is not None:
            try:
                coeffs = parse_pauli_string(doc.pauli_string)
            except ValueError as exc:
                raise ScenarioError(f"{path}.pauli_string", str(exc)) from exc
            n = len(next(iter(coeffs)))
            if 2**n != dim:
                raise ScenarioError(f"{path}.pauli_string", f"{n}-qubit Pauli string needs dim={2**n}, got {dim}")
            return pauli_sum(coeffs, label=doc.name)
        rows = doc.matrix or []
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ScenarioError(f"{path}.matrix", f"matrix must be {dim}x{dim}")
        m = np.array([[complex(a, b) for a, b in row] for row in rows], dtype=np.complex128)
        return Observable(m, label=doc.name, tol=tol_hermiticity)
    except ScenarioError:
        raise
    except QuasidetError as exc:
        raise ScenarioError(f"{path}.{field}", str(exc)) from exc


def _build_basis(
    doc: FinalBasisDoc, dim: int, observables: Dict[str, Observable], tol_basis: float
) -> FinalBasis:
    try:
        if doc.preset is not None:
            if doc.preset == "eigenbasis":
                if doc.observable not in observables:
                    raise ScenarioError("final_basis.observable", f"no observable named {doc.observable!r}")
                return eigenbasis(observables[doc.observable])
            if doc.preset not in PRESET_BASIS_NAMES:
                raise ScenarioError(
                    "final_basis.preset",
                    f"unknown preset {doc.preset!r} (expected one of {', '.join(PRESET_BASIS_NAMES)}, eigenbasis)",
                )
            return preset_basis(doc.preset, dim)
        states = []
        for k, v in enumerate(doc.vectors or []):
            if len(v.amplitudes) != dim:
                raise ScenarioError(f"final_basis.vectors.{k}.amplitudes", f"expected {dim} amplitudes")
            try:
                states.append(PureState.from_amplitudes(_complex_vector(v.amplitudes), label=v.label or f"f{k}"))
            except QuasidetError as exc:
                raise ScenarioError(f"final_basis.vectors.{k}", str(exc)) from exc
        return FinalBasis.from_states(states, tol=tol_basis)
    except ScenarioError:
        raise
    except QuasidetError as exc:
        raise ScenarioError("final_basis", str(exc)) from exc


def _loc(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(p) for p in loc)


def scenario_from_document(
    raw: Any, tol_basis: float = DEFAULT_BASIS_TOL, tol_hermiticity: float = DEFAULT_HERMITICITY_TOL
) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("", "scenario must be a YAML mapping")
    try:
        doc = ScenarioDoc.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ScenarioError(_loc(err["loc"]), err["msg"]) from exc

    initial = _build_state(doc.initial, doc.dim, "initial")
    observables = tuple(
        _build_observable(o, doc.dim, f"observables.{k}", tol_hermiticity) for k, o in enumerate(doc.observables)
    )
    basis = _build_basis(doc.final_basis, doc.dim, {o.label: o for o in observables}, tol_basis)
    return Scenario(
        dim=doc.dim,
        initial=initial,
        final_basis=basis,
        observables=observables,
        sim=doc.sim,
        name=doc.name,
    )


def parse_scenario(
    text: str, tol_basis: float = DEFAULT_BASIS_TOL, tol_hermiticity: float = DEFAULT_HERMITICITY_TOL
) -> Scenario:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ScenarioError(where, f"invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    return scenario_from_document(raw, tol_basis=tol_basis, tol_hermiticity=tol_hermiticity)


def load_scenario(
    path_or_name: str | Path,
    tol_basis: float = DEFAULT_BASIS_TOL,
    tol_hermiticity: float = DEFAULT_HERMITICITY_TOL,
) -> Scenario:
    """Read a scenario file; the bare name 'pauli_demo' selects the built-in scenario."""
    p = Path(path_or_name)
    if str(path_or_name) in BUILTIN_SCENARIOS and not p.exists():
        return pauli_demo_scenario()
    scenario = parse_scenario(p.read_text(encoding="utf-8"), tol_basis=tol_basis, tol_hermiticity=tol_hermiticity)
    logger.info("loaded scenario %s from %s (dim=%d)", scenario.name or "<unnamed>", p, scenario.dim)
    return scenario


def _matrix_rows(m: ComplexMatrix) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def scenario_to_document(scenario: Scenario) -> Dict[str, Any]:
    """Canonical form: explicit amplitudes and matrices, no presets."""
    doc: Dict[str, Any] = {
        "name": scenario.name,
        "dim": scenario.dim,
        "initial": {"label": scenario.initial.label, "amplitudes": _pairs(scenario.initial.ket)},
        "final_basis": {
            "vectors": [{"label": f.label, "amplitudes": _pairs(f.ket)} for f in scenario.final_basis],
        },
        "observables": [{"name": o.label, "matrix": _matrix_rows(o.matrix)} for o in scenario.observables],
    }
    if scenario.sim is not None:
        doc["sim"] = scenario.sim.model_dump(mode="json")
    return doc


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_document(scenario), sort_keys=False, allow_unicode=True)


def scenario_digest(scenario: Scenario) -> str:
    return hashlib.sha256(dump_scenario(scenario).encode("utf-8")).hexdigest()
