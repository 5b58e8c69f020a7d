from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pytest

from quasidet.numerics import SeededRng, haar_random_state, haar_random_unitary, random_hermitian
from quasidet.states import FinalBasis, Observable, PureState, Scenario, pauli, pauli_demo_scenario, preset_basis, preset_state


@dataclass(frozen=True)
class RandomCase:
    initial: PureState
    basis: FinalBasis
    observable: Observable


def make_random_case(dim: int, rng: SeededRng, normalize_spectrum: bool = False) -> RandomCase:
    i = PureState.from_amplitudes(haar_random_state(dim, rng), label="i")
    u = haar_random_unitary(dim, rng)
    basis = FinalBasis.from_columns(u)
    h = random_hermitian(dim, rng)
    if normalize_spectrum:
        h = h / np.max(np.abs(np.linalg.eigvalsh(h)))
    return RandomCase(initial=i, basis=basis, observable=Observable(h, label="H"))


@pytest.fixture
def rng_factory() -> Callable[..., SeededRng]:
    return lambda seed=1234, stream=0: SeededRng(seed, stream)


@pytest.fixture
def random_case() -> Callable[..., RandomCase]:
    return make_random_case


@pytest.fixture
def demo() -> Scenario:
    return pauli_demo_scenario()


@pytest.fixture
def x_plus() -> PureState:
    return preset_state("x+")


@pytest.fixture
def y_plus() -> PureState:
    return preset_state("y+")


@pytest.fixture
def y_basis() -> FinalBasis:
    return preset_basis("y")


@pytest.fixture
def x_plus_y() -> Observable:
    return pauli_demo_scenario().observable("X+Y")


@pytest.fixture
def pauli_x() -> Observable:
    return pauli("X")


@pytest.fixture(autouse=True)
def _isolated_cwd(tmp_path, monkeypatch):
    # logs/ and default out/ resolve against the working directory
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("QUASIDET_CONFIG", raising=False)
    monkeypatch.delenv("QUASIDET_LOG_LEVEL", raising=False)
    yield
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()
