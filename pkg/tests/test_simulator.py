from __future__ import annotations

import math
import random

import numpy as np
import pytest

from quasidet.config import GridConfig, SimConfig
from quasidet.errors import ParameterError, PostselectionStarvedError
from quasidet.numerics import SeededRng
from quasidet.simulator import (
    ShotStats,
    calibrate_momentum_response,
    conditional_pointer_distribution,
    extrapolate_weak_value,
    fit_even_bias,
    merge_shot_stats,
    run_single_outcome,
    run_weak_measurement,
)
from quasidet.states import Observable, PureState, born_weight, pauli, preset_basis, preset_state
from quasidet.weak import weak_value

from conftest import make_random_case


def test_conditional_distribution_normalization_and_probabilities(x_plus, y_basis, x_plus_y):
    cfg = SimConfig(g=0.3)
    total = 0.0
    for f in y_basis:
        dist = conditional_pointer_distribution(x_plus_y, x_plus, f, cfg)
        assert np.trapezoid(dist.density, dist.grid) == pytest.approx(1.0, abs=1e-12)
        assert dist.cdf()[-1] == pytest.approx(1.0)
        total += dist.prob
    # the pointer marginal over all outcomes is the unperturbed Gaussian
    assert total == pytest.approx(1.0, abs=1e-9)


def test_weak_limit_pointer_mean_approaches_real_weak_value(x_plus, y_plus, x_plus_y):
    for g in (0.01, 0.005):
        dist = conditional_pointer_distribution(x_plus_y, x_plus, y_plus, SimConfig(g=g))
        assert dist.mean() / g == pytest.approx(2.0, abs=50 * g**2)


def test_strong_coupling_pointer_mean_lies_inside_spectrum(x_plus, y_plus, x_plus_y):
    dist = conditional_pointer_distribution(x_plus_y, x_plus, y_plus, SimConfig(g=8.0))
    assert abs(dist.mean() / 8.0) <= math.sqrt(2) + 1e-6


def test_momentum_response_matches_gaussian_pointer():
    for sigma in (1.0, 2.0):
        cfg = SimConfig(sigma=sigma, grid=GridConfig(points=8192))
        kappa = calibrate_momentum_response(cfg)
        assert kappa == pytest.approx(1.0 / (2.0 * sigma**2), rel=1e-4)


def test_inverse_cdf_sampling_reproduces_density_moments(x_plus, y_plus, x_plus_y):
    dist = conditional_pointer_distribution(x_plus_y, x_plus, y_plus, SimConfig(g=0.5))
    u = SeededRng(3).uniform(200_000)
    xs = dist.sample(u)
    assert xs.mean() == pytest.approx(dist.mean(), abs=5 / math.sqrt(len(xs)))


def test_operational_weak_limit(x_plus, y_basis, x_plus_y):
    cfg = SimConfig(g=0.05, sigma=1.0, shots=200_000, seed=11)
    records = run_weak_measurement(x_plus_y, x_plus, y_basis, cfg)
    rec = {r.final_label: r for r in records}["y+"]
    assert rec.post_selection_rate == pytest.approx(0.5, abs=0.01)
    assert abs(rec.rescaled_mean - 2.0) <= 5 * rec.rescaled_stderr
    assert sum(r.kept_shots for r in records) == cfg.shots
    assert rec.stderr > 0


def test_same_seed_same_records_regardless_of_workers(x_plus, y_basis, x_plus_y):
    cfg = SimConfig(shots=30_000, shard_size=7_000, seed=99)
    a = run_weak_measurement(x_plus_y, x_plus, y_basis, cfg)
    b = run_weak_measurement(x_plus_y, x_plus, y_basis, cfg)
    c = run_weak_measurement(x_plus_y, x_plus, y_basis, cfg.model_copy(update={"workers": 3}))
    assert a == b == c
    d = run_weak_measurement(x_plus_y, x_plus, y_basis, cfg.model_copy(update={"seed": 100}))
    assert a != d


def test_merge_is_order_independent():
    rng = random.Random(4)
    parts = [ShotStats(rng.randint(1, 9), rng.uniform(-1e8, 1e8), rng.uniform(0, 1e16)) for _ in range(50)]
    merged = merge_shot_stats(parts)
    rng.shuffle(parts)
    assert merge_shot_stats(parts) == merged
    assert merged.count == sum(p.count for p in parts)


def test_shot_stats_small_counts():
    assert math.isnan(ShotStats(0, 0.0, 0.0).mean)
    assert math.isnan(ShotStats(1, 2.0, 4.0).stderr)
    s = ShotStats(2, 2.0, 4.0)
    assert s.mean == 1.0
    assert s.variance == pytest.approx(2.0)


def test_orthogonal_single_outcome_is_starved():
    with pytest.raises(PostselectionStarvedError):
        run_single_outcome(pauli("Z"), preset_state("z+"), preset_state("z-"), SimConfig(g=0.05))


def test_single_outcome_rejects_other_outcomes(x_plus, y_plus, x_plus_y):
    cfg = SimConfig(g=0.05, shots=40_000, seed=5)
    rec = run_single_outcome(x_plus_y, x_plus, y_plus, cfg)
    assert rec.kept_shots == pytest.approx(20_000, abs=5 * math.sqrt(10_000))


def test_extrapolation_needs_three_weak_couplings(x_plus, y_plus, x_plus_y):
    cfg = SimConfig(shots=1000)
    with pytest.raises(ParameterError):
        extrapolate_weak_value(x_plus_y, x_plus, y_plus, cfg, couplings=[0.05, 0.1])
    with pytest.raises(ParameterError):
        extrapolate_weak_value(x_plus_y, x_plus, y_plus, cfg, couplings=[0.05, 0.1, 0.9])


def test_fit_even_bias_recovers_exact_quadratic():
    gs = [0.1, 0.2, 0.3, 0.4]
    w, se, c = fit_even_bias(gs, [1.5 - 2.0 * g**2 for g in gs], [0.01] * 4)
    assert w == pytest.approx(1.5, abs=1e-12)
    assert c == pytest.approx(-2.0, abs=1e-9)
    assert se > 0


@pytest.mark.slow
def test_extrapolated_demo_weak_value(x_plus, y_plus, x_plus_y):
    result = extrapolate_weak_value(x_plus_y, x_plus, y_plus, SimConfig(seed=20100108))
    assert abs(result.estimate - 2.0) <= 3 * result.ci
    assert result.couplings == pytest.approx((0.05, 0.1, 0.2))


@pytest.mark.slow
def test_momentum_readout_estimates_imaginary_part():
    i, f, z = preset_state("x+"), preset_state("y+"), pauli("Z")
    cfg = SimConfig(readout="momentum", seed=4, couplings=[0.05, 0.1, 0.2])
    result = extrapolate_weak_value(z, i, f, cfg)
    assert result.response == pytest.approx(0.5, rel=1e-3)
    assert abs(result.estimate - 1.0) <= 3 * result.ci


@pytest.mark.slow
def test_extrapolation_covers_random_weak_values():
    rng = SeededRng(31337)
    covered = 0
    for k in range(10):
        case = make_random_case(2 + k % 2, rng, normalize_spectrum=True)
        f = max(case.basis, key=lambda s: born_weight(case.initial, s))
        exact = weak_value(case.observable, case.initial, f).real
        result = extrapolate_weak_value(
            case.observable, case.initial, f, SimConfig(seed=1000 + k, shots=200_000)
        )
        covered += abs(result.estimate - exact) <= 3 * result.ci
    assert covered >= 8


def test_eigenstate_preparation_extrapolates_to_eigenvalue():
    z = pauli("Z")
    i = z.eigenstate(1, label="z+")
    result = extrapolate_weak_value(z, i, preset_state("x+"), SimConfig(shots=20_000, seed=12))
    assert abs(result.estimate - 1.0) <= 3 * result.ci
    assert result.ci < 0.5


def test_strong_coupling_resolves_eigenvalues_without_crosstalk():
    z = pauli("Z")
    i = PureState.from_amplitudes([0.6, 0.8j], label="i")
    cfg = SimConfig(g=20.0, sigma=1.0)
    for f, sign in zip(preset_basis("z"), (1.0, -1.0)):
        dist = conditional_pointer_distribution(z, i, f, cfg)
        wrong_side = sign * dist.grid < 0
        leaked = np.trapezoid(np.where(wrong_side, dist.density, 0.0), dist.grid)
        assert leaked < 1e-4
        assert dist.mean() == pytest.approx(sign * 20.0, abs=1e-6)
        assert dist.prob == pytest.approx(born_weight(i, f), abs=1e-9)


def test_scalar_observable_shifts_pointer_rigidly():
    rng = SeededRng(77)
    c = 1.7
    cfg = SimConfig(g=0.3)
    for _ in range(5):
        case = make_random_case(3, rng)
        a = Observable(c * np.eye(3), label="cI")
        for f in case.basis:
            dist = conditional_pointer_distribution(a, case.initial, f, cfg)
            assert dist.mean() == pytest.approx(cfg.g * c, abs=1e-9)
            assert dist.prob == pytest.approx(born_weight(case.initial, f), abs=1e-9)


def test_weak_coupling_probabilities_approach_born_weights():
    rng = SeededRng(5)
    cfg = SimConfig(g=1e-3, sigma=1.0)
    for dim in (2, 2, 3):
        case = make_random_case(dim, rng, normalize_spectrum=True)
        for f in case.basis:
            dist = conditional_pointer_distribution(case.observable, case.initial, f, cfg)
            assert abs(dist.prob - born_weight(case.initial, f)) <= 1e-6


@pytest.mark.parametrize("dim", [2, 3, 5])
def test_outcome_probabilities_sum_to_one_on_random_scenarios(dim):
    rng = SeededRng(900 + dim)
    for g in (0.05, 0.5, 3.0):
        case = make_random_case(dim, rng, normalize_spectrum=True)
        total = sum(
            conditional_pointer_distribution(case.observable, case.initial, f, SimConfig(g=g)).prob
            for f in case.basis
        )
        assert total == pytest.approx(1.0, abs=1e-9)


def test_exact_pointer_bias_shrinks_with_coupling(x_plus, y_plus, x_plus_y):
    biases = [
        abs(conditional_pointer_distribution(x_plus_y, x_plus, y_plus, SimConfig(g=g)).mean() / g - 2.0)
        for g in (0.2, 0.1, 0.05)
    ]
    assert biases[0] > biases[1] > biases[2] > 0
    # the leading bias term is even in g
    assert 3.0 <= biases[1] / biases[2] <= 5.0
