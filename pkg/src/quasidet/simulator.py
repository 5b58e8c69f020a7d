from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import SimConfig
from .errors import ParameterError, PostselectionStarvedError, ShapeError
from .numerics import ComplexVector, RealVector, SeededRng, inner
from .states import FinalBasis, Observable, PureState, pauli, preset_state


logger = logging.getLogger(__name__)


STARVED_PROB = 1e-12
MAX_WEAK_COUPLING = 0.5  # in units of sigma


@dataclass(frozen=True, eq=False)
class PointerDistribution:
    final_label: str
    readout: str
    grid: RealVector
    prob: float
    density: RealVector

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.density, self.grid))

    def cdf(self) -> RealVector:
        steps = (self.density[1:] + self.density[:-1]) * np.diff(self.grid) / 2.0
        cum = np.concatenate(([0.0], np.cumsum(steps)))
        return cum / cum[-1]

    def sample(self, u: np.ndarray) -> np.ndarray:
        cum = self.cdf()
        idx = np.searchsorted(cum, u, side="right") - 1
        idx = np.clip(idx, 0, len(cum) - 2)
        lo = cum[idx]
        width = cum[idx + 1] - lo
        frac = np.divide(u - lo, width, out=np.zeros_like(u), where=width > 0)
        return self.grid[idx] + frac * (self.grid[idx + 1] - self.grid[idx])


@dataclass(frozen=True)
class ShotStats:
    count: int
    total: float
    total_sq: float

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def variance(self) -> float:
        if self.count < 2:
            return math.nan
        return max(0.0, (self.total_sq - self.count * self.mean**2) / (self.count - 1))

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class PointerRecord:
    final_label: str
    kept_shots: int
    post_selection_rate: float
    mean_reading: float
    stderr: float
    rescaled_mean: float
    rescaled_stderr: float
    g: float
    readout: str


@dataclass(frozen=True)
class ExtrapolationResult:
    observable_label: str
    final_label: str
    readout: str
    estimate: float
    ci: float
    curvature: float
    couplings: Tuple[float, ...]
    rescaled_means: Tuple[float, ...]
    rescaled_stderrs: Tuple[float, ...]
    response: float = 1.0


def merge_shot_stats(parts: Iterable[ShotStats]) -> ShotStats:
    parts = list(parts)
    return ShotStats(
        count=sum(p.count for p in parts),
        total=math.fsum(p.total for p in parts),
        total_sq=math.fsum(p.total_sq for p in parts),
    )


def _eigenspace_amplitudes(a: Observable, i: PureState, f: PureState) -> Tuple[np.ndarray, np.ndarray]:
    if not (a.dim == i.dim == f.dim):
        raise ShapeError(f"dimension mismatch: observable {a.dim}, initial {i.dim}, final {f.dim}")
    values = np.array([s.value for s in a.eigenspaces])
    amps = np.array([inner(f.ket, s.projector @ i.ket) for s in a.eigenspaces], dtype=np.complex128)
    return values, amps


def pointer_grid(a: Observable, cfg: SimConfig) -> RealVector:
    if cfg.readout == "position":
        max_abs_value = float(np.max(np.abs(a.eigenvalues)))
        half = cfg.grid.half_width_in_sigmas * cfg.sigma + cfg.g * max_abs_value
    else:
        half = cfg.grid.half_width_in_sigmas / (2.0 * cfg.sigma)
    return np.linspace(-half, half, cfg.grid.points)


def _conditional_wavefunction(
    values: np.ndarray, amps: np.ndarray, grid: RealVector, cfg: SimConfig
) -> ComplexVector:
    if cfg.readout == "position":
        sigma = cfg.sigma
        shifted = grid[:, None] - cfg.g * values[None, :]
        gauss = (2.0 * math.pi * sigma**2) ** -0.25 * np.exp(-(shifted**2) / (4.0 * sigma**2))
        return gauss @ amps
    sigma_p = 1.0 / (2.0 * cfg.sigma)
    envelope = (2.0 * math.pi * sigma_p**2) ** -0.25 * np.exp(-(grid**2) / (4.0 * sigma_p**2))
    phases = np.exp(-1j * cfg.g * grid[:, None] * values[None, :])
    return envelope * (phases @ amps)


def conditional_pointer_distribution(
    a: Observable, i: PureState, f: PureState, cfg: SimConfig
) -> PointerDistribution:
    values, amps = _eigenspace_amplitudes(a, i, f)
    grid = pointer_grid(a, cfg)
    psi = _conditional_wavefunction(values, amps, grid, cfg)
    weight = np.abs(psi) ** 2
    prob = float(np.trapezoid(weight, grid))
    if prob < STARVED_PROB:
        raise PostselectionStarvedError(prob, f.label)
    density = weight / prob
    density.setflags(write=False)
    return PointerDistribution(final_label=f.label, readout=cfg.readout, grid=grid, prob=prob, density=density)


def _shard_sizes(shots: int, shard_size: int) -> List[int]:
    full, rest = divmod(shots, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _sample_outcomes(
    dists: Sequence[Optional[PointerDistribution]], cfg: SimConfig, rng: SeededRng
) -> List[ShotStats]:
    # mass not covered by `dists` is discarded
    probs = np.array([d.prob if d is not None else 0.0 for d in dists])
    covered = float(probs.sum())
    if covered > 1.0:
        probs = probs / covered
        covered = 1.0
    choice_p = np.append(probs, max(0.0, 1.0 - covered))
    choice_p = choice_p / choice_p.sum()
    n_out = len(dists)

    def run_shard(k_and_size: Tuple[int, int]) -> List[ShotStats]:
        k, size = k_and_size
        shard_rng = rng.derive(k)
        outcome = shard_rng.generator.choice(n_out + 1, size=size, p=choice_p)
        u_all = shard_rng.uniform(size)
        stats = []
        for j, dist in enumerate(dists):
            mask = outcome == j
            count = int(mask.sum())
            if dist is None or count == 0:
                stats.append(ShotStats(0, 0.0, 0.0))
                continue
            readings = dist.sample(u_all[mask])
            stats.append(ShotStats(count, float(np.sum(readings)), float(np.sum(readings**2))))
        logger.debug("shard %d: %d shots, kept %s", k, size, [s.count for s in stats])
        return stats

    shards = list(enumerate(_shard_sizes(cfg.shots, cfg.shard_size)))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_shard = list(pool.map(run_shard, shards))
    else:
        per_shard = [run_shard(s) for s in shards]
    return [merge_shot_stats(shard[j] for shard in per_shard) for j in range(n_out)]


def _record(label: str, stats: ShotStats, cfg: SimConfig) -> PointerRecord:
    return PointerRecord(
        final_label=label,
        kept_shots=stats.count,
        post_selection_rate=stats.count / cfg.shots,
        mean_reading=stats.mean,
        stderr=stats.stderr,
        rescaled_mean=stats.mean / cfg.g,
        rescaled_stderr=stats.stderr / cfg.g,
        g=cfg.g,
        readout=cfg.readout,
    )


def run_weak_measurement(
    a: Observable, i: PureState, basis: FinalBasis, cfg: SimConfig, rng: Optional[SeededRng] = None
) -> List[PointerRecord]:
    rng = rng if rng is not None else SeededRng(cfg.seed)
    dists: List[Optional[PointerDistribution]] = []
    for f in basis:
        try:
            dists.append(conditional_pointer_distribution(a, i, f, cfg))
        except PostselectionStarvedError:
            logger.info("outcome %s has no post-selection weight; no shots will be kept", f.label)
            dists.append(None)
    if all(d is None for d in dists):
        raise PostselectionStarvedError(0.0)

    stats = _sample_outcomes(dists, cfg, rng)
    records = [_record(f.label, s, cfg) for f, s in zip(basis, stats)]
    logger.info(
        "simulated %s: g=%g sigma=%g shots=%d readout=%s kept=%s",
        a.label,
        cfg.g,
        cfg.sigma,
        cfg.shots,
        cfg.readout,
        [r.kept_shots for r in records],
    )
    return records


def run_single_outcome(
    a: Observable, i: PureState, f: PureState, cfg: SimConfig, rng: Optional[SeededRng] = None
) -> PointerRecord:
    rng = rng if rng is not None else SeededRng(cfg.seed)
    dist = conditional_pointer_distribution(a, i, f, cfg)
    (stats,) = _sample_outcomes([dist], cfg, rng)
    return _record(f.label, stats, cfg)


def calibrate_momentum_response(cfg: SimConfig) -> float:
    # A = Z, i = |x+>, f = |y+> has weak value exactly i
    ref_cfg = cfg.model_copy(update={"readout": "momentum", "g": 1e-3 * cfg.sigma})
    dist = conditional_pointer_distribution(pauli("Z"), preset_state("x+"), preset_state("y+"), ref_cfg)
    kappa = dist.mean() / ref_cfg.g
    logger.debug("momentum response for sigma=%g: %.12g", cfg.sigma, kappa)
    return kappa


def _check_couplings(couplings: Sequence[float], sigma: float) -> List[float]:
    gs = sorted({float(g) for g in couplings})
    if len(gs) < 3:
        raise ParameterError(f"extrapolation needs at least 3 distinct couplings, got {list(couplings)}")
    for g in gs:
        if not (0.0 < g <= MAX_WEAK_COUPLING * sigma):
            raise ParameterError(f"coupling {g} is outside (0, {MAX_WEAK_COUPLING} sigma]")
    return gs


def fit_even_bias(couplings: Sequence[float], means: Sequence[float], stderrs: Sequence[float]) -> Tuple[float, float, float]:
    # mean(g) = w + c g^2, returns (w, se(w), c)
    g = np.asarray(couplings, dtype=float)
    y = np.asarray(means, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ParameterError("every coupling needs at least 2 kept shots with a positive spread")
    design = np.column_stack([np.ones_like(g), g**2])
    w = 1.0 / s
    coef, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)
    cov = np.linalg.inv(design.T @ (design * (w**2)[:, None]))
    return float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[1])


def extrapolate_weak_value(
    a: Observable,
    i: PureState,
    f: PureState,
    base_cfg: SimConfig,
    couplings: Optional[Sequence[float]] = None,
    rng: Optional[SeededRng] = None,
) -> ExtrapolationResult:
    # explicit couplings are absolute g; config couplings are in units of sigma
    gs = _check_couplings(couplings if couplings is not None else base_cfg.coupling_values(), base_cfg.sigma)
    rng = rng if rng is not None else SeededRng(base_cfg.seed)

    records = [run_single_outcome(a, i, f, base_cfg.with_coupling(g), rng.derive(k)) for k, g in enumerate(gs)]
    means = [r.rescaled_mean for r in records]
    errs = [r.rescaled_stderr for r in records]
    estimate, ci, curvature = fit_even_bias(gs, means, errs)

    response = calibrate_momentum_response(base_cfg) if base_cfg.readout == "momentum" else 1.0
    result = ExtrapolationResult(
        observable_label=a.label,
        final_label=f.label,
        readout=base_cfg.readout,
        estimate=estimate / response,
        ci=ci / abs(response),
        curvature=curvature / response,
        couplings=tuple(gs),
        rescaled_means=tuple(means),
        rescaled_stderrs=tuple(errs),
        response=response,
    )
    logger.info(
        "extrapolated %s at f=%s (%s): %.6g +- %.2g",
        a.label,
        f.label,
        base_cfg.readout,
        result.estimate,
        result.ci,
    )
    return result
