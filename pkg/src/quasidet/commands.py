"""Command implementations shared by the CLI entry point and the tests.

Each `*_scenario` function is pure (scenario in, ReportBundle out); the `cmd_*` wrappers add
scenario loading and file output.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import AppConfig, SimConfig, Tolerances
from .errors import ParameterError
from .numerics import SeededRng
from .report_store import ReportBundle, ReportStore
from .scenario_file import load_scenario, scenario_digest
from .simulator import extrapolate_weak_value, run_weak_measurement
from .states import Scenario, born_weight, pauli_demo_scenario
from .tomography import (
    ReconstructionMode,
    ReconstructionSource,
    build_operator_basis,
    exact_weak_values,
    reconstruct_transient,
    tomography_from_simulation,
)
from .uncertainty import uncertainty_budget
from .weak import (
    is_anomalous,
    joint_quasi_distribution,
    transient_density,
    transient_moments,
    verify_decomposition,
    weak_conditional_probs,
    weak_value,
    weak_values_for_basis,
)


logger = logging.getLogger(__name__)


TOMOGRAPHY_BUDGET_FACTOR = 5.0


def _metadata(command: str, scenario: Scenario, tol: Tolerances, sim: Optional[SimConfig] = None) -> dict:
    meta = {
        "command": command,
        "package": "quasidet",
        "version": __version__,
        "numpy": np.__version__,
        "scenario": scenario.name,
        "scenario_sha256": scenario_digest(scenario),
        "dim": scenario.dim,
        "tolerances": tol.model_dump(mode="json"),
    }
    if sim is not None:
        meta["seed"] = sim.seed
        meta["simulation"] = sim.model_dump(mode="json")
    return meta


def _check(bundle: ReportBundle, name: str, observable: str, value: float, tolerance: float) -> bool:
    passed = bool(value <= tolerance)
    bundle.table("identity_checks").add(name, observable, float(value), float(tolerance), passed)
    if not passed:
        bundle.identity_passed = False
        logger.warning("identity check %s failed for %s: %.3e > %.1e", name, observable or "<scenario>", value, tolerance)
    return passed


def _rel(x: complex, ref: complex) -> float:
    return abs(x - ref) / max(1.0, abs(ref))


def analyze_scenario(scenario: Scenario, tol: Tolerances = Tolerances()) -> ReportBundle:
    bundle = ReportBundle(command="analyze", metadata=_metadata("analyze", scenario, tol))
    i, basis = scenario.initial, scenario.final_basis
    eps = tol.ortho_eps

    decomposition = verify_decomposition(i, basis, ortho_eps=eps)
    _check(bundle, "mixture_decomposition", "", decomposition.residual, tol.identity)
    _check(bundle, "transient_trace", "", max(decomposition.trace_errors, default=0.0), tol.identity)

    for a in scenario.observables:
        budget = uncertainty_budget(a, i, basis, ortho_eps=eps, imag_flag=tol.imag_flag)
        per_f = {cu.final_label: cu for _, cu in budget.per_f}
        norm_dev = 0.0
        mean_dev = 0.0
        moment_dev = 0.0
        for f, wv in zip(basis, weak_values_for_basis(a, i, basis, ortho_eps=eps)):
            p = born_weight(i, f)
            if wv is None:
                bundle.table("weak_values").add(a.label, f.label, p, math.nan, math.nan, False, True)
                continue
            bundle.table("weak_values").add(
                a.label, f.label, p, wv.real, wv.imag, is_anomalous(wv, a, tol.identity), False
            )

            row = weak_conditional_probs(a, i, f, ortho_eps=eps)
            for eigval, q in row.entries:
                bundle.table("quasi_probabilities").add(a.label, f.label, eigval, q.real, q.imag)
            norm_dev = max(norm_dev, abs(row.total - 1.0))
            mean_dev = max(mean_dev, _rel(row.mean(), wv.value))

            mean_r, _, unc_r = transient_moments(transient_density(i, f, ortho_eps=eps), a)
            moment_dev = max(moment_dev, _rel(mean_r, wv.value), _rel(unc_r, per_f[f.label].value))

        joint = joint_quasi_distribution(a, i, basis)
        for r, f_label in enumerate(joint.final_labels):
            for c, eigval in enumerate(joint.eigenvalues):
                z = joint.table[r, c]
                bundle.table("joint_quasi_distribution").add(a.label, f_label, eigval, z.real, z.imag)
        born = np.array([born_weight(i, f) for f in basis])
        born_dev = float(np.max(np.abs(joint.outcome_marginal() - born)))

        for p, cu in budget.per_f:
            bundle.table("conditional_uncertainty").add(
                a.label,
                cu.final_label,
                p,
                cu.weak_mean.real,
                cu.weak_mean.imag,
                cu.weak_second_moment.real,
                cu.weak_second_moment.imag,
                cu.value.real,
                cu.value.imag,
                cu.imag_flagged(tol.imag_flag),
            )
        bundle.table("uncertainty_budget").add(
            a.label,
            budget.mean,
            budget.total_variance,
            budget.weak_value_variance,
            budget.avg_conditional.real,
            budget.avg_conditional.imag,
            budget.decomposition_residual,
            ";".join(budget.skipped),
        )

        _check(bundle, "quasi_probability_normalization", a.label, norm_dev, tol.identity)
        _check(bundle, "quasi_probability_mean", a.label, mean_dev, tol.identity)
        _check(bundle, "born_marginal", a.label, born_dev, tol.identity)
        _check(bundle, "transient_moments", a.label, moment_dev, tol.identity)
        _check(bundle, "quasi_determinism", a.label, abs(budget.avg_conditional), tol.identity)
        _check(bundle, "variance_transfer", a.label, abs(budget.variance_transfer_residual), tol.identity)

    logger.info(
        "analyze %s: %d observables, identity checks %s",
        scenario.name or "<scenario>",
        len(scenario.observables),
        "passed" if bundle.identity_passed else "FAILED",
    )
    return bundle


def simulate_scenario(scenario: Scenario, sim: SimConfig, tol: Tolerances = Tolerances()) -> ReportBundle:
    bundle = ReportBundle(command="simulate", metadata=_metadata("simulate", scenario, tol, sim))
    i, basis = scenario.initial, scenario.final_basis
    base = SeededRng(sim.seed)

    for k, a in enumerate(scenario.observables):
        for rec in run_weak_measurement(a, i, basis, sim, rng=base.derive(k, 0)):
            bundle.table("pointer_records").add(
                a.label,
                rec.final_label,
                rec.g,
                rec.readout,
                rec.kept_shots,
                rec.post_selection_rate,
                rec.mean_reading,
                rec.stderr,
                rec.rescaled_mean,
                rec.rescaled_stderr,
            )
        for j, f in enumerate(basis):
            if born_weight(i, f) < tol.ortho_eps:
                continue
            ext = extrapolate_weak_value(a, i, f, sim, rng=base.derive(k, 1, j))
            wv = weak_value(a, i, f, ortho_eps=tol.ortho_eps)
            exact = wv.real if sim.readout == "position" else wv.imag
            bundle.table("extrapolation").add(
                a.label,
                f.label,
                ext.readout,
                ext.estimate,
                ext.ci,
                ext.curvature,
                ext.response,
                exact,
                bool(abs(ext.estimate - exact) <= 3.0 * ext.ci),
            )
    return bundle


def tomography_scenario(
    scenario: Scenario,
    mode: ReconstructionMode = "hermitian-part",
    source: ReconstructionSource = "exact",
    sim: Optional[SimConfig] = None,
    tol: Tolerances = Tolerances(),
) -> ReportBundle:
    if source == "simulated" and sim is None:
        raise ParameterError("simulated tomography needs a simulation config")
    bundle = ReportBundle(
        command="tomography",
        metadata=_metadata("tomography", scenario, tol, sim if source == "simulated" else None),
    )
    bundle.metadata["mode"] = mode
    bundle.metadata["source"] = source
    basis = build_operator_basis(scenario.dim)
    i = scenario.initial

    for f in scenario.final_basis:
        if born_weight(i, f) < tol.ortho_eps:
            logger.info("tomography: skipping outcome %s below ortho_eps", f.label)
            continue
        if source == "exact":
            report = reconstruct_transient(
                i, f, basis, exact_weak_values(i, f, basis, ortho_eps=tol.ortho_eps), mode=mode, ortho_eps=tol.ortho_eps
            )
            within = report.max_abs_error <= tol.identity
        else:
            report = tomography_from_simulation(
                scenario, sim, mode=mode, final_label=f.label, basis=basis, ortho_eps=tol.ortho_eps
            )
            within = report.max_abs_error <= TOMOGRAPHY_BUDGET_FACTOR * report.max_ci
        if not within:
            bundle.identity_passed = False

        bundle.table("reconstruction").add(
            f.label, report.mode, report.source, report.max_abs_error, report.max_ci, report.trace_error, within
        )
        for r in range(scenario.dim):
            for c in range(scenario.dim):
                z, t = report.reconstructed[r, c], report.target[r, c]
                bundle.table("reconstructed_matrix").add(f.label, r, c, z.real, z.imag, t.real, t.imag)
        cis: Sequence[float] = report.cis or [0.0] * len(basis)
        for lab, w, ci in zip(basis.labels, report.weak_values, cis):
            bundle.table("basis_weak_values").add(f.label, lab, w.real, w.imag, ci)
    return bundle


def paradox_summary(scenario: Scenario, tol: Tolerances = Tolerances()) -> List[str]:
    """Weak value of the summed observable against its spectrum, plus the signed uncertainties."""
    a = scenario.observables[-1]
    i, basis = scenario.initial, scenario.final_basis
    lo, hi = a.spectral_range
    budget = uncertainty_budget(a, i, basis, ortho_eps=tol.ortho_eps, imag_flag=tol.imag_flag)
    lines = ["paradox summary:"]
    for f in basis:
        if born_weight(i, f) < tol.ortho_eps:
            continue
        wv = weak_value(a, i, f, ortho_eps=tol.ortho_eps)
        flag = " (outside the spectrum)" if is_anomalous(wv, a, tol.identity) else ""
        lines.append(f"  weak value of {a.label} at f={f.label}: {wv.real:.12g}{wv.imag:+.12g}i{flag}")
    lines.append(f"  eigenvalues of {a.label}: {lo:.12g}, {hi:.12g} (largest magnitude {max(abs(lo), abs(hi)):.12g})")
    for p, cu in budget.per_f:
        lines.append(f"  conditional uncertainty at f={cu.final_label}: {cu.value.real:.12g} (p={p:.6g})")
    lines.append(f"  weighted average of conditional uncertainties: {abs(budget.avg_conditional):.3e}")
    return lines


def scenario_sim(scenario: Scenario, cfg: AppConfig) -> SimConfig:
    return scenario.sim if scenario.sim is not None else cfg.simulation


def apply_sim_overrides(
    sim: SimConfig,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    couplings: Optional[Sequence[float]] = None,
) -> SimConfig:
    if shots is not None and shots < 1:
        raise ParameterError(f"shots must be >= 1, got {shots}")
    if couplings is not None and any(not (c > 0) for c in couplings):
        raise ParameterError(f"couplings must be positive, got {list(couplings)}")
    update = {}
    if shots is not None:
        update["shots"] = int(shots)
    if seed is not None:
        update["seed"] = int(seed)
    if couplings is not None:
        update["couplings"] = [float(c) for c in couplings]
    return SimConfig.model_validate({**sim.model_dump(), **update})


def _emit(bundle: ReportBundle, out_dir: Path, cfg: AppConfig) -> ReportBundle:
    ReportStore(out_dir, fmt=cfg.output.format).write(bundle)
    return bundle


def cmd_analyze(scenario_path: str | Path, out_dir: Path, cfg: AppConfig) -> ReportBundle:
    scenario = load_scenario(scenario_path, tol_basis=cfg.tolerances.basis, tol_hermiticity=cfg.tolerances.hermiticity)
    return _emit(analyze_scenario(scenario, cfg.tolerances), out_dir, cfg)


def cmd_simulate(
    scenario_path: str | Path,
    out_dir: Path,
    cfg: AppConfig,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    couplings: Optional[Sequence[float]] = None,
) -> ReportBundle:
    scenario = load_scenario(scenario_path, tol_basis=cfg.tolerances.basis, tol_hermiticity=cfg.tolerances.hermiticity)
    sim = apply_sim_overrides(scenario_sim(scenario, cfg), shots=shots, seed=seed, couplings=couplings)
    return _emit(simulate_scenario(scenario, sim, cfg.tolerances), out_dir, cfg)


def cmd_tomography(
    scenario_path: str | Path,
    out_dir: Path,
    cfg: AppConfig,
    mode: Optional[ReconstructionMode] = None,
    source: Optional[ReconstructionSource] = None,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    couplings: Optional[Sequence[float]] = None,
) -> ReportBundle:
    scenario = load_scenario(scenario_path, tol_basis=cfg.tolerances.basis, tol_hermiticity=cfg.tolerances.hermiticity)
    mode = mode or cfg.tomography.mode
    source = source or cfg.tomography.source
    sim = None
    if source == "simulated":
        sim = apply_sim_overrides(
            scenario_sim(scenario, cfg),
            shots=shots if shots is not None else cfg.tomography.shots,
            seed=seed,
            couplings=couplings if couplings is not None else cfg.tomography.couplings,
        )
    return _emit(tomography_scenario(scenario, mode=mode, source=source, sim=sim, tol=cfg.tolerances), out_dir, cfg)


def cmd_demo_pauli(
    out_dir: Path,
    cfg: AppConfig,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    couplings: Optional[Sequence[float]] = None,
) -> ReportBundle:
    sim = apply_sim_overrides(cfg.simulation, shots=shots, seed=seed, couplings=couplings)
    scenario = pauli_demo_scenario(sim)
    bundle = analyze_scenario(scenario, cfg.tolerances)
    bundle.command = "demo"
    bundle.metadata["command"] = "demo"
    bundle.merge(simulate_scenario(scenario, sim, cfg.tolerances))
    bundle.summary_lines.extend(paradox_summary(scenario, cfg.tolerances))

    ext = bundle.tables.get("extrapolation")
    if ext is not None:
        for obs, f_label, est, ci in zip(
            ext.column("observable"), ext.column("final_label"), ext.column("estimate"), ext.column("ci")
        ):
            if obs == scenario.observables[-1].label:
                bundle.summary_lines.append(f"  simulated estimate at f={f_label}: {est:.6g} +- {ci:.2g}")
    return _emit(bundle, out_dir, cfg)
