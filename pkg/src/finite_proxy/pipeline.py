"""Stage orchestration: reduce, reconstruct, simulate, compare.

Each stage contributes scalars, numeric tables (with their tolerance and a
pass flag), and two-column plot series to a RunReport.  Stage dependencies
are resolved by running prerequisites first (compare/simulate pull in the
chain reconstruction).  Given the same config and seed the report is fully
deterministic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .chain_dynamics import (
    ChainState,
    build_modal_map,
    modal_compare,
    simulate_chain,
)
from .config import RunConfig
from .errors import DomainError
from .inverse_spectral import (
    chain_from_spectrum,
    chain_to_jacobi,
    eigen_tridiagonal,
    equal_mass_chain_spectrum,
    string_spectrum,
)
from .reduction import (
    mu_time_profiles,
    reconstruct_full_solution,
    solve_static_reduced,
    solve_wave_reduced,
    static_problem,
    wave_problem,
)

STAGES = ("reduce-static", "reduce-wave", "reconstruct-chain",
          "simulate-chain", "compare-spectra")
_STAGE_DEPS = {
    "simulate-chain": ("reconstruct-chain",),
    "compare-spectra": ("reconstruct-chain",),
}


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list]
    tolerance: float | None = None
    passed: bool | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "columns": self.columns, "rows": self.rows,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class PlotSeries:
    name: str
    x: list[float]
    y: list[float]

    def to_dict(self) -> dict:
        return {"name": self.name, "x": self.x, "y": self.y}


@dataclass
class StageResult:
    name: str
    status: str = "ok"
    scalars: dict = field(default_factory=dict)
    tables: list[Table] = field(default_factory=list)
    plots: list[PlotSeries] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "scalars": self.scalars,
                "tables": [t.to_dict() for t in self.tables],
                "plots": [p.to_dict() for p in self.plots]}


@dataclass
class RunReport:
    provenance: dict
    stages: dict
    timestamp: str

    def to_dict(self) -> dict:
        return {"provenance": self.provenance, "timestamp": self.timestamp,
                "stages": {k: v.to_dict() for k, v in self.stages.items()}}


def _comparison_table(name, indices, values, references, tolerance,
                      relative=True) -> Table:
    rows = []
    worst = 0.0
    for i, v, r in zip(indices, values, references):
        abs_err = abs(v - r)
        rel_err = abs_err / abs(r) if r != 0 else float("nan")
        err = rel_err if relative else abs_err
        if np.isfinite(err):
            worst = max(worst, err)
        rows.append([int(i), float(v), float(r), float(abs_err), float(rel_err)])
    return Table(name=name, columns=["mode_index", "value", "reference",
                                     "abs_err", "rel_err"],
                 rows=rows, tolerance=tolerance,
                 passed=bool(worst <= tolerance) if tolerance is not None else None)


def _mirror_table(name, values, tolerance) -> Table:
    """Persymmetry audit: each entry against its mirror partner."""
    mirrored = values[::-1]
    return _comparison_table(name, range(1, len(values) + 1), values, mirrored,
                             tolerance, relative=False)


def _stage_reduce(config: RunConfig, kind: str, context: dict) -> StageResult:
    nl = config.nonlinearity()
    if kind == "static":
        problem = static_problem(config.geometry(), nl,
                                 cutoff=config.pinned_cutoff, k_max=config.k_max,
                                 margin=config.margin,
                                 resolution=config.resolution_static,
                                 force=config.force)
        result = solve_static_reduced(problem, tol=config.solver_tol,
                                      fp_tol=config.fixed_point_tol)
    else:
        if config.T is None:
            raise DomainError("reduce-wave needs geometry.T")
        problem = wave_problem(config.geometry(), nl,
                               cutoff=config.pinned_cutoff, k_max=config.k_max,
                               j_max=config.j_max, margin=config.margin,
                               resolution=config.resolution_wave,
                               sigma_min=config.sigma_min, force=config.force)
        result = solve_wave_reduced(problem, tol=config.solver_tol,
                                    fp_tol=config.fixed_point_tol)
    context[f"reduction-{kind}"] = result
    stage = StageResult(name=f"reduce-{kind}")
    stage.scalars = {
        "cutoff": problem.cutoff,
        "k_max": problem.modes.k_max,
        "core_dim": problem.core_dim(),
        "contraction_ratio_theoretical": problem.contraction_ratio,
        "contraction_ratio_observed": result.contraction_ratio_observed,
        "residual_core": result.residual_core,
        "residual_tail": result.residual_tail,
        "weak_residual": result.weak_residual,
        "tail_band_norm": result.tail_band_norm,
        "newton_iterations": result.iterations,
        "solver_tolerance": config.solver_tol,
        "residuals_pass": bool(result.residual_core <= config.solver_tol
                               and result.weak_residual <= 10 * config.solver_tol),
    }
    if kind == "static":
        x = np.linspace(0.0, config.L, 513)
        values, weak = reconstruct_full_solution(result, x)
        stage.plots.append(PlotSeries("solution_profile",
                                      [float(v) for v in x],
                                      [float(v) for v in values]))
        stage.scalars["weak_residual_check"] = weak.norm
    else:
        t = np.linspace(0.0, config.T, 201)
        labels, _, prof = mu_time_profiles(problem, result.mu, t)
        for lab, series in zip(labels, prof):
            stage.plots.append(PlotSeries(f"mu_profile_{lab}",
                                          [float(v) for v in t],
                                          [float(v) for v in series]))
    return stage


def _stage_reconstruct(config: RunConfig, context: dict) -> StageResult:
    spec = string_spectrum(config.chain_n, config.L)
    chain = chain_from_spectrum(spec, config.total_mass)
    mapping = build_modal_map(chain)
    context["chain"] = chain
    context["modal_map"] = mapping

    stage = StageResult(name="reconstruct-chain")
    back = eigen_tridiagonal(chain_to_jacobi(chain))
    stage.tables.append(_comparison_table(
        "eigenvalue_roundtrip", range(1, config.chain_n + 1),
        back.values, spec.values, tolerance=1e-10))
    stage.tables.append(_mirror_table("masses", list(map(float, chain.masses)),
                                      tolerance=1e-9))
    stage.tables.append(_mirror_table("springs", list(map(float, chain.springs)),
                                      tolerance=1e-9))
    stage.scalars = {
        "n": chain.n,
        "total_mass": chain.total_mass,
        "persymmetric": bool(chain.is_persymmetric(tol=1e-9)),
        "masses": [float(m) for m in chain.masses],
        "springs": [float(k) for k in chain.springs],
    }
    beads = [float(i) for i in range(1, chain.n + 1)]
    stage.plots.append(PlotSeries("mass_profile", beads,
                                  [float(m) for m in chain.masses]))
    stage.plots.append(PlotSeries("spring_profile",
                                  [float(i) for i in range(1, chain.n + 2)],
                                  [float(k) for k in chain.springs]))
    for j in range(chain.n):
        stage.plots.append(PlotSeries(f"mode_shape_{j + 1}", beads,
                                      [float(v) for v in mapping.matrix[:, j]]))
    return stage


def _stage_simulate(config: RunConfig, context: dict) -> StageResult:
    chain = context["chain"]
    mapping = context["modal_map"]
    mode = config.sim_initial_mode
    if mode > chain.n:
        raise DomainError(f"initial mode {mode} exceeds chain size {chain.n}")
    q0 = np.zeros(chain.n)
    q0[mode - 1] = config.sim_amplitude
    state = ChainState(mapping.to_displacement(q0), np.zeros(chain.n))
    nl = config.nonlinearity()
    record = simulate_chain(chain, nl, state, dt=config.sim_dt,
                            steps=config.sim_steps,
                            sample_stride=config.sim_stride)
    e0 = record.energies[0]
    drift = float(np.max(np.abs(record.energies - e0)) / abs(e0)) if e0 else 0.0
    others = np.delete(record.modal, mode - 1, axis=1)
    leakage = float(np.max(np.abs(others)) / abs(config.sim_amplitude))

    stage = StageResult(name="simulate-chain")
    stage.scalars = {
        "dt": config.sim_dt,
        "steps": config.sim_steps,
        "initial_mode": mode,
        "initial_energy": float(e0),
        "energy_drift_rel": drift,
        "modal_leakage": leakage,
        "conservative": nl.is_zero,
    }
    times = [float(v) for v in record.times]
    stage.plots.append(PlotSeries("energy_trace", times,
                                  [float(v) for v in record.energies]))
    for j in range(chain.n):
        stage.plots.append(PlotSeries(f"modal_trajectory_{j + 1}", times,
                                      [float(v) for v in record.modal[:, j]]))
    context["trajectory"] = record
    return stage


def _stage_compare(config: RunConfig, context: dict, rng: np.random.Generator) -> StageResult:
    chain = context["chain"]
    mapping = context["modal_map"]
    n = config.chain_n
    stage = StageResult(name="compare-spectra")

    string = string_spectrum(n, config.L)
    uniform = equal_mass_chain_spectrum(n, config.L)
    stage.tables.append(_comparison_table(
        f"string_vs_equal_mass_N{n}", range(1, n + 1),
        uniform.values, string.values, tolerance=None))
    back = eigen_tridiagonal(chain_to_jacobi(chain))
    stage.tables.append(_comparison_table(
        f"string_vs_reconstructed_N{n}", range(1, n + 1),
        back.values, string.values, tolerance=1e-10))

    ratio = float(uniform.values[-1] / string.values[-1])
    four_over_pi_sq = float(4.0 / np.pi**2)
    stage.scalars = {
        "n": n,
        "largest_eigenvalue_ratio": ratio,
        "four_over_pi_squared": four_over_pi_sq,
        "ratio_abs_deviation": abs(ratio - four_over_pi_sq),
    }
    ks = [float(k) for k in range(1, n + 1)]
    stage.plots.append(PlotSeries(f"eigencompare_string_N{n}", ks,
                                  [float(v) for v in string.values]))
    stage.plots.append(PlotSeries(f"eigencompare_equal_mass_N{n}", ks,
                                  [float(v) for v in uniform.values]))
    stage.plots.append(PlotSeries(f"eigencompare_reconstructed_N{n}", ks,
                                  [float(v) for v in back.values]))

    # seeded spot check: M-orthonormality residual at random entries
    M = np.diag(chain.masses)
    gram = mapping.matrix.T @ M @ mapping.matrix - np.eye(chain.n)
    picks = rng.integers(0, chain.n, size=(3, 2))
    stage.scalars["orthonormality_spot_checks"] = [
        {"row": int(i), "col": int(j), "residual": float(gram[i, j])}
        for i, j in picks
    ]

    reduced = context.get("reduction-wave") or context.get("reduction-static")
    if reduced is not None and reduced.problem.cutoff == chain.n:
        cmp = modal_compare(chain, reduced, mapping, dt=config.sim_dt)
        stage.tables.append(_comparison_table(
            "modal_frequency_match", cmp.mode_index,
            cmp.chain_frequencies_sq, cmp.reduced_frequencies_sq,
            tolerance=1e-10))
        if cmp.trajectory_discrepancy is not None:
            stage.scalars["trajectory_discrepancy"] = [
                float(v) for v in cmp.trajectory_discrepancy
            ]
        stage.scalars["modal_compare_notes"] = cmp.notes
    elif reduced is not None:
        stage.scalars["modal_compare_notes"] = [
            f"skipped: core has {reduced.problem.cutoff} positive modes, "
            f"chain has {chain.n}"
        ]
    return stage


def resolve_stages(stages) -> list[str]:
    """Validate stage names and pull in prerequisites, in canonical order."""
    requested = list(stages)
    for name in requested:
        if name not in STAGES:
            raise DomainError(f"unknown stage {name!r}; known: {STAGES}")
    selected = set(requested)
    for name in requested:
        selected.update(_STAGE_DEPS.get(name, ()))
    return [s for s in STAGES if s in selected]


def run_pipeline(config: RunConfig, stages) -> RunReport:
    """Run the requested stages and assemble a deterministic report."""
    ordered = resolve_stages(stages)
    rng = np.random.default_rng(config.seed)
    context: dict = {}
    results: dict[str, StageResult] = {}
    for name in ordered:
        if name == "reduce-static":
            results[name] = _stage_reduce(config, "static", context)
        elif name == "reduce-wave":
            results[name] = _stage_reduce(config, "wave", context)
        elif name == "reconstruct-chain":
            results[name] = _stage_reconstruct(config, context)
        elif name == "simulate-chain":
            results[name] = _stage_simulate(config, context)
        elif name == "compare-spectra":
            results[name] = _stage_compare(config, context, rng)

    canonical = config.canonical_dict()
    blob = json.dumps(canonical, sort_keys=True).encode()
    provenance = {
        "config": canonical,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "package_version": __version__,
        "seed": config.seed,
        "stages_requested": list(stages),
        "stages_run": ordered,
    }
    timestamp = datetime.now(timezone.utc).isoformat()
    return RunReport(provenance=provenance, stages=results, timestamp=timestamp)
