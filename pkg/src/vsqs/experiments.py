"""Experiment orchestration: every figure-style dataset as a table.

Each operation returns a list of row dicts (grid order preserved) plus a
list of recorded per-row failures; writers emit CSV with a header row and
a JSON sidecar carrying the fully resolved configuration. Grid points and
histogram trials run concurrently when VSQS_THREADS allows; per-task seeds
keep results byte-deterministic regardless of completion order.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .evolve import IntegratorConfig, initial_ground_state, propagate
from .operators import exact_ground
from .optimize import (
    GRADIENT,
    MODE_ENERGY,
    MODE_NEG_SUCCESS,
    OptimizerConfig,
    run_vsqs,
    spec_for_problem,
    time_accounting,
)
from .problems import (
    AnnealProblem,
    NoiseSpec,
    load_problem,
    navigator_gucc,
    perturb_couplings,
)
from .schedule import (
    PIECEWISE_LINEAR,
    ROLE_FINAL,
    ROLE_INITIAL,
    ROLE_NAVIGATOR,
    assemble,
    standard_asp_set,
)

STANDARD = "standard"
VSQS = "vsqs"


@dataclass(frozen=True)
class ChemicalAccuracy:
    """1 kcal/mol expressed in Hartree (fixed conversion)."""

    threshold: float = 1.5936e-3


CHEMICAL_ACCURACY = ChemicalAccuracy().threshold


@dataclass(frozen=True)
class ScheduleConfig:
    split_count: int = 5
    initial_groups: int = 1
    final_groups: int = 1
    navigator_groups: int | None = None  # None = one group per navigator term
    amplitude_bound: float = 10.0
    parameterization: str = PIECEWISE_LINEAR


@dataclass(frozen=True)
class MethodConfig:
    """Everything needed to evaluate one method at one anneal time."""

    kind: str = VSQS  # "standard" or "vsqs"
    schedule: ScheduleConfig = ScheduleConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    mode: str = MODE_ENERGY
    seed: int = 0
    navigator_init: str = "uniform"
    restarts: int = 0
    steps_policy: str = "frozen"
    use_navigator: bool = True

    @property
    def label(self) -> str:
        if self.kind == STANDARD:
            return "standard"
        s = self.schedule
        return f"vsqs({s.split_count},{s.initial_groups},{s.final_groups})b{s.amplitude_bound:g}"


def _threads() -> int:
    env = os.environ.get("VSQS_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _parallel_map(fn, items):
    """Map preserving item order, concurrent when allowed."""
    workers = _threads()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _strip_navigator(problem: AnnealProblem) -> AnnealProblem:
    return replace(problem, h_nav=None) if problem.h_nav is not None else problem


def evaluate_method(
    problem: AnnealProblem,
    method: MethodConfig,
    T: float,
    integrator_cfg: IntegratorConfig,
) -> dict:
    """One run of `method` at anneal time T: energy, success, convergence."""
    work = problem if method.use_navigator else _strip_navigator(problem)
    oracle = exact_ground(work.accurate_h_fin)
    if method.kind == STANDARD:
        n_ini = len(work.h_ini.non_identity_terms)
        n_fin = len(work.h_fin.non_identity_terms)
        schedules = standard_asp_set(T, n_ini, n_fin)
        result = propagate(
            work, schedules, T, integrator_cfg,
            initial_ground_state(work), ground_space=oracle.ground_space,
        )
        return {
            "T": T,
            "method": method.label,
            "energy": result.energy,
            "success_probability": result.success_probability,
            "error_vs_exact": result.energy - oracle.ground_energy,
            "converged": True,
            "iterations": 0,
            "evaluations": 1,
            "norm_drift": result.norm_drift,
        }
    sched_cfg = method.schedule
    spec = spec_for_problem(
        work,
        split_count=sched_cfg.split_count,
        initial_groups=sched_cfg.initial_groups,
        final_groups=sched_cfg.final_groups,
        navigator_groups=sched_cfg.navigator_groups,
        amplitude_bound=sched_cfg.amplitude_bound,
        parameterization=sched_cfg.parameterization,
    )
    run, final = run_vsqs(
        work,
        spec,
        T,
        method.optimizer,
        integrator_cfg,
        mode=method.mode,
        seed=method.seed,
        navigator_init=method.navigator_init,
        restarts=method.restarts,
        steps_policy=method.steps_policy,
    )
    p_final = final.success_probability
    if p_final is None:
        from .evolve import success_probability as _sp

        p_final = _sp(final.final_state, oracle.ground_space)
    return {
        "T": T,
        "method": method.label,
        "energy": final.energy,
        "success_probability": p_final,
        "error_vs_exact": final.energy - oracle.ground_energy,
        "converged": run.converged,
        "iterations": run.iterations,
        "evaluations": run.evaluations,
        "norm_drift": final.norm_drift,
        "best_params": run.best_params,
        "trace": run.objective_trace,
    }


def sweep_energy_vs_T(
    problem: AnnealProblem,
    method: MethodConfig,
    t_grid,
    integrator_cfg: IntegratorConfig | None = None,
):
    """One optimized (or standard) run per grid point, rows in grid order."""
    t_grid = list(t_grid)
    if any(t < 0 for t in t_grid) or any(
        b <= a for a, b in zip(t_grid, t_grid[1:])
    ):
        raise ValueError("T grid must be strictly increasing and non-negative")
    integrator_cfg = integrator_cfg or IntegratorConfig()
    failures: list = []

    def run_point(item):
        index, T = item
        try:
            row = evaluate_method(problem, method, T, integrator_cfg)
            row.pop("best_params", None)
            row.pop("trace", None)
            return row
        except Exception as exc:  # per-row failures recorded, sweep continues
            return {"T": T, "method": method.label, "error": str(exc)}

    rows = _parallel_map(run_point, list(enumerate(t_grid)))
    failures = [r for r in rows if "error" in r]
    return rows, failures


def compute_tca(
    problem: AnnealProblem,
    method: MethodConfig,
    t_max: float,
    resolution: float,
    integrator_cfg: IntegratorConfig | None = None,
    t_grid=None,
    threshold: float = CHEMICAL_ACCURACY,
):
    """Smallest T with |E(T) - E_exact| <= threshold: first grid crossing,
    refined by bisection between the bracketing grid points.

    Returns (tca_or_None, rows); rows record every evaluation made.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    integrator_cfg = integrator_cfg or IntegratorConfig()
    oracle = exact_ground(problem.accurate_h_fin)
    if t_grid is None:
        n = max(2, int(np.ceil(t_max / max(resolution * 10, t_max / 24))))
        t_grid = list(np.linspace(t_max / n, t_max, n))
    t_grid = [float(t) for t in t_grid if t <= t_max] or [t_max]
    rows = []

    def error_at(T):
        row = evaluate_method(problem, method, T, integrator_cfg)
        row.pop("best_params", None)
        row.pop("trace", None)
        rows.append(row)
        return row["energy"] - oracle.ground_energy

    crossing = None
    previous = None  # (T, err) below threshold? last grid point above
    for T in t_grid:
        err = error_at(T)
        if err <= threshold:
            crossing = (previous, T)
            break
        previous = T
    if crossing is None:
        best = min(rows, key=lambda r: r["energy"])
        return None, rows
    lo_t, hi_t = crossing
    if lo_t is None:
        lo_t = 0.0
    while hi_t - lo_t > resolution:
        mid = 0.5 * (lo_t + hi_t)
        if mid == 0.0:
            break
        if error_at(mid) <= threshold:
            hi_t = mid
        else:
            lo_t = mid
    return hi_t, rows


def bond_length_scan(
    paths: dict,
    methods,
    t_max: float,
    resolution: float,
    integrator_cfg: IntegratorConfig | None = None,
):
    """T_CA per (bond length, method) over per-d coefficient files.

    `paths` maps bond length d -> .ham file path. Missing files are
    recorded as failures; the scan continues.
    """
    rows, failures = [], []
    for d in sorted(paths):
        try:
            problem = load_problem(paths[d])
        except (OSError, ValueError) as exc:
            failure = {"d": d, "method": "-", "tca": "", "error": str(exc)}
            failures.append(failure)
            rows.append(failure)
            continue
        for method in methods:
            tca, _ = compute_tca(problem, method, t_max, resolution, integrator_cfg)
            rows.append(
                {
                    "d": d,
                    "method": method.label,
                    "tca": tca if tca is not None else "",
                    "reached": tca is not None,
                }
            )
    return rows, failures


def success_curve(
    problem: AnnealProblem,
    standard_grid,
    vsqs_points,
    vsqs_method: MethodConfig,
    integrator_cfg: IntegratorConfig | None = None,
):
    """Standard-ASP p(T) curve plus per-T VSQS optimization traces.

    Returns (curve_rows, trace_rows): curve rows in grid order for the
    standard method and one row per vsqs point; trace rows carry
    (T, iteration, p) for each vsqs optimization.
    """
    integrator_cfg = integrator_cfg or IntegratorConfig()
    standard = MethodConfig(kind=STANDARD, mode=MODE_NEG_SUCCESS)
    curve_rows, failures = sweep_energy_vs_T(
        problem, standard, list(standard_grid), integrator_cfg
    )
    trace_rows = []
    for T in vsqs_points:
        row = evaluate_method(problem, vsqs_method, T, integrator_cfg)
        for iteration, value in row.pop("trace", []):
            trace_rows.append({"T": T, "iteration": iteration, "p": -value})
        row.pop("best_params", None)
        curve_rows.append(row)
    failures += [r for r in curve_rows if "error" in r]
    return curve_rows, trace_rows, failures


def export_schedules(
    spec_or_none,
    best_params,
    T: float,
    samples_per_interval: int = 20,
    problem: AnnealProblem | None = None,
):
    """Densely sampled schedule values: t, A per group, B, C, stoquastic flag.

    The flag marks rows where some navigator coupling is positive; any such
    row means the instantaneous Hamiltonian is non-stoquastic in the
    computational basis (a sign change across rows implies both signs occur).
    """
    if spec_or_none is None:
        schedules = standard_asp_set(T, 1, 1)
        split = 1
    else:
        schedules = assemble(spec_or_none, best_params, T)
        split = spec_or_none.split_count
    n_samples = split * samples_per_interval + 1
    times = np.linspace(0.0, T, n_samples)
    rows = []
    for t in times:
        a = np.atleast_1d(schedules.group_values(ROLE_INITIAL, float(t)))
        b = np.atleast_1d(schedules.group_values(ROLE_FINAL, float(t)))
        c = np.atleast_1d(schedules.group_values(ROLE_NAVIGATOR, float(t))) if schedules.navigator else np.zeros(0)
        row = {"t": float(t)}
        row.update({f"A{g}": float(v) for g, v in enumerate(a)})
        row.update({f"B{g}": float(v) for g, v in enumerate(b)})
        row.update({f"C{g}": float(v) for g, v in enumerate(c)})
        row["nonstoquastic"] = bool(np.any(c > 1e-12))
        rows.append(row)
    return rows


def noise_histogram(
    problem: AnnealProblem,
    trials: int,
    noise: NoiseSpec,
    *,
    standard_T: float = 20.0,
    vsqs_T: float = 1.0,
    vsqs_method: MethodConfig | None = None,
    integrator_cfg: IntegratorConfig | None = None,
):
    """Control-error histogram: per trial, standard ASP vs navigator VSQS.

    Each trial perturbs the final-Hamiltonian couplings with a fresh seed,
    runs standard ASP at `standard_T` on the perturbed Hamiltonian, and a
    GUCC-navigator VSQS optimization at `vsqs_T`; both energies are
    measured with the accurate coefficients.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    integrator_cfg = integrator_cfg or IntegratorConfig(refinement_tolerance=1e-7)
    if vsqs_method is None:
        vsqs_method = MethodConfig(
            kind=VSQS,
            schedule=ScheduleConfig(
                split_count=10, initial_groups=2, final_groups=4,
                amplitude_bound=10.0,
            ),
            optimizer=OptimizerConfig(
                method=GRADIENT, tolerance=1e-6, max_iterations=300,
                finite_difference_step=1e-4,
            ),
            navigator_init="zero",
        )
    exact_energy = exact_ground(problem.accurate_h_fin).ground_energy
    standard = MethodConfig(kind=STANDARD)

    def run_trial(trial):
        seed = noise.seed + trial
        noisy = perturb_couplings(problem, NoiseSpec(noise.mean, noise.stddev, seed))
        noisy = replace(noisy, h_nav=navigator_gucc(noisy))
        try:
            std_row = evaluate_method(noisy, standard, standard_T, integrator_cfg)
            vsqs_row = evaluate_method(noisy, vsqs_method, vsqs_T, integrator_cfg)
            return {
                "trial": trial,
                "seed": seed,
                "E_standard": std_row["energy"],
                "E_vsqs": vsqs_row["energy"],
                "standard_within_ca": abs(std_row["energy"] - exact_energy)
                <= CHEMICAL_ACCURACY,
                "vsqs_within_ca": abs(vsqs_row["energy"] - exact_energy)
                <= CHEMICAL_ACCURACY,
            }
        except Exception as exc:
            return {"trial": trial, "seed": seed, "error": str(exc)}

    rows = _parallel_map(run_trial, list(range(trials)))
    failures = [r for r in rows if "error" in r]
    return rows, failures


def ising_accounting(run_iterations: int, p_single: float, T_single: float,
                     M: int = 1, target: float = 0.99):
    """JSON-ready total-annealing-time accounting for an optimized run."""
    acc = time_accounting(p_single, T_single, run_iterations, M, target)
    return asdict(acc)


def write_csv(path, rows, fieldnames=None) -> None:
    """Deterministic CSV: header row + %.17g float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        fieldnames = fieldnames or ["empty"]
    else:
        fieldnames = fieldnames or list(rows[0].keys())
        for row in rows:
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)

    def fmt(value):
        if isinstance(value, bool):
            return "1" if value else "0"
        if isinstance(value, float):
            return f"{value:.17g}"
        if value is None:
            return ""
        return str(value)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: fmt(v) for k, v in row.items()})


def write_sidecar(path, config: dict) -> None:
    """JSON sidecar with the fully resolved configuration."""
    sidecar = Path(str(path) + ".meta.json")
    sidecar.parent.mkdir(parents=True, exist_ok=True)

    def default(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if hasattr(obj, "__dataclass_fields__"):
            return asdict(obj)
        return str(obj)

    sidecar.write_text(
        json.dumps(config, indent=2, sort_keys=True, default=default) + "\n",
        encoding="utf-8",
    )
