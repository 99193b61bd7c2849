"""The hybrid quantum-classical loop: objective, optimizer, accounting.

The classical optimizer fills the roles the reference experiments assign
to L-BFGS-B (gradient method: quasi-Newton over the box, finite-difference
gradients) and COBYLA (simplex method: linear-approximation trust region).
Tolerance semantics follow those roles: for the gradient method
`tolerance` is the relative objective-improvement threshold (ftol); for
the simplex method it is the final trust-region radius in parameter space.

Every parameter vector is clipped to the box before the physics is
evaluated, so evaluated iterates always respect the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .evolve import (
    IntegratorConfig,
    initial_ground_state,
    propagate,
    propagate_terminal_batch,
    schedulable_terms,
    success_probability,
)
from .operators import exact_ground
from .problems import AnnealProblem
from .schedule import (
    PIECEWISE_LINEAR,
    ROLE_ENDPOINTS,
    ROLE_FINAL,
    ROLE_INITIAL,
    ScheduleSpec,
    assemble,
)

GRADIENT = "gradient"
SIMPLEX = "simplex"

MODE_ENERGY = "energy"
MODE_NEG_SUCCESS = "neg_success"


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = GRADIENT
    tolerance: float = 1e-6
    max_iterations: int = 500
    finite_difference_step: float = 1e-6  # gradient method only
    bounds: tuple = ()  # per-parameter (lo, hi); empty = set from the schedule spec
    initial_step: float | None = None  # simplex trust-region start (rhobeg)
    normalized: bool = False  # gradient method searches box-normalized coordinates

    def __post_init__(self):
        if self.method not in (GRADIENT, SIMPLEX):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.finite_difference_step <= 0:
            raise ValueError("finite_difference_step must be positive")


@dataclass
class OptimizationRun:
    best_params: np.ndarray
    best_objective: float
    objective_trace: list  # (iteration, objective value) per accepted evaluation
    evaluations: int  # total objective evaluations incl. gradient probes
    iterations: int
    converged: bool
    message: str = ""

    def running_minimum(self) -> np.ndarray:
        return np.minimum.accumulate([v for _, v in self.objective_trace])


@dataclass(frozen=True)
class TimeAccounting:
    p_single: float
    T_single: float
    N_opt: int
    M: int
    N_add: int
    total_anneal_time: float
    achieved_probability: float


def spec_for_problem(
    problem: AnnealProblem,
    *,
    split_count: int,
    initial_groups: int,
    final_groups: int,
    navigator_groups: int | None = None,
    amplitude_bound: float = 10.0,
    parameterization: str = PIECEWISE_LINEAR,
) -> ScheduleSpec:
    """ScheduleSpec with the default round-robin assignment for this problem."""
    ini, fin, nav = schedulable_terms(problem)
    return ScheduleSpec.build(
        len(ini),
        len(fin),
        len(nav),
        split_count=split_count,
        initial_groups=initial_groups,
        final_groups=final_groups,
        navigator_groups=navigator_groups,
        amplitude_bound=amplitude_bound,
        parameterization=parameterization,
    )


def initial_params(
    spec: ScheduleSpec,
    seed: int | None = None,
    *,
    navigator_init: str = "uniform",
    jitter: float = 0.05,
) -> np.ndarray:
    """Warm-start knots on the standard-ASP curve with seeded jitter.

    Initial-role knots start at 1-(i/S)^2, final-role at (i/S)^2, both with
    uniform jitter of +-`jitter`. Navigator knots start uniform in [-1, 1]
    (`navigator_init="uniform"`) or at 0 + jitter (`"zero"`).
    """
    rng = np.random.default_rng(seed)
    s = spec.split_count
    fractions = np.arange(1, s) / s
    chunks = []
    for role in spec.group_roles():
        if role == ROLE_INITIAL:
            base = 1.0 - fractions**2 + rng.uniform(-jitter, jitter, s - 1)
        elif role == ROLE_FINAL:
            base = fractions**2 + rng.uniform(-jitter, jitter, s - 1)
        elif navigator_init == "uniform":
            base = rng.uniform(-1.0, 1.0, s - 1)
        else:
            base = rng.uniform(-jitter, jitter, s - 1)
        chunks.append(base)
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return spec.clip(flat)


class ObjectiveEvaluator:
    """Reusable objective: assemble schedules, propagate, measure.

    Energy mode measures against accurate_h_fin, so optimizing a perturbed
    problem automatically minimizes the accurate energy (the control-error
    mitigation of the navigator construction falls out of this choice).
    neg_success mode returns -p against the oracle ground space of
    accurate_h_fin.

    `steps_policy` controls integration cost inside the loop:
      - "refine":  full step-halving refinement on every evaluation
      - "frozen":  refine once on the first evaluation, reuse that count
                   scaled by the current schedule amplitude headroom
    """

    def __init__(
        self,
        problem: AnnealProblem,
        spec: ScheduleSpec,
        T: float,
        integrator_cfg: IntegratorConfig,
        mode: str = MODE_ENERGY,
        steps_policy: str = "frozen",
    ):
        if mode not in (MODE_ENERGY, MODE_NEG_SUCCESS):
            raise ValueError(f"unknown objective mode {mode!r}")
        if steps_policy not in ("refine", "frozen"):
            raise ValueError(f"unknown steps_policy {steps_policy!r}")
        self.problem = problem
        self.spec = spec
        self.T = float(T)
        self.cfg = integrator_cfg
        self.mode = mode
        self.steps_policy = steps_policy
        self.psi0 = initial_ground_state(problem)
        self.ground_space = (
            exact_ground(problem.accurate_h_fin).ground_space
            if mode == MODE_NEG_SUCCESS
            else None
        )
        self._frozen_steps: int | None = None  # from the first refined run
        # one-norm (sum |J|) per schedule group, flattened group order: with
        # per-slice exponentials exact, accuracy needs ~<= 1 radian per slice
        # plus enough slices to resolve the schedule intervals
        ini, fin, nav = schedulable_terms(problem)
        norms = []
        for terms, assignment, count in (
            (ini, spec.initial_assignment, spec.initial_groups),
            (fin, spec.final_assignment, spec.final_groups),
            (nav, spec.navigator_assignment, spec.navigator_groups),
        ):
            for g in range(count if assignment else 0):
                norms.append(
                    sum(abs(t.coefficient) for t, a in zip(terms, assignment) if a == g)
                )
        self._group_norms = np.array(norms)
        self._role_endpoint_max = np.array(
            [max(abs(v) for v in ROLE_ENDPOINTS[r]) for r in spec.group_roles()]
        )

    def _radian_budget(self, params: np.ndarray) -> float:
        """Upper bound on integral of ||H(t)|| dt for these schedule knots."""
        per = self.spec.params_per_group
        amps = self._role_endpoint_max.copy()
        if per > 0 and self.spec.parameterization == PIECEWISE_LINEAR:
            knots = np.abs(params.reshape(-1, per))
            amps = np.maximum(amps, knots.max(axis=1))
        return float(self.T * np.sum(amps * self._group_norms))

    def _steps_for(self, params: np.ndarray) -> int | None:
        """Step count under the frozen policy."""
        if self.steps_policy == "refine" or self._frozen_steps is None:
            return None
        resolution_floor = 8 * self.spec.split_count
        return max(
            self._frozen_steps,
            int(math.ceil(self._radian_budget(params))),
            resolution_floor,
        )

    def _measure(self, result) -> float:
        if self.mode == MODE_ENERGY:
            return result.energy
        return -success_probability(result.final_state, self.ground_space)

    def __call__(self, params) -> float:
        params = np.asarray(params, dtype=float)
        schedules = assemble(self.spec, params, self.T)
        steps = self._steps_for(params)
        cfg = self.cfg if steps is None else replace(self.cfg, fixed_steps=steps)
        result = propagate(
            self.problem, schedules, self.T, cfg, self.psi0,
            ground_space=self.ground_space,
        )
        if self.steps_policy == "frozen" and self._frozen_steps is None and self.T > 0:
            self._frozen_steps = result.steps_used
        return self._measure(result)

    def batch(self, params_list) -> np.ndarray:
        """Vectorized evaluation for independent probes (FD gradients)."""
        if self.T == 0.0 or self._frozen_steps is None:
            return np.array([self(p) for p in params_list])
        sets = [assemble(self.spec, np.asarray(p, float), self.T) for p in params_list]
        steps = max(self._steps_for(np.asarray(p, float)) for p in params_list)
        finals = propagate_terminal_batch(self.problem, sets, self.T, steps, self.psi0)
        if self.mode == MODE_ENERGY:
            from .evolve import measure_energy

            return np.array(
                [measure_energy(psi, self.problem.accurate_h_fin) for psi in finals]
            )
        return np.array(
            [-success_probability(psi, self.ground_space) for psi in finals]
        )

    def evolve_at(self, params, integrator_cfg: IntegratorConfig | None = None):
        """Full EvolutionResult at `params` with refinement (for reporting)."""
        params = np.asarray(params, dtype=float)
        schedules = assemble(self.spec, params, self.T)
        cfg = integrator_cfg or self.cfg
        # start the refinement ladder at the amplitude-scaled step count so
        # large optimized amplitudes do not exhaust the refinement budget
        steps_hint = self._steps_for(params)
        if steps_hint is not None and self.T > 0:
            base = max(
                cfg.base_steps_per_unit_time, int(math.ceil(steps_hint / self.T))
            )
            cfg = replace(cfg, base_steps_per_unit_time=base, fixed_steps=None)
        return propagate(
            self.problem,
            schedules,
            self.T,
            cfg,
            self.psi0,
            ground_space=self.ground_space,
        )


def objective(
    problem: AnnealProblem,
    spec: ScheduleSpec,
    params,
    T: float,
    integrator_cfg: IntegratorConfig | None = None,
    mode: str = MODE_ENERGY,
) -> float:
    """One-shot objective evaluation (propagate, then measure)."""
    evaluator = ObjectiveEvaluator(
        problem, spec, T, integrator_cfg or IntegratorConfig(), mode,
        steps_policy="refine",
    )
    return evaluator(params)


def minimize(
    objective_fn,
    initial: np.ndarray,
    cfg: OptimizerConfig,
    *,
    batch_fn=None,
) -> OptimizationRun:
    """Bound-constrained minimization in the L-BFGS-B/COBYLA roles.

    `batch_fn`, when provided, evaluates a list of parameter vectors at
    once; the finite-difference gradient uses it so probe propagations run
    vectorized. Every evaluated point is clipped into the box first.
    """
    x0 = np.asarray(initial, dtype=float).ravel()
    if not cfg.bounds:
        bounds = [(-np.inf, np.inf)] * x0.size
    else:
        bounds = [tuple(b) for b in cfg.bounds]
    if len(bounds) != x0.size:
        raise ValueError(f"{len(bounds)} bounds for {x0.size} parameters")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    if np.any(x0 < lo - 1e-12) or np.any(x0 > hi + 1e-12):
        raise ValueError("initial parameters violate the bounds")

    state = {"evals": 0, "best": (np.inf, x0.copy()), "trace": []}

    def record(x, value):
        state["evals"] += 1
        state["trace"].append((state["evals"], float(value)))
        if value < state["best"][0]:
            state["best"] = (float(value), np.array(x, dtype=float))

    def wrapped(x):
        xc = np.clip(x, lo, hi)
        value = float(objective_fn(xc))
        record(xc, value)
        return value

    if x0.size == 0:
        value = float(objective_fn(x0))
        return OptimizationRun(
            best_params=x0,
            best_objective=value,
            objective_trace=[(1, value)],
            evaluations=1,
            iterations=0,
            converged=True,
            message="no free parameters",
        )

    if cfg.method == GRADIENT:
        # optionally optimize in box-normalized coordinates: quasi-Newton step
        # heuristics assume O(1) parameter scales, so a [-1, 1]^n search space
        # keeps the method effective when amplitude bounds are large
        finite = np.isfinite(lo) & np.isfinite(hi) & (hi > lo)
        if not cfg.normalized:
            finite = np.zeros_like(finite)
        mid = np.where(finite, 0.5 * (lo + hi), 0.0)
        half = np.where(finite, 0.5 * (hi - lo), 1.0)

        def to_x(y):
            return np.clip(mid + half * y, lo, hi)

        def wrapped_y(y):
            return wrapped(to_x(y))

        y0 = (x0 - mid) / half
        y_bounds = [
            (-1.0, 1.0) if f else (lo_i, hi_i)
            for f, lo_i, hi_i in zip(finite, lo, hi)
        ]
        h = cfg.finite_difference_step

        def jac(y):
            yc = np.clip(y, [b[0] for b in y_bounds], [b[1] for b in y_bounds])
            # forward differences, flipped to backward at the box edge
            steps = np.where(yc + h <= [b[1] for b in y_bounds], h, -h)
            probes_y = [yc]
            for i in range(yc.size):
                p = yc.copy()
                p[i] += steps[i]
                probes_y.append(p)
            probes_x = [to_x(p) for p in probes_y]
            if batch_fn is not None:
                values = np.asarray(batch_fn(probes_x), dtype=float)
            else:
                values = np.array([objective_fn(p) for p in probes_x])
            state["evals"] += len(probes_x)
            return (values[1:] - values[0]) / steps

        res = scipy.optimize.minimize(
            wrapped_y,
            y0,
            jac=jac,
            method="L-BFGS-B",
            bounds=y_bounds,
            options={
                "maxiter": cfg.max_iterations,
                "ftol": cfg.tolerance,
                "gtol": 1e-12,
            },
        )
        converged = bool(res.success)
        iterations = int(res.nit)
        message = str(res.message)
    else:
        constraints = [
            {"type": "ineq", "fun": lambda x, lo=lo: x - lo},
            {"type": "ineq", "fun": lambda x, hi=hi: hi - x},
        ]
        finite = np.isfinite(hi - lo)
        span = float(np.min((hi - lo)[finite])) if np.any(finite) else 2.0
        rhobeg = cfg.initial_step if cfg.initial_step is not None else min(1.0, span / 4)
        res = scipy.optimize.minimize(
            wrapped,
            x0,
            method="COBYLA",
            constraints=constraints,
            tol=cfg.tolerance,
            options={"maxiter": cfg.max_iterations, "rhobeg": rhobeg},
        )
        converged = bool(res.success)
        iterations = int(state["evals"])  # COBYLA iterations = evaluations
        message = str(res.message)

    best_value, best_x = state["best"]
    if iterations >= cfg.max_iterations and not converged:
        message = f"max_iterations ({cfg.max_iterations}) exhausted; {message}"
    return OptimizationRun(
        best_params=best_x,
        best_objective=best_value,
        objective_trace=state["trace"],
        evaluations=state["evals"],
        iterations=iterations,
        converged=converged,
        message=message,
    )


def run_vsqs(
    problem: AnnealProblem,
    spec: ScheduleSpec,
    T: float,
    optimizer_cfg: OptimizerConfig | None = None,
    integrator_cfg: IntegratorConfig | None = None,
    *,
    mode: str = MODE_ENERGY,
    seed: int | None = None,
    navigator_init: str = "uniform",
    init: np.ndarray | None = None,
    restarts: int = 0,
    steps_policy: str = "frozen",
):
    """The full iteration loop: init, optimize, final evolution at best params.

    Returns (OptimizationRun, EvolutionResult). With restarts > 0 the loop
    reruns with fresh seeded jitter and keeps the best objective.
    """
    optimizer_cfg = optimizer_cfg or OptimizerConfig()
    integrator_cfg = integrator_cfg or IntegratorConfig()
    evaluator = ObjectiveEvaluator(
        problem, spec, T, integrator_cfg, mode, steps_policy=steps_policy
    )
    if not optimizer_cfg.bounds:
        optimizer_cfg = replace(
            optimizer_cfg, bounds=tuple(spec.bounds(T if spec.parameterization != PIECEWISE_LINEAR else None))
        )
    base_seed = 0 if seed is None else int(seed)
    best_run = None
    for attempt in range(restarts + 1):
        x0 = (
            np.asarray(init, dtype=float)
            if init is not None and attempt == 0
            else initial_params(
                spec, seed=base_seed + attempt, navigator_init=navigator_init
            )
        )
        run = minimize(evaluator, x0, optimizer_cfg, batch_fn=evaluator.batch)
        if best_run is None or run.best_objective < best_run.best_objective:
            best_run = run
    final = evaluator.evolve_at(best_run.best_params)
    return best_run, final


def time_accounting(
    p_single: float,
    T_single: float,
    N_opt: int,
    M: int,
    target_probability: float,
) -> TimeAccounting:
    """Total-annealing-time bookkeeping for repeated runs.

    N_add is the minimal repetition count with cumulative success
    probability >= target; the total is T_single * (N_opt * M + N_add).
    """
    if not 0.0 < p_single <= 1.0:
        raise ValueError(f"p_single must be in (0, 1], got {p_single}")
    if not 0.0 < target_probability < 1.0:
        raise ValueError(f"target_probability must be in (0, 1), got {target_probability}")

    def achieved(n):
        return 1.0 - (1.0 - p_single) ** n

    if p_single >= target_probability:
        n_add = 1
    else:
        n_add = max(1, math.ceil(math.log1p(-target_probability) / math.log1p(-p_single)))
        while n_add > 1 and achieved(n_add - 1) >= target_probability:
            n_add -= 1
        while achieved(n_add) < target_probability:
            n_add += 1
    return TimeAccounting(
        p_single=p_single,
        T_single=T_single,
        N_opt=N_opt,
        M=M,
        N_add=n_add,
        total_anneal_time=T_single * (N_opt * M + n_add),
        achieved_probability=achieved(n_add),
    )
