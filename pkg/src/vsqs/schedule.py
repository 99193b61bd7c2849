"""Parameterized annealing schedules.

A schedule assigns every Hamiltonian term (initial, final, navigator role)
to a group; each group carries one scalar function of time built from
variational knots. Piecewise-linear interpolation over S equal intervals
is the default; a bang-bang (switch-time) parameterization is also
provided. Role boundary conditions are enforced by construction:

    initial groups:    value(0) = 1, value(T) = 0
    final groups:      value(0) = 0, value(T) = 1
    navigator groups:  value(0) = 0, value(T) = 0
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PIECEWISE_LINEAR = "piecewise-linear"
BANG_BANG = "bang-bang"

ROLE_INITIAL = "initial"
ROLE_FINAL = "final"
ROLE_NAVIGATOR = "navigator"

# (value at t=0, value at t=T) per role
ROLE_ENDPOINTS = {
    ROLE_INITIAL: (1.0, 0.0),
    ROLE_FINAL: (0.0, 1.0),
    ROLE_NAVIGATOR: (0.0, 0.0),
}


def _round_robin(n_terms: int, n_groups: int) -> tuple[int, ...]:
    """Default grouping: one term per group up to the group count, then wrap."""
    return tuple(i % n_groups for i in range(n_terms)) if n_groups else ()


@dataclass(frozen=True)
class ScheduleSpec:
    """The (S, I, F) parameterization: group counts, bounds, assignments.

    Assignments map each term (by position in its role's term list) to a
    group id local to that role.
    """

    split_count: int
    initial_groups: int
    final_groups: int
    navigator_groups: int
    amplitude_bound: float
    parameterization: str = PIECEWISE_LINEAR
    initial_assignment: tuple[int, ...] = ()
    final_assignment: tuple[int, ...] = ()
    navigator_assignment: tuple[int, ...] = ()

    def __post_init__(self):
        if self.split_count < 1:
            raise ValueError("split_count must be >= 1")
        if self.initial_groups < 1 or self.final_groups < 1:
            raise ValueError("initial_groups and final_groups must be >= 1")
        if self.navigator_groups < 0:
            raise ValueError("navigator_groups must be >= 0")
        if self.amplitude_bound <= 0:
            raise ValueError("amplitude_bound must be positive")
        if self.parameterization not in (PIECEWISE_LINEAR, BANG_BANG):
            raise ValueError(f"unknown parameterization: {self.parameterization!r}")
        for role, assignment, count in (
            (ROLE_INITIAL, self.initial_assignment, self.initial_groups),
            (ROLE_FINAL, self.final_assignment, self.final_groups),
            (ROLE_NAVIGATOR, self.navigator_assignment, self.navigator_groups),
        ):
            if assignment and count > len(assignment):
                raise ValueError(
                    f"{role}: {count} groups but only {len(assignment)} terms"
                )
            if any(g < 0 or g >= max(count, 1) for g in assignment):
                raise ValueError(f"{role}: group id out of range in {assignment}")
            if assignment and set(assignment) != set(range(count)):
                raise ValueError(f"{role}: every group must receive at least one term")

    @classmethod
    def build(
        cls,
        n_initial_terms: int,
        n_final_terms: int,
        n_navigator_terms: int = 0,
        *,
        split_count: int,
        initial_groups: int,
        final_groups: int,
        navigator_groups: int | None = None,
        amplitude_bound: float = 10.0,
        parameterization: str = PIECEWISE_LINEAR,
    ) -> "ScheduleSpec":
        """Spec with the default round-robin term-to-group assignment.

        `n_final_terms` counts schedulable (non-identity) final terms only.
        """
        if navigator_groups is None:
            navigator_groups = n_navigator_terms
        if n_navigator_terms == 0:
            navigator_groups = 0
        return cls(
            split_count=split_count,
            initial_groups=initial_groups,
            final_groups=final_groups,
            navigator_groups=navigator_groups,
            amplitude_bound=float(amplitude_bound),
            parameterization=parameterization,
            initial_assignment=_round_robin(n_initial_terms, initial_groups),
            final_assignment=_round_robin(n_final_terms, final_groups),
            navigator_assignment=_round_robin(n_navigator_terms, navigator_groups),
        )

    @property
    def n_groups(self) -> int:
        return self.initial_groups + self.final_groups + self.navigator_groups

    @property
    def params_per_group(self) -> int:
        # S-1 interior knots (piecewise-linear) or S-1 switch times (bang-bang)
        return self.split_count - 1

    @property
    def n_params(self) -> int:
        return self.n_groups * self.params_per_group

    def group_roles(self) -> list[str]:
        """Role of each group in flattened order (initial, final, navigator)."""
        return (
            [ROLE_INITIAL] * self.initial_groups
            + [ROLE_FINAL] * self.final_groups
            + [ROLE_NAVIGATOR] * self.navigator_groups
        )

    def bounds(self, T: float | None = None) -> list[tuple[float, float]]:
        """Per-parameter box for the optimizer."""
        if self.parameterization == BANG_BANG:
            if T is None:
                raise ValueError("bang-bang bounds need the total time T")
            return [(0.0, float(T))] * self.n_params
        b = self.amplitude_bound
        return [(-b, b)] * self.n_params

    def clip(self, params: np.ndarray, T: float | None = None) -> np.ndarray:
        lo, hi = np.array(self.bounds(T)).T if self.n_params else (0.0, 0.0)
        return np.clip(np.asarray(params, dtype=float), lo, hi)


def eval_piecewise_linear(knots, t, T: float, split_count: int):
    """Linear interpolation through knots placed at i*T/S, i = 0..S.

    `knots` has length S+1 and includes the fixed role endpoints.
    Accepts scalar or array `t`; everything in [0, T].
    """
    knots = np.asarray(knots, dtype=float)
    if knots.shape != (split_count + 1,):
        raise ValueError(
            f"expected {split_count + 1} knots for split_count={split_count}, "
            f"got {knots.shape}"
        )
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError(f"t outside [0, {T}]")
    if T == 0.0:
        out = np.full_like(t_arr, knots[0])
        return float(out) if np.isscalar(t) else out
    grid = np.linspace(0.0, T, split_count + 1)
    out = np.interp(t_arr, grid, knots)
    return float(out) if np.isscalar(t) else out


def eval_bang_bang(switch_times, t, T: float, start_level: float, end_level: float):
    """Piecewise-constant schedule toggling between 0 and 1 at each switch.

    The value at exactly t=T is the role endpoint, realized by a final
    instantaneous switch; the variational parameters are the switch times.
    """
    times = np.asarray(switch_times, dtype=float)
    if times.size and (np.any(np.diff(times) <= 0)):
        raise ValueError(f"switch times must be strictly increasing: {times}")
    if times.size and (times[0] < 0.0 or times[-1] > T):
        raise ValueError(f"switch times outside [0, {T}]: {times}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError(f"t outside [0, {T}]")
    flips = np.searchsorted(times, t_arr, side="right")
    level = np.where(flips % 2 == 0, start_level, 1.0 - start_level)
    level = np.where(t_arr == T, end_level, level)
    return float(level) if np.isscalar(t) else level


def standard_asp(t, T: float):
    """The fixed quadratic reference schedule: A = 1 - (t/T)^2, B = (t/T)^2."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > T):
        raise ValueError(f"t outside [0, {T}]")
    if T == 0.0:
        b = np.zeros_like(t_arr)
    else:
        b = (t_arr / T) ** 2
    a = 1.0 - b
    if np.isscalar(t):
        return float(a), float(b)
    return a, b


@dataclass(frozen=True)
class ScheduleSet:
    """Assembled, evaluable schedules: one vectorized function per group."""

    T: float
    initial: tuple[Callable, ...]
    final: tuple[Callable, ...]
    navigator: tuple[Callable, ...]
    initial_assignment: tuple[int, ...]
    final_assignment: tuple[int, ...]
    navigator_assignment: tuple[int, ...]

    def group_values(self, role: str, t):
        """Schedule value of every group of `role` at time(s) t."""
        funcs = {
            ROLE_INITIAL: self.initial,
            ROLE_FINAL: self.final,
            ROLE_NAVIGATOR: self.navigator,
        }[role]
        return np.array([f(t) for f in funcs])

    def term_values(self, role: str, t):
        """Schedule value of every term of `role` at scalar time t."""
        assignment = {
            ROLE_INITIAL: self.initial_assignment,
            ROLE_FINAL: self.final_assignment,
            ROLE_NAVIGATOR: self.navigator_assignment,
        }[role]
        values = self.group_values(role, t)
        return values[list(assignment)] if assignment else np.zeros(0)


def _pl_group_function(interior, t0_value, tT_value, T, split_count):
    knots = np.concatenate(([t0_value], np.asarray(interior, float), [tT_value]))
    return lambda t: eval_piecewise_linear(knots, t, T, split_count)


def _bb_group_function(times, start_level, end_level, T):
    times = np.asarray(times, dtype=float)
    return lambda t: eval_bang_bang(times, t, T, start_level, end_level)


def assemble(spec: ScheduleSpec, params, T: float) -> ScheduleSet:
    """Build the evaluable ScheduleSet for a flat parameter vector.

    Parameters are laid out group-major in role order (initial groups,
    final groups, navigator groups), S-1 values per group.
    """
    params = np.asarray(params, dtype=float).ravel()
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"parameter count mismatch: spec wants {spec.n_params} "
            f"({spec.n_groups} groups x {spec.params_per_group}), got {params.size}"
        )
    per = spec.params_per_group
    funcs: dict[str, list] = {ROLE_INITIAL: [], ROLE_FINAL: [], ROLE_NAVIGATOR: []}
    for g, role in enumerate(spec.group_roles()):
        chunk = params[g * per : (g + 1) * per]
        v0, vT = ROLE_ENDPOINTS[role]
        if spec.parameterization == PIECEWISE_LINEAR:
            funcs[role].append(
                _pl_group_function(chunk, v0, vT, T, spec.split_count)
            )
        else:
            funcs[role].append(_bb_group_function(np.sort(chunk), v0, vT, T))
    return ScheduleSet(
        T=float(T),
        initial=tuple(funcs[ROLE_INITIAL]),
        final=tuple(funcs[ROLE_FINAL]),
        navigator=tuple(funcs[ROLE_NAVIGATOR]),
        initial_assignment=spec.initial_assignment,
        final_assignment=spec.final_assignment,
        navigator_assignment=spec.navigator_assignment,
    )


def standard_asp_set(T: float, n_initial_terms: int, n_final_terms: int) -> ScheduleSet:
    """ScheduleSet for standard ASP: all terms share A(t) / B(t)."""
    def a_func(t):
        return standard_asp(t, T)[0]

    def b_func(t):
        return standard_asp(t, T)[1]

    return ScheduleSet(
        T=float(T),
        initial=(a_func,),
        final=(b_func,),
        navigator=(),
        initial_assignment=tuple(0 for _ in range(n_initial_terms)),
        final_assignment=tuple(0 for _ in range(n_final_terms)),
        navigator_assignment=(),
    )


def reversed_set(schedules: ScheduleSet) -> ScheduleSet:
    """Time-reversed schedules: each group evaluated at T - t.

    Initial-role functions then run 0 -> 1 and final-role 1 -> 0, which is
    the construction used by the reverse-annealing regression check.
    """
    T = schedules.T

    def flip(f):
        return lambda t: f(T - np.asarray(t, dtype=float))

    return ScheduleSet(
        T=T,
        initial=tuple(flip(f) for f in schedules.initial),
        final=tuple(flip(f) for f in schedules.final),
        navigator=tuple(flip(f) for f in schedules.navigator),
        initial_assignment=schedules.initial_assignment,
        final_assignment=schedules.final_assignment,
        navigator_assignment=schedules.navigator_assignment,
    )
