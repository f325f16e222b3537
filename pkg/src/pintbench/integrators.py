"""One-step theta-scheme integration and the propagator contract.

The integrator solves, per step of size ``k``,

    y_n - y_{n-1} - k * [theta * f(y_n, t_n) + (1 - theta) * f(y_{n-1}, t_{n-1})] = 0

with a damped Newton iteration. ``theta = 1/2`` is the Crank-Nicolson
scheme (second order), ``theta = 1`` backward Euler (first order), and
the shifted variant ``theta = 1/2 + theta0 * k`` trades a step-size
proportional amount of damping for retained second-order accuracy.

Propagators wrap the stepping loop behind ``advance(state, t_end)`` and
are the unit the parallel-in-time engine composes: a cheap coarse
propagator and an expensive fine one over the same windows. Propagators
are immutable after construction and safe to share across workers; each
``advance`` is deterministic, so identical inputs give bit-identical
outputs regardless of scheduling.
"""

from __future__ import annotations

import threading
import time as _time
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from . import problems as _problems
from .linalg import MaxItersExceeded, NewtonSettings, NumericBreakdown, newton_solve
from .state import State


class NonDivisibleWindow(ValueError):
    """Requested window is not an integer multiple of the propagator step."""


class TimeStepError(RuntimeError):
    """An implicit step failed; message carries the step's (t_n, k)."""


# mismatch below this relative threshold is absorbed into the last step
_WINDOW_RTOL = 1e-9


@dataclass(frozen=True)
class ThetaSettings:
    """Step size, implicitness shift, and Newton settings for theta stepping.

    The effective implicitness is ``theta = 1/2 + theta0 * step`` and must
    lie in [1/2, 1]; configurations outside that range are rejected.
    """

    step: float
    theta0: float = 0.0
    newton: NewtonSettings = field(default_factory=NewtonSettings)

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        theta = self.theta
        if not 0.5 - 1e-12 <= theta <= 1.0 + 1e-12:
            raise ValueError(f"effective theta {theta} outside [1/2, 1]; adjust theta0")

    @property
    def theta(self) -> float:
        return 0.5 + self.theta0 * self.step


def _theta_step(problem: _problems.ProblemSpec, state: State, settings: ThetaSettings):
    """One implicit step; returns (new state, Newton iterations used)."""
    k = settings.step
    theta = min(max(settings.theta, 0.5), 1.0)
    t0 = state.time
    t1 = t0 + k
    try:
        f0 = _problems.rhs_values(problem, state.values, t0)
    except _problems.MeshDegenerate as exc:
        raise TimeStepError(f"implicit step failed at t_n={t1!r}, k={k!r}: {exc}") from exc
    base = state.values + (k * (1.0 - theta)) * f0
    k_impl = k * theta

    def residual(y):
        # a trial iterate may leave the admissible region (e.g. collapse
        # the moving mesh); report it as a non-finite residual so the
        # Newton line search backs off instead of aborting
        try:
            return y - base - k_impl * _problems.rhs_values(problem, y, t1)
        except _problems.MeshDegenerate:
            return np.full_like(y, np.inf)

    try:
        solution, iters = newton_solve(residual, state.values, settings.newton)
    except (NumericBreakdown, MaxItersExceeded) as exc:
        raise TimeStepError(f"implicit step failed at t_n={t1!r}, k={k!r}: {exc}") from exc
    return state.with_values(solution, time=t1), iters


def theta_step(problem: _problems.ProblemSpec, s: State, settings: ThetaSettings) -> State:
    """Advance ``s`` by exactly one step of ``settings.step`` seconds."""
    new, _ = _theta_step(problem, s, settings)
    return new


class Propagator(Protocol):
    """Advances a state over a time window with a fixed internal step."""

    step: float
    cost_hint: float

    def advance(self, state: State, t_end: float) -> State:
        ...


def _split_window(window: float, step: float) -> int:
    """Number of internal steps for ``window``, validating divisibility."""
    n = max(int(round(window / step)), 1)
    mismatch = abs(window - n * step)
    if mismatch > _WINDOW_RTOL * max(abs(window), step):
        raise NonDivisibleWindow(
            f"window {window!r} is not an integer multiple of step {step!r} (mismatch {mismatch:.3e})"
        )
    return n


class ThetaPropagator:
    """Theta-scheme propagator for one problem at a fixed step size.

    ``advance`` composes as many steps as the window requires; rounding
    slack (below 1e-9 relative) is absorbed into the last step so the
    final time lands on ``t_end`` exactly. Newton iterations are
    accumulated in ``newton_iterations`` for cost diagnostics.
    """

    def __init__(self, problem: _problems.ProblemSpec, settings: ThetaSettings, cost_hint: float = 0.0):
        self.problem = problem
        self.settings = settings
        self.step = settings.step
        self.cost_hint = cost_hint
        self.newton_iterations = 0
        self.steps_taken = 0
        self._stats_lock = threading.Lock()

    def advance(self, state: State, t_end: float) -> State:
        window = t_end - state.time
        if window == 0.0:
            return state
        if window < 0.0:
            raise ValueError(f"cannot advance backwards from {state.time} to {t_end}")
        n = _split_window(window, self.step)

        s = state
        iters = 0
        for _ in range(n - 1):
            s, it = _theta_step(self.problem, s, self.settings)
            iters += it
        last = t_end - s.time
        sub = self.settings if last == self.step else replace(self.settings, step=last)
        s, it = _theta_step(self.problem, s, sub)
        iters += it
        if s.time != t_end:
            s = s.with_values(s.values, time=t_end)
        with self._stats_lock:
            self.newton_iterations += iters
            self.steps_taken += n
        return s


def make_propagator(
    problem: _problems.ProblemSpec, settings: ThetaSettings, cost_hint: float = 0.0
) -> ThetaPropagator:
    """Build the theta-scheme propagator for ``problem``."""
    return ThetaPropagator(problem, settings, cost_hint=cost_hint)


class SleepPropagator:
    """Synthetic propagator with a fixed wall-clock cost per internal step.

    Used to benchmark schedulers in isolation: every internal step sleeps
    ``cost_per_step`` seconds and applies a backward-Euler decay
    ``y <- y / (1 + decay_rate * dt)``, so coarse and fine instances
    disagree enough to keep the corrector active while the numerical work
    stays negligible next to the sleeps.
    """

    def __init__(self, step: float, cost_per_step: float, decay_rate: float = 1.0):
        if step <= 0.0:
            raise ValueError("step must be positive")
        if cost_per_step < 0.0:
            raise ValueError("cost_per_step must be non-negative")
        self.step = step
        self.cost_hint = cost_per_step
        self.decay_rate = decay_rate

    def advance(self, state: State, t_end: float) -> State:
        window = t_end - state.time
        if window == 0.0:
            return state
        if window < 0.0:
            raise ValueError(f"cannot advance backwards from {state.time} to {t_end}")
        n = _split_window(window, self.step)
        if self.cost_hint > 0.0:
            _time.sleep(n * self.cost_hint)
        dt = window / n
        factor = (1.0 + self.decay_rate * dt) ** (-n)
        return state.with_values(state.values * factor, time=t_end)


def convergence_order(
    problem: _problems.ProblemSpec,
    steps: Sequence[float],
    theta0: float = 0.0,
    fixed_theta: float | None = None,
    t_final: float = 1.0,
    newton: NewtonSettings | None = None,
    fine_factor: int = 8,
) -> float:
    """Observed order of the theta scheme on ``problem``.

    Integrates to ``t_final`` for every step size, measures the error
    against the reference solution, and returns the least-squares slope
    of log(error) versus log(step). With ``fixed_theta`` set, ``theta0``
    is chosen per step so the effective theta stays constant across the
    sweep (e.g. ``fixed_theta=1.0`` checks backward Euler at first order).
    """
    if len(steps) < 3:
        raise ValueError("need at least 3 step sizes to fit an order")
    newton_cfg = newton if newton is not None else NewtonSettings()
    ref = _problems.reference_solution(
        problem, t_final, fine_factor=fine_factor, base_step=min(steps), theta0=theta0
    )
    errors = []
    for k in steps:
        shift = (fixed_theta - 0.5) / k if fixed_theta is not None else theta0
        settings = ThetaSettings(step=k, theta0=shift, newton=newton_cfg)
        end = make_propagator(problem, settings).advance(_problems.initial_state(problem), t_final)
        errors.append(max(float(np.linalg.norm(end.values - ref.values)), 1e-300))
    slope = np.polyfit(np.log(np.asarray(steps, dtype=float)), np.log(np.asarray(errors)), 1)[0]
    return float(slope)
