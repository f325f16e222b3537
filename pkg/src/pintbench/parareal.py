"""Parallel-in-time iteration with serial and pipelined schedulers.

The algorithm splits the horizon into ``L`` equal windows, seeds every
window boundary with a cheap coarse propagator ``C``, then iterates: all
windows are re-propagated with the expensive fine propagator ``F`` (in
parallel), and a sequential sweep corrects each boundary via

    X[i][l+1] = theta * C(X[i][l]) + F(X[i-1][l]) - theta * C(X[i-1][l])

with ``theta = 1`` for the classic update. The weighted variants pick
``theta`` from the inner products of the fine value and the new coarse
prediction per layout block (least-squares projection, or the same
projection further divided by the fine norm to damp mismatched pairs),
average over blocks, and clamp to a configured interval.

Two schedulers execute the same task graph: ``serial`` runs tasks in
deterministic priority order on the calling thread; ``pipelined`` runs
them on a worker pool where a window's fine propagation for iteration
``i`` starts as soon as the iteration ``i-1`` corrector has published
that window's left boundary, overlapping successive iterations. Every
task writes a slot no other task touches, so results are bit-identical
across schedulers and worker counts.
"""

from __future__ import annotations

import heapq
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .integrators import Propagator, _split_window
from .state import State

VARIANTS = ("classic", "least_squares", "angle_penalized")
SCHEDULERS = ("serial", "pipelined")

# blocks with coarse mass below this are skipped by the weighting (theta 1)
_DEGENERATE_MASS = 1e-28


class PararealError(RuntimeError):
    """A propagator failed inside the iteration; message carries (iteration, interval)."""


@dataclass(frozen=True)
class PararealConfig:
    """Interval count, iteration budget, stopping rule, and scheduling."""

    intervals: int
    max_iters: int
    tol: float = 1e-10
    variant: str = "classic"
    theta_clamp: tuple = (0.0, 1.0)
    scheduler: str = "serial"
    workers: int = 1

    def __post_init__(self):
        if self.intervals < 2:
            raise ValueError("need at least 2 intervals")
        if not 1 <= self.max_iters <= self.intervals:
            raise ValueError("max_iters must lie in [1, intervals]; further iterations cannot improve")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        lo, hi = self.theta_clamp
        if lo > hi:
            raise ValueError("theta_clamp must be a non-empty interval")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}, expected one of {SCHEDULERS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class RunTrace:
    """Per-iteration records collected by :func:`run_parareal`.

    Lists are indexed by iteration (starting at 1); inner lists by
    interval boundary 1..L. ``iterate_values`` additionally keeps the raw
    boundary vectors of every iteration, including the coarse
    initialization at index 0. ``iteration_seconds`` are cumulative wall
    times from the start of the run to the completion of each iteration's
    corrector sweep.
    """

    intervals: int
    variant: str
    scheduler: str
    iterations_run: int = 0
    converged: bool = False
    theta_values: list = field(default_factory=list)
    correction_norms: list = field(default_factory=list)
    boundary_errors: list = field(default_factory=list)
    iterate_values: list = field(default_factory=list)
    init_seconds: float = 0.0
    iteration_seconds: list = field(default_factory=list)
    total_seconds: float = 0.0
    fine_propagations: int = 0


@dataclass(frozen=True)
class ErrorEntry:
    """Relative boundary error; ``absolute`` flags a zero-norm reference."""

    value: float
    absolute: bool = False


@dataclass(frozen=True)
class SpeedupModel:
    """Inputs of the analytic speedup estimate.

    ``r`` is the fine/coarse step-size ratio, ``iters`` the iteration
    count and ``intervals`` the number of windows (one worker each).
    """

    r: float
    iters: int
    intervals: int

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError("step ratio r must be positive")
        if not 0 < self.iters <= self.intervals:
            raise ValueError("iteration count must lie in (0, intervals]")


def theoretical_speedup(model: SpeedupModel) -> float:
    """Best-case speedup ``1 / (r + (K/N) * (1 + r))`` of the pipelined run."""
    return 1.0 / (model.r + (model.iters / model.intervals) * (1.0 + model.r))


def sequential_solve(F: Propagator, s0: State, t_grid: Sequence[float]) -> list:
    """Propagate ``s0`` through every grid point in one uninterrupted run."""
    grid = [float(t) for t in t_grid]
    if len(grid) < 2:
        raise ValueError("time grid needs at least two points")
    if abs(grid[0] - s0.time) > 1e-12 * max(1.0, abs(s0.time)):
        raise ValueError(f"grid starts at {grid[0]} but the state is at {s0.time}")
    for a, b in zip(grid, grid[1:]):
        if b <= a:
            raise ValueError("time grid must be strictly increasing")
    states = [s0]
    for t in grid[1:]:
        states.append(F.advance(states[-1], t))
    return states


def parareal_update(coarse_new: State, fine_old: State, coarse_old: State, theta: float) -> State:
    """Predictor-corrector combination ``theta*C_new + F_old - theta*C_old``."""
    if not (fine_old.same_layout(coarse_new) and fine_old.same_layout(coarse_old)):
        raise ValueError("states in the update must share one layout")
    t = fine_old.time
    tol = 1e-12 * max(1.0, abs(t))
    if abs(coarse_new.time - t) > tol or abs(coarse_old.time - t) > tol:
        raise ValueError("states in the update must sit at the same time")
    values = theta * coarse_new.values + fine_old.values - theta * coarse_old.values
    return fine_old.with_values(values, time=t)


def theta_weight(fine: State, coarse: State, variant: str, clamp: tuple = (0.0, 1.0)) -> float:
    """Data-dependent coarse weight, averaged over layout blocks.

    Per block, ``least_squares`` uses <F,C>/<C,C> (the scalar minimizing
    ||F - theta*C||) and ``angle_penalized`` divides that projection by
    <F,F> as well, shrinking the weight whenever fine and coarse carry
    different mass. Blocks with negligible coarse mass fall back to the
    classic weight 1. The block average is clamped to ``clamp``.
    """
    if variant == "classic":
        return 1.0
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not fine.same_layout(coarse):
        raise ValueError("fine and coarse states must share one layout")
    weights = []
    for name in fine.layout:
        f = fine.block(name)
        c = coarse.block(name)
        cc = float(np.dot(c, c))
        if cc <= _DEGENERATE_MASS:
            weights.append(1.0)
            continue
        fc = float(np.dot(f, c))
        if variant == "least_squares":
            w = fc / cc
        else:
            denom = cc * float(np.dot(f, f))
            w = fc / denom if denom > _DEGENERATE_MASS**2 else 1.0
        weights.append(w if np.isfinite(w) else 1.0)
    lo, hi = clamp
    return float(min(max(sum(weights) / len(weights), lo), hi))


def boundary_error(parareal_states: Sequence[State], sequential_states: Sequence[State]) -> list:
    """Relative Euclidean error per boundary, flagged absolute where the
    sequential norm vanishes."""
    if len(parareal_states) != len(sequential_states):
        raise ValueError("state lists must have equal length")
    entries = []
    for vp, vs in zip(parareal_states, sequential_states):
        diff = float(np.linalg.norm(vp.values - vs.values))
        ref = float(np.linalg.norm(vs.values))
        if ref > 0.0:
            entries.append(ErrorEntry(diff / ref))
        else:
            entries.append(ErrorEntry(diff, absolute=True))
    return entries


# --------------------------------------------------------------------------
# task graph


@dataclass(frozen=True)
class Task:
    """One unit of the execution plan.

    ``key`` orders tasks so that running them in ascending key order on a
    single worker reproduces the serial algorithm exactly: all keys of
    iteration ``i`` sort below iteration ``i+1``, and within an iteration
    the fine phase (0) sorts below the corrector phase (1).
    """

    kind: str            # "coarse_init" | "fine" | "correct"
    iteration: int       # 0 for the initialization sweep
    interval: int
    depends: tuple

    @property
    def key(self):
        phase = 0 if self.kind == "fine" else 1
        return (self.iteration, phase, self.interval)


def pipelined_schedule(intervals: int, iterations: int) -> list:
    """Dependency graph of one full run: init sweep, then per iteration
    ``intervals`` fine propagations plus the sequential corrector sweep.

    A fine task of iteration ``i`` waits only for the iteration ``i-1``
    corrector of its left boundary, so successive iterations overlap; a
    corrector waits for its predecessor in the sweep, its own fine value,
    and the previous iteration's coarse prediction it has to subtract.
    """
    if intervals < 1:
        raise ValueError("need at least one interval")
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    tasks = []
    for l in range(intervals):
        deps = ((0, 1, l - 1),) if l > 0 else ()
        tasks.append(Task("coarse_init", 0, l, deps))
    for i in range(1, iterations + 1):
        for l in range(intervals):
            deps = ((i - 1, 1, l - 1),) if l > 0 else ()
            tasks.append(Task("fine", i, l, deps))
        for l in range(intervals):
            deps = [(i, 0, l), (i - 1, 1, l)]
            if l > 0:
                deps.append((i, 1, l - 1))
            tasks.append(Task("correct", i, l, tuple(deps)))
    return tasks


def _run_serial(tasks: Sequence[Task], run_task: Callable) -> Optional[int]:
    stop_at = None
    for task in sorted(tasks, key=lambda t: t.key):
        if stop_at is not None and task.iteration > stop_at:
            continue
        outcome = run_task(task)
        if outcome is not None:
            stop_at = outcome if stop_at is None else min(stop_at, outcome)
    return stop_at


class _PipelinedExecutor:
    """Priority-ordered worker pool over the task graph.

    Each worker pops the smallest ready key, so one worker degenerates to
    the serial order. Once ``run_task`` reports convergence at iteration
    ``i``, tasks of later iterations are skipped. A stall (tasks left but
    nothing ready or running) cannot happen on a well-formed graph and is
    reported as a defect rather than swallowed.
    """

    def __init__(self, tasks: Sequence[Task], run_task: Callable, workers: int):
        self.run_task = run_task
        self.tasks = {t.key: t for t in tasks}
        self.indegree = {t.key: len(t.depends) for t in tasks}
        self.dependents: dict = {}
        for t in tasks:
            for dep in t.depends:
                if dep not in self.tasks:
                    raise ValueError(f"task {t.key} depends on unknown task {dep}")
                self.dependents.setdefault(dep, []).append(t.key)
        self.ready = [key for key, deg in self.indegree.items() if deg == 0]
        heapq.heapify(self.ready)
        self.cond = threading.Condition()
        self.unfinished = len(tasks)
        self.running = 0
        self.stop_at: Optional[int] = None
        self.failure: Optional[BaseException] = None
        self.workers = workers

    def _complete(self, key) -> None:
        # caller holds self.cond
        self.unfinished -= 1
        for dep_key in self.dependents.get(key, ()):
            self.indegree[dep_key] -= 1
            if self.indegree[dep_key] == 0:
                heapq.heappush(self.ready, dep_key)
        self.cond.notify_all()

    def _worker(self) -> None:
        while True:
            with self.cond:
                while not self.ready and self.unfinished > 0 and self.failure is None:
                    if self.running == 0:
                        self.failure = RuntimeError(
                            "scheduler stalled: tasks remain but none are ready or running"
                        )
                        self.cond.notify_all()
                        break
                    self.cond.wait()
                if self.failure is not None or self.unfinished == 0:
                    return
                key = heapq.heappop(self.ready)
                task = self.tasks[key]
                if self.stop_at is not None and task.iteration > self.stop_at:
                    self._complete(key)
                    continue
                self.running += 1
            try:
                outcome = self.run_task(task)
            except BaseException as exc:
                with self.cond:
                    self.failure = exc
                    self.running -= 1
                    self.cond.notify_all()
                return
            with self.cond:
                self.running -= 1
                if outcome is not None:
                    self.stop_at = outcome if self.stop_at is None else min(self.stop_at, outcome)
                self._complete(key)

    def run(self) -> Optional[int]:
        threads = [threading.Thread(target=self._worker, daemon=True) for _ in range(self.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if self.failure is not None:
            raise self.failure
        return self.stop_at


def run_parareal(
    C: Propagator,
    F: Propagator,
    s0: State,
    t_end: float,
    cfg: PararealConfig,
    oracle: Optional[Sequence[State]] = None,
):
    """Run the parallel-in-time iteration over ``[s0.time, t_end]``.

    Iteration 0 seeds all boundaries with a sequential coarse sweep; each
    following iteration runs ``intervals`` fine propagations and the
    corrector sweep, stopping once the largest relative boundary
    correction drops to ``cfg.tol`` or the budget is exhausted. With an
    ``oracle`` (the sequential fine states at the same grid), relative
    boundary errors are recorded per iteration.

    Returns ``(states, trace)``: the boundary states of the last
    completed iteration and the :class:`RunTrace`.
    """
    L = cfg.intervals
    if t_end <= s0.time:
        raise ValueError("t_end must lie beyond the initial time")
    window = (t_end - s0.time) / L
    for prop in (C, F):
        _split_window(window, prop.step)  # raises NonDivisibleWindow on misfit
    t_grid = [s0.time + (t_end - s0.time) * l / L for l in range(L + 1)]
    t_grid[-1] = t_end
    if oracle is not None and len(oracle) != L + 1:
        raise ValueError(f"oracle must hold {L + 1} states, got {len(oracle)}")

    max_iters = cfg.max_iters
    X = [[None] * (L + 1) for _ in range(max_iters + 1)]
    for row in X:
        row[0] = s0
    coarse_vals = [[None] * (L + 1) for _ in range(max_iters + 1)]
    fine_vals = [[None] * (L + 1) for _ in range(max_iters + 1)]
    theta_rows = [[1.0] * L for _ in range(max_iters + 1)]
    corr_rows = [[0.0] * L for _ in range(max_iters + 1)]
    timing = {"init": 0.0, "iterations": [0.0] * (max_iters + 1)}
    counter_lock = threading.Lock()
    counters = {"fine": 0}
    t_start = time.perf_counter()

    def run_task(task: Task) -> Optional[int]:
        i, l = task.iteration, task.interval
        try:
            if task.kind == "coarse_init":
                nxt = C.advance(X[0][l], t_grid[l + 1])
                X[0][l + 1] = nxt
                coarse_vals[0][l + 1] = nxt
                if l == L - 1:
                    timing["init"] = time.perf_counter() - t_start
                return None
            if task.kind == "fine":
                fine_vals[i][l + 1] = F.advance(X[i - 1][l], t_grid[l + 1])
                with counter_lock:
                    counters["fine"] += 1
                return None
            coarse_new = C.advance(X[i][l], t_grid[l + 1])
            fine_old = fine_vals[i][l + 1]
            th = theta_weight(fine_old, coarse_new, cfg.variant, cfg.theta_clamp)
            new = parareal_update(coarse_new, fine_old, coarse_vals[i - 1][l + 1], th)
            X[i][l + 1] = new
            coarse_vals[i][l + 1] = coarse_new
            theta_rows[i][l] = th
            diff = float(np.linalg.norm(new.values - X[i - 1][l + 1].values))
            norm = float(np.linalg.norm(new.values))
            corr_rows[i][l] = 0.0 if diff == 0.0 else (diff / norm if norm > 0.0 else float("inf"))
            if l == L - 1:
                timing["iterations"][i] = time.perf_counter() - t_start
                if max(corr_rows[i]) <= cfg.tol:
                    return i
            return None
        except PararealError:
            raise
        except Exception as exc:
            raise PararealError(f"{task.kind} failed at iteration {i}, interval {l}: {exc}") from exc

    tasks = pipelined_schedule(L, max_iters)
    if cfg.scheduler == "serial":
        stop_at = _run_serial(tasks, run_task)
    else:
        stop_at = _PipelinedExecutor(tasks, run_task, cfg.workers).run()

    iters_run = stop_at if stop_at is not None else max_iters
    trace = RunTrace(intervals=L, variant=cfg.variant, scheduler=cfg.scheduler)
    trace.iterations_run = iters_run
    trace.converged = stop_at is not None
    trace.theta_values = [list(theta_rows[i]) for i in range(1, iters_run + 1)]
    trace.correction_norms = [list(corr_rows[i]) for i in range(1, iters_run + 1)]
    trace.iterate_values = [
        [X[i][l].values.copy() for l in range(L + 1)] for i in range(iters_run + 1)
    ]
    trace.init_seconds = timing["init"]
    trace.iteration_seconds = [timing["iterations"][i] for i in range(1, iters_run + 1)]
    trace.total_seconds = time.perf_counter() - t_start
    trace.fine_propagations = counters["fine"]
    if oracle is not None:
        for i in range(1, iters_run + 1):
            entries = boundary_error(X[i][1:], oracle[1:])
            trace.boundary_errors.append([e.value for e in entries])
    return X[iters_run], trace
