"""Benchmark harness: experiment configs, timed runs, CSV/JSON emission.

Experiments are described by INI-style config files (one section per
problem kind plus an ``[experiment]`` section); every key can be
overridden on the command line with ``--key=value`` or
``--section.key=value``. The harness times the sequential fine solve,
runs the parallel-in-time iteration per coarse step and variant, and
emits one row per (iteration, boundary), per-boundary discretization
error rows (against a refined reference), and one summary row per
(coarse step, variant) with measured and modelled speedup.

Exit codes: 0 success, 2 config error, 3 numerical failure (a partial
results file is written), 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import re
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from . import __version__
from .integrators import ThetaSettings, TimeStepError, make_propagator
from .linalg import MaxItersExceeded, NumericBreakdown
from .parareal import (
    PararealConfig,
    PararealError,
    SpeedupModel,
    boundary_error,
    run_parareal,
    sequential_solve,
    theoretical_speedup,
    VARIANTS,
)
from .problems import (
    GaussianBump,
    MeshDegenerate,
    ProblemSpec,
    SineMode,
    Zero,
    advection1d,
    ale_piston,
    dahlquist,
    heat1d,
    initial_state,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

ENV_WORKERS = "PINT_BENCH_WORKERS"

CSV_COLUMNS = (
    "problem", "K", "k", "variant", "iter", "boundary", "rel_err", "theta",
    "t_seq_s", "t_par_s", "speedup_meas", "speedup_theory",
)

# rows carrying the dashed reference line use this sentinel variant
DISCRETIZATION_VARIANT = "discretization"

_NUMERIC_FAILURES = (NumericBreakdown, MaxItersExceeded, TimeStepError, PararealError, MeshDegenerate)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ResultRow:
    problem: str
    K: float
    k: float
    variant: str
    iteration: int
    boundary: Optional[int]
    rel_err: float
    theta: Optional[float]
    t_seq_s: Optional[float] = None
    t_par_s: Optional[float] = None
    speedup_meas: Optional[float] = None
    speedup_theory: Optional[float] = None

    def __post_init__(self):
        if self.rel_err < 0.0:
            raise ValueError("errors cannot be negative")
        if self.speedup_meas is not None and self.speedup_meas <= 0.0:
            raise ValueError("measured speedup must be positive")

    def as_tuple(self):
        return (
            self.problem, self.K, self.k, self.variant, self.iteration, self.boundary,
            self.rel_err, self.theta, self.t_seq_s, self.t_par_s,
            self.speedup_meas, self.speedup_theory,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    horizon: float
    intervals: int
    coarse_steps: tuple
    fine_step: float
    variants: tuple = ("classic",)
    workers: int = 1
    reference_fine_factor: int = 4
    seed: int = 0
    output_path: str = "results.csv"
    theta0: float = 0.0
    max_iters: int = 0            # 0 picks min(8, intervals)
    tol: float = 1e-12
    scheduler: str = "pipelined"

    def effective_max_iters(self) -> int:
        return self.max_iters if self.max_iters > 0 else min(8, self.intervals)

    def validate(self) -> None:
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be positive")
        if self.intervals < 2:
            raise ConfigError("need at least 2 intervals")
        window = self.horizon / self.intervals
        if not self.coarse_steps:
            raise ConfigError("need at least one coarse step")
        for K in self.coarse_steps:
            if K <= 0.0 or not _divides(window, K):
                raise ConfigError(f"coarse step {K} does not divide the window {window}")
        if self.fine_step <= 0.0 or not _divides(window, self.fine_step):
            raise ConfigError(f"fine step {self.fine_step} does not divide the window {window}")
        if self.fine_step >= min(self.coarse_steps):
            raise ConfigError("fine step must be smaller than every coarse step")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        if not self.variants:
            raise ConfigError("need at least one variant")
        if self.reference_fine_factor < 2:
            raise ConfigError("reference_fine_factor must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.max_iters < 0 or self.effective_max_iters() > self.intervals:
            raise ConfigError("max_iters must lie in [1, intervals]")
        if self.tol <= 0.0:
            raise ConfigError("tol must be positive")
        if self.scheduler not in ("serial", "pipelined"):
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")


def _divides(window: float, step: float) -> bool:
    n = max(round(window / step), 1)
    return abs(window - n * step) <= 1e-9 * max(window, step)


# --------------------------------------------------------------------------
# config parsing


def _parse_init(text: str):
    parts = text.strip().lower().split(":")
    if parts[0] in ("zero", "rest"):
        return Zero()
    if parts[0] == "sine":
        return SineMode(int(parts[1]) if len(parts) > 1 else 1)
    if parts[0] == "gaussian":
        center = float(parts[1]) if len(parts) > 1 else 0.5
        width = float(parts[2]) if len(parts) > 2 else 0.1
        return GaussianBump(center, width)
    raise ConfigError(f"unknown initial data {text!r}")


def _build_problem(kind: str, section) -> ProblemSpec:
    get = section.get
    try:
        if kind == "dahlquist":
            return dahlquist(lam=float(get("lam", -1.0)), y0=float(get("y0", 1.0)))
        mesh_n = int(get("mesh_n", 63 if kind != "advection1d" else 64))
        if kind == "heat1d":
            return heat1d(
                mesh_n=mesh_n,
                nu=float(get("nu", 2e-2)),
                length=float(get("length", 1.0)),
                left_bc=float(get("left_bc", 0.0)),
                right_bc=float(get("right_bc", 0.0)),
                init=_parse_init(get("init", "sine:1")),
            )
        if kind == "advection1d":
            return advection1d(
                mesh_n=mesh_n,
                speed=float(get("speed", 1.0)),
                length=float(get("length", 1.0)),
                init=_parse_init(get("init", "gaussian:0.5:0.1")),
                periodic=str(get("periodic", "true")).strip().lower() in ("1", "true", "yes", "on"),
            )
        if kind == "ale_piston":
            return ale_piston(
                mesh_n=mesh_n,
                rho_f=float(get("rho_f", 1e3)),
                nu=float(get("nu", 2e-2)),
                L0=float(get("l0", 1.0)),
                adv=float(get("adv", 0.5)),
                m_s=float(get("m_s", 100.0)),
                kappa=float(get("kappa", 400.0)),
                v_in=float(get("v_in", 0.5)),
                period=float(get("period", 1.0)),
            )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad parameter for problem {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown problem kind {kind!r}")


def _split_list(text: str) -> list:
    return [item.strip() for item in text.replace(";", ",").split(",") if item.strip()]


def parse_config(parser: configparser.ConfigParser) -> ExperimentConfig:
    if not parser.has_section("experiment"):
        raise ConfigError("config must contain an [experiment] section")
    exp = parser["experiment"]
    kind = exp.get("problem", "").strip().lower()
    if not kind:
        raise ConfigError("experiment section must name a problem")
    section = parser[kind] if parser.has_section(kind) else {}
    problem = _build_problem(kind, section)
    try:
        cfg = ExperimentConfig(
            problem=problem,
            horizon=float(exp.get("horizon", 8.0)),
            intervals=int(exp.get("intervals", 20)),
            coarse_steps=tuple(float(v) for v in _split_list(exp.get("coarse_steps", "0.05"))),
            fine_step=float(exp.get("fine_step", 0.005)),
            variants=tuple(_split_list(exp.get("variants", "classic"))),
            workers=int(exp.get("workers", os.environ.get(ENV_WORKERS, "1"))),
            reference_fine_factor=int(exp.get("reference_fine_factor", 4)),
            seed=int(exp.get("seed", 0)),
            output_path=exp.get("output", "results.csv"),
            theta0=float(exp.get("theta0", 0.0)),
            max_iters=int(exp.get("max_iters", 0)),
            tol=float(exp.get("tol", 1e-12)),
            scheduler=exp.get("scheduler", "pipelined").strip().lower(),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad experiment key: {exc}") from exc
    cfg.validate()
    return cfg


_OVERRIDE_RE = re.compile(r"^--([A-Za-z0-9_.\-]+)=(.*)$")


def load_config(path: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read an experiment config file and apply ``--key=value`` overrides."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc
    for item in overrides:
        match = _OVERRIDE_RE.match(item)
        if match is None:
            raise ConfigError(f"unrecognized argument {item!r} (expected --key=value)")
        dotted, value = match.groups()
        section, _, key = dotted.rpartition(".")
        section = section or "experiment"
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    return parse_config(parser)


# --------------------------------------------------------------------------
# experiment driver


def run_experiment(cfg: ExperimentConfig, verbose: bool = False, collect: Optional[list] = None) -> list:
    """Run the full (coarse step x variant) matrix and return result rows.

    ``collect`` (when given) receives rows incrementally so callers can
    write partial results if a later stage fails numerically.
    """
    cfg.validate()
    rows = collect if collect is not None else []
    problem = cfg.problem
    L = cfg.intervals
    k = cfg.fine_step
    s0 = initial_state(problem)
    t_grid = [cfg.horizon * l / L for l in range(L + 1)]
    t_grid[-1] = cfg.horizon

    fine = make_propagator(problem, ThetaSettings(step=k, theta0=cfg.theta0))
    if verbose:
        print(f"[pint-bench] sequential fine solve (step {k:g}) ...", flush=True)
    t0 = time.perf_counter()
    seq = sequential_solve(fine, s0, t_grid)
    t_seq = time.perf_counter() - t0
    if verbose:
        per_newton = t_seq / max(fine.newton_iterations, 1)
        print(
            f"[pint-bench]   {t_seq:.3f} s, {fine.newton_iterations} Newton iterations "
            f"({per_newton * 1e3:.3f} ms each)"
        )

    ref_prop = make_propagator(
        problem, ThetaSettings(step=k / cfg.reference_fine_factor, theta0=cfg.theta0)
    )
    reference = sequential_solve(ref_prop, s0, t_grid)
    disc = boundary_error(seq, reference)
    disc_final = disc[L].value
    for l in range(1, L + 1):
        rows.append(ResultRow(problem.kind, 0.0, k, DISCRETIZATION_VARIANT, 0, l, disc[l].value, None))

    for K in cfg.coarse_steps:
        for variant in cfg.variants:
            coarse = make_propagator(problem, ThetaSettings(step=K, theta0=cfg.theta0))
            fine_run = make_propagator(problem, ThetaSettings(step=k, theta0=cfg.theta0))
            pcfg = PararealConfig(
                intervals=L,
                max_iters=cfg.effective_max_iters(),
                tol=cfg.tol,
                variant=variant,
                scheduler=cfg.scheduler,
                workers=cfg.workers,
            )
            if verbose:
                print(f"[pint-bench] parareal K={K:g} variant={variant} ...", flush=True)
            _, trace = run_parareal(coarse, fine_run, s0, cfg.horizon, pcfg, oracle=seq)
            for i in range(1, trace.iterations_run + 1):
                errs = trace.boundary_errors[i - 1]
                thetas = trace.theta_values[i - 1]
                for l in range(1, L + 1):
                    rows.append(
                        ResultRow(problem.kind, K, k, variant, i, l, errs[l - 1], thetas[l - 1])
                    )
            qualifying = trace.iterations_run
            for i in range(1, trace.iterations_run + 1):
                if trace.boundary_errors[i - 1][L - 1] <= disc_final:
                    qualifying = i
                    break
            t_par = trace.iteration_seconds[qualifying - 1]
            model = SpeedupModel(r=k / K, iters=qualifying, intervals=L)
            rows.append(
                ResultRow(
                    problem.kind, K, k, variant, qualifying, None,
                    trace.boundary_errors[qualifying - 1][L - 1], None,
                    t_seq_s=t_seq, t_par_s=t_par,
                    speedup_meas=t_seq / t_par,
                    speedup_theory=theoretical_speedup(model),
                )
            )
            if verbose:
                print(
                    f"[pint-bench]   {trace.iterations_run} iterations, "
                    f"coarse Newton {coarse.newton_iterations}, fine Newton {fine_run.newton_iterations}, "
                    f"t_par(to iter {qualifying}) {t_par:.3f} s"
                )
    return rows


# --------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_csv(rows: Sequence[ResultRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row.as_tuple()) + "\n")


def emit_json(rows: Sequence[ResultRow], path: str, metadata: Optional[dict] = None) -> None:
    payload = {
        "metadata": metadata or {},
        "rows": [dict(zip(CSV_COLUMNS, row.as_tuple())) for row in rows],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _row_from_record(record: dict) -> ResultRow:
    def opt(name, cast):
        value = record.get(name)
        if value in (None, ""):
            return None
        return cast(value)

    return ResultRow(
        problem=str(record["problem"]),
        K=float(record["K"]),
        k=float(record["k"]),
        variant=str(record["variant"]),
        iteration=int(record["iter"]),
        boundary=opt("boundary", int),
        rel_err=float(record["rel_err"]),
        theta=opt("theta", float),
        t_seq_s=opt("t_seq_s", float),
        t_par_s=opt("t_par_s", float),
        speedup_meas=opt("speedup_meas", float),
        speedup_theory=opt("speedup_theory", float),
    )


def load_rows(path: str) -> list:
    """Parse rows back from a CSV or JSON results file."""
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        return [_row_from_record(rec) for rec in payload["rows"]]
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header in {path!r}")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            rows.append(_row_from_record(dict(zip(CSV_COLUMNS, line.split(",")))))
    return rows


def speedup_report(rows: Sequence[ResultRow]) -> str:
    """Per-(K, variant) speedup summary with a best-K recommendation."""
    disc_final = None
    for row in rows:
        if row.variant == DISCRETIZATION_VARIANT:
            if disc_final is None or (row.boundary or 0) > disc_final[0]:
                disc_final = ((row.boundary or 0), row.rel_err)
    summaries = [r for r in rows if r.speedup_meas is not None]
    if not summaries:
        return "no summary rows with timing data\n"
    lines = []
    best = None
    for row in summaries:
        efficiency = row.speedup_meas / row.speedup_theory if row.speedup_theory else float("nan")
        accurate = disc_final is not None and row.rel_err <= disc_final[1]
        marker = "accurate" if accurate else "above discretization error"
        lines.append(
            f"K={row.K:g} variant={row.variant}: iterations={row.iteration} "
            f"measured={row.speedup_meas:.3f} theoretical={row.speedup_theory:.3f} "
            f"efficiency={efficiency:.3f} [{marker}]"
        )
        if accurate or disc_final is None:
            if best is None or row.speedup_meas > best.speedup_meas:
                best = row
    if best is None:
        best = max(summaries, key=lambda r: r.speedup_meas)
        lines.append(
            f"best K: {best.K:g} ({best.variant}) with speedup {best.speedup_meas:.3f} "
            f"(no run reached the discretization error)"
        )
    else:
        lines.append(f"best K: {best.K:g} ({best.variant}) with speedup {best.speedup_meas:.3f}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# smoke checks (`pint-bench check`)


def _run_checks() -> int:
    import numpy as np

    from .linalg import Tridiagonal, solve_tridiagonal
    from .parareal import theta_weight
    from .problems import rhs
    from .state import State

    failures = 0

    def report(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures += 1

    rng = np.random.default_rng(0)
    ok = True
    for _ in range(10):
        n = int(rng.integers(2, 32))
        lower = rng.standard_normal(n - 1)
        upper = rng.standard_normal(n - 1)
        diag = np.abs(rng.standard_normal(n)) + 3.0
        b = rng.standard_normal(n)
        dense = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
        x = solve_tridiagonal(Tridiagonal(lower, diag, upper), b)
        ok = ok and np.allclose(x, np.linalg.solve(dense, b), rtol=1e-10, atol=1e-12)
    report("tridiagonal solve matches dense solve", ok)

    problem = dahlquist()
    s0 = initial_state(problem)
    fine = make_propagator(problem, ThetaSettings(step=0.01))
    coarse = make_propagator(problem, ThetaSettings(step=0.1))
    grid = [0.0, 0.5, 1.0, 1.5, 2.0]
    seq = sequential_solve(fine, s0, grid)
    ok = True
    for scheduler in ("serial", "pipelined"):
        pcfg = PararealConfig(intervals=4, max_iters=2, tol=1e-30, scheduler=scheduler, workers=2)
        states, _ = run_parareal(coarse, fine, s0, 2.0, pcfg)
        for l in (1, 2):
            rel = abs(states[l].values[0] - seq[l].values[0]) / abs(seq[l].values[0])
            ok = ok and rel <= 1e-12
    report("parareal exactness on the first iterated boundaries", ok)

    lay = {"v": (0, 2)}
    same = theta_weight(State(np.array([1.0, 2.0]), 0.0, lay), State(np.array([1.0, 2.0]), 0.0, lay), "least_squares")
    orth = theta_weight(State(np.array([1.0, 0.0]), 0.0, lay), State(np.array([0.0, 1.0]), 0.0, lay), "angle_penalized")
    report("weight units (identical -> 1, orthogonal -> 0)", same == 1.0 and orth == 0.0)

    s = theoretical_speedup(SpeedupModel(r=0.02, iters=3, intervals=20))
    report("speedup model value", abs(s - 5.78) < 5e-3)

    piston = ale_piston(mesh_n=15, v_in=0.0)
    rest = initial_state(piston)
    report("piston rest state is a fixed point", float(np.max(np.abs(rhs(piston, rest, 0.0)))) == 0.0)

    return EXIT_OK if failures == 0 else EXIT_NUMERIC


# --------------------------------------------------------------------------
# entry point


def _metadata(cfg: ExperimentConfig) -> dict:
    from .linalg import NewtonSettings

    newton = NewtonSettings()
    return {
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "workers": cfg.workers,
        "newton": {
            "abs_tol": newton.abs_tol,
            "rel_tol": newton.rel_tol,
            "max_iters": newton.max_iters,
            "fd_epsilon": newton.fd_epsilon,
        },
        "config": {
            "problem": cfg.problem.kind,
            "horizon": cfg.horizon,
            "intervals": cfg.intervals,
            "coarse_steps": list(cfg.coarse_steps),
            "fine_step": cfg.fine_step,
            "variants": list(cfg.variants),
            "reference_fine_factor": cfg.reference_fine_factor,
            "seed": cfg.seed,
            "theta0": cfg.theta0,
            "max_iters": cfg.effective_max_iters(),
            "tol": cfg.tol,
            "scheduler": cfg.scheduler,
        },
    }


def _cmd_run(args, overrides) -> int:
    try:
        cfg = load_config(args.config, overrides)
        if args.workers is not None:
            cfg = dataclasses.replace(cfg, workers=args.workers)
        if args.output is not None:
            cfg = dataclasses.replace(cfg, output_path=args.output)
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    fmt = args.format or ("json" if cfg.output_path.endswith(".json") else "csv")
    partial: list = []
    try:
        rows = run_experiment(cfg, verbose=args.verbose, collect=partial)
    except _NUMERIC_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        try:
            path = cfg.output_path + ".partial"
            if fmt == "json":
                emit_json(partial, path, _metadata(cfg))
            else:
                emit_csv(partial, path)
            print(f"partial results written to {path}", file=sys.stderr)
        except OSError as io_exc:
            print(f"could not write partial results: {io_exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        if fmt == "json":
            emit_json(rows, cfg.output_path, _metadata(cfg))
        else:
            emit_csv(rows, cfg.output_path)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.verbose:
        print(f"[pint-bench] wrote {len(rows)} rows to {cfg.output_path}")
    print(speedup_report(rows), end="")
    return EXIT_OK


def _cmd_speedup(args) -> int:
    try:
        rows = load_rows(args.results)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"cannot parse results: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(speedup_report(rows), end="")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pint-bench",
        description="parallel-in-time integration benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to the INI experiment config")
    run_p.add_argument("--workers", type=int, default=None)
    run_p.add_argument("--output", default=None)
    run_p.add_argument("--format", choices=("csv", "json"), default=None)
    run_p.add_argument("--verbose", action="store_true")

    speed_p = sub.add_parser("speedup", help="summarize a results file")
    speed_p.add_argument("results", help="path to a CSV or JSON results file")

    sub.add_parser("check", help="run the invariant smoke suite")

    args, unknown = parser.parse_known_args(argv)
    if args.command == "run":
        return _cmd_run(args, unknown)
    if unknown:
        print(f"unrecognized arguments: {' '.join(unknown)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "speedup":
        return _cmd_speedup(args)
    return _run_checks()


if __name__ == "__main__":
    sys.exit(main())
