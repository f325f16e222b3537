"""Model problems: semi-discrete right-hand sides, initial data, references.

Four problems share one state/rhs interface so a single implicit
integrator drives them all:

* ``dahlquist``    scalar linear test equation y' = lambda * y
* ``heat1d``       diffusion on a fixed interval, Dirichlet boundaries,
                   second-order central differences
* ``advection1d``  constant-speed transport, central differences (no
                   upwinding), optionally periodic
* ``ale_piston``   a 1-d moving-boundary surrogate: advection-diffusion
                   on an interval whose right end follows a spring-mass
                   oscillator, mapped to the fixed reference domain
                   (0, 1) by the affine stretch x = xhat * (L0 + u).
                   Velocity continuity enters through the right boundary
                   value, the viscous traction drives the oscillator.

Space is discretized with second-order stencils on uniform grids;
``mesh_n`` counts interior nodes (for the periodic transport grid, all
nodes). All rhs evaluations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .state import Layout, State

KINDS = ("dahlquist", "heat1d", "advection1d", "ale_piston")


class MeshDegenerate(RuntimeError):
    """Interface displacement large enough to collapse the fluid interval."""


# --------------------------------------------------------------------------
# initial-data descriptors


@dataclass(frozen=True)
class SineMode:
    mode: int = 1

    def __post_init__(self):
        if self.mode < 1:
            raise ValueError("mode number must be at least 1")


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class GaussianBump:
    center: float = 0.5
    width: float = 0.1

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("bump width must be positive")


# --------------------------------------------------------------------------
# per-kind parameter records


@dataclass(frozen=True)
class DahlquistParams:
    lam: float = -1.0
    y0: float = 1.0


@dataclass(frozen=True)
class Heat1DParams:
    nu: float = 2e-2
    length: float = 1.0
    left_bc: float = 0.0
    right_bc: float = 0.0
    init: Union[SineMode, Zero] = SineMode(1)

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ValueError("diffusivity nu must be positive")
        if self.length <= 0.0:
            raise ValueError("length must be positive")


@dataclass(frozen=True)
class Advection1DParams:
    speed: float = 1.0
    length: float = 1.0
    init: Union[GaussianBump, SineMode] = GaussianBump()
    periodic: bool = True

    def __post_init__(self):
        if self.speed == 0.0:
            raise ValueError("transport speed must be non-zero")
        if self.length <= 0.0:
            raise ValueError("length must be positive")


@dataclass(frozen=True)
class AlePistonParams:
    rho_f: float = 1e3     # fluid density, kg/m^3
    nu: float = 2e-2       # kinematic viscosity, m^2/s
    L0: float = 1.0        # rest length of the fluid interval, m
    adv: float = 0.5       # background transport speed, m/s (any sign)
    m_s: float = 100.0     # oscillator mass, kg
    kappa: float = 400.0   # spring stiffness, N/m
    v_in: float = 0.5      # inflow amplitude, m/s (0 switches forcing off)
    period: float = 1.0    # forcing period, s

    def __post_init__(self):
        for name in ("rho_f", "nu", "L0", "m_s", "kappa", "period"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.v_in < 0.0:
            raise ValueError("v_in must be non-negative")


Params = Union[DahlquistParams, Heat1DParams, Advection1DParams, AlePistonParams]

_PARAM_KIND = {
    DahlquistParams: "dahlquist",
    Heat1DParams: "heat1d",
    Advection1DParams: "advection1d",
    AlePistonParams: "ale_piston",
}


@dataclass(frozen=True)
class ProblemSpec:
    """Tagged description of one model problem."""

    kind: str
    params: Params
    mesh_n: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        expected = _PARAM_KIND[type(self.params)]
        if expected != self.kind:
            raise ValueError(f"params of type {type(self.params).__name__} do not match kind {self.kind!r}")
        if self.kind != "dahlquist" and self.mesh_n < 3:
            raise ValueError("PDE problems need mesh_n >= 3")


def dahlquist(lam: float = -1.0, y0: float = 1.0) -> ProblemSpec:
    return ProblemSpec("dahlquist", DahlquistParams(lam=lam, y0=y0))


def heat1d(mesh_n: int = 63, **kwargs) -> ProblemSpec:
    return ProblemSpec("heat1d", Heat1DParams(**kwargs), mesh_n=mesh_n)


def advection1d(mesh_n: int = 64, **kwargs) -> ProblemSpec:
    return ProblemSpec("advection1d", Advection1DParams(**kwargs), mesh_n=mesh_n)


def ale_piston(mesh_n: int = 63, **kwargs) -> ProblemSpec:
    return ProblemSpec("ale_piston", AlePistonParams(**kwargs), mesh_n=mesh_n)


# --------------------------------------------------------------------------
# grids and layouts


def grid_spacing(problem: ProblemSpec) -> float:
    params = problem.params
    if problem.kind == "heat1d":
        return params.length / (problem.mesh_n + 1)
    if problem.kind == "advection1d":
        if params.periodic:
            return params.length / problem.mesh_n
        return params.length / (problem.mesh_n + 1)
    if problem.kind == "ale_piston":
        # reference domain is always (0, 1)
        return 1.0 / (problem.mesh_n + 1)
    raise ValueError(f"{problem.kind} has no spatial grid")


def grid(problem: ProblemSpec) -> np.ndarray:
    """Node coordinates carrying the unknowns (interior, or all if periodic)."""
    h = grid_spacing(problem)
    n = problem.mesh_n
    if problem.kind == "advection1d" and problem.params.periodic:
        return h * np.arange(n)
    return h * np.arange(1, n + 1)


def layout(problem: ProblemSpec) -> Layout:
    n = problem.mesh_n
    if problem.kind == "dahlquist":
        return {"y": (0, 1)}
    if problem.kind in ("heat1d", "advection1d"):
        return {"v": (0, n)}
    return {"v": (0, n), "u": (n, 1), "w": (n + 1, 1)}


def state_size(problem: ProblemSpec) -> int:
    return sum(length for _, length in layout(problem).values())


# --------------------------------------------------------------------------
# operations


def forcing_s(t: float, period: float = 1.0) -> float:
    """Oscillating inflow profile: 0 at t=0, 1 after half a cycle.

    ``s(t) = (1 - cos(pi * t / period)) / 2``.
    """
    if period <= 0.0:
        raise ValueError("period must be positive")
    return 0.5 * (1.0 - math.cos(math.pi * t / period))


def initial_state(problem: ProblemSpec) -> State:
    """State at time zero with the problem's initial data."""
    lay = layout(problem)
    params = problem.params
    if problem.kind == "dahlquist":
        return State(np.array([params.y0]), 0.0, lay)

    values = np.zeros(state_size(problem))
    if problem.kind == "ale_piston":
        # starts from rest, driven only by the inflow forcing
        return State(values, 0.0, lay)

    x = grid(problem)
    init = params.init
    if isinstance(init, Zero):
        pass
    elif isinstance(init, SineMode):
        if problem.kind == "advection1d" and params.periodic:
            values[:] = np.sin(2.0 * np.pi * init.mode * x / params.length)
        else:
            values[:] = np.sin(np.pi * init.mode * x / params.length)
    elif isinstance(init, GaussianBump):
        values[:] = np.exp(-(((x - init.center) / init.width) ** 2))
    else:
        raise ValueError(f"unsupported initial data {init!r} for {problem.kind}")
    return State(values, 0.0, lay)


def rhs_values(problem: ProblemSpec, values: np.ndarray, t: float) -> np.ndarray:
    """Time derivative of every unknown, on raw value vectors.

    Hot-path variant of :func:`rhs` that skips State wrapping; the
    integrator calls this once per Newton residual evaluation.
    """
    params = problem.params
    if problem.kind == "dahlquist":
        return params.lam * values

    n = problem.mesh_n
    h = grid_spacing(problem)

    if problem.kind == "heat1d":
        padded = np.empty(n + 2)
        padded[0] = params.left_bc
        padded[1:-1] = values
        padded[-1] = params.right_bc
        return (params.nu / h**2) * (padded[2:] - 2.0 * padded[1:-1] + padded[:-2])

    if problem.kind == "advection1d":
        if params.periodic:
            dv = np.roll(values, -1) - np.roll(values, 1)
        else:
            padded = np.empty(n + 2)
            padded[0] = 0.0
            padded[1:-1] = values
            padded[-1] = 0.0
            dv = padded[2:] - padded[:-2]
        return -params.speed * dv / (2.0 * h)

    # ale_piston
    v = values[:n]
    u = float(values[n])
    w = float(values[n + 1])
    if abs(u) >= 0.9 * params.L0:
        raise MeshDegenerate(f"interface displacement {u:.3e} collapses the mesh (L0={params.L0})")
    length = params.L0 + u

    v_left = params.v_in * forcing_s(t, params.period)
    v_right = w
    padded = np.empty(n + 2)
    padded[0] = v_left
    padded[1:-1] = v
    padded[-1] = v_right

    xhat = h * np.arange(1, n + 1)
    first = (padded[2:] - padded[:-2]) / (2.0 * h)
    second = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / h**2
    dvdt = -((params.adv - xhat * w) / length) * first + (params.nu / length**2) * second

    # second-order one-sided derivative at the moving end (xhat = 1)
    dv_end = (3.0 * v_right - 4.0 * v[-1] + v[-2]) / (2.0 * h)
    traction = params.rho_f * params.nu * dv_end / length

    out = np.empty(n + 2)
    out[:n] = dvdt
    out[n] = w
    # the viscous traction opposes the piston velocity (drag); with the
    # fluid on the left of the interface the force on the solid is the
    # negative of the outward viscous stress, which keeps the coupled
    # energy exchange anti-symmetric and the rest dynamics dissipative
    out[n + 1] = -(traction + params.kappa * u) / params.m_s
    return out


def rhs(problem: ProblemSpec, s: State, t: float) -> np.ndarray:
    """Time derivative of the state vector at time ``t``."""
    if s.size != state_size(problem):
        raise ValueError(f"state size {s.size} does not match problem ({state_size(problem)})")
    return rhs_values(problem, s.values, t)


def reference_solution(
    problem: ProblemSpec,
    t: float,
    fine_factor: int = 4,
    base_step: float | None = None,
    theta0: float = 0.0,
) -> State:
    """Reference state at time ``t``.

    The scalar test equation has the analytic solution ``y0 * exp(lam*t)``;
    the PDE problems are integrated sequentially with ``base_step /
    fine_factor``, a Richardson-style refinement of the caller's step on
    the same mesh.
    """
    if fine_factor < 2:
        raise ValueError("fine_factor must be at least 2")
    if problem.kind == "dahlquist":
        params = problem.params
        return State(np.array([params.y0 * math.exp(params.lam * t)]), t, layout(problem))
    s0 = initial_state(problem)
    if t == 0.0:
        return s0
    if base_step is None:
        raise ValueError("PDE reference solutions need base_step")
    from .integrators import ThetaSettings, make_propagator  # deferred: integrators imports this module

    settings = ThetaSettings(step=base_step / fine_factor, theta0=theta0)
    return make_propagator(problem, settings).advance(s0, t)
