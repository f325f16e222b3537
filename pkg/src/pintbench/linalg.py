"""Dense and banded numerical kernels.

Vector arithmetic, tridiagonal (Thomas) solves, and a damped Newton
iteration with finite-difference Jacobians. Everything here operates on
plain 1-d float64 numpy arrays and is free of shared mutable state, so
all functions are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class NumericBreakdown(ArithmeticError):
    """NaN/Inf contamination or a singular / zero-pivot linearization."""


class MaxItersExceeded(RuntimeError):
    """Newton iteration budget exhausted before reaching tolerance."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Validate and return ``x`` as a non-empty finite 1-d float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise NumericBreakdown(f"{name} contains NaN or Inf entries")
    return arr


def axpy(alpha: float, x, y) -> np.ndarray:
    """Return ``alpha * x + y`` for equal-length vectors."""
    xv = as_vector(x, "x")
    yv = as_vector(y, "y")
    if xv.size != yv.size:
        raise ValueError(f"length mismatch: {xv.size} vs {yv.size}")
    return alpha * xv + yv


def dot(x, y) -> float:
    """Euclidean inner product of two equal-length vectors."""
    xv = as_vector(x, "x")
    yv = as_vector(y, "y")
    if xv.size != yv.size:
        raise ValueError(f"length mismatch: {xv.size} vs {yv.size}")
    return float(np.dot(xv, yv))


@dataclass(frozen=True)
class Tridiagonal:
    """Tridiagonal matrix stored as its three bands.

    ``lower`` and ``upper`` have length ``n - 1``, ``diag`` has length ``n``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", as_vector(self.diag, "diag"))
        for name in ("lower", "upper"):
            band = np.asarray(getattr(self, name), dtype=np.float64)
            if band.ndim != 1:
                raise ValueError(f"{name} band must be one-dimensional")
            if band.size and not np.all(np.isfinite(band)):
                raise NumericBreakdown(f"{name} band contains NaN or Inf entries")
            object.__setattr__(self, name, band)
        n = self.diag.size
        if self.lower.size != n - 1 or self.upper.size != n - 1:
            raise ValueError(
                f"band lengths inconsistent: n={n}, lower={self.lower.size}, upper={self.upper.size}"
            )

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x) -> np.ndarray:
        xv = as_vector(x, "x")
        if xv.size != self.n:
            raise ValueError(f"length mismatch: matrix n={self.n}, vector {xv.size}")
        out = self.diag * xv
        if self.n > 1:
            out[:-1] += self.upper * xv[1:]
            out[1:] += self.lower * xv[:-1]
        return out


def solve_tridiagonal(A: Tridiagonal, b) -> np.ndarray:
    """Solve ``A x = b`` by the Thomas recursion.

    Pivots smaller than ``1e-14 * max|diag|`` are treated as breakdown so
    that an implicit time step can fail its Newton update instead of
    returning garbage.
    """
    bv = as_vector(b, "b")
    n = A.n
    if bv.size != n:
        raise ValueError(f"length mismatch: matrix n={n}, rhs {bv.size}")
    pivot_floor = 1e-14 * float(np.max(np.abs(A.diag)))

    c = A.diag.copy()
    d = bv.copy()
    for i in range(1, n):
        if abs(c[i - 1]) <= pivot_floor:
            raise NumericBreakdown(f"zero pivot in Thomas elimination at row {i - 1}")
        m = A.lower[i - 1] / c[i - 1]
        c[i] = c[i] - m * A.upper[i - 1]
        d[i] = d[i] - m * d[i - 1]
    if abs(c[n - 1]) <= pivot_floor:
        raise NumericBreakdown(f"zero pivot in Thomas elimination at row {n - 1}")

    x = np.empty(n)
    x[n - 1] = d[n - 1] / c[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (d[i] - A.upper[i] * x[i + 1]) / c[i]
    if not np.all(np.isfinite(x)):
        raise NumericBreakdown("non-finite solution from Thomas elimination")
    return x


@dataclass(frozen=True)
class NewtonSettings:
    """Tolerances and safeguards for the damped Newton iteration."""

    abs_tol: float = 1e-10
    rel_tol: float = 0.0
    max_iters: int = 25
    damping_min: float = 1.0 / 64.0
    fd_epsilon: float = 1e-7

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise ValueError("abs_tol must be positive")
        if self.rel_tol < 0.0:
            raise ValueError("rel_tol must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.damping_min <= 1.0:
            raise ValueError("damping_min must lie in (0, 1]")
        if self.fd_epsilon <= 0.0:
            raise ValueError("fd_epsilon must be positive")


def _fd_jacobian(residual: Callable, x: np.ndarray, r0: np.ndarray, eps: float) -> np.ndarray:
    """Columnwise forward-difference Jacobian of ``residual`` at ``x``."""
    n = x.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        h = eps * (1.0 + abs(x[j]))
        xp = x.copy()
        xp[j] += h
        rp = np.asarray(residual(xp), dtype=np.float64)
        if not np.all(np.isfinite(rp)):
            raise NumericBreakdown(f"residual not finite while differencing column {j}")
        jac[:, j] = (rp - r0) / h
    return jac


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    x0,
    settings: Optional[NewtonSettings] = None,
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    history: Optional[list] = None,
):
    """Solve ``residual(x) = 0`` by damped Newton iteration.

    The Jacobian is formed columnwise by forward differences with
    increment ``fd_epsilon * (1 + |x_j|)`` unless an analytic ``jacobian``
    callable is supplied. Each step is halved until the residual norm
    decreases or the damping factor reaches ``damping_min``, at which
    point the damped step is taken anyway.

    Parameters
    ----------
    residual : callable
        Maps a 1-d array to the residual array of the same length.
    x0 : array_like
        Starting guess; the residual must be finite here.
    settings : NewtonSettings, optional
    jacobian : callable, optional
        Maps x to the dense Jacobian matrix at x.
    history : list, optional
        If given, the residual norm after each accepted step is appended.

    Returns
    -------
    (x, iterations)
        Solution with ``||residual(x)||_2 <= abs_tol + rel_tol * ||residual(x0)||_2``
        and the number of accepted Newton steps.

    Raises
    ------
    MaxItersExceeded
        No convergence within ``max_iters`` steps.
    NumericBreakdown
        NaN/Inf encountered or the linearization is singular.
    """
    cfg = settings if settings is not None else NewtonSettings()
    x = as_vector(x0, "x0").copy()
    r = np.asarray(residual(x), dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise NumericBreakdown("residual not finite at starting point")
    if r.size != x.size:
        raise ValueError(f"residual length {r.size} does not match unknowns {x.size}")
    rnorm = float(np.linalg.norm(r))
    target = cfg.abs_tol + cfg.rel_tol * rnorm

    for it in range(cfg.max_iters):
        if rnorm <= target:
            return x, it
        jac = np.asarray(jacobian(x), dtype=np.float64) if jacobian is not None else _fd_jacobian(residual, x, r, cfg.fd_epsilon)
        if not np.all(np.isfinite(jac)):
            raise NumericBreakdown("Jacobian contains NaN or Inf entries")
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NumericBreakdown("singular linearization in Newton step") from exc
        if not np.all(np.isfinite(dx)):
            raise NumericBreakdown("non-finite Newton direction")

        lam = 1.0
        while True:
            x_trial = x + lam * dx
            r_trial = np.asarray(residual(x_trial), dtype=np.float64)
            trial_norm = float(np.linalg.norm(r_trial)) if np.all(np.isfinite(r_trial)) else np.inf
            if trial_norm < rnorm or lam <= cfg.damping_min:
                break
            lam = max(lam / 2.0, cfg.damping_min)
        if not np.isfinite(trial_norm):
            raise NumericBreakdown(f"residual not finite after damping to {lam}")
        x, r, rnorm = x_trial, r_trial, trial_norm
        if history is not None:
            history.append(rnorm)

    if rnorm <= target:
        return x, cfg.max_iters
    raise MaxItersExceeded(
        f"no convergence in {cfg.max_iters} iterations (||r|| = {rnorm:.3e}, target {target:.3e})"
    )
