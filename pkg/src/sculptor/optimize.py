"""Nelder-Mead downhill simplex minimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class SimplexConfig:
    """Coefficients and stopping rules for :func:`nelder_mead`.

    ``initial_step`` gives the per-axis offset of the initial simplex
    vertices from ``x0``; a scalar is broadcast, ``None`` means 5% of each
    nonzero coordinate (0.00025 for zero coordinates).
    """

    alpha: float = 1.0
    gamma: float = 2.0
    rho: float = 0.5
    sigma: float = 0.5
    max_iters: int = 200
    f_tol: float = 1e-6
    x_tol: float = 1e-4
    initial_step: tuple | float | None = None
    keep_trace: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise InputError("alpha must be > 0")
        if not self.gamma > 1:
            raise InputError("gamma must be > 1")
        if not 0 < self.rho < 1:
            raise InputError("rho must lie in (0, 1)")
        if not 0 < self.sigma < 1:
            raise InputError("sigma must lie in (0, 1)")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if not (self.f_tol > 0 and self.x_tol > 0):
            raise InputError("f_tol and x_tol must be > 0")


@dataclass
class OptResult:
    x_best: np.ndarray
    f_best: float
    iterations: int
    evaluations: int
    converged: bool
    trace: list = field(default_factory=list)


def _initial_steps(x0, step):
    n = x0.size
    if step is None:
        return np.where(x0 != 0, 0.05 * x0, 0.00025)
    steps = np.broadcast_to(np.asarray(step, dtype=np.float64), (n,)).copy()
    if np.any(steps == 0) or not np.all(np.isfinite(steps)):
        raise InputError("initial_step entries must be finite and nonzero")
    return steps


def nelder_mead(objective, x0, cfg: SimplexConfig = SimplexConfig()) -> OptResult:
    """Minimize ``objective`` starting from the axis-aligned simplex at ``x0``.

    Non-finite objective values count as +inf.  The run stops once the
    simplex's spread of objective values is within ``f_tol`` and its extent
    around the best vertex is within ``x_tol``, or after ``max_iters``
    iterations.  A simplex whose values are all exactly equal on the first
    evaluation is a flat objective and stops at once.

    Each non-shrink iteration costs one or two evaluations; a shrink costs
    two plus ``n``.
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    if x0.size == 0:
        raise InputError("cannot optimize over zero parameters")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 must be finite")
    n = x0.size
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        v = float(objective(x))
        return v if math.isfinite(v) else math.inf

    sim = np.tile(x0, (n + 1, 1))
    sim[1:] += np.diag(_initial_steps(x0, cfg.initial_step))
    fs = np.array([f(v) for v in sim])

    trace = []
    order = np.argsort(fs, kind="stable")
    sim, fs = sim[order], fs[order]
    if cfg.keep_trace:
        trace.append((sim[0].copy(), float(fs[0])))
    if np.all(fs == fs[0]) and math.isfinite(fs[0]):
        return OptResult(sim[0].copy(), float(fs[0]), 0, evals, True, trace)

    converged = False
    it = 0
    while it < cfg.max_iters:
        if _small(sim, fs, cfg):
            converged = True
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + cfg.alpha * (centroid - worst)
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + cfg.gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = centroid + cfg.rho * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = centroid + cfg.rho * (worst - centroid)
                fc = f(xc)
                accept = fc < fs[-1]
            if accept:
                sim[-1], fs[-1] = xc, fc
            else:
                best = sim[0]
                sim[1:] = best + cfg.sigma * (sim[1:] - best)
                fs[1:] = [f(v) for v in sim[1:]]
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        if cfg.keep_trace:
            trace.append((sim[0].copy(), float(fs[0])))
    else:
        converged = _small(sim, fs, cfg)

    return OptResult(sim[0].copy(), float(fs[0]), it, evals, converged, trace)


def _small(sim, fs, cfg):
    if not math.isfinite(fs[-1]):
        return False
    f_spread = fs[-1] - fs[0]
    x_spread = np.max(np.abs(sim[1:] - sim[0]))
    return f_spread <= cfg.f_tol and x_spread <= cfg.x_tol
