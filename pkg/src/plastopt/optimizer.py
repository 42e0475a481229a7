"""Armijo descent on the phase field along the H1 Riesz gradient."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import (AdjointState, objective, optimality_residuals, reduced_gradient,
                      solve_adjoint)
from .evolution import EvolutionState, Problem, solve_evolution
from .fem import h1_norm, h1_riesz_solve, scalar_matrices

log = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    max_iters: int = 50
    c1: float = 1e-4
    step0: float = 1.0
    shrink: float = 0.5
    grow: float = 2.0
    max_backtracks: int = 30
    gtol: float = 1e-6
    rtol: float = 0.0
    delta: float = 0.1
    gamma: float = 100.0
    schedule: tuple = ()
    clamp: bool = False
    bb_step: bool = True
    volume_penalty: float = 0.0
    volume_target: float = 0.5
    newton_tol: float = 1e-10

    def violations(self) -> list[str]:
        out = []
        for name in ("max_iters", "step0", "delta", "gamma", "max_backtracks", "newton_tol"):
            if not getattr(self, name) > 0:
                out.append(f"optimizer.{name} must be positive")
        if not 0.0 < self.c1 < 1.0:
            out.append("optimizer.c1 must lie in (0, 1)")
        if not 0.0 < self.shrink < 1.0:
            out.append("optimizer.shrink must lie in (0, 1)")
        if not self.grow >= 1.0:
            out.append("optimizer.grow must be at least 1")
        if self.gtol < 0 or self.rtol < 0:
            out.append("optimizer tolerances must be non-negative")
        if self.volume_penalty < 0:
            out.append("optimizer.volume_penalty must be non-negative")
        sched = list(self.schedule)
        if any(not g > 0 for g in sched):
            out.append("optimizer.schedule entries must be positive")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            out.append("optimizer.schedule must be strictly increasing")
        return out

    def __post_init__(self):
        self.schedule = tuple(float(g) for g in self.schedule)
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(bad))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = list(self.schedule)
        return d


@dataclass
class TraceRow:
    iteration: int
    gamma: float
    J: float
    terminal: float
    increments: float
    mm: float
    volume: float
    grad_norm: float
    step: float
    backtracks: int
    z_min: float
    z_max: float


@dataclass
class OptimizationTrace:
    rows: list = field(default_factory=list)
    message: str = ""

    def append(self, row: TraceRow):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def header(self) -> list[str]:
        return list(TraceRow.__dataclass_fields__)


@dataclass
class OptimizeResult:
    z: np.ndarray
    trace: OptimizationTrace
    state: EvolutionState
    adjoint: AdjointState
    J: float
    grad_norm: float
    converged: bool
    G: np.ndarray


class _Evaluator:
    """Objective, state and adjoint at a given ``z`` with warm starts."""

    def __init__(self, problem: Problem, cfg: OptimizerConfig, gamma: float):
        self.problem, self.cfg, self.gamma = problem, cfg, gamma
        self.last_state = None
        M, _ = scalar_matrices(problem.mesh)
        self.ones_weights = M @ np.ones(problem.mesh.n_nodes)

    def volume_term(self, z):
        if self.cfg.volume_penalty == 0.0:
            return 0.0, None
        area = self.problem.mesh.area
        gap = float(self.ones_weights @ z) / area - self.cfg.volume_target
        val = 0.5 * self.cfg.volume_penalty * gap * gap
        grad = self.cfg.volume_penalty * gap * self.ones_weights / area
        return val, grad

    def value(self, z):
        state = solve_evolution(self.problem, z, self.gamma, tol=self.cfg.newton_tol,
                                warm_start=self.last_state)
        br = objective(self.problem, z, state, self.cfg.delta)
        vol, _ = self.volume_term(z)
        return br.total + vol, br, vol, state

    def gradient(self, z, state):
        adj = solve_adjoint(self.problem, z, state, self.gamma)
        G, _ = reduced_gradient(self.problem, z, state, adj, self.cfg.delta)
        _, vg = self.volume_term(z)
        if vg is not None:
            G = G + vg
        R = h1_riesz_solve(self.problem.mesh, self.cfg.delta, G)
        return G, R, adj


class _Subspace:
    """Riesz map restricted to ``z = z0 + basis c``."""

    def __init__(self, mesh, delta, basis):
        M, S = scalar_matrices(mesh)
        self.P = np.asarray(basis, dtype=float).reshape(mesh.n_nodes, -1)
        self.A = self.P.T @ (delta * (S @ self.P) + M @ self.P)

    def direction(self, G):
        c = np.linalg.solve(self.A, self.P.T @ G)
        return self.P @ c, float(np.sqrt(max(c @ (self.A @ c), 0.0)))


def optimize(z0: np.ndarray, problem: Problem, cfg: OptimizerConfig,
             gamma: float | None = None, trace: OptimizationTrace | None = None,
             basis: np.ndarray | None = None) -> OptimizeResult:
    """Armijo-backtracked steepest descent in the H1 metric ``delta (grad, grad) + (., .)``.

    ``basis`` (n_nodes, m) restricts the search to ``z0 + span(basis)``; the
    descent direction is then the Riesz representative within that span.
    """
    z = np.array(z0, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("initial phase field must be finite")
    gamma = cfg.gamma if gamma is None else gamma
    trace = OptimizationTrace() if trace is None else trace
    ev = _Evaluator(problem, cfg, gamma)
    mesh = problem.mesh
    sub = None if basis is None else _Subspace(mesh, cfg.delta, basis)

    def riesz(G, R):
        if sub is None:
            return R, h1_norm(mesh, cfg.delta, R)
        return sub.direction(G)

    J, br, vol, state = ev.value(z)
    ev.last_state = state
    G, R, adj = ev.gradient(z, state)
    R, gnorm = riesz(G, R)
    g0 = gnorm
    step = cfg.step0
    prev = None
    converged = False
    trace.append(TraceRow(0, gamma, J, br.terminal, br.increments, br.mm, vol, gnorm, 0.0, 0,
                          float(z.min()), float(z.max())))
    for it in range(1, cfg.max_iters + 1):
        if gnorm <= max(cfg.gtol, cfg.rtol * g0):
            converged = True
            break
        if cfg.bb_step and prev is not None:
            dz, dG = z - prev[0], G - prev[1]
            M, S = scalar_matrices(mesh)
            num = float(dz @ (cfg.delta * (S @ dz) + M @ dz))
            den = float(dz @ dG)
            if den > 0 and num > 0:
                step = num / den
        gg = gnorm * gnorm
        accepted = False
        for bt in range(cfg.max_backtracks + 1):
            trial = z - step * R
            if cfg.clamp:
                trial = np.clip(trial, 0.0, 1.0)
            Jt, brt, volt, st = ev.value(trial)
            if cfg.clamp:
                dec = float(G @ (z - trial))
                ok = Jt <= J - cfg.c1 * dec
            else:
                ok = Jt <= J - cfg.c1 * step * gg
            if ok:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            trace.message = f"line search failed at iteration {it}"
            log.warning(trace.message)
            break
        prev = (z, G)
        z, J, br, vol, state = trial, Jt, brt, volt, st
        ev.last_state = state
        G, R, adj = ev.gradient(z, state)
        R, gnorm = riesz(G, R)
        trace.append(TraceRow(it, gamma, J, br.terminal, br.increments, br.mm, vol, gnorm, step, bt,
                              float(z.min()), float(z.max())))
        step *= cfg.grow
    else:
        converged = gnorm <= max(cfg.gtol, cfg.rtol * g0)
    if converged and not trace.message:
        trace.message = "converged"
    elif not trace.message:
        trace.message = "iteration cap reached"
    return OptimizeResult(z, trace, state, adj, J, gnorm, converged, G)


@dataclass
class ContinuationStage:
    gamma: float
    result: OptimizeResult
    z_change_h1: float
    residuals: dict


def gamma_continuation(z0: np.ndarray, problem: Problem, cfg: OptimizerConfig,
                       schedule=None) -> list[ContinuationStage]:
    """Warm-started ``optimize`` over an increasing list of ``gamma``."""
    schedule = tuple(schedule if schedule is not None else (cfg.schedule or (cfg.gamma,)))
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("gamma schedule must be strictly increasing")
    z = np.array(z0, dtype=float)
    trace = OptimizationTrace()
    stages = []
    for g in schedule:
        res = optimize(z, problem, cfg, gamma=g, trace=trace)
        rep = optimality_residuals(problem, res.z, res.state, res.adjoint).as_dict()
        dz = h1_norm(problem.mesh, cfg.delta, res.z - z) if stages else math.nan
        stages.append(ContinuationStage(g, res, dz, rep))
        log.info("gamma %.3g: J=%.6g |grad|=%.3e", g, res.J, res.grad_norm)
        z = res.z
    return stages


def cross_check_exact(problem: Problem, z: np.ndarray, delta: float) -> float:
    """Target evaluated on the ``gamma = inf`` state for ``z``."""
    st = solve_evolution(problem, z, math.inf)
    return objective(problem, z, st, delta).total
