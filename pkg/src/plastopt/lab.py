"""Parameter sweeps: gamma, time step, delta, Modica-Mortola profile, adjoint bounds, z-Lipschitz."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .adjoint import solve_adjoint
from .evolution import (Problem, TimeGrid, energy_inequality_slack, energy_scale,
                        solve_evolution, state_distance)
from .fem import (DIRICHLET, TagRule, build_rect_mesh, h1_vector_norm, l2_qp_norm,
                  modica_mortola, modica_mortola_gradient, modica_mortola_hessian)
from .optimizer import OptimizerConfig, optimize


@dataclass
class Table:
    """Column-oriented study result with a free-form summary."""

    name: str
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the header")
        self.rows.append(list(values))

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)


def _map(fn, items, threads: int | None):
    items = list(items)
    if not threads or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _monotone_decreasing(values, strict=False) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(v[1:] < v[:-1]) if strict else np.all(v[1:] <= v[:-1]))


def run_gamma_sweep(problem: Problem, z: np.ndarray, gammas, threads: int | None = None) -> Table:
    """Distance of each finite-gamma trajectory to the exact one (sum of H1 + L2 + L2 over nodes)."""
    ref = solve_evolution(problem, z, math.inf)
    finite = [g for g in gammas if not math.isinf(g)]
    states = _map(lambda g: solve_evolution(problem, z, g), finite, threads)
    t = Table("gamma_sweep", ["gamma", "state_distance", "dissipation"])
    for g, st in zip(finite, states):
        t.add(g, state_distance(problem.mesh, st, ref), float(np.sum(st.dissipation)))
    if any(math.isinf(g) for g in gammas):
        t.add(math.inf, 0.0, float(np.sum(ref.dissipation)))
    d = t.column("state_distance")[:len(finite)]
    t.summary = {"monotone_decreasing": _monotone_decreasing(d),
                 "strictly_decreasing": _monotone_decreasing(d, strict=True),
                 "gamma_times_distance": [float(g * x) for g, x in zip(finite, d)]}
    return t


def _interpolate_to(u_coarse: np.ndarray, factor: int) -> np.ndarray:
    """Piecewise affine interpolant in time sampled on a ``factor`` times finer grid."""
    k = u_coarse.shape[0] - 1
    s = np.arange(k * factor + 1) / factor
    i = np.minimum(np.floor(s).astype(int), k - 1)
    theta = (s - i)[(...,) + (None,) * (u_coarse.ndim - 1)]
    return (1 - theta) * u_coarse[i] + theta * u_coarse[i + 1]


def run_timestep_sweep(problem: Problem, z: np.ndarray, ks, gamma: float = math.inf,
                       threads: int | None = None) -> Table:
    """Distances between the affine interpolants of the ``k`` and ``2k`` runs.

    ``u_Linf_H1`` is the max over time of the H1 distance; ``H1_time`` the
    discrete ``H1(0,T; H1 x L2 x L2)`` distance.
    """
    ks = sorted(int(k) for k in ks)
    needed = sorted(set(ks) | {2 * k for k in ks})
    probs = {k: problem.with_grid(TimeGrid(k, problem.grid.T)) for k in needed}
    states = dict(zip(needed, _map(lambda k: solve_evolution(probs[k], z, gamma), needed, threads)))
    mesh = problem.mesh
    t = Table("timestep_sweep", ["k", "u_Linf_H1", "H1_time", "slack_final", "order"])
    prev = None
    for k in ks:
        a, b = states[k], states[2 * k]
        tau = problem.grid.T / (2 * k)
        du = _interpolate_to(a.u, 2) - b.u
        de = _interpolate_to(a.eps, 2) - b.eps
        dp = _interpolate_to(a.p, 2) - b.p
        linf = max(h1_vector_norm(mesh, du[i]) for i in range(2 * k + 1))
        l2 = sum(tau * (h1_vector_norm(mesh, du[i]) ** 2 + l2_qp_norm(mesh, de[i]) ** 2
                        + l2_qp_norm(mesh, dp[i]) ** 2) for i in range(2 * k + 1))
        dt = sum(((h1_vector_norm(mesh, du[i + 1] - du[i]) + l2_qp_norm(mesh, de[i + 1] - de[i])
                   + l2_qp_norm(mesh, dp[i + 1] - dp[i])) / tau) ** 2 * tau for i in range(2 * k))
        slack = energy_inequality_slack(probs[k], z, a)[-1] / energy_scale(probs[k], z, a)
        order = math.log2(prev / linf) if prev and linf > 0 else math.nan
        t.add(k, linf, math.sqrt(l2 + dt), slack, order)
        prev = linf
    d = t.column("u_Linf_H1")
    orders = t.column("order")[1:]
    t.summary = {"monotone_decreasing": _monotone_decreasing(d, strict=True),
                 "min_order": float(np.min(orders)) if orders.size else math.nan,
                 "slack_decreasing": _monotone_decreasing(np.abs(t.column("slack_final")), strict=True)}
    return t


def interface_area(mesh, z: np.ndarray, lo: float = 0.05, hi: float = 0.95) -> float:
    q = mesh.quadrature()
    zq = mesh.interpolate(z)
    return float(np.sum(q["w"][(zq > lo) & (zq < hi)]))


def run_delta_sweep(problem: Problem, z0: np.ndarray, deltas, cfg: OptimizerConfig,
                    threads: int | None = None) -> Table:
    """Full optimization per delta; reports the area of the diffuse interface."""
    def one(delta):
        c = OptimizerConfig(**{**cfg.to_dict(), "delta": float(delta)})
        return optimize(z0, problem, c)

    results = _map(one, deltas, threads)
    t = Table("delta_sweep", ["delta", "J", "interface_area", "grad_norm", "converged"])
    for dl, r in zip(deltas, results):
        t.add(float(dl), r.J, interface_area(problem.mesh, r.z), r.grad_norm, float(r.converged))
    order = np.argsort(-np.asarray(deltas, dtype=float))
    t.summary = {"width_decreasing": _monotone_decreasing(t.column("interface_area")[order])}
    return t


def mm_profile(delta: float, n_cells: int = 200, L: float = 1.0, pinned: bool = True,
               tol: float = 1e-12, max_iter: int = 100):
    """Minimize the Modica-Mortola energy on a one-cell-thick strip.

    With ``pinned`` the ends are held at ``z = 0`` and ``z = 1``; the
    returned energy is per unit width.
    """
    h = L / n_cells
    mesh = build_rect_mesh(n_cells, 1, L, h, [TagRule("left", DIRICHLET)])
    x = mesh.nodes[:, 0]
    if pinned:
        z = np.clip((x - 0.5 * L) / (4.0 * delta) + 0.5, 0.0, 1.0)
        fixed = np.flatnonzero((x < 1e-12 * L) | (x > L * (1 - 1e-12)))
    else:
        z = np.zeros(mesh.n_nodes)
        fixed = np.zeros(0, dtype=int)
    free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
    for _ in range(max_iter):
        g = modica_mortola_gradient(mesh, z, delta)[free]
        if np.linalg.norm(g) <= tol:
            break
        H = modica_mortola_hessian(mesh, z, delta).tocsr()[free][:, free]
        dz = spla.spsolve(H.tocsc(), -g)
        if g @ dz >= 0:
            dz = -g
        E0 = modica_mortola(mesh, z, delta)
        a = 1.0
        while True:
            trial = z.copy()
            trial[free] += a * dz
            if modica_mortola(mesh, trial, delta) <= E0 + 1e-4 * a * (g @ dz) or a < 1e-12:
                break
            a *= 0.5
        z = trial
    return modica_mortola(mesh, z, delta) / h, z, mesh


def run_mm_profile_check(deltas, n_cells: int = 200, L: float = 1.0) -> Table:
    t = Table("mm_profile", ["delta", "delta_over_L", "energy", "relative_error"])
    for dl in deltas:
        e, _, _ = mm_profile(dl, n_cells, L)
        t.add(float(dl), dl / L, e, abs(e - 1.0 / 6.0) * 6.0)
    small = [r for r in t.rows if r[1] <= 1.0 / 50.0 + 1e-15]
    t.summary = {"max_error_small_delta": max((r[3] for r in small), default=math.nan)}
    return t


def run_adjoint_bound_study(problem: Problem, z: np.ndarray, ks, gammas,
                            threads: int | None = None) -> Table:
    """Max over time of the adjoint norms per ``(k, gamma)``."""
    pairs = [(int(k), float(g)) for k in ks for g in gammas]

    def one(pair):
        k, g = pair
        pb = problem.with_grid(TimeGrid(k, problem.grid.T))
        st = solve_evolution(pb, z, g)
        return solve_adjoint(pb, z, st).max_norm(pb.mesh)

    vals = _map(one, pairs, threads)
    t = Table("adjoint_bounds", ["k", "gamma", "max_adjoint_norm"])
    for (k, g), v in zip(pairs, vals):
        t.add(k, g, v)
    v = np.asarray(vals)
    summ = {"ratio_max_min": float(v.max() / v.min()) if v.min() > 0 else math.nan}
    lg = np.log(np.asarray([g for _, g in pairs]))
    lk = np.log(np.asarray([k for k, _ in pairs], dtype=float))
    lv = np.log(np.maximum(v, 1e-300))
    if np.ptp(lg) > 0 and np.ptp(lk) > 0 and v.min() > 0:
        A = np.column_stack([np.ones_like(lg), lg, lk])
        coef = np.linalg.lstsq(A, lv, rcond=None)[0]
        summ.update(slope_log_gamma=float(coef[1]), slope_log_k=float(coef[2]))
    t.summary = summ
    return t


def run_lipschitz_in_z_study(problem: Problem, z: np.ndarray, gamma: float, sizes,
                             seed: int = 0) -> Table:
    """Ratios ``|S(z + dz) - S(z)| / |dz|_inf`` for random smooth ``dz`` of given sizes."""
    rng = np.random.default_rng(seed)
    mesh = problem.mesh
    x, y = mesh.nodes[:, 0] / mesh.Lx, mesh.nodes[:, 1] / mesh.Ly
    a = rng.standard_normal(4)
    shape = a[0] + a[1] * np.cos(np.pi * x) + a[2] * np.cos(np.pi * y) + a[3] * np.sin(np.pi * x * y)
    shape = shape / np.max(np.abs(shape))
    base = solve_evolution(problem, z, gamma)
    t = Table("lipschitz_in_z", ["size", "ratio", "skipped"])
    for s in sizes:
        if s == 0:
            t.add(0.0, math.nan, 1.0)
            continue
        st = solve_evolution(problem, z + s * shape, gamma)
        t.add(float(s), state_distance(mesh, st, base) / abs(s), 0.0)
    r = t.column("ratio")
    r = r[np.isfinite(r)]
    t.summary = {"ratio_spread": float(r.max() / r.min()) if r.size else math.nan,
                 "max_ratio": float(r.max()) if r.size else math.nan}
    return t
