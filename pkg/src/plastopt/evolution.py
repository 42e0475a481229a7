"""Forward problem: incremental minimization on a uniform time grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels_py import NewtonDivergence
from .dissipation import h_gamma_array
from .fem import (Mesh, StateAssembly, body_force_vector, factorize, l2_qp_norm,
                  h1_vector_norm, qp_coefficients, traction_vector)
from .loads import LoadProgram
from .material import MaterialLaw, elasticity_mandel
from .tensor import dev_basis

TOL_NEWTON = 1e-10
MAX_NEWTON = 50


@dataclass(frozen=True)
class TimeGrid:
    k: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def tau(self) -> float:
        return self.T / self.k

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.k + 1) * self.tau


class Problem:
    """Mesh, material, loads and time grid with per-step load data cached.

    ``fq[i]`` holds the body force at quadrature points, ``Gv[i]`` the
    traction load vector and ``w[i]`` the Dirichlet lift at every node
    (flat dofs), all at ``t_i``.
    """

    def __init__(self, mesh: Mesh, law: MaterialLaw, loads: LoadProgram, grid: TimeGrid):
        if not math.isclose(loads.T, grid.T):
            raise ValueError("load program and time grid disagree on the final time")
        self.mesh, self.law, self.loads, self.grid = mesh, law, loads, grid
        xq = mesh.quadrature()["x"]
        X = mesh.nodes
        self.fq, self.Gv, self.w = [], [], []
        for t in grid.nodes:
            self.fq.append(np.asarray(loads.f(xq[:, 0], xq[:, 1], t), dtype=float).reshape(-1, 2))
            self.Gv.append(traction_vector(mesh, loads.g, t))
            self.w.append(np.asarray(loads.w(X[:, 0], X[:, 1], t), dtype=float).reshape(-1))

    def with_grid(self, grid: TimeGrid) -> "Problem":
        loads = self.loads if math.isclose(self.loads.T, grid.T) else None
        if loads is None:
            raise ValueError("grid final time differs from load program")
        return Problem(self.mesh, self.law, loads, grid)

    def external_force(self, i: int, ell_q: np.ndarray) -> np.ndarray:
        """``int ell(z) f_i . v + int_N g_i . v``."""
        return body_force_vector(self.mesh, self.fq[i], ell_q) + self.Gv[i]

    def body_functional(self, i: int, weight_q: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Quadrature density ``weight * f_i . u`` (Nq,)."""
        uq = self.mesh.interpolate_vector(u)
        return weight_q * np.einsum("qx,qx->q", self.fq[i], uq)


@dataclass
class StepResult:
    u: np.ndarray
    eps: np.ndarray
    p: np.ndarray
    sigma: np.ndarray
    iterations: int
    history: list


@dataclass
class EvolutionState:
    """Trajectory ``(u_i, eps_i, p_i)``, ``i = 0..k``.

    ``u`` has shape (k+1, ndof); ``eps``/``sigma`` (k+1, Nq, 3) Mandel;
    ``p`` (k+1, Nq, 2) deviatoric coordinates.
    """

    gamma: float
    u: np.ndarray
    eps: np.ndarray
    p: np.ndarray
    sigma: np.ndarray
    dissipation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.u.shape[0] - 1

    def step(self, i: int) -> StepResult:
        return StepResult(self.u[i], self.eps[i], self.p[i], self.sigma[i], 0, [])


def solve_increment(problem: Problem, z: np.ndarray, i: int, u_prev: np.ndarray,
                    p_prev: np.ndarray, gamma: float, tol: float = TOL_NEWTON,
                    max_iter: int = MAX_NEWTON, coeffs: dict | None = None) -> StepResult:
    """Newton with energy backtracking for step ``i`` of the evolution."""
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z) if coeffs is None else coeffs
    F_ext = problem.external_force(i, co["ell"])
    asm = StateAssembly(mesh, problem.law, z, p_prev, gamma, F_ext, co)
    free, dd = mesh.free_dofs(), mesh.dirichlet_dofs()
    u = u_prev.copy()
    u[dd] = problem.w[i][dd]
    history = []
    ref = None
    for it in range(max_iter + 1):
        r, K, res = asm.residual(u)
        rf = r[free]
        rn = float(np.linalg.norm(rf))
        history.append(rn)
        if ref is None:
            fint = r + F_ext
            ref = max(np.linalg.norm(F_ext), np.linalg.norm(fint))
        if rn <= tol * ref or rn == 0.0:
            break
        # roundoff floor: stop once Newton no longer contracts
        if len(history) > 1 and rn <= 1e-12 * ref and rn > 0.5 * history[-2]:
            break
        if it == max_iter:
            raise NewtonDivergence(
                f"global Newton did not converge at step {i} (residual {rn:.3e})", history=history)
        du = np.zeros_like(u)
        du[free] = factorize(K[free][:, free])(-rf)
        E0 = asm.energy(u, res)
        slope = float(rf @ du[free])
        alpha = 1.0
        roundoff = 1e-13 * (abs(E0) + abs(float(F_ext @ u)) + 1e-300)
        while True:
            trial = u + alpha * du
            Et = asm.energy(trial)
            if Et <= E0 + 1e-4 * alpha * slope + roundoff or alpha < 1e-10:
                break
            alpha *= 0.5
        u = trial
    eps = mesh.strain(u) - res.p @ dev_basis(2).T
    return StepResult(u, eps, res.p, res.sigma, it, history)


def solve_evolution(problem: Problem, z: np.ndarray, gamma: float, tol: float = TOL_NEWTON,
                    warm_start: EvolutionState | None = None) -> EvolutionState:
    """Sequential incremental solves from the zero initial state."""
    mesh, k = problem.mesh, problem.grid.k
    nq = mesh.n_quad
    u = np.zeros((k + 1, mesh.n_dofs))
    eps = np.zeros((k + 1, nq, 3))
    p = np.zeros((k + 1, nq, 2))
    sigma = np.zeros((k + 1, nq, 3))
    co = qp_coefficients(mesh, problem.law, z)
    iters = []
    for i in range(1, k + 1):
        guess = u[i - 1] if warm_start is None else warm_start.u[i]
        step = solve_increment(problem, z, i, guess, p[i - 1], gamma, tol=tol, coeffs=co)
        u[i], eps[i], p[i], sigma[i] = step.u, step.eps, step.p, step.sigma
        iters.append(step.iterations)
    state = EvolutionState(gamma, u, eps, p, sigma, iterations=iters)
    state.dissipation = dissipation_increments(problem, z, state)
    state.energies = np.array([energy(problem, z, state, i) for i in range(k + 1)])
    return state


def energy(problem: Problem, z: np.ndarray, state: EvolutionState, i: int) -> float:
    """Stored energy minus load work at ``t_i``."""
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    w = mesh.quadrature()["w"]
    sig = elasticity_mandel(co["mu"], co["lambda"], state.eps[i])
    stored = 0.5 * np.einsum("qs,qs->q", sig, state.eps[i]) \
        + 0.5 * co["h"] * np.einsum("qi,qi->q", state.p[i], state.p[i])
    work = problem.external_force(i, co["ell"]) @ state.u[i]
    return float(np.dot(w, stored) - work)


def dissipation_increments(problem: Problem, z: np.ndarray, state: EvolutionState,
                           gamma: float | None = None) -> np.ndarray:
    """``D_gamma(z, p_i - p_{i-1})`` for ``i = 1..k`` (exact density for ``inf``)."""
    gamma = state.gamma if gamma is None else gamma
    co = qp_coefficients(problem.mesh, problem.law, z)
    w = problem.mesh.quadrature()["w"]
    out = np.empty(state.k)
    for i in range(1, state.k + 1):
        dens = w * co["d"] * h_gamma_array(state.p[i] - state.p[i - 1], gamma)
        out[i - 1] = math.fsum(dens)
    return out


def total_dissipation(problem: Problem, z: np.ndarray, state: EvolutionState,
                      gamma: float = math.inf) -> float:
    """Total variation ``sum_i D(z, p_i - p_{i-1})``, compensated summation."""
    return math.fsum(dissipation_increments(problem, z, state, gamma))


def energy_inequality_slack(problem: Problem, z: np.ndarray, state: EvolutionState,
                            form: str = "derived") -> np.ndarray:
    """``RHS_i - LHS_i`` of the discrete energy inequality, ``i = 1..k``.

    ``form="derived"`` uses the bound obtained by testing the step
    minimality with the competitor ``(u_{i-1} + dw, eps_{i-1} + E dw,
    p_{i-1})``.  ``form="printed"`` flips the sign of both traction terms and
    drops the factor 1/2 in front of the quadratic Dirichlet term.
    """
    if form not in ("derived", "printed"):
        raise ValueError("form must be 'derived' or 'printed'")
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    w = mesh.quadrature()["w"]
    sg = -1.0 if form == "derived" else 1.0
    quad = 0.5 if form == "derived" else 1.0
    diss = dissipation_increments(problem, z, state)
    out = np.empty(state.k)
    rhs = []
    for j in range(1, state.k + 1):
        dw = problem.w[j] - problem.w[j - 1]
        Edw = mesh.strain(dw)
        Cdw = elasticity_mandel(co["mu"], co["lambda"], Edw)
        Ceps = elasticity_mandel(co["mu"], co["lambda"], state.eps[j - 1])
        terms = [
            float(np.dot(w, np.einsum("qs,qs->q", Ceps, Edw))),
            -float(np.dot(w, problem.body_functional(j, co["ell"], state.u[j - 1])
                          - problem.body_functional(j - 1, co["ell"], state.u[j - 1]))),
            -float(np.dot(w, problem.body_functional(j, co["ell"], dw))),
            sg * float((problem.Gv[j] - problem.Gv[j - 1]) @ state.u[j - 1]),
            sg * float(problem.Gv[j] @ dw),
            quad * float(np.dot(w, np.einsum("qs,qs->q", Cdw, Edw))),
        ]
        rhs.extend(terms)
        lhs = energy(problem, z, state, j) + math.fsum(diss[:j])
        out[j - 1] = math.fsum(rhs) - lhs
    return out


def energy_scale(problem: Problem, z: np.ndarray, state: EvolutionState) -> float:
    """Magnitude used to normalise energy tolerances."""
    co = qp_coefficients(problem.mesh, problem.law, z)
    work = max(abs(problem.external_force(i, co["ell"]) @ state.u[i]) for i in range(state.k + 1))
    return max(work, float(np.max(np.abs(state.energies), initial=0.0)),
               float(np.sum(state.dissipation)), 1e-300)


def incremental_energy(problem: Problem, z: np.ndarray, i: int, u: np.ndarray, p: np.ndarray,
                       p_prev: np.ndarray, gamma: float, coeffs: dict | None = None) -> float:
    """``E_k(t_i, z, u, Eu - p, p) + D_gamma(z, p - p_prev)`` for arbitrary ``(u, p)``."""
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z) if coeffs is None else coeffs
    w = mesh.quadrature()["w"]
    Bd = dev_basis(2)
    eps = mesh.strain(u) - p @ Bd.T
    sig = elasticity_mandel(co["mu"], co["lambda"], eps)
    dens = 0.5 * np.einsum("qs,qs->q", sig, eps) + 0.5 * co["h"] * np.einsum("qi,qi->q", p, p) \
        + co["d"] * h_gamma_array(p - p_prev, gamma)
    return float(np.dot(w, dens) - problem.external_force(i, co["ell"]) @ u)


def stability_violations(problem: Problem, z: np.ndarray, state: EvolutionState, i: int,
                         n_samples: int = 50, seed: int = 0, rtol: float = 1e-9) -> dict:
    """Sample admissible competitors around step ``i`` and compare energies.

    Competitors are ``(u_i + du, eps_i + E du - dp, p_i + dp)`` with
    ``du = 0`` on the Dirichlet part and amplitudes spread over four
    decades.  Returns the worst violation and the scale used.
    """
    rng = np.random.default_rng(seed)
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    base = incremental_energy(problem, z, i, state.u[i], state.p[i], state.p[i - 1],
                              state.gamma, co)
    scale = max(energy_scale(problem, z, state), abs(base))
    u_amp = max(float(np.max(np.abs(state.u[i]))), 1e-12)
    p_amp = max(float(np.max(np.abs(state.p[i]))), u_amp / max(mesh.Lx, mesh.Ly))
    free = mesh.free_dofs()
    worst = -math.inf
    for _ in range(n_samples):
        a = 10.0 ** rng.uniform(-4, 0)
        du = np.zeros(mesh.n_dofs)
        du[free] = a * u_amp * rng.standard_normal(free.size)
        dp = a * p_amp * rng.standard_normal(state.p[i].shape) * (rng.uniform() < 0.7)
        comp = incremental_energy(problem, z, i, state.u[i] + du, state.p[i] + dp,
                                  state.p[i - 1], state.gamma, co)
        worst = max(worst, base - comp)
    return {"worst": worst, "scale": scale, "ok": worst <= rtol * scale}


def state_distance(mesh: Mesh, a: EvolutionState, b: EvolutionState) -> float:
    """Sum over time nodes of ``|u|_H1 + |eps|_L2 + |p|_L2`` of the difference."""
    total = 0.0
    for i in range(a.k + 1):
        total += h1_vector_norm(mesh, a.u[i] - b.u[i]) + l2_qp_norm(mesh, a.eps[i] - b.eps[i]) \
            + l2_qp_norm(mesh, a.p[i] - b.p[i])
    return total
