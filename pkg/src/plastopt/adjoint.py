"""Discrete compliance target, backward adjoint, reduced gradient and forward sensitivities."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dissipation import grad_h_gamma_array
from .evolution import EvolutionState, Problem
from .fem import (assemble_adjoint_system, assemble_tangent, body_force_vector, factorize, h1_norm,
                  h1_riesz_solve, hessian_blocks, integrate_stress, modica_mortola,
                  modica_mortola_gradient, nodal_functional, qp_coefficients, l2_qp_norm,
                  h1_vector_norm)
from .local_return import constitutive_update
from .material import elasticity_mandel
from .tensor import dev_basis


@dataclass
class ObjectiveBreakdown:
    terminal: float
    increments: float
    mm: float
    delta: float

    @property
    def compliance(self) -> float:
        return self.terminal + self.increments

    @property
    def total(self) -> float:
        return self.terminal + self.increments + self.mm

    def as_dict(self) -> dict:
        return {"terminal": self.terminal, "increments": self.increments, "mm": self.mm,
                "total": self.total, "delta": self.delta}


@dataclass
class AdjointState:
    """Backward multipliers; index ``i`` runs over ``0..k+1`` with the ends zero."""

    gamma: float
    ubar: np.ndarray     # (k+2, ndof)
    epsbar: np.ndarray   # (k+2, Nq, 3)
    pbar: np.ndarray     # (k+2, Nq, 2)
    rho: np.ndarray      # (k+1, Nq, 2)
    pi: np.ndarray       # (k+1, Nq, 2)

    @property
    def k(self) -> int:
        return self.ubar.shape[0] - 2

    def max_norm(self, mesh) -> float:
        return max(h1_vector_norm(mesh, self.ubar[i]) + l2_qp_norm(mesh, self.epsbar[i])
                   + l2_qp_norm(mesh, self.pbar[i]) for i in range(1, self.k + 1))


def _check_grid(problem: Problem, state: EvolutionState):
    if state.k != problem.grid.k:
        raise ValueError(f"state has {state.k} steps but the grid has {problem.grid.k}")


def objective(problem: Problem, z: np.ndarray, state: EvolutionState, delta: float) -> ObjectiveBreakdown:
    """Time-discrete compliance plus the Modica-Mortola term."""
    _check_grid(problem, state)
    co = qp_coefficients(problem.mesh, problem.law, z)
    k = state.k
    F = [problem.external_force(i, co["ell"]) for i in range(k + 1)]
    terminal = float(F[k] @ state.u[k])
    inc = -math.fsum(float((F[i + 1] - F[i]) @ state.u[i]) for i in range(k))
    return ObjectiveBreakdown(terminal, inc, modica_mortola(problem.mesh, z, delta), delta)


def _step_local(problem, co, state, j, gamma):
    E = problem.mesh.strain(state.u[j])
    return constitutive_update(E, co, state.p[j - 1], gamma)


def solve_adjoint(problem: Problem, z: np.ndarray, state: EvolutionState,
                  gamma: float | None = None) -> AdjointState:
    """Backward recursion ``j = k..1`` starting from zero at ``k + 1``."""
    _check_grid(problem, state)
    gamma = state.gamma if gamma is None else gamma
    if math.isinf(gamma):
        raise ValueError("the adjoint needs a finite gamma")
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    k, nq = state.k, mesh.n_quad
    Bd = dev_basis(2)
    free = mesh.free_dofs()
    ubar = np.zeros((k + 2, mesh.n_dofs))
    pbar = np.zeros((k + 2, nq, 2))
    epsbar = np.zeros((k + 2, nq, 3))
    rho = np.zeros((k + 1, nq, 2))
    pi = np.zeros((k + 1, nq, 2))
    for j in range(k, 0, -1):
        Lam = problem.external_force(j, co["ell"])
        K, rhs, recover = assemble_adjoint_system(mesh, z, state.p[j], state.p[j - 1], state.u[j],
                                                  gamma, problem.law, Lam, pbar[j + 1])
        ubar[j, free] = factorize(K)(rhs)
        pbar[j] = recover(ubar[j])
        epsbar[j] = mesh.strain(ubar[j]) - pbar[j] @ Bd.T
        rho[j] = 2.0 * co["mu"][:, None] * (state.eps[j] @ Bd) - co["h"][:, None] * state.p[j]
        pi[j] = 2.0 * co["mu"][:, None] * (epsbar[j] @ Bd) - co["h"][:, None] * pbar[j]
    return AdjointState(gamma, ubar, epsbar, pbar, rho, pi)


def gradient_density(problem: Problem, z: np.ndarray, state: EvolutionState,
                     adj: AdjointState, dissipation_form: str = "grad") -> np.ndarray:
    """Quadrature density of the state part of the reduced gradient.

    ``dissipation_form="grad"`` uses ``d' (grad h(X_j) - grad h(X_{j-1}))``;
    ``"rho"`` uses the equivalent ``(d'/d)(rho_j - rho_{j-1})``.
    """
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    gamma = adj.gamma
    dens = np.zeros(mesh.n_quad)
    grad_prev = np.zeros((mesh.n_quad, 2))
    rho_prev = np.zeros((mesh.n_quad, 2))
    for j in range(1, state.k + 1):
        du = state.u[j] - state.u[j - 1]
        dens += problem.body_functional(j, co["ell_prime"], du)
        dens += problem.body_functional(j, co["ell_prime"], adj.ubar[j]) \
            - problem.body_functional(j - 1, co["ell_prime"], adj.ubar[j])
        de = state.eps[j] - state.eps[j - 1]
        dCde = elasticity_mandel(co["mu_prime"], co["lambda_prime"], de)
        dens -= np.einsum("qs,qs->q", dCde, adj.epsbar[j])
        dens -= co["h_prime"] * np.einsum("qi,qi->q", state.p[j] - state.p[j - 1], adj.pbar[j])
        if dissipation_form == "grad":
            g = grad_h_gamma_array(state.p[j] - state.p[j - 1], gamma)
            dens -= co["d_prime"] * np.einsum("qi,qi->q", g - grad_prev, adj.pbar[j])
            grad_prev = g
        elif dissipation_form == "rho":
            r = adj.rho[j]
            dens -= (co["d_prime"] / co["d"]) * np.einsum("qi,qi->q", r - rho_prev, adj.pbar[j])
            rho_prev = r
        else:
            raise ValueError("dissipation_form must be 'grad' or 'rho'")
    return dens


def reduced_gradient(problem: Problem, z: np.ndarray, state: EvolutionState, adj: AdjointState,
                     delta: float, dissipation_form: str = "grad"):
    """Nodal coefficients ``G`` of the derivative and its H1 Riesz representative."""
    _check_grid(problem, state)
    if adj.k != state.k:
        raise ValueError("adjoint and state have different numbers of steps")
    dens = gradient_density(problem, z, state, adj, dissipation_form)
    G = nodal_functional(problem.mesh, dens) + modica_mortola_gradient(problem.mesh, z, delta)
    return G, h1_riesz_solve(problem.mesh, delta, G)


def gradient_norm(problem: Problem, delta: float, riesz: np.ndarray) -> float:
    return h1_norm(problem.mesh, delta, riesz)


@dataclass
class Sensitivity:
    v: np.ndarray
    eta: np.ndarray
    q: np.ndarray
    dJ: float


def solve_forward_sensitivity(problem: Problem, z: np.ndarray, state: EvolutionState,
                              phi: np.ndarray, delta: float, gamma: float | None = None) -> Sensitivity:
    """Directional derivative of the state in direction ``phi`` and of the target."""
    _check_grid(problem, state)
    gamma = state.gamma if gamma is None else gamma
    if math.isinf(gamma):
        raise ValueError("forward sensitivities need a finite gamma")
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    phq = mesh.interpolate(phi)
    k, nq = state.k, mesh.n_quad
    Bd = dev_basis(2)
    free = mesh.free_dofs()
    v = np.zeros((k + 1, mesh.n_dofs))
    eta = np.zeros((k + 1, nq, 3))
    q = np.zeros((k + 1, nq, 2))
    mu, mup = co["mu"], co["mu_prime"] * phq
    dJ = []
    q_prev = np.zeros((nq, 2))
    for j in range(1, k + 1):
        res = _step_local(problem, co, state, j, gamma)
        D = hessian_blocks(res.X, co["d"], gamma)
        gh = grad_h_gamma_array(res.X, gamma)
        r = 2.0 * mup[:, None] * (state.eps[j] @ Bd) - (co["h_prime"] * phq)[:, None] * state.p[j] \
            - (co["d_prime"] * phq)[:, None] * gh + np.einsum("qij,qj->qi", D, q_prev)
        Jr = np.einsum("qij,qj->qi", res.J, r)
        dC_eps = elasticity_mandel(mup, co["lambda_prime"] * phq, state.eps[j])
        rhs = body_force_vector(mesh, problem.fq[j], co["ell_prime"] * phq) \
            - integrate_stress(mesh, dC_eps) + integrate_stress(mesh, 2.0 * mu[:, None] * Jr @ Bd.T)
        K = assemble_tangent(mesh, res.tangent)
        v[j, free] = factorize(K[free][:, free])(rhs[free])
        e = mesh.strain(v[j]) @ Bd
        q[j] = np.einsum("qij,qj->qi", res.J, 2.0 * mu[:, None] * e) + Jr
        eta[j] = mesh.strain(v[j]) - q[j] @ Bd.T
        q_prev = q[j]
        F = problem.external_force(j, co["ell"])
        dJ.append(float(np.dot(mesh.quadrature()["w"], problem.body_functional(j, co["ell_prime"] * phq,
                                                          state.u[j] - state.u[j - 1]))))
        dJ.append(float(F @ (v[j] - v[j - 1])))
    dJ.append(float(modica_mortola_gradient(mesh, z, delta) @ phi))
    return Sensitivity(v, eta, q, math.fsum(dJ))


@dataclass
class ResidualReport:
    equilibrium2: dict
    optimality3: dict
    optimality4: dict

    def as_dict(self) -> dict:
        return {"equilibrium2": self.equilibrium2, "optimality3": self.optimality3,
                "optimality4": self.optimality4}


def _agg(mesh, per_step):
    w = mesh.quadrature()["w"]
    l1 = math.fsum(float(np.dot(w, a)) for a in per_step)
    linf = max((float(np.max(a)) for a in per_step), default=0.0)
    return {"L1": l1, "Linf": linf}


def optimality_residuals(problem: Problem, z: np.ndarray, state: EvolutionState,
                         adj: AdjointState, theta: float = 0.01) -> ResidualReport:
    """Pointwise residuals of the limiting complementarity conditions.

    * ``equilibrium2``: ``|rho_i . dp_i - d |dp_i||``
    * ``optimality3``: ``|pi_i . dp_i|``
    * ``optimality4``: ``|pbar_i - pbar_{i+1}|`` where ``|rho_i| <= (1 - theta) d``
    """
    mesh = problem.mesh
    co = qp_coefficients(mesh, problem.law, z)
    d = co["d"]
    e2, o3, o4 = [], [], []
    for i in range(1, state.k + 1):
        dp = state.p[i] - state.p[i - 1]
        rho, pi = adj.rho[i], adj.pi[i]
        e2.append(np.abs(np.einsum("qi,qi->q", rho, dp) - d * np.linalg.norm(dp, axis=1)))
        o3.append(np.abs(np.einsum("qi,qi->q", pi, dp)))
        inside = np.linalg.norm(rho, axis=1) <= (1.0 - theta) * d
        o4.append(np.where(inside, np.linalg.norm(adj.pbar[i] - adj.pbar[i + 1], axis=1), 0.0))
    return ResidualReport(_agg(mesh, e2), _agg(mesh, o3), _agg(mesh, o4))


def multiplier_from_hessian(problem: Problem, z: np.ndarray, state: EvolutionState,
                            adj: AdjointState, i: int) -> np.ndarray:
    """``d hess h_gamma(p_i - p_{i-1}) (pbar_i - pbar_{i+1})``."""
    co = qp_coefficients(problem.mesh, problem.law, z)
    D = hessian_blocks(state.p[i] - state.p[i - 1], co["d"], adj.gamma)
    return np.einsum("qij,qj->qi", D, adj.pbar[i] - adj.pbar[i + 1])
