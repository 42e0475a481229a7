"""Pointwise plastic solvers.

For a phase value ``z``, regularisation ``gamma`` and previous plastic
strain ``P`` the plastic strain ``p`` at a point solves

    (2 mu + h) p + d grad h_gamma(p - P) = dev(C E)

i.e. ``F(p) = dev(C E)`` with ``F(Q) = (2mu + h) Q + d grad h_gamma(Q - P)``.
Eliminating ``p`` gives the condensed stress ``b(E) = C (E - p(E))``.  For
``gamma = inf`` the same inclusion is solved in closed form by the radial
return.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from ._kernels_py import NewtonDivergence
from .dissipation import grad_h_gamma_array, h_gamma_array
from .material import MaterialLaw, elasticity_mandel
from .tensor import DevTensor, SymTensor, dev_basis, mandel_trace_vector

__all__ = [
    "LocalPlasticContext", "F_apply", "F_inverse", "b_apply", "b_tangent_apply",
    "radial_return", "ConstitutiveResult", "constitutive_update", "local_constants",
    "NewtonDivergence",
]


@dataclass(frozen=True)
class LocalPlasticContext:
    z: float
    gamma: float
    P: DevTensor
    law: MaterialLaw

    def __post_init__(self):
        if not (self.gamma > 0.0):
            raise ValueError("gamma must be positive")
        if not np.isfinite(self.z):
            raise ValueError("z must be finite")

    @property
    def n(self) -> int:
        return self.P.n

    def moduli(self):
        law, z = self.law, self.z
        return (float(law.coeff("mu", z)), float(law.coeff("lambda", z)),
                float(law.coeff("h", z)), float(law.coeff("d", z)))


def _require_finite(ctx):
    if math.isinf(ctx.gamma):
        raise ValueError("F is only defined for finite gamma; use radial_return")


def F_apply(ctx: LocalPlasticContext, Q: DevTensor) -> DevTensor:
    _require_finite(ctx)
    mu, _, h, d = ctx.moduli()
    q, P = Q.coords(), ctx.P.coords()
    out = (2.0 * mu + h) * q + d * grad_h_gamma_array(q - P, ctx.gamma)
    return DevTensor.from_coords(out, ctx.n)


def F_inverse(ctx: LocalPlasticContext, R: DevTensor) -> DevTensor:
    _require_finite(ctx)
    mu, _, h, d = ctx.moduli()
    a = 2.0 * mu + h
    P = ctx.P.coords()
    T = (R.coords() - a * P)[None, :]
    X, _ = _backend.return_map(T, np.array([a]), np.array([d]), ctx.gamma)
    return DevTensor.from_coords(P + X[0], ctx.n)


def b_apply(ctx: LocalPlasticContext, E: SymTensor) -> SymTensor:
    res = _single(ctx, E)
    return SymTensor.from_mandel(res.sigma[0])


def b_tangent_apply(ctx: LocalPlasticContext, E: SymTensor, V: SymTensor) -> SymTensor:
    res = _single(ctx, E)
    return SymTensor.from_mandel(res.tangent[0] @ V.mandel())


def radial_return(z: float, law: MaterialLaw, P: DevTensor, E: SymTensor):
    """Exact incremental update; returns ``(p_new, sigma)``."""
    ctx = LocalPlasticContext(z, math.inf, P, law)
    res = _single(ctx, E)
    return DevTensor.from_coords(res.p[0], P.n), SymTensor.from_mandel(res.sigma[0])


def _single(ctx, E):
    if E.n != ctx.n:
        raise ValueError("dimension mismatch between strain and plastic strain")
    mu, lam, h, d = ctx.moduli()
    coeffs = {"mu": np.array([mu]), "lambda": np.array([lam]), "h": np.array([h]), "d": np.array([d])}
    return constitutive_update(E.mandel()[None, :], coeffs, ctx.P.coords()[None, :], ctx.gamma)


class ConstitutiveResult(NamedTuple):
    p: np.ndarray        # (N, m) plastic strain, deviatoric coordinates
    X: np.ndarray        # (N, m) plastic increment p - P
    J: np.ndarray        # (N, m, m) dX/dT
    sigma: np.ndarray    # (N, s) stress, Mandel
    tangent: np.ndarray  # (N, s, s) consistent tangent dsigma/dE
    psi: np.ndarray      # (N,) incremental energy density


def constitutive_update(E, coeffs, P, gamma, tangent=True) -> ConstitutiveResult:
    """Vectorised condensed stress at many points.

    ``E`` holds Mandel strains ``(N, s)``, ``P`` previous plastic strains in
    deviatoric coordinates ``(N, m)``, ``coeffs`` maps ``mu, lambda, h, d``
    to arrays of shape ``(N,)``.
    """
    mu, lam, h, d = coeffs["mu"], coeffs["lambda"], coeffs["h"], coeffs["d"]
    s = E.shape[-1]
    n = 2 if s == 3 else 3
    B = dev_basis(n)
    a = 2.0 * mu + h
    e = E @ B
    T = 2.0 * mu[:, None] * e - a[:, None] * P
    X, J = _backend.return_map(T, a, d, gamma)
    p = P + X
    Eel = E - p @ B.T
    sigma = elasticity_mandel(mu, lam, Eel)
    psi = 0.5 * np.einsum("ij,ij->i", sigma, Eel) + 0.5 * h * np.einsum("ij,ij->i", p, p) \
        + d * h_gamma_array(X, gamma)
    if tangent:
        one = mandel_trace_vector(n)
        C = 2.0 * mu[:, None, None] * np.eye(s) + lam[:, None, None] * np.outer(one, one)
        BJB = np.einsum("ab,nbc,dc->nad", B, J, B)
        Ct = C - (4.0 * mu * mu)[:, None, None] * BJB
    else:
        Ct = None
    return ConstitutiveResult(p, X, J, sigma, Ct, psi)


def local_constants(law: MaterialLaw, gamma: float, n: int = 2, z: float | None = None) -> dict:
    """Analytic constants of the pointwise laws.

    Uniform in ``z`` by default; with ``z`` given they are the sharper
    values of the coefficients at that phase.

    ``F_lipschitz``    |F(Q1) - F(Q2)| <= C |Q1 - Q2| (uses |hess h_gamma| <= 2 gamma)
    ``F_monotone``     (F(Q1) - F(Q2)).(Q1 - Q2) >= C |Q1 - Q2|^2
    ``Finv_lipschitz`` |F^-1(R1) - F^-1(R2)| <= C |R1 - R2|
    ``b_lipschitz``, ``b_monotone`` same for the condensed stress.
    """
    zs = np.linspace(0.0, 1.0, 2001) if z is None else np.array([float(z)])
    mu_z, h_z = law.coeff("mu", zs), law.coeff("h", zs)
    lam_z, d_z = law.coeff("lambda", zs), law.coeff("d", zs)
    if z is None:
        mu_min, mu_max = law.bounds("mu")
        lam_max = law.bounds("lambda")[1]
        h_min, h_max = law.bounds("h")
        d_max = law.bounds("d")[1]
    else:
        mu_min = mu_max = float(mu_z[0])
        lam_max, d_max = float(lam_z[0]), float(d_z[0])
        h_min = h_max = float(h_z[0])
    a_min = 2.0 * mu_min + h_min
    # deviatoric eigenvalues of the tangent lie in [2 mu h/(2 mu + h), 2 mu]
    b_mono = float(min(np.min(2.0 * mu_z * h_z / (2.0 * mu_z + h_z)), 2.0 * mu_min))
    out = {
        "F_monotone": a_min,
        "Finv_lipschitz": 1.0 / a_min,
        "b_lipschitz": 2.0 * mu_max + n * max(lam_max, 0.0),
        "b_monotone": b_mono,
        "C1": a_min,
        "C2": max(2.0 * law.lipschitz("mu") + law.lipschitz("h"), law.lipschitz("d")),
        "C3": 2.0 * d_max,
    }
    if not math.isinf(gamma):
        out["F_lipschitz"] = 2.0 * mu_max + h_max + 2.0 * gamma * d_max
    return out
