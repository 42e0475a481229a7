"""Sampled verification of the pointwise laws and of the discrete state.

These are used by the ``check`` subcommand and by the test suite.
"""
from __future__ import annotations

import math

import numpy as np

from . import _backend
from .dissipation import grad_h_gamma_array
from .local_return import constitutive_update, local_constants
from .material import MaterialLaw

REL = 1e-10


def _random_dev(rng, n, scale):
    mags = 10.0 ** rng.uniform(-3, 1, size=n) * scale
    q = rng.standard_normal((n, 2))
    return q * (mags / np.linalg.norm(q, axis=1))[:, None]


def _F(Q, P, a, d, gamma):
    return a[:, None] * Q + d[:, None] * grad_h_gamma_array(Q - P, gamma)


def sample_local_laws(law: MaterialLaw, z: float, gamma: float, n: int = 10_000,
                      seed: int = 0) -> dict:
    """Count violations of the Lipschitz and monotonicity bounds at one ``(z, gamma)``.

    F-bounds are only sampled for finite ``gamma``.  Constants are the
    analytic ones from :func:`local_constants` evaluated at this ``z``.
    """
    rng = np.random.default_rng(seed)
    c = local_constants(law, gamma, 2, z=z)
    mu, lam, h, d = (float(law.coeff(k, z)) for k in ("mu", "lambda", "h", "d"))
    scale = max(d / (2 * mu + h), 1e-3)
    ones = np.ones(n)
    a, dd = (2 * mu + h) * ones, d * ones
    out = {"z": z, "gamma": gamma, "n": n}
    P = _random_dev(rng, n, scale)
    if not math.isinf(gamma):
        Q1 = P + _random_dev(rng, n, scale)
        Q2 = Q1 + _random_dev(rng, n, scale)
        F1, F2 = _F(Q1, P, a, dd, gamma), _F(Q2, P, a, dd, gamma)
        dQ = np.linalg.norm(Q1 - Q2, axis=1)
        dF = np.linalg.norm(F1 - F2, axis=1)
        inner = np.einsum("ij,ij->i", F1 - F2, Q1 - Q2)
        out["F_lipschitz"] = int(np.sum(dF > c["F_lipschitz"] * dQ * (1 + REL)))
        out["F_monotone"] = int(np.sum(inner < c["F_monotone"] * dQ ** 2 * (1 - REL)))
        R1 = _random_dev(rng, n, scale * (2 * mu + h)) * 5
        R2 = R1 + _random_dev(rng, n, scale * (2 * mu + h))
        X1, _ = _backend.return_map(R1 - a[:, None] * P, a, dd, gamma)
        X2, _ = _backend.return_map(R2 - a[:, None] * P, a, dd, gamma)
        dX = np.linalg.norm(X1 - X2, axis=1)
        dR = np.linalg.norm(R1 - R2, axis=1)
        out["Finv_lipschitz"] = int(np.sum(dX > c["Finv_lipschitz"] * dR * (1 + REL) + 1e-15 * scale))
        out["measured_F_monotone"] = float(np.min(inner / dQ ** 2))
    eps_scale = scale * 3
    E1 = rng.standard_normal((n, 3)) * 10.0 ** rng.uniform(-2, 1, size=(n, 1)) * eps_scale
    E2 = E1 + rng.standard_normal((n, 3)) * 10.0 ** rng.uniform(-3, 0, size=(n, 1)) * eps_scale
    co = {"mu": mu * ones, "lambda": lam * ones, "h": h * ones, "d": d * ones}
    s1 = constitutive_update(E1, co, P, gamma, tangent=False).sigma
    s2 = constitutive_update(E2, co, P, gamma, tangent=False).sigma
    dE = np.linalg.norm(E1 - E2, axis=1)
    ds = np.linalg.norm(s1 - s2, axis=1)
    inner = np.einsum("ij,ij->i", s1 - s2, E1 - E2)
    out["b_lipschitz"] = int(np.sum(ds > c["b_lipschitz"] * dE * (1 + REL)))
    out["b_monotone"] = int(np.sum(inner < c["b_monotone"] * dE ** 2 * (1 - REL)))
    out["measured_b_lipschitz"] = float(np.max(ds / dE))
    out["measured_b_monotone"] = float(np.min(inner / dE ** 2))
    out["violations"] = sum(v for key, v in out.items()
                            if key in ("F_lipschitz", "F_monotone", "Finv_lipschitz",
                                       "b_lipschitz", "b_monotone"))
    return out


def return_map_gap(law: MaterialLaw, n: int = 1000, gamma: float = 1e8, seed: int = 0) -> float:
    """Max unit-normalised distance between ``F^{-1}`` at ``gamma`` and the exact return."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(0, 1, n)
    co = law.evaluate(z)
    a = 2 * co["mu"] + co["h"]
    P = _random_dev(rng, n, 1.0) * (co["d"] / a)[:, None]
    T = _random_dev(rng, n, 1.0) * 3 * co["d"][:, None]
    Xg, _ = _backend.return_map(T, a, co["d"], gamma)
    Xe, _ = _backend.return_map(T, a, co["d"], math.inf)
    unit = np.maximum(np.linalg.norm(P + Xe, axis=1), 1.0)
    return float(np.max(np.linalg.norm(Xg - Xe, axis=1) / unit))
