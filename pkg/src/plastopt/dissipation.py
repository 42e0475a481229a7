"""Dissipation density ``|Q|`` and its smooth surrogate ``h_gamma``.

``gamma`` may be ``math.inf``, which selects the exact density.  The
array versions take deviatoric coordinates of shape ``(..., m)``.
"""
from __future__ import annotations

import math

import numpy as np

from .tensor import DevTensor, frobenius_norm


def _check_gamma(gamma: float) -> None:
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def h_gamma_array(Q: np.ndarray, gamma: float) -> np.ndarray:
    _check_gamma(gamma)
    r = np.linalg.norm(Q, axis=-1)
    if math.isinf(gamma):
        return r
    c = 1.0 / gamma
    # sqrt(r^2 + c^2) - c without cancellation for small r
    return r * r / (np.sqrt(r * r + c * c) + c)


def grad_h_gamma_array(Q: np.ndarray, gamma: float) -> np.ndarray:
    _check_gamma(gamma)
    if math.isinf(gamma):
        raise ValueError("the exact density is not differentiable; use a finite gamma")
    c = 1.0 / gamma
    s = np.sqrt(np.sum(Q * Q, axis=-1) + c * c)
    return Q / s[..., None]


def hess_h_gamma_apply_array(Q: np.ndarray, gamma: float, V: np.ndarray) -> np.ndarray:
    _check_gamma(gamma)
    if math.isinf(gamma):
        raise ValueError("the exact density is not differentiable; use a finite gamma")
    c = 1.0 / gamma
    s2 = np.sum(Q * Q, axis=-1) + c * c
    s = np.sqrt(s2)
    qv = np.sum(Q * V, axis=-1)
    return (V - Q * (qv / s2)[..., None]) / s[..., None]


def h_gamma(Q: DevTensor, gamma: float) -> float:
    return float(h_gamma_array(Q.coords(), gamma))


def grad_h_gamma(Q: DevTensor, gamma: float) -> DevTensor:
    return DevTensor.from_coords(grad_h_gamma_array(Q.coords(), gamma), Q.n)


def hess_h_gamma_apply(Q: DevTensor, gamma: float, V: DevTensor) -> DevTensor:
    return DevTensor.from_coords(hess_h_gamma_apply_array(Q.coords(), gamma, V.coords()), Q.n)


def abs_density(Q: DevTensor) -> float:
    return frobenius_norm(Q)


def subdiff_contains(Q_dot: DevTensor, R: DevTensor, z: float, law, tol: float = 1e-9) -> bool:
    """Whether ``R`` lies in ``d(z) * subdifferential(|.|)(Q_dot)``."""
    d = float(law.coeff("d", z))
    q = Q_dot.coords()
    r = R.coords()
    nq = np.linalg.norm(q)
    scale = max(1.0, d)
    if nq <= tol * scale:
        return bool(np.linalg.norm(r) <= d + tol * scale)
    return bool(np.linalg.norm(r - d * q / nq) <= tol * scale)


def dissipation_functional(d_q: np.ndarray, increment_q: np.ndarray, weights: np.ndarray,
                           gamma: float) -> float:
    """Quadrature of ``int d(z) h_gamma(q) dx`` (``|q|`` for infinite gamma).

    ``d_q`` holds the yield stress at quadrature points, ``increment_q`` the
    deviatoric coordinates of the plastic increment there.
    """
    if not (d_q.shape[0] == increment_q.shape[0] == weights.shape[0]):
        raise ValueError("quadrature fields do not live on the same mesh")
    return float(np.sum(weights * d_q * h_gamma_array(increment_q, gamma)))
