"""Pure numpy implementation of the pointwise return map.

Solves, independently at every point, for the plastic increment ``X`` in

    a X + d grad h_gamma(X) = T          (gamma finite)
    a X + d subdiff|X|     contains T    (gamma infinite)

and returns ``X`` together with the Jacobian ``dX/dT``.  Both problems are
radial: ``X = r T/|T|`` where ``r >= 0`` solves the scalar equation
``a r + d r / sqrt(r^2 + 1/gamma^2) = |T|``.  That function is increasing
and concave in ``r``, so Newton started left of the root climbs to it
monotonically.
"""
from __future__ import annotations

import math

import numpy as np

MAX_ITER = 60
TOL_LOCAL = 1e-12


class NewtonDivergence(RuntimeError):
    """A pointwise or global Newton iteration failed to converge."""

    def __init__(self, message, point=None, history=None):
        super().__init__(message)
        self.point = point
        self.history = history


def scalar_radius(t, a, d, gamma):
    """Solve ``a r + d r/sqrt(r^2+c^2) = t`` for ``r >= 0`` (``c = 1/gamma``)."""
    t = np.asarray(t, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), t.shape)
    d = np.broadcast_to(np.asarray(d, dtype=float), t.shape)
    if math.isinf(gamma):
        return np.maximum(t - d, 0.0) / a
    c = 1.0 / gamma
    c2 = c * c
    r = np.maximum(t - d, 0.0) / a
    active = t > 0.0
    for _ in range(MAX_ITER):
        if not active.any():
            break
        ra, aa, da, ta = r[active], a[active], d[active], t[active]
        s2 = ra * ra + c2
        s = np.sqrt(s2)
        phi = aa * ra + da * ra / s - ta
        dphi = aa + da * c2 / (s2 * s)
        step = -phi / dphi
        rn = np.maximum(ra + step, 0.0)
        r[active] = rn
        done = (np.abs(step) <= 1e-15 * (rn + c)) | (phi == 0.0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if active.any():
        ra = r[active]
        s = np.sqrt(ra * ra + c2)
        res = np.abs(a[active] * ra + d[active] * ra / s - t[active])
        bad = res > TOL_LOCAL * (1.0 + t[active])
        if bad.any():
            first = int(np.flatnonzero(active)[np.argmax(bad)])
            raise NewtonDivergence(f"local Newton did not converge at point {first}", point=first)
    return r


def return_map(T, a, d, gamma):
    """Batched return map.

    Parameters
    ----------
    T : ndarray, shape (N, m)
        Shifted trial stresses in deviatoric coordinates.
    a, d : ndarray, shape (N,)
        ``2 mu + h`` and the yield stress at each point.
    gamma : float
        Regularisation parameter, ``inf`` for the exact problem.

    Returns
    -------
    X : ndarray, shape (N, m)
    J : ndarray, shape (N, m, m)
        ``dX/dT``; for finite gamma this is the inverse of
        ``a I + d hess h_gamma(X)``.
    """
    T = np.ascontiguousarray(T, dtype=float)
    a = np.ascontiguousarray(a, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    N, m = T.shape
    t = np.sqrt(np.einsum("ij,ij->i", T, T))
    safe = np.where(t > 0.0, t, 1.0)
    n = T / safe[:, None]
    r = scalar_radius(t, a, d, gamma)
    X = r[:, None] * n
    eye = np.eye(m)
    nn = n[:, :, None] * n[:, None, :]
    if math.isinf(gamma):
        plastic = t > d
        lam_n = np.where(plastic, 1.0 / a, 0.0)
        lam_t = np.where(plastic, (1.0 - d / safe) / a, 0.0)
    else:
        c = 1.0 / gamma
        s = np.sqrt(r * r + c * c)
        lam_n = 1.0 / (a + d * c * c / (s * s * s))
        lam_t = 1.0 / (a + d / s)
    J = lam_t[:, None, None] * eye + (lam_n - lam_t)[:, None, None] * nn
    return X, J
