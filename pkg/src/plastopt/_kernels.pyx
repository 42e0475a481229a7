# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise return map; same algorithm as ``_kernels_py``."""
import numpy as np
from libc.math cimport sqrt, fabs, isinf

from ._kernels_py import NewtonDivergence

cdef enum:
    MAX_ITER = 60

cdef double TOL_LOCAL = 1e-12


cdef inline double _radius(double t, double a, double d, double c, bint exact, int *ok) nogil:
    cdef double r, s, s2, phi, dphi, step, c2
    cdef int it
    ok[0] = 1
    r = t - d
    if r < 0.0:
        r = 0.0
    r = r / a
    if exact or t <= 0.0:
        return r
    c2 = c * c
    for it in range(MAX_ITER):
        s2 = r * r + c2
        s = sqrt(s2)
        phi = a * r + d * r / s - t
        dphi = a + d * c2 / (s2 * s)
        step = -phi / dphi
        r = r + step
        if r < 0.0:
            r = 0.0
        if fabs(step) <= 1e-15 * (r + c) or phi == 0.0:
            return r
    s = sqrt(r * r + c2)
    if fabs(a * r + d * r / s - t) > TOL_LOCAL * (1.0 + t):
        ok[0] = 0
    return r


def return_map(T, a, d, double gamma):
    cdef double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t N = Tv.shape[0]
    cdef Py_ssize_t m = Tv.shape[1]
    X = np.zeros((N, m))
    J = np.zeros((N, m, m))
    cdef double[:, ::1] Xv = X
    cdef double[:, :, ::1] Jv = J
    cdef bint exact = isinf(gamma)
    cdef double c = 0.0 if exact else 1.0 / gamma
    cdef Py_ssize_t i, j, k
    cdef double t, r, s, lam_n, lam_t, inv_t, nj
    cdef int ok = 1
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(N):
            t = 0.0
            for j in range(m):
                t += Tv[i, j] * Tv[i, j]
            t = sqrt(t)
            r = _radius(t, av[i], dv[i], c, exact, &ok)
            if not ok and bad < 0:
                bad = i
            inv_t = 1.0 / t if t > 0.0 else 0.0
            if exact:
                if t > dv[i]:
                    lam_n = 1.0 / av[i]
                    lam_t = (1.0 - dv[i] * inv_t) / av[i]
                else:
                    lam_n = 0.0
                    lam_t = 0.0
            else:
                s = sqrt(r * r + c * c)
                lam_n = 1.0 / (av[i] + dv[i] * c * c / (s * s * s))
                lam_t = 1.0 / (av[i] + dv[i] / s)
            for j in range(m):
                nj = Tv[i, j] * inv_t
                Xv[i, j] = r * nj
                for k in range(m):
                    Jv[i, j, k] = (lam_n - lam_t) * nj * Tv[i, k] * inv_t
                Jv[i, j, j] += lam_t
    if bad >= 0:
        raise NewtonDivergence(f"local Newton did not converge at point {bad}", point=int(bad))
    return X, J
