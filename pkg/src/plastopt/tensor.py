"""Symmetric and deviatoric second-order tensors in dimension 2 or 3.

Two layers live here.  The value types :class:`SymTensor` and
:class:`DevTensor` store the upper triangle of a symmetric matrix and are
convenient for pointwise checks.  The finite-element code works on stacked
arrays instead, using orthonormal Mandel coordinates for symmetric tensors
(``n=2``: ``[xx, yy, sqrt2*xy]``) and an orthonormal basis of the
deviatoric subspace (2 components for ``n=2``, 5 for ``n=3``).  In both
coordinate systems the Frobenius contraction is the Euclidean dot product.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = np.sqrt(2.0)
DEV_TOL = 1e-12


def sym_size(n: int) -> int:
    return n * (n + 1) // 2


def dev_size(n: int) -> int:
    return sym_size(n) - 1


def _check_dim(n: int) -> None:
    if n not in (2, 3):
        raise ValueError(f"spatial dimension must be 2 or 3, got {n}")


@lru_cache(maxsize=None)
def _triu_index(n: int):
    return np.triu_indices(n)


@lru_cache(maxsize=None)
def mandel_trace_vector(n: int) -> np.ndarray:
    """Coordinates of the identity tensor in Mandel form."""
    _check_dim(n)
    v = np.zeros(sym_size(n))
    v[:n] = 1.0
    v.flags.writeable = False
    return v


@lru_cache(maxsize=None)
def dev_basis(n: int) -> np.ndarray:
    """Columns form an orthonormal basis of the deviatoric subspace (Mandel)."""
    _check_dim(n)
    if n == 2:
        B = np.array([[1.0 / SQRT2, 0.0],
                      [-1.0 / SQRT2, 0.0],
                      [0.0, 1.0]])
    else:
        B = np.zeros((6, 5))
        B[:3, 0] = np.array([1.0, -1.0, 0.0]) / SQRT2
        B[:3, 1] = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
        B[3, 2] = B[4, 3] = B[5, 4] = 1.0
    B.flags.writeable = False
    return B


def matrix_to_mandel(M: np.ndarray) -> np.ndarray:
    """Map ``(..., n, n)`` symmetric matrices to Mandel coordinates."""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 2:
        return np.stack([M[..., 0, 0], M[..., 1, 1], SQRT2 * M[..., 0, 1]], axis=-1)
    _check_dim(n)
    return np.stack([M[..., 0, 0], M[..., 1, 1], M[..., 2, 2],
                     SQRT2 * M[..., 1, 2], SQRT2 * M[..., 0, 2], SQRT2 * M[..., 0, 1]], axis=-1)


def mandel_to_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    s = m.shape[-1]
    if s == 3:
        out = np.empty(m.shape[:-1] + (2, 2))
        out[..., 0, 0] = m[..., 0]
        out[..., 1, 1] = m[..., 1]
        out[..., 0, 1] = out[..., 1, 0] = m[..., 2] / SQRT2
        return out
    if s != 6:
        raise ValueError(f"Mandel vector must have 3 or 6 components, got {s}")
    out = np.empty(m.shape[:-1] + (3, 3))
    out[..., 0, 0] = m[..., 0]
    out[..., 1, 1] = m[..., 1]
    out[..., 2, 2] = m[..., 2]
    out[..., 1, 2] = out[..., 2, 1] = m[..., 3] / SQRT2
    out[..., 0, 2] = out[..., 2, 0] = m[..., 4] / SQRT2
    out[..., 0, 1] = out[..., 1, 0] = m[..., 5] / SQRT2
    return out


def mandel_dim(sym_components: int) -> int:
    return {3: 2, 6: 3}[sym_components]


def dev_coords(m: np.ndarray) -> np.ndarray:
    """Deviatoric coordinates of the deviatoric part of Mandel tensors ``m``."""
    n = mandel_dim(m.shape[-1])
    return m @ dev_basis(n)


def dev_to_mandel(q: np.ndarray, n: int) -> np.ndarray:
    return q @ dev_basis(n).T


def mandel_dev(m: np.ndarray) -> np.ndarray:
    """Deviatoric projection in Mandel coordinates."""
    n = mandel_dim(m.shape[-1])
    tr = m[..., :n].sum(axis=-1, keepdims=True)
    return m - tr * mandel_trace_vector(n) / n


def mandel_trace(m: np.ndarray) -> np.ndarray:
    n = mandel_dim(m.shape[-1])
    return m[..., :n].sum(axis=-1)


@dataclass(frozen=True, eq=False)
class SymTensor:
    """Symmetric ``n x n`` tensor stored as its upper triangle (row-major)."""

    n: int
    entries: tuple

    def __post_init__(self):
        _check_dim(self.n)
        vals = tuple(float(v) for v in self.entries)
        if len(vals) != sym_size(self.n):
            raise ValueError(f"expected {sym_size(self.n)} entries for n={self.n}, got {len(vals)}")
        if not all(np.isfinite(vals)):
            raise ValueError("tensor entries must be finite")
        object.__setattr__(self, "entries", vals)

    @classmethod
    def from_matrix(cls, M) -> "SymTensor":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(M).max())):
            raise ValueError("matrix is not symmetric; use symmetrize()")
        n = M.shape[0]
        return cls(n, tuple(M[_triu_index(n)]))

    @classmethod
    def zeros(cls, n: int) -> "SymTensor":
        return cls(n, (0.0,) * sym_size(n))

    @classmethod
    def identity(cls, n: int) -> "SymTensor":
        return cls.from_matrix(np.eye(n))

    @classmethod
    def from_mandel(cls, m) -> "SymTensor":
        return cls.from_matrix(mandel_to_matrix(m))

    def matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        M[_triu_index(self.n)] = self.entries
        return M + np.triu(M, 1).T

    def mandel(self) -> np.ndarray:
        return matrix_to_mandel(self.matrix())

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix()))

    def _coerce(self, other) -> "SymTensor":
        if not isinstance(other, SymTensor):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return SymTensor.from_matrix(self.matrix() + other.matrix())

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return SymTensor.from_matrix(self.matrix() - other.matrix())

    def __mul__(self, scalar):
        return type(self).from_matrix(float(scalar) * self.matrix())

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, entries={self.entries})"


class DevTensor(SymTensor):
    """Symmetric tensor with vanishing trace.

    Inputs with a small nonzero trace are re-projected onto the deviatoric
    subspace instead of being rejected.
    """

    def __post_init__(self):
        super().__post_init__()
        M = self.matrix()
        tr = np.trace(M)
        if tr != 0.0:
            M = M - tr / self.n * np.eye(self.n)
            object.__setattr__(self, "entries", tuple(M[_triu_index(self.n)]))

    @classmethod
    def from_matrix(cls, M) -> "DevTensor":
        M = np.asarray(M, dtype=float)
        M = 0.5 * (M + M.T)
        n = M.shape[0]
        return cls(n, tuple(M[_triu_index(n)]))

    @classmethod
    def from_coords(cls, q, n: int) -> "DevTensor":
        return cls.from_matrix(mandel_to_matrix(dev_to_mandel(np.asarray(q, float), n)))

    def coords(self) -> np.ndarray:
        return dev_coords(self.mandel())


def dev_project(M: SymTensor) -> DevTensor:
    """Return ``M - tr(M)/n I``."""
    A = M.matrix()
    return DevTensor.from_matrix(A - np.trace(A) / M.n * np.eye(M.n))


def contract(A: SymTensor, B: SymTensor) -> float:
    """Full contraction ``A_ij B_ij``."""
    if A.n != B.n:
        raise ValueError(f"dimension mismatch: {A.n} vs {B.n}")
    return float(np.sum(A.matrix() * B.matrix()))


def frobenius_norm(A: SymTensor) -> float:
    return float(np.sqrt(contract(A, A)))


def symmetrize(G) -> SymTensor:
    """Symmetric part ``(G + G^T)/2`` of a full ``n x n`` gradient."""
    G = np.asarray(G, dtype=float)
    return SymTensor.from_matrix(0.5 * (G + G.T))
