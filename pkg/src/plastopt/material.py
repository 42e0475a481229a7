"""Phase-dependent material coefficients.

Every coefficient ``c(z)`` ramps between its two endpoint values with the
cubic smoothstep ``s(t) = 3t^2 - 2t^3`` on ``[0, 1]`` and is constant
outside, which makes it C^1 on the real line with vanishing slope at both
endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .tensor import SymTensor, DevTensor, mandel_trace_vector

COEFFICIENTS = ("mu", "lambda", "h", "d", "ell")


def smoothstep(z):
    t = np.clip(z, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smoothstep_prime(z):
    z = np.asarray(z, dtype=float)
    inside = (z > 0.0) & (z < 1.0)
    return np.where(inside, 6.0 * z * (1.0 - z), 0.0)


@dataclass(frozen=True)
class MaterialLaw:
    """Endpoint values of shear modulus, Lame parameter, hardening modulus,
    yield stress and density at ``z = 0`` (weak phase) and ``z = 1``."""

    mu0: float
    mu1: float
    lambda0: float
    lambda1: float
    h0: float
    h1: float
    d0: float
    d1: float
    ell0: float
    ell1: float

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0.0:
                out.append(f"{f.name} must be finite and strictly positive (got {v})")
        return out

    @classmethod
    def ersatz(cls, mu=1.0, lam=1.0, h=0.1, d=0.05, ell=1.0, contrast=1e-3) -> "MaterialLaw":
        """Strong phase values with a weak phase scaled by ``contrast``."""
        return cls(contrast * mu, mu, contrast * lam, lam, contrast * h, h,
                   contrast * d, d, contrast * ell, ell)

    def endpoints(self, name: str) -> tuple[float, float]:
        key = "lambda" if name == "lam" else name
        if key not in COEFFICIENTS:
            raise KeyError(f"unknown coefficient {name!r}; expected one of {COEFFICIENTS}")
        return getattr(self, key + "0"), getattr(self, key + "1")

    def coeff(self, name: str, z):
        c0, c1 = self.endpoints(name)
        return c0 + (c1 - c0) * smoothstep(z)

    def coeff_prime(self, name: str, z):
        c0, c1 = self.endpoints(name)
        return (c1 - c0) * smoothstep_prime(z)

    def lipschitz(self, name: str) -> float:
        """Lipschitz modulus of ``coeff(name, .)`` (max slope of the ramp is 3/2)."""
        c0, c1 = self.endpoints(name)
        return 1.5 * abs(c1 - c0)

    def bounds(self, name: str) -> tuple[float, float]:
        c0, c1 = self.endpoints(name)
        return min(c0, c1), max(c0, c1)

    @property
    def alpha(self) -> float:
        return min(min(self.endpoints(k)) for k in ("mu", "lambda", "h", "d"))

    @property
    def beta(self) -> float:
        return max(max(self.endpoints(k)) for k in ("mu", "lambda", "h", "d"))

    def elasticity_bounds(self, n: int = 2) -> tuple[float, float]:
        """Constants with ``a|E|^2 <= C(z)E.E <= b|E|^2`` for every z."""
        return 2.0 * self.bounds("mu")[0], 2.0 * self.bounds("mu")[1] + n * self.bounds("lambda")[1]

    def hardening_bounds(self) -> tuple[float, float]:
        return self.bounds("h")

    def evaluate(self, z) -> dict:
        """All five coefficients and their derivatives at ``z`` (arrays)."""
        z = np.asarray(z, dtype=float)
        s, sp = smoothstep(z), smoothstep_prime(z)
        out = {}
        for key in COEFFICIENTS:
            c0, c1 = self.endpoints(key)
            out[key] = c0 + (c1 - c0) * s
            out[key + "_prime"] = (c1 - c0) * sp
        return out

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def elasticity_apply(law: MaterialLaw, z: float, E: SymTensor) -> SymTensor:
    """``2 mu(z) E + lambda(z) tr(E) I``."""
    mu, lam = law.coeff("mu", z), law.coeff("lambda", z)
    M = E.matrix()
    return SymTensor.from_matrix(2.0 * mu * M + lam * np.trace(M) * np.eye(E.n))


def hardening_apply(law: MaterialLaw, z: float, Q: DevTensor) -> DevTensor:
    return DevTensor.from_matrix(law.coeff("h", z) * Q.matrix())


def elasticity_mandel(mu, lam, E):
    """Vectorised elasticity on Mandel arrays ``E`` of shape ``(..., s)``."""
    n = 2 if E.shape[-1] == 3 else 3
    one = mandel_trace_vector(n)
    tr = E[..., :n].sum(axis=-1)
    return 2.0 * np.asarray(mu)[..., None] * E + (np.asarray(lam) * tr)[..., None] * one
