"""Time-dependent load data and a small closed expression language.

Expressions are strings in the variables ``x, y, t`` built from numbers,
``+ - * / **``, unary minus, parentheses and the functions listed in
``FUNCTIONS``.  They are parsed with :mod:`ast` and evaluated on numpy
arrays; anything outside the grammar is rejected at parse time.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def ramp(t, t0=0.0, t1=1.0):
    """Piecewise linear: 0 before ``t0``, 1 after ``t1``."""
    return np.clip((np.asarray(t, dtype=float) - t0) / (t1 - t0), 0.0, 1.0)


def step(t, t0=0.0):
    return np.where(np.asarray(t, dtype=float) >= t0, 1.0, 0.0)


FUNCTIONS: dict[str, Callable] = {
    "min": np.minimum,
    "max": np.maximum,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "ramp": ramp,
    "step": step,
}
CONSTANTS = {"pi": math.pi}
VARIABLES = ("x", "y", "t")

_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class ExpressionError(ValueError):
    pass


def _check(node, src):
    if isinstance(node, ast.Expression):
        return _check(node.body, src)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"{src!r}: only numeric literals are allowed")
        return
    if isinstance(node, ast.Name):
        if node.id not in VARIABLES and node.id not in CONSTANTS:
            raise ExpressionError(f"{src!r}: unknown name {node.id!r}")
        return
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"{src!r}: operator {type(node.op).__name__} not allowed")
        _check(node.left, src)
        _check(node.right, src)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _check(node.operand, src)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"{src!r}: unknown function")
        if node.keywords:
            raise ExpressionError(f"{src!r}: keyword arguments not allowed")
        for a in node.args:
            _check(a, src)
        return
    raise ExpressionError(f"{src!r}: unsupported syntax {type(node).__name__}")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    return FUNCTIONS[node.func.id](*[_eval(a, env) for a in node.args])


@dataclass(frozen=True)
class Expression:
    source: str

    def __post_init__(self):
        try:
            tree = ast.parse(str(self.source).strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"{self.source!r}: {exc.msg}") from None
        _check(tree, self.source)
        object.__setattr__(self, "_tree", tree)

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            v = _eval(self._tree, {"x": x, "y": y, "t": float(t)})
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(x, y).shape)


class VectorExpression:
    """Two component expressions evaluated to shape ``(N, 2)``."""

    def __init__(self, components: Sequence[str | float]):
        if len(components) != 2:
            raise ExpressionError("vector loads need exactly two components")
        self.sources = [str(c) for c in components]
        self.components = [Expression(s) for s in self.sources]

    def __call__(self, x, y, t):
        return np.stack([c(x, y, t) for c in self.components], axis=-1)

    def __repr__(self):
        return f"VectorExpression({self.sources})"


ZERO = ("0", "0")


@dataclass
class LoadProgram:
    """Body force ``f``, traction ``g`` and Dirichlet lift ``w`` as functions of ``(x, y, t)``.

    Each of ``f, g, w`` is a callable returning an ``(N, 2)`` array; the
    constructor also accepts a pair of expression strings.
    """

    f: Callable = ZERO
    g: Callable = ZERO
    w: Callable = ZERO
    T: float = 1.0

    def __post_init__(self):
        for name in ("f", "g", "w"):
            val = getattr(self, name)
            if not callable(val):
                setattr(self, name, VectorExpression(val))
        if not self.T > 0:
            raise ValueError("final time must be positive")

    def initial_violations(self, points: np.ndarray, tol: float = 1e-14) -> list[str]:
        """Names of the loads that do not vanish at ``t = 0`` on ``points``."""
        bad = []
        for name in ("f", "g", "w"):
            v = np.asarray(getattr(self, name)(points[:, 0], points[:, 1], 0.0))
            if np.any(~np.isfinite(v)) or np.max(np.abs(v), initial=0.0) > tol:
                bad.append(name)
        return bad

    def sources(self) -> dict:
        out = {}
        for name in ("f", "g", "w"):
            val = getattr(self, name)
            out[name] = val.sources if isinstance(val, VectorExpression) else repr(val)
        out["T"] = self.T
        return out

    @classmethod
    def zero(cls, T: float = 1.0) -> "LoadProgram":
        return cls(T=T)
