"""Canonical benchmark problems."""
from __future__ import annotations

import numpy as np

from .evolution import Problem, TimeGrid
from .fem import DIRICHLET, NEUMANN, TagRule, build_rect_mesh
from .loads import LoadProgram
from .material import MaterialLaw

REGRESSION_LOAD = 0.04


def cantilever_rules(Lx: float = 2.0, Ly: float = 1.0, patch: float = 0.25):
    """Clamped left edge, traction patch of half-width ``patch Ly`` centred on the right edge."""
    return (TagRule("left", DIRICHLET),
            TagRule("right", NEUMANN, 0.5 * Ly - patch * Ly, 0.5 * Ly + patch * Ly))


def regression_problem(nx: int = 4, ny: int = 4, k: int = 3, load: float = REGRESSION_LOAD,
                       law: MaterialLaw | None = None, Lx: float = 2.0, Ly: float = 1.0,
                       T: float = 1.0) -> Problem:
    """Cantilever strip under a ramped downward tip traction ``g(t) = t g1``."""
    mesh = build_rect_mesh(nx, ny, Lx, Ly, cantilever_rules(Lx, Ly))
    loads = LoadProgram(f=("0", "0"), g=("0", f"-{load!r} * t / {T!r}"), w=("0", "0"), T=T)
    return Problem(mesh, law or MaterialLaw.ersatz(), loads, TimeGrid(k, T))


def regression_design(mesh, amplitude: float = 0.3) -> np.ndarray:
    """Smooth non-constant phase field used for derivative checks."""
    x, y = mesh.nodes[:, 0] / mesh.Lx, mesh.nodes[:, 1] / mesh.Ly
    return 0.6 + amplitude * np.cos(np.pi * x) * np.cos(np.pi * y)
