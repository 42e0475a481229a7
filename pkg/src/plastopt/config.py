"""Run configuration: a single JSON document, validated in full before any work starts.

Schema (all keys optional; defaults reproduce the cantilever regression fixture)::

    {
      "mode": "forward" | "optimize" | "lab" | "check",
      "mesh": {"nx": 8, "ny": 4, "Lx": 2.0, "Ly": 1.0,
               "tags": [{"side": "left", "tag": "DIRICHLET"},
                        {"side": "right", "tag": "NEUMANN", "lo": 0.25, "hi": 0.75}]},
      "material": {"mu0": ..., "mu1": ..., "lambda0": ..., ..., "ell1": ...}
                  or {"ersatz": {"mu": 1, "lam": 1, "h": 0.1, "d": 0.05, "ell": 1, "contrast": 1e-3}},
      "loads": {"f": ["0", "0"], "g": ["0", "-0.04*t"], "w": ["0", "0"]},
      "grid": {"k": 4, "T": 1.0},
      "gamma": 100.0,              # number or "inf"
      "delta": 0.1,
      "z0": 0.5,                   # number or expression in x, y
      "optimizer": {...},          # fields of OptimizerConfig
      "study": {"name": "gamma_sweep", ...study parameters...},
      "output": "out",
      "seed": 0,
      "snapshot_every": 0
    }
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evolution import Problem, TimeGrid
from .fem import TagRule, build_rect_mesh, check_mesh
from .fixtures import REGRESSION_LOAD, cantilever_rules
from .loads import Expression, ExpressionError, LoadProgram
from .material import MaterialLaw
from .optimizer import OptimizerConfig

MODES = ("forward", "optimize", "lab", "check")
STUDIES = ("gamma_sweep", "timestep_sweep", "delta_sweep", "mm_profile", "adjoint_bounds",
           "lipschitz")

# violation codes
INITIAL_DATA = "initial-data"
COEFF_BOUNDS = "coefficient-bounds"

DEFAULTS = {
    "mode": "forward",
    "mesh": {"nx": 8, "ny": 4, "Lx": 2.0, "Ly": 1.0,
             "tags": [r.to_dict() for r in cantilever_rules()]},
    "material": {"ersatz": {}},
    "loads": {"f": ["0", "0"], "g": ["0", f"-{REGRESSION_LOAD!r}*t"], "w": ["0", "0"]},
    "grid": {"k": 4, "T": 1.0},
    "gamma": 100.0,
    "delta": 0.1,
    "z0": 0.5,
    "optimizer": {},
    "study": {"name": "gamma_sweep"},
    "output": "out",
    "seed": 0,
    "snapshot_every": 0,
}


class ConfigError(ValueError):
    """Parse or validation failure carrying every violation found."""

    def __init__(self, violations: list):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


@dataclass
class RunConfig:
    mode: str
    mesh: dict
    material: dict
    loads: dict
    grid: dict
    gamma: float
    delta: float
    z0: object
    optimizer: dict
    study: dict
    output: str
    seed: int
    snapshot_every: int
    raw: dict = field(default_factory=dict, repr=False)

    def build_law(self) -> MaterialLaw:
        m = self.material
        if "ersatz" in m:
            return MaterialLaw.ersatz(**m["ersatz"])
        return MaterialLaw(**m)

    def build_problem(self, k: int | None = None) -> Problem:
        mesh = build_rect_mesh(self.mesh["nx"], self.mesh["ny"], self.mesh["Lx"], self.mesh["Ly"],
                               [TagRule.from_dict(t) for t in self.mesh["tags"]])
        T = float(self.grid["T"])
        loads = LoadProgram(f=self.loads["f"], g=self.loads["g"], w=self.loads["w"], T=T)
        return Problem(mesh, self.build_law(), loads, TimeGrid(int(k or self.grid["k"]), T))

    def initial_design(self, mesh) -> np.ndarray:
        if isinstance(self.z0, (int, float)):
            return np.full(mesh.n_nodes, float(self.z0))
        return np.array(Expression(str(self.z0))(mesh.nodes[:, 0], mesh.nodes[:, 1], 0.0), dtype=float)

    def optimizer_config(self) -> OptimizerConfig:
        opts = {"delta": self.delta, "gamma": self.gamma, **self.optimizer}
        return OptimizerConfig(**opts)

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def _merge(defaults: dict, user: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict) and key not in (
                "material", "study", "optimizer"):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _number(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError
    return float(v)


def validate(data: dict) -> tuple[dict, list]:
    """Normalised copy of ``data`` and the list of all violations."""
    bad = []
    unknown = set(data) - set(DEFAULTS)
    for key in sorted(unknown):
        bad.append(f"unknown top-level field {key!r}")
    cfg = _merge(DEFAULTS, {k: v for k, v in data.items() if k in DEFAULTS})

    if cfg["mode"] not in MODES:
        bad.append(f"mode: {cfg['mode']!r} is not one of {MODES}")

    mesh = cfg["mesh"]
    for key in ("nx", "ny"):
        if not isinstance(mesh.get(key), int) or isinstance(mesh.get(key), bool) or mesh[key] < 1:
            bad.append(f"mesh.{key}: must be a positive integer")
    for key in ("Lx", "Ly"):
        try:
            if not _number(mesh.get(key)) > 0:
                bad.append(f"mesh.{key}: must be positive")
        except TypeError:
            bad.append(f"mesh.{key}: must be a number")
    rules = []
    for j, t in enumerate(mesh.get("tags", [])):
        try:
            rules.append(TagRule.from_dict(t))
        except (KeyError, ValueError, AttributeError, TypeError) as exc:
            bad.append(f"mesh.tags[{j}]: {exc}")
    if not any(r.tag == "DIRICHLET" for r in rules):
        bad.append("mesh.tags: the Dirichlet boundary needs at least one facet")

    mat = cfg["material"]
    if "ersatz" in mat:
        extra = set(mat) - {"ersatz"}
        if extra:
            bad.append(f"material: unexpected fields {sorted(extra)} next to 'ersatz'")
        params = mat["ersatz"] if isinstance(mat["ersatz"], dict) else {}
        allowed = {"mu", "lam", "h", "d", "ell", "contrast"}
        for key in sorted(set(params) - allowed):
            bad.append(f"material.ersatz: unknown field {key!r}")
        for key in sorted(set(params) & allowed):
            v = params[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                bad.append(f"[{COEFF_BOUNDS}] material.ersatz.{key}: must be a finite positive number, "
                           f"got {v!r}")
        if not any(COEFF_BOUNDS in b for b in bad):
            try:
                MaterialLaw.ersatz(**{k: params[k] for k in set(params) & allowed})
            except (TypeError, ValueError) as exc:
                bad.append(f"[{COEFF_BOUNDS}] material: {exc}")
    else:
        names = [f"{c}{e}" for c in ("mu", "lambda", "h", "d", "ell") for e in (0, 1)]
        for key in sorted(set(mat) - set(names)):
            bad.append(f"material: unknown field {key!r}")
        for key in names:
            v = mat.get(key)
            if v is None:
                bad.append(f"material.{key}: missing")
            elif isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                bad.append(f"[{COEFF_BOUNDS}] material.{key}: coefficients must be finite and "
                           f"strictly positive (lower bound alpha > 0), got {v!r}")
        if not any("material" in b for b in bad):
            try:
                MaterialLaw(**{k: mat[k] for k in names})
            except (TypeError, ValueError) as exc:
                bad.append(f"[{COEFF_BOUNDS}] material: {exc}")

    grid = cfg["grid"]
    if "nodes" in grid or "times" in grid:
        bad.append("grid: only uniform time grids are supported (give k and T)")
    k = grid.get("k")
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        bad.append("grid.k: must be a positive integer")
    try:
        T = _number(grid.get("T"))
        if not (T > 0 and math.isfinite(T)):
            bad.append("grid.T: must be positive and finite")
    except TypeError:
        bad.append("grid.T: must be a number")
        T = None

    loads = cfg["loads"]
    progs = {}
    for name in ("f", "g", "w"):
        comp = loads.get(name, ["0", "0"])
        if not isinstance(comp, (list, tuple)) or len(comp) != 2:
            bad.append(f"loads.{name}: must be a list of two expressions")
            continue
        try:
            progs[name] = [str(c) for c in comp]
            for c in progs[name]:
                Expression(c)
        except ExpressionError as exc:
            bad.append(f"loads.{name}: {exc}")
            progs.pop(name, None)
    for key in sorted(set(loads) - {"f", "g", "w"}):
        bad.append(f"loads: unknown field {key!r}")
    if len(progs) == 3 and T is not None and T > 0 and not any(b.startswith("mesh.") for b in bad):
        try:
            m = build_rect_mesh(mesh["nx"], mesh["ny"], mesh["Lx"], mesh["Ly"], rules)
            bad.extend(f"mesh: {v}" for v in check_mesh(m))
            lp = LoadProgram(**progs, T=T)
            pts = np.vstack([m.nodes, m.quadrature()["x"]])
            for name in lp.initial_violations(pts):
                bad.append(f"[{INITIAL_DATA}] loads.{name}: must vanish at t = 0 (f(0) = g(0) = w(0) = 0)")
        except ValueError as exc:
            bad.append(f"mesh: {exc}")

    for key in ("gamma", "delta"):
        try:
            v = _number(cfg[key])
            cfg[key] = v
            if not v > 0:
                bad.append(f"{key}: must be positive")
            if key == "delta" and not math.isfinite(v):
                bad.append("delta: must be finite")
        except TypeError:
            bad.append(f"{key}: must be a number" + (" or 'inf'" if key == "gamma" else ""))

    z0 = cfg["z0"]
    if isinstance(z0, bool) or not isinstance(z0, (int, float, str)):
        bad.append("z0: must be a number or an expression in x, y")
    elif isinstance(z0, str):
        try:
            Expression(z0)
        except ExpressionError as exc:
            bad.append(f"z0: {exc}")

    opt = cfg["optimizer"]
    if not isinstance(opt, dict):
        bad.append("optimizer: must be an object")
    else:
        known = set(OptimizerConfig.__dataclass_fields__)
        for key in sorted(set(opt) - known):
            bad.append(f"optimizer: unknown field {key!r}")
        if "schedule" in opt:
            try:
                opt["schedule"] = [_number(g) for g in opt["schedule"]]
            except TypeError:
                bad.append("optimizer.schedule: entries must be numbers or 'inf'")
        try:
            kw = {kk: v for kk, v in opt.items() if kk in known}
            kw.setdefault("delta", cfg["delta"] if isinstance(cfg["delta"], float) else 0.1)
            g = cfg["gamma"] if isinstance(cfg["gamma"], float) else 100.0
            kw.setdefault("gamma", g)
            if math.isinf(kw["gamma"]):
                kw["gamma"] = 1.0
            OptimizerConfig(**kw)
        except (ValueError, TypeError) as exc:
            bad.append(f"optimizer: {exc}")

    study = cfg["study"]
    if not isinstance(study, dict) or study.get("name") not in STUDIES:
        bad.append(f"study.name: must be one of {STUDIES}")

    for key in ("seed", "snapshot_every"):
        v = cfg[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            bad.append(f"{key}: must be a non-negative integer")
    if not isinstance(cfg["output"], str) or not cfg["output"]:
        bad.append("output: must be a non-empty path")
    return cfg, bad


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a JSON object"])
    cfg, bad = validate(data)
    if bad:
        raise ConfigError(bad)
    return RunConfig(**{k: cfg[k] for k in DEFAULTS}, raw=cfg)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return config_from_dict(data)
