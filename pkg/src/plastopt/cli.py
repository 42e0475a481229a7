"""Command line entry point: ``plastopt {forward,optimize,lab,check} --config FILE``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._backend import BACKEND
from .config import MODES, ConfigError, RunConfig, config_from_dict, parse_config
from .evolution import (dissipation_increments, energy, energy_inequality_slack, energy_scale,
                        solve_evolution, stability_violations)
from .io import (cell_average, sha256_file, sha256_text, write_csv, write_json, write_vtk)

log = logging.getLogger("plastopt")

OUT_ENV = "PLASTOPT_OUT"
SLACK_TOL = 1e-8


def _norms(a):
    return np.linalg.norm(np.asarray(a), axis=-1)


class _Run:
    """Collects artifacts, wall times and contract outcomes for one invocation."""

    def __init__(self, out: Path):
        self.out = out
        self.artifacts = {}
        self.timings = {}
        self.contracts = {}
        self.summary = {}

    def add(self, name: str, path: Path):
        self.artifacts[name] = path

    def timed(self, label, fn, *args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        self.timings[label] = time.perf_counter() - t0
        return res


def _run_forward(cfg: RunConfig, run: _Run, threads):
    problem = cfg.build_problem()
    mesh = problem.mesh
    z = cfg.initial_design(mesh)
    state = run.timed("solve", solve_evolution, problem, z, cfg.gamma)
    k = state.k
    slack = energy_inequality_slack(problem, z, state)
    scale = energy_scale(problem, z, state)
    diss = dissipation_increments(problem, z, state)
    rows = [[i, float(problem.grid.nodes[i]), energy(problem, z, state, i),
             float(diss[i - 1]) if i else 0.0, float(slack[i - 1]) if i else 0.0]
            for i in range(k + 1)]
    run.add("trajectory", write_csv(run.out / "trajectory.csv",
                                    ["i", "t", "energy", "dissipation_increment", "slack"], rows))
    u = state.u[-1].reshape(-1, 2)
    run.add("state_vtk", write_vtk(
        run.out / "state_final.vtk", mesh, point_data={"u": u, "z": z},
        cell_data={"p_norm": cell_average(mesh, _norms(state.p[-1])),
                   "sigma_norm": cell_average(mesh, _norms(state.sigma[-1]))}))
    worst = 0.0
    stable = True
    for i in range(1, k + 1):
        rep = stability_violations(problem, z, state, i, seed=cfg.seed + i)
        worst = max(worst, rep["worst"])
        stable &= bool(rep["ok"])
    run.summary.update(k=k, gamma=cfg.gamma, final_energy=rows[-1][2],
                       total_dissipation=float(np.sum(diss)), min_slack=float(np.min(slack)) if k else 0.0,
                       energy_scale=scale, max_displacement=float(np.max(np.abs(state.u[-1]))),
                       newton_iterations=[int(n) for n in state.iterations],
                       stability_worst=worst)
    run.contracts["stability"] = stable
    run.contracts["energy_slack"] = bool(np.all(slack >= -SLACK_TOL * max(scale, 1e-300)))


def _run_optimize(cfg: RunConfig, run: _Run, threads):
    from .optimizer import gamma_continuation

    problem = cfg.build_problem()
    mesh = problem.mesh
    ocfg = cfg.optimizer_config()
    z0 = cfg.initial_design(mesh)
    stages = run.timed("optimize", gamma_continuation, z0, problem, ocfg)
    trace = stages[-1].result.trace
    rows = [[getattr(r, c) for c in trace.header()] for r in trace.rows]
    run.add("trace", write_csv(run.out / "trace.csv", trace.header(), rows))
    final = stages[-1].result
    run.add("z_vtk", write_vtk(
        run.out / "z_final.vtk", mesh,
        point_data={"z": final.z, "u": final.state.u[-1].reshape(-1, 2)},
        cell_data={"p_norm": cell_average(mesh, _norms(final.state.p[-1])),
                   "sigma_norm": cell_average(mesh, _norms(final.state.sigma[-1]))}))
    if cfg.snapshot_every > 0:
        for n, st in enumerate(stages):
            if n % cfg.snapshot_every == 0 or n == len(stages) - 1:
                run.add(f"z_stage_{n}", write_vtk(run.out / f"z_stage_{n}.vtk", mesh,
                                                  point_data={"z": st.result.z}))
    res_cols = [(name, norm) for name in sorted(stages[-1].residuals)
                for norm in sorted(stages[-1].residuals[name])]
    stage_rows = [[s.gamma, s.result.J, s.result.grad_norm, float(s.result.converged), s.z_change_h1,
                   *(s.residuals[a][b] for a, b in res_cols)] for s in stages]
    run.add("stages", write_csv(run.out / "stages.csv",
                                ["gamma", "J", "grad_norm", "converged", "z_change_h1",
                                 *(f"{a}_{b}" for a, b in res_cols)], stage_rows))
    J = trace.column("J")
    run.summary.update(J=final.J, grad_norm=final.grad_norm, converged=final.converged,
                       iterations=len(trace.rows), message=trace.message,
                       stages=[s.gamma for s in stages])
    run.contracts["converged"] = bool(all(s.result.converged for s in stages))
    # J may jump between stages since the state depends on gamma
    gam = trace.column("gamma")
    same = gam[1:] == gam[:-1]
    run.contracts["monotone_J"] = bool(np.all(J[1:][same] <= J[:-1][same] + 1e-12 * np.abs(J[:-1][same])))


def _study_params(cfg: RunConfig):
    s = dict(cfg.study)
    s.pop("name", None)
    return s


def _run_lab(cfg: RunConfig, run: _Run, threads):
    from . import lab

    name = cfg.study["name"]
    p = _study_params(cfg)
    if name == "mm_profile":
        table = run.timed(name, lab.run_mm_profile_check, p.get("deltas", [0.05, 0.02, 0.01]),
                          int(p.get("n_cells", 200)), float(p.get("L", 1.0)))
        run.contracts["profile_constant"] = bool(table.summary["max_error_small_delta"] <= 0.02)
    else:
        problem = cfg.build_problem()
        z = cfg.initial_design(problem.mesh)
        if name == "gamma_sweep":
            table = run.timed(name, lab.run_gamma_sweep, problem, z,
                              p.get("gammas", [10.0, 100.0, 1000.0, 10000.0]), threads)
            run.contracts["monotone"] = table.summary["monotone_decreasing"]
        elif name == "timestep_sweep":
            table = run.timed(name, lab.run_timestep_sweep, problem, z, p.get("ks", [4, 8, 16]),
                              p.get("gamma", math.inf), threads)
            run.contracts["cauchy_decay"] = table.summary["monotone_decreasing"]
        elif name == "delta_sweep":
            table = run.timed(name, lab.run_delta_sweep, problem, z, p.get("deltas", [0.2, 0.1, 0.05]),
                              cfg.optimizer_config(), threads)
            run.contracts["width_decreasing"] = table.summary["width_decreasing"]
        elif name == "adjoint_bounds":
            table = run.timed(name, lab.run_adjoint_bound_study, problem, z, p.get("ks", [4, 8]),
                              p.get("gammas", [10.0, 100.0, 1000.0]), threads)
            run.contracts["bounded"] = bool(table.summary["ratio_max_min"] < 2.0)
        else:
            table = run.timed(name, lab.run_lipschitz_in_z_study, problem, z, cfg.gamma,
                              p.get("sizes", [1e-1, 1e-2, 1e-3, 1e-4]), cfg.seed)
            run.contracts["bounded_ratio"] = bool(np.isfinite(table.summary["max_ratio"]))
    run.add("table", write_csv(run.out / f"{name}.csv", table.columns, table.rows))
    run.add("study_summary", write_json(run.out / f"{name}_summary.json",
                                        {"study": name, "columns": table.columns, **table.summary}))
    run.summary.update(study=name, rows=len(table.rows), **table.summary)


def _run_check(cfg: RunConfig, run: _Run, threads):
    from .adjoint import reduced_gradient, solve_adjoint, objective
    from .checks import return_map_gap, sample_local_laws
    from .fixtures import regression_design, regression_problem

    law = cfg.build_law()
    viol = 0
    for z in (0.0, 0.5, 1.0):
        for g in (10.0, math.inf):
            viol += run.timed(f"local_{z}_{g}", sample_local_laws, law, z, g, 2000, cfg.seed)["violations"]
    run.contracts["local_laws"] = viol == 0
    gap = return_map_gap(law, n=200, seed=cfg.seed)
    run.contracts["return_map"] = gap <= 1e-6
    problem = regression_problem(nx=2, ny=2, k=2)
    z = regression_design(problem.mesh)
    state = solve_evolution(problem, z, 100.0, tol=1e-13)
    adj = solve_adjoint(problem, z, state)
    G, _ = reduced_gradient(problem, z, state, adj, 0.1)
    phi = np.random.default_rng(cfg.seed).standard_normal(problem.mesh.n_nodes)
    eps = 1e-5
    jp = objective(problem, z + eps * phi, solve_evolution(problem, z + eps * phi, 100.0, tol=1e-13), 0.1).total
    jm = objective(problem, z - eps * phi, solve_evolution(problem, z - eps * phi, 100.0, tol=1e-13), 0.1).total
    fd = (jp - jm) / (2 * eps)
    rel = abs(fd - G @ phi) / max(abs(fd), 1e-300)
    run.contracts["gradient_fd"] = rel <= 1e-4
    slack = energy_inequality_slack(problem, z, state)
    run.contracts["energy_slack"] = bool(np.all(slack >= -SLACK_TOL * energy_scale(problem, z, state)))
    run.summary.update(local_law_violations=viol, return_map_gap=gap, gradient_rel_error=rel)


RUNNERS = {"forward": _run_forward, "optimize": _run_optimize, "lab": _run_lab, "check": _run_check}


def _versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "plastopt": __version__, "backend": BACKEND}


def run(cfg: RunConfig, out: str | os.PathLike | None = None,
        threads: int | None = None) -> tuple[int, dict]:
    """Execute ``cfg.mode``; returns the exit status and the manifest written to ``out``."""
    out = Path(out or os.environ.get(OUT_ENV) or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    r = _Run(out)
    t0 = time.perf_counter()
    status = 0
    error = None
    try:
        RUNNERS[cfg.mode](cfg, r, threads)
        r.contracts = {k: bool(v) for k, v in r.contracts.items()}
        if not all(r.contracts.values()):
            status = 1
    except Exception as exc:
        status = 2
        error = {"type": type(exc).__name__, "message": str(exc),
                 "traceback": traceback.format_exc().splitlines()}
        log.error("%s: %s", type(exc).__name__, exc)
    r.timings["total"] = time.perf_counter() - t0
    config_path = out / "config.json"
    config_path.write_text(json.dumps(cfg.raw, indent=2, sort_keys=True) + "\n")
    r.add("config", config_path)
    manifest = {
        "mode": cfg.mode,
        "input_sha256": sha256_text(cfg.canonical()),
        "versions": _versions(),
        "threads": threads or os.cpu_count(),
        "wall_time_s": r.timings,
        "artifacts": {k: {"path": p.name, "sha256": sha256_file(p)} for k, p in r.artifacts.items()},
        "contracts": r.contracts,
        "summary": r.summary,
        "exit_status": status,
    }
    if error is not None:
        manifest["error"] = error
    write_json(out / "manifest.json", manifest)
    return status, manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plastopt", description=__doc__)
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", help="JSON configuration (defaults if omitted)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker cap for sweeps")
        sp.add_argument("-v", "--verbose", action="store_true")
        if mode == "lab":
            sp.add_argument("--study", help="override study.name")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        data = {}
        if args.config:
            data = json.loads(parse_config(args.config).canonical())
        data["mode"] = args.mode
        if getattr(args, "study", None):
            data["study"] = {**data.get("study", {}), "name": args.study}
        cfg = config_from_dict(data)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "violations": exc.violations}, indent=2),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    status, manifest = run(cfg, args.out, args.threads)
    print(json.dumps({"exit_status": status, "out": str(Path(args.out or cfg.output)),
                      "contracts": manifest["contracts"]}))
    return status


if __name__ == "__main__":
    sys.exit(main())
