import math

import numpy as np
import pytest

from plastopt.adjoint import objective
from plastopt.evolution import Problem, TimeGrid, solve_evolution
from plastopt.fem import DIRICHLET, NEUMANN, TagRule, build_rect_mesh, modica_mortola
from plastopt.fixtures import regression_problem
from plastopt.loads import LoadProgram
from plastopt.material import MaterialLaw
from plastopt.optimizer import (OptimizerConfig, cross_check_exact, gamma_continuation,
                                optimize)


def test_config_validation():
    with pytest.raises(ValueError, match="c1"):
        OptimizerConfig(c1=1.5)
    with pytest.raises(ValueError, match="increasing"):
        OptimizerConfig(schedule=(100, 10))
    cfg = OptimizerConfig(schedule=[1, 10])
    assert cfg.schedule == (1.0, 10.0)
    assert OptimizerConfig(**cfg.to_dict()) == cfg


def test_rejects_nonfinite_start():
    pb = regression_problem(nx=2, ny=2, k=1)
    z = np.full(pb.mesh.n_nodes, np.nan)
    with pytest.raises(ValueError):
        optimize(z, pb, OptimizerConfig(max_iters=1))


def test_mm_only_dynamics():
    pb = regression_problem(nx=6, ny=3, k=1, load=0.0)
    rng = np.random.default_rng(0)
    z0 = 0.5 + 0.05 * rng.standard_normal(pb.mesh.n_nodes)
    res = optimize(z0, pb, OptimizerConfig(delta=0.1, max_iters=200, gtol=1e-8))
    J = res.trace.column("J")
    assert np.all(np.diff(J) <= 0)
    assert res.converged
    assert res.J == pytest.approx(modica_mortola(pb.mesh, res.z, 0.1), abs=1e-14)
    # ends near a well of the double-well potential
    assert res.J < 0.1 * J[0]
    assert np.all((np.abs(res.z) < 0.05) | (np.abs(res.z - 1) < 0.05))


def test_armijo_condition_holds():
    pb = regression_problem(nx=4, ny=2, k=2)
    z0 = np.full(pb.mesh.n_nodes, 0.5)
    cfg = OptimizerConfig(max_iters=8, gtol=0.0)
    res = optimize(z0, pb, cfg)
    rows = res.trace.rows
    for prev, cur in zip(rows, rows[1:]):
        assert cur.J <= prev.J - cfg.c1 * cur.step * prev.grad_norm ** 2 + 1e-15


def _single_element(d):
    law = MaterialLaw(0.1, 1, 0.1, 1, 0.1, 1, d, d, 0.1, 1)
    mesh = build_rect_mesh(1, 1, 1.0, 1.0, [TagRule("left", DIRICHLET), TagRule("right", NEUMANN)])
    loads = LoadProgram(f=("0", "-t"), g=("0", "-0.3*t"), w=("0", "0"), T=1.0)
    return Problem(mesh, law, loads, TimeGrid(1, 1.0))


def test_brute_force_constant_scan_elastic():
    pb = _single_element(1e6)
    delta = 1.0
    ones = np.ones(pb.mesh.n_nodes)
    scan = np.linspace(0, 1, 1001)
    Js = [objective(pb, s * ones, solve_evolution(pb, s * ones, 100.0), delta).total for s in scan]
    i = int(np.argmin(Js))
    res = optimize(0.5 * ones, pb, OptimizerConfig(delta=delta, gamma=100.0, gtol=1e-8, max_iters=100),
                   basis=ones[:, None])
    assert res.converged
    assert abs(res.z[0] - scan[i]) <= 1e-3
    assert res.J <= Js[i] + 1e-12


def test_bounds_and_continuation():
    pb = regression_problem(nx=4, ny=2, k=2)
    z0 = np.full(pb.mesh.n_nodes, 0.5)
    cfg = OptimizerConfig(max_iters=40, gtol=1e-6, schedule=(10.0, 100.0, 1000.0))
    stages = gamma_continuation(z0, pb, cfg)
    assert [s.gamma for s in stages] == [10.0, 100.0, 1000.0]
    zf = stages[-1].result.z
    assert zf.min() >= -1e-3 and zf.max() <= 1 + 1e-3
    changes = [s.z_change_h1 for s in stages[1:]]
    assert changes[1] <= changes[0]
    exact = cross_check_exact(pb, zf, cfg.delta)
    assert exact == pytest.approx(stages[-1].result.J, rel=0.01)


def test_single_stage_is_plain_optimize():
    pb = regression_problem(nx=3, ny=2, k=1)
    z0 = np.full(pb.mesh.n_nodes, 0.5)
    cfg = OptimizerConfig(max_iters=5, gamma=50.0)
    a = gamma_continuation(z0, pb, cfg, schedule=(50.0,))[0].result
    b = optimize(z0, pb, cfg)
    assert np.array_equal(a.z, b.z) and a.J == b.J


def test_clamped_stays_in_box():
    pb = regression_problem(nx=4, ny=2, k=1)
    z0 = np.full(pb.mesh.n_nodes, 0.9)
    res = optimize(z0, pb, OptimizerConfig(max_iters=10, clamp=True, step0=50.0))
    assert res.z.min() >= 0.0 and res.z.max() <= 1.0
    assert np.all(np.diff(res.trace.column("J")) <= 0)


def test_volume_penalty_pulls_toward_target():
    pb = regression_problem(nx=4, ny=2, k=1)
    z0 = np.full(pb.mesh.n_nodes, 0.9)
    free = optimize(z0, pb, OptimizerConfig(max_iters=15))
    pen = optimize(z0, pb, OptimizerConfig(max_iters=15, volume_penalty=10.0, volume_target=0.3))
    assert pen.z.mean() < free.z.mean()
