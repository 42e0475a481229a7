import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq, minimize_scalar

from plastopt import _backend
from plastopt.checks import return_map_gap, sample_local_laws
from plastopt.local_return import (LocalPlasticContext, F_apply, F_inverse, b_apply,
                                   b_tangent_apply, constitutive_update, local_constants,
                                   radial_return)
from plastopt.material import MaterialLaw
from plastopt.tensor import DevTensor, SymTensor, dev_project

E_DIR = np.array([1.0, 0.0])


def dev(v):
    return DevTensor.from_coords(np.asarray(v, dtype=float), 2)


def ctx(law, gamma=1.0, P=(0.0, 0.0), z=0.5):
    return LocalPlasticContext(z, gamma, dev(P), law)


def test_F_apply_examples(unit_law):
    c = ctx(unit_law)
    assert np.allclose(F_apply(c, dev([0, 0])).coords(), 0.0)
    out = F_apply(c, dev(0.75 * E_DIR)).coords()
    assert np.allclose(out, 2.85 * E_DIR)
    P = [0.2, -0.1]
    assert np.allclose(F_apply(ctx(unit_law, P=P), dev(P)).coords(), 3.0 * np.array(P))


def test_F_inverse_example_against_bisection(unit_law):
    r = brentq(lambda r: 3 * r + r / math.sqrt(r * r + 1) - 2.85, 0.0, 2.85, xtol=1e-15)
    assert r == pytest.approx(0.75, abs=1e-12)
    out = F_inverse(ctx(unit_law), dev(2.85 * E_DIR)).coords()
    assert np.allclose(out, r * E_DIR, atol=1e-10)
    assert np.allclose(F_inverse(ctx(unit_law), dev([0, 0])).coords(), 0.0)


def test_F_requires_finite_gamma(unit_law):
    with pytest.raises(ValueError):
        F_apply(ctx(unit_law, gamma=math.inf), dev([1, 0]))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (2,), elements=st.floats(-5, 5)), arrays(float, (2,), elements=st.floats(-1, 1)),
       st.sampled_from([0.1, 1.0, 100.0, 1e5]), st.floats(0, 1))
def test_F_round_trip(q, P, gamma, z):
    c = ctx(MaterialLaw.ersatz(), gamma=gamma, P=P, z=z)
    back = F_inverse(c, F_apply(c, dev(q))).coords()
    assert np.allclose(back, q, atol=1e-10 * (1 + np.abs(q).max()))


def test_elastic_step_keeps_P(unit_law):
    P = dev([0.05, 0.0])
    E = SymTensor.from_matrix(np.array([[0.3, 0.1], [0.1, 0.2]]))
    p, _ = radial_return(0.5, unit_law, P, E)
    assert np.allclose(p.coords(), P.coords())


def test_one_third_example(unit_law):
    # dev(C E) = 2 e  with mu = 1  =>  dev E = e
    E = SymTensor.from_mandel(dev(E_DIR).mandel())
    p, _ = radial_return(0.5, unit_law, dev([0, 0]), E)
    assert np.linalg.norm(p.coords()) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def energy(r):
        return 0.5 * 2.0 * (1.0 - r) ** 2 + 0.5 * r * r + r
    brute = minimize_scalar(energy, bounds=(0, 2), method="bounded", options={"xatol": 1e-12}).x
    grid = np.linspace(0, 2, 20001)
    assert brute == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert grid[np.argmin(energy(grid))] == pytest.approx(1.0 / 3.0, abs=1e-4)


def test_spherical_strain_is_elastic(ersatz):
    E = SymTensor.from_matrix(0.7 * np.eye(2))
    c = ctx(ersatz, gamma=math.inf, z=0.8)
    sig = b_apply(c, E).matrix()
    mu, lam = ersatz.coeff("mu", 0.8), ersatz.coeff("lambda", 0.8)
    assert np.allclose(sig, (2 * mu + 2 * lam) * 0.7 * np.eye(2))
    assert np.allclose(b_apply(c, SymTensor.zeros(2)).matrix(), 0.0)


@pytest.mark.parametrize("gamma", [1.0, 50.0, math.inf])
def test_tangent_matches_fd(ersatz, rng, gamma):
    for _ in range(20):
        c = ctx(ersatz, gamma=gamma, P=rng.normal(0, 0.02, 2), z=rng.uniform())
        E = SymTensor.from_matrix((lambda A: A + A.T)(rng.normal(0, 0.1, (2, 2))))
        V = SymTensor.from_matrix((lambda A: A + A.T)(rng.normal(0, 1, (2, 2))))
        t = 1e-6
        fd = (b_apply(c, E + V * t).mandel() - b_apply(c, E - V * t).mandel()) / (2 * t)
        assert np.allclose(b_tangent_apply(c, E, V).mandel(), fd, rtol=1e-5, atol=1e-7)


def test_tangent_symmetric(ersatz, rng):
    n = 500
    co = ersatz.evaluate(rng.uniform(0, 1, n))
    E = rng.normal(0, 0.2, (n, 3))
    res = constitutive_update(E, co, rng.normal(0, 0.02, (n, 2)), 30.0)
    assert np.allclose(res.tangent, np.swapaxes(res.tangent, 1, 2), atol=1e-13)


def test_stress_is_energy_gradient(ersatz, rng):
    n = 50
    co = ersatz.evaluate(rng.uniform(0, 1, n))
    E = rng.normal(0, 0.2, (n, 3))
    P = rng.normal(0, 0.02, (n, 2))
    res = constitutive_update(E, co, P, 20.0, tangent=False)
    t = 1e-6
    for j in range(3):
        dE = np.zeros(3)
        dE[j] = t
        fd = (constitutive_update(E + dE, co, P, 20.0, False).psi
              - constitutive_update(E - dE, co, P, 20.0, False).psi) / (2 * t)
        assert np.allclose(res.sigma[:, j], fd, rtol=1e-6, atol=1e-9)


def test_return_map_gap_small_at_large_gamma(ersatz):
    assert return_map_gap(ersatz, n=500, gamma=1e8) <= 1e-6


@pytest.mark.parametrize("z", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("gamma", [10.0, math.inf])
def test_local_laws_hold(ersatz, z, gamma):
    assert sample_local_laws(ersatz, z, gamma, n=2000, seed=3)["violations"] == 0


def test_constants_pointwise_sharper(ersatz):
    uni = local_constants(ersatz, 10.0)
    for z in (0.0, 0.5, 1.0):
        loc = local_constants(ersatz, 10.0, z=z)
        assert loc["F_monotone"] >= uni["F_monotone"]
        assert loc["F_lipschitz"] <= uni["F_lipschitz"]
        assert loc["b_lipschitz"] <= uni["b_lipschitz"]


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), arrays(float, (2,), elements=st.floats(-3, 3)))
def test_cross_parameter_bound(z1, z2, R):
    # |F_z1^-1(R) - F_z2^-1(R)| <= C2 |z1 - z2| (|R| + C3) / C1^2, with P = 0
    law = MaterialLaw.ersatz()
    g = 10.0
    c = local_constants(law, g)
    X1 = F_inverse(ctx(law, gamma=g, z=z1), dev(R)).coords()
    X2 = F_inverse(ctx(law, gamma=g, z=z2), dev(R)).coords()
    bound = c["C2"] * abs(z1 - z2) * (np.linalg.norm(R) + c["C3"]) / c["C1"] ** 2
    assert np.linalg.norm(X1 - X2) <= bound + 1e-12


def test_backends_agree(rng):
    from plastopt import _kernels_py
    if _backend.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    from plastopt import _kernels
    n = 2000
    T = rng.standard_normal((n, 2)) * 10.0 ** rng.uniform(-3, 1, (n, 1))
    a, d = rng.uniform(0.1, 3, n), rng.uniform(0.01, 1, n)
    for g in (1.0, 1e4, math.inf):
        Xp, Jp = _kernels_py.return_map(T, a, d, g)
        Xc, Jc = _kernels.return_map(T, a, d, g)
        assert np.allclose(Xp, Xc, rtol=1e-12, atol=1e-14)
        assert np.allclose(Jp, Jc, rtol=1e-10, atol=1e-13)


def test_python_backend_forced(tmp_path):
    import subprocess
    import sys
    import os
    env = dict(os.environ, PLASTOPT_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import plastopt; print(plastopt.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_dev_projection_of_stress_increment(ersatz):
    # the plastic increment is parallel to the deviatoric trial stress
    E = SymTensor.from_matrix(np.array([[0.5, 0.2], [0.2, -0.1]]))
    p, _ = radial_return(1.0, ersatz, dev([0, 0]), E)
    t = dev_project(E).coords()
    q = p.coords()
    assert abs(q[0] * t[1] - q[1] * t[0]) <= 1e-12
    assert q @ t > 0
