import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from plastopt.dissipation import (dissipation_functional, grad_h_gamma, grad_h_gamma_array,
                                  h_gamma, h_gamma_array, hess_h_gamma_apply,
                                  hess_h_gamma_apply_array, subdiff_contains)
from plastopt.tensor import DevTensor

gammas = st.sampled_from([1.0, 10.0, 1e3, 1e6])
vec = arrays(float, (2,), elements=st.floats(-10, 10))


def dev(v):
    return DevTensor.from_coords(np.asarray(v, dtype=float), 2)


def test_values():
    assert h_gamma(dev([0, 0]), 3.0) == 0.0
    assert h_gamma(dev([0.75, 0]), 1.0) == pytest.approx(0.25)
    assert h_gamma(dev([1.0, 0]), 1e6) == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(grad_h_gamma(dev([0, 0]), 1.0).coords(), 0.0)
    assert np.linalg.norm(grad_h_gamma(dev([0.75, 0]), 1.0).coords()) == pytest.approx(0.6)
    V = dev([0.3, -0.2])
    assert np.allclose(hess_h_gamma_apply(dev([0, 0]), 1.0, V).coords(), V.coords())


def test_infinite_gamma_is_norm():
    q = np.array([[3.0, 4.0]])
    assert h_gamma_array(q, math.inf)[0] == pytest.approx(5.0)


@settings(max_examples=200, deadline=None)
@given(vec, gammas)
def test_gap_bound(q, g):
    v = h_gamma_array(q[None], g)[0]
    n = np.linalg.norm(q)
    assert n - 1.0 / g - 1e-12 <= v <= n + 1e-12


@settings(max_examples=200, deadline=None)
@given(vec, vec, gammas)
def test_gradient_lipschitz_and_unit(q1, q2, g):
    g1 = grad_h_gamma_array(q1[None], g)[0]
    g2 = grad_h_gamma_array(q2[None], g)[0]
    assert np.linalg.norm(g1) < 1.0 + 1e-15
    assert np.linalg.norm(g1 - g2) <= 2 * g * np.linalg.norm(q1 - q2) + 1e-12


@settings(max_examples=100, deadline=None)
@given(vec, vec)
def test_hessian_matches_fd(q, v):
    g = 2.0
    t = 1e-6
    fd = (grad_h_gamma_array((q + t * v)[None], g) - grad_h_gamma_array((q - t * v)[None], g))[0] / (2 * t)
    H = hess_h_gamma_apply_array(q[None], g, v[None])[0]
    assert np.allclose(H, fd, atol=1e-6 * (1 + np.linalg.norm(v)))


def test_subdifferential(unit_law):
    zero = dev([0, 0])
    assert subdiff_contains(zero, dev([0.5, 0]), 0.5, unit_law)
    qd = dev([0.6, 0.8])
    assert subdiff_contains(qd, dev([0.6, 0.8]), 0.5, unit_law)
    assert not subdiff_contains(qd, zero, 0.5, unit_law)


def test_dissipation_functional():
    w = np.full(4, 0.25)
    d = np.full(4, 2.0)
    q = np.tile([0.3, 0.4], (4, 1))
    assert dissipation_functional(d, np.zeros((4, 2)), w, math.inf) == 0.0
    assert dissipation_functional(d, q, w, math.inf) == pytest.approx(1.0)
    reg = dissipation_functional(d, q, w, 10.0)
    assert reg == pytest.approx(2.0 * (math.sqrt(0.25 + 0.01) - 0.1))
    assert reg < 1.0
