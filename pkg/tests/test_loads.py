import numpy as np
import pytest

from plastopt.loads import Expression, ExpressionError, LoadProgram, VectorExpression, ramp, step


def test_ramp_and_step():
    assert ramp(-1.0) == 0.0 and ramp(0.5) == 0.5 and ramp(3.0) == 1.0
    assert step(0.2, 0.5) == 0.0 and step(0.7, 0.5) == 1.0


@pytest.mark.parametrize("src,expected", [
    ("1 + 2*x", 3.0), ("x**2 - y", 0.0), ("min(x, y) + max(x, y)", 2.0),
    ("ramp(t, 0, 2)", 0.25), ("sqrt(4) * pi", 2 * np.pi), ("-t", -0.5),
])
def test_expression_values(src, expected):
    assert Expression(src)(1.0, 1.0, 0.5) == pytest.approx(expected)


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "open('f')", "lambda: 1", "z + 1",
                                 "[1, 2]", "1 +"])
def test_expression_rejects(src):
    with pytest.raises(ExpressionError):
        Expression(src)


def test_vector_expression_broadcasts():
    v = VectorExpression(["0", "-t*x"])
    out = v(np.array([1.0, 2.0]), np.array([0.0, 0.0]), 0.5)
    assert out.shape == (2, 2)
    assert np.allclose(out[:, 1], [-0.5, -1.0])


def test_initial_violations():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    ok = LoadProgram(f=["0", "0"], g=["0", "-t"], w=["0", "0"], T=1.0)
    assert ok.initial_violations(pts) == []
    bad = LoadProgram(f=["1", "0"], g=["0", "-t"], w=["0", "x"], T=1.0)
    msgs = bad.initial_violations(pts)
    assert any("f" in m for m in msgs) and any("w" in m for m in msgs)
