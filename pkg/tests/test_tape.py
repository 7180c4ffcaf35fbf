import numpy as np
import pytest

from lof.errors import EmptyTape
from lof.tape import GradTape


def test_square_adjoint():
    t = GradTape()
    x = t.leaf(3.0, "x")
    t.square(x)
    assert t.backward()["x"] == pytest.approx(6.0)


def test_sigmoid_adjoint_at_zero():
    t = GradTape()
    x = t.leaf(0.0, "x")
    t.sigmoid(x)
    assert t.backward()["x"] == pytest.approx(0.25)


def _check(build, inputs, h=1e-6, tol=1e-6):
    """Compare tape adjoints of sum(build(...)) against central differences."""
    t = GradTape()
    leaves = [t.leaf(v, f"x{k}") for k, v in enumerate(inputs)]
    out = t.sum(build(t, *leaves))
    g = t.backward(output=out)
    for k, v in enumerate(inputs):
        v = np.asarray(v, dtype=np.float64)
        num = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            vals = []
            for s in (1, -1):
                w = v.copy()
                w[idx] += s * h
                t2 = GradTape()
                args = [t2.leaf(w if j == k else inputs[j]) for j in range(len(inputs))]
                vals.append(float(t2.sum(build(t2, *args)).value))
            num[idx] = (vals[0] - vals[1]) / (2 * h)
        np.testing.assert_allclose(g[f"x{k}"], num, atol=tol, rtol=tol)


rng = np.random.default_rng(0)
M = np.array([[2.0, 0.3], [0.1, 1.5]])
OPS = {
    "add": (lambda t, a, b: t.add(a, b), [rng.normal(size=(3, 2)), rng.normal(size=2)]),
    "sub": (lambda t, a, b: t.sub(a, b), [rng.normal(size=(3, 2)), rng.normal(size=2)]),
    "mul": (lambda t, a, b: t.mul(a, b), [rng.normal(size=(3, 2)), rng.normal(size=(3, 2))]),
    "matmul": (lambda t, a, b: t.matmul(a, b), [rng.normal(size=(3, 2)), rng.normal(size=(2, 4))]),
    "matvec": (lambda t, a, b: t.matvec(a, b), [rng.normal(size=(3, 2)), rng.normal(size=2)]),
    "tanh": (lambda t, a: t.tanh(a), [rng.normal(size=4)]),
    "sigmoid": (lambda t, a: t.sigmoid(a), [rng.normal(size=4)]),
    "softplus": (lambda t, a: t.softplus(a), [rng.normal(size=4)]),
    "log": (lambda t, a: t.log(a), [rng.uniform(0.5, 2.0, size=4)]),
    "reciprocal": (lambda t, a: t.reciprocal(a), [rng.uniform(0.5, 2.0, size=4)]),
    "square": (lambda t, a: t.square(a), [rng.normal(size=4)]),
    "logdet2": (lambda t, a: t.logdet2(a), [M]),
    "quadform2": (lambda t, d, m: t.quadform2(d, m), [np.array([0.7, -1.2]), M]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_elementary_op_gradients(name):
    build, inputs = OPS[name]
    _check(build, inputs)


def test_fan_out_accumulates():
    t = GradTape()
    x = t.leaf(2.0, "x")
    t.mul(x, x)
    assert t.backward()["x"] == pytest.approx(4.0)


def test_empty_tape_raises():
    with pytest.raises(EmptyTape):
        GradTape().gradients()


def test_replay_is_bit_exact():
    t = GradTape()
    a = t.leaf(np.array([0.3, -1.1]))
    b = t.leaf(M)
    t.quadform2(t.tanh(a), b)
    for node, value in zip(t.nodes, t.replay()):
        np.testing.assert_array_equal(node.value, value)
