"""A minimal reverse-mode gradient tape over numpy arrays.

Only the handful of operations the weight generator needs are supported.
Nodes are appended in evaluation order, so walking the list backwards is a
valid topological order for the adjoint sweep.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyTape


class Node:
    __slots__ = ("value", "op", "parents", "fn", "vjps", "index")

    def __init__(self, value, op, parents=(), fn=None, vjps=(), index=-1):
        self.value = value
        self.op = op
        self.parents = parents
        self.fn = fn
        self.vjps = vjps
        self.index = index

    def __repr__(self):
        return f"Node({self.op}, shape={np.shape(self.value)})"


def _unbroadcast(g, shape):
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for k, n in enumerate(shape):
        if n == 1 and g.shape[k] != 1:
            g = g.sum(axis=k, keepdims=True)
    return g.reshape(shape)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class GradTape:
    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}
        self.output: Node | None = None

    def __len__(self):
        return len(self.nodes)

    def _push(self, node):
        node.index = len(self.nodes)
        self.nodes.append(node)
        return node

    def leaf(self, value, name: str | None = None) -> Node:
        node = self._push(Node(np.array(value, dtype=np.float64), "leaf"))
        if name is not None:
            self.params[name] = node
        return node

    def _op(self, op, parents, fn, vjps):
        value = fn(*(p.value for p in parents))
        return self._push(Node(value, op, tuple(parents), fn, tuple(vjps)))

    # -- vocabulary ----------------------------------------------------------

    def add(self, a, b):
        return self._op("add", (a, b), np.add,
                        (lambda g, y, x, z: _unbroadcast(g, np.shape(x)),
                         lambda g, y, x, z: _unbroadcast(g, np.shape(z))))

    def sub(self, a, b):
        return self._op("sub", (a, b), np.subtract,
                        (lambda g, y, x, z: _unbroadcast(g, np.shape(x)),
                         lambda g, y, x, z: _unbroadcast(-g, np.shape(z))))

    def mul(self, a, b):
        return self._op("mul", (a, b), np.multiply,
                        (lambda g, y, x, z: _unbroadcast(g * z, np.shape(x)),
                         lambda g, y, x, z: _unbroadcast(g * x, np.shape(z))))

    def matmul(self, a, b):
        def da(g, y, x, z):
            if z.ndim == 1:
                return np.outer(g, z) if x.ndim == 2 else g * z
            return g @ z.T if x.ndim == 2 else z @ g

        def db(g, y, x, z):
            if x.ndim == 1:
                return np.outer(x, g) if z.ndim == 2 else g * x
            return x.T @ g if z.ndim == 2 else x.T @ g

        return self._op("matmul", (a, b), np.matmul, (da, db))

    matvec = matmul

    def tanh(self, a):
        return self._op("tanh", (a,), np.tanh, (lambda g, y, x: g * (1.0 - y * y),))

    def sigmoid(self, a):
        return self._op("sigmoid", (a,), _sigmoid, (lambda g, y, x: g * y * (1.0 - y),))

    def softplus(self, a):
        return self._op("softplus", (a,), lambda x: np.logaddexp(0.0, x),
                        (lambda g, y, x: g * _sigmoid(x),))

    def log(self, a):
        return self._op("log", (a,), np.log, (lambda g, y, x: g / x,))

    def reciprocal(self, a):
        return self._op("reciprocal", (a,), np.reciprocal, (lambda g, y, x: -g * y * y,))

    def square(self, a):
        return self._op("square", (a,), np.square, (lambda g, y, x: 2.0 * g * x,))

    def sum(self, a):
        return self._op("sum", (a,), lambda x: np.asarray(np.sum(x)),
                        (lambda g, y, x: np.broadcast_to(g, np.shape(x)).copy(),))

    def logdet2(self, a):
        """log det of a 2x2 matrix with positive determinant."""
        def fn(m):
            return np.asarray(np.log(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]))

        return self._op("logdet2", (a,), fn, (lambda g, y, m: g * np.linalg.inv(m).T,))

    def quadform2(self, d, m):
        """d^T M^{-1} d for a 2-vector d and an invertible 2x2 M."""
        def fn(d, m):
            return np.asarray(d @ np.linalg.solve(m, d))

        def dd(g, y, d, m):
            inv = np.linalg.inv(m)
            return g * (inv + inv.T) @ d

        def dm(g, y, d, m):
            a = np.linalg.solve(m.T, d)
            b = np.linalg.solve(m, d)
            return -g * np.outer(a, b)

        return self._op("quadform2", (d, m), fn, (dd, dm))

    # -- sweeps --------------------------------------------------------------

    def gradients(self, output: Node | None = None, upstream=1.0) -> dict[int, np.ndarray]:
        """Adjoints of every node reachable from ``output``, keyed by node index."""
        if not self.nodes:
            raise EmptyTape("nothing was recorded on this tape")
        output = self.output if output is None else output
        if output is None:
            output = self.nodes[-1]
        adj = {output.index: np.broadcast_to(np.asarray(upstream, dtype=np.float64), np.shape(output.value)).copy()}
        for node in reversed(self.nodes[: output.index + 1]):
            g = adj.get(node.index)
            if g is None or node.op == "leaf":
                continue
            args = [p.value for p in node.parents]
            for parent, vjp in zip(node.parents, node.vjps):
                contrib = vjp(g, node.value, *args)
                if parent.index in adj:
                    adj[parent.index] = adj[parent.index] + contrib
                else:
                    adj[parent.index] = contrib
        return adj

    def backward(self, upstream=1.0, output: Node | None = None) -> dict[str, np.ndarray]:
        """Gradients of the named parameter leaves."""
        adj = self.gradients(output, upstream)
        return {name: adj.get(n.index, np.zeros_like(n.value)) for name, n in self.params.items()}

    def replay(self) -> list[np.ndarray]:
        """Recompute every node from the leaves; returns the fresh values."""
        vals: list[np.ndarray] = []
        for node in self.nodes:
            if node.op == "leaf":
                vals.append(node.value)
            else:
                vals.append(node.fn(*(vals[p.index] for p in node.parents)))
        return vals
