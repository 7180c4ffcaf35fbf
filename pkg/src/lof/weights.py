"""Local weight generation: exact innovation likelihood and its learned correction.

The learned likelihood is a small MLP fed with the exact likelihood value and
the raw innovation; its output is made positive with a softplus so that the
product with the previous fusion weight stays a valid pseudo-likelihood.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch
from .gaussian import GaussianBelief, pdf
from .tape import GradTape

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
CHECKPOINT_MAGIC = "# lof-checkpoint v1"


def exact_likelihood(innovation, S) -> float:
    """Density of the innovation under N(0, S)."""
    innovation = np.atleast_1d(np.asarray(innovation, dtype=np.float64))
    return float(pdf(innovation, GaussianBelief(np.zeros(innovation.size), S)))


def local_weight(likelihood, prev_fusion_weight):
    return likelihood * prev_fusion_weight


@dataclass
class MlpParams:
    """Weights of the 3 -> h -> h -> 1 network (tanh, tanh, softplus)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def architecture(self) -> str:
        return f"3-{self.hidden}-{self.hidden}-1"

    @classmethod
    def init(cls, seed: int = 0, hidden: int = 32) -> "MlpParams":
        rng = np.random.default_rng(seed)
        sizes = (3, hidden, hidden, 1)
        arrays = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))
            arrays += [rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)]
        return cls(*arrays)

    @classmethod
    def zeros(cls, hidden: int = 32) -> "MlpParams":
        return cls(np.zeros((3, hidden)), np.zeros(hidden), np.zeros((hidden, hidden)),
                   np.zeros(hidden), np.zeros((hidden, 1)), np.zeros(1))

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d) -> "MlpParams":
        return cls(*(np.array(d[k], dtype=np.float64) for k in PARAM_NAMES))

    def copy(self) -> "MlpParams":
        return MlpParams.from_dict(self.as_dict())

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in PARAM_NAMES])

    def with_flat(self, v) -> "MlpParams":
        v = np.asarray(v, dtype=np.float64)
        out, k = {}, 0
        for name in PARAM_NAMES:
            a = getattr(self, name)
            out[name] = v[k : k + a.size].reshape(a.shape)
            k += a.size
        if k != v.size:
            raise ShapeMismatch(f"expected {k} values, got {v.size}")
        return MlpParams.from_dict(out)


def features(pdf_value, innovation) -> np.ndarray:
    p = np.atleast_1d(np.asarray(pdf_value, dtype=np.float64))
    d = np.atleast_2d(np.asarray(innovation, dtype=np.float64))
    if d.shape != (p.size, 2):
        raise ShapeMismatch(f"{p.size} likelihood values against innovations of shape {d.shape}")
    X = np.column_stack([p, d])
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput(f"non-finite MLP input {X}")
    return X


def mlp_forward(params: MlpParams | None, pdf_value, innovation, tape: GradTape | None = None):
    """Learned likelihood for one innovation or a batch of them.

    ``params=None`` is the pass-through mode: the exact likelihood is returned
    unchanged. With a ``tape``, the computation is recorded with the weights
    as named leaves so ``backward`` can return their gradients.
    """
    scalar = np.ndim(pdf_value) == 0
    X = features(pdf_value, innovation)
    if params is None:
        out = X[:, 0].copy()
    elif tape is None:
        h = np.tanh(X @ params.W1 + params.b1)
        h = np.tanh(h @ params.W2 + params.b2)
        out = np.logaddexp(0.0, h @ params.W3 + params.b3)[:, 0]
    else:
        p = {k: tape.leaf(v, k) for k, v in params.as_dict().items()}
        x = tape.leaf(X)
        h = tape.tanh(tape.add(tape.matmul(x, p["W1"]), p["b1"]))
        h = tape.tanh(tape.add(tape.matmul(h, p["W2"]), p["b2"]))
        y = tape.softplus(tape.add(tape.matmul(h, p["W3"]), p["b3"]))
        tape.output = y
        out = y.value[:, 0]
    return float(out[0]) if scalar else out


def backward(tape: GradTape, upstream) -> dict[str, np.ndarray]:
    """Parameter gradients given d(loss)/d(output) for each recorded output."""
    up = np.asarray(upstream, dtype=np.float64)
    if tape.output is not None:
        up = up.reshape(np.shape(tape.output.value))
    return tape.backward(up)


# --- checkpoint file --------------------------------------------------------

def write_checkpoint(path, params: MlpParams, meta: dict | None = None) -> None:
    lines = [CHECKPOINT_MAGIC, f"# architecture = {params.architecture}",
             "# activations = tanh,tanh,softplus"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k} = {v}")
    for name, a in params.as_dict().items():
        a2 = np.atleast_2d(a)
        lines.append(f"[{name}] {','.join(str(n) for n in a.shape)}")
        for row in a2:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {os.fspath(path)!r}: {exc}") from exc


def read_checkpoint(path) -> tuple[MlpParams, dict]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{os.fspath(path)!r} is not a checkpoint file")
    meta, arrays, k = {}, {}, 1
    while k < len(lines):
        line = lines[k]
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
            k += 1
        elif line.startswith("["):
            name, shape_s = line[1:].split("]")
            shape = tuple(int(n) for n in shape_s.strip().split(","))
            nrows = shape[0] if len(shape) == 2 else 1
            rows = [[float(v) for v in lines[k + 1 + r].split()] for r in range(nrows)]
            arrays[name] = np.array(rows).reshape(shape)
            k += 1 + nrows
        else:
            k += 1
    return MlpParams.from_dict(arrays), meta
