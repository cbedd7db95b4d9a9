"""Small dense classifiers with exact input gradients.

Class labels are 1-based throughout the package; label 0 is reserved for an
untrusted prediction (a tie between the top scores).  A network with a single
output is a binary classifier: it is treated as having the two class scores
``(f, 0)``, so label 1 means ``f > 0`` and label 2 means ``f < 0``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tubecert import _backend
from tubecert.errors import (
    ClassIndexError,
    InputShapeError,
    ModelFormatError,
    NumericalError,
    UnsupportedActivationError,
)

TIE_TOL = 1e-12
MODEL_SCHEMA = "tubecert.network/1"


class ActivationKind(enum.Enum):
    TANH = "tanh"
    SOFTPLUS = "softplus"
    RELU = "relu"

    @property
    def smooth(self) -> bool:
        return self is not ActivationKind.RELU


_ACT_CODE = {None: 0, ActivationKind.TANH: 1, ActivationKind.SOFTPLUS: 2, ActivationKind.RELU: 3}


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: ActivationKind | None = None


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable feedforward classifier ``f: R^n -> R^C``."""

    layers: tuple[Layer, ...]
    _dims: np.ndarray = field(init=False, repr=False, compare=False)
    _acts: np.ndarray = field(init=False, repr=False, compare=False)
    _params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise InputShapeError("a network needs at least one layer")
        frozen = []
        for k, layer in enumerate(self.layers):
            W = np.array(layer.weight, dtype=np.float64, copy=True)
            b = np.array(layer.bias, dtype=np.float64, copy=True).reshape(-1)
            if W.ndim != 2 or W.shape[0] != b.shape[0]:
                raise InputShapeError(f"layer {k}: weight {W.shape} and bias {b.shape} disagree")
            if k > 0 and W.shape[1] != frozen[-1].weight.shape[0]:
                raise InputShapeError(f"layer {k} expects {W.shape[1]} inputs, got {frozen[-1].weight.shape[0]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise NumericalError(f"layer {k} has non-finite parameters")
            W.flags.writeable = False
            b.flags.writeable = False
            act = layer.activation
            if act is not None and not isinstance(act, ActivationKind):
                act = ActivationKind(act)
            frozen.append(Layer(W, b, act))
        object.__setattr__(self, "layers", tuple(frozen))

        # single-output nets get a constant zero score appended for class 2
        Ws = [l.weight for l in frozen]
        bs = [l.bias for l in frozen]
        if Ws[-1].shape[0] == 1:
            Ws[-1] = np.vstack([Ws[-1], np.zeros_like(Ws[-1])])
            bs[-1] = np.concatenate([bs[-1], [0.0]])
        dims = [Ws[0].shape[1]] + [W.shape[0] for W in Ws]
        params = np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(Ws, bs)])
        acts = [_ACT_CODE[l.activation] for l in frozen]
        for name, arr in (("_dims", np.array(dims, dtype=np.int64)),
                          ("_acts", np.array(acts, dtype=np.int64)),
                          ("_params", np.ascontiguousarray(params))):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, weights, biases, activations) -> "Network":
        return cls(tuple(Layer(W, b, a) for W, b, a in zip(weights, biases, activations)))

    @property
    def input_dim(self) -> int:
        return int(self._dims[0])

    @property
    def class_count(self) -> int:
        return int(self.layers[-1].weight.shape[0])

    @property
    def n_scores(self) -> int:
        """Number of class scores (2 for a single-output binary net)."""
        return int(self._dims[-1])

    @property
    def smooth(self) -> bool:
        return all(l.activation is None or l.activation.smooth for l in self.layers)

    def packed(self):
        return self._params, self._dims, self._acts


@dataclass(frozen=True)
class ScalarSelector:
    """Which scalar function of the outputs to evaluate.

    ``mode`` is ``"component"`` (output ``a``), ``"pair"`` (``f_a - f_b``) or
    ``"outer"`` (``f_a - max_{j != a} f_j``).  Indices are 1-based.
    """

    mode: str
    a: int
    b: int | None = None

    @classmethod
    def component(cls, k: int) -> "ScalarSelector":
        return cls("component", k)

    @classmethod
    def pair(cls, l: int, j: int) -> "ScalarSelector":
        return cls("pair", l, j)

    @classmethod
    def outer(cls, l: int) -> "ScalarSelector":
        return cls("outer", l)

    def encode(self, net: Network) -> tuple[int, int, int]:
        """Kernel encoding ``(mode, a, b)`` with 0-based indices; validates ranges."""
        C = net.n_scores
        if not 1 <= self.a <= C:
            raise ClassIndexError(f"class {self.a} out of range 1..{C}")
        if self.mode == "component":
            return 0, self.a - 1, -1
        if self.mode == "pair":
            if self.b is None or not 1 <= self.b <= C:
                raise ClassIndexError(f"class {self.b} out of range 1..{C}")
            if self.b == self.a:
                raise ClassIndexError("pair margin needs two distinct classes")
            return 1, self.a - 1, self.b - 1
        if self.mode == "outer":
            if C < 2:
                raise ClassIndexError("outer margin needs at least two classes")
            return 2, self.a - 1, -1
        raise ValueError(f"unknown selector mode {self.mode!r}")


def _check_input(net: Network, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise InputShapeError(f"expected input of shape ({net.input_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputShapeError("input has non-finite entries")
    return x


def forward(net: Network, x) -> np.ndarray:
    """Raw network outputs at ``x`` (length ``class_count``)."""
    x = _check_input(net, x)
    out = _backend.kernels.forward(*net.packed(), x)
    return out[: net.class_count]


def class_scores(net: Network, x) -> np.ndarray:
    """Scores used for classification; a binary net yields ``(f, 0)``."""
    x = _check_input(net, x)
    return _backend.kernels.forward(*net.packed(), x)


def argmax_class(scores: np.ndarray, tie_tol: float = TIE_TOL) -> int:
    """1-based index of the strictly highest score, 0 if the top two tie."""
    if scores.shape[0] == 1:
        return 0
    order = np.argsort(-scores, kind="stable")
    if scores[order[0]] - scores[order[1]] <= tie_tol:
        return 0
    return int(order[0]) + 1


def predicted_class(net: Network, x) -> int:
    return argmax_class(class_scores(net, x))


def value_and_gradient(net: Network, x, sel: ScalarSelector) -> tuple[float, np.ndarray]:
    x = _check_input(net, x)
    mode, a, b = sel.encode(net)
    value, grad, _, _ = _backend.kernels.value_and_grad(*net.packed(), x, mode, a, b)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NumericalError("non-finite value or gradient")
    return float(value), grad


def scalar(net: Network, x, sel: ScalarSelector) -> float:
    scores = class_scores(net, x)
    mode, a, b = sel.encode(net)
    if mode == 0:
        return float(scores[a])
    if mode == 1:
        return float(scores[a] - scores[b])
    others = np.delete(scores, a)
    return float(scores[a] - others.max())


def gradient(net: Network, x, sel: ScalarSelector) -> np.ndarray:
    """Exact reverse-mode gradient of the selected scalar at ``x``."""
    return value_and_gradient(net, x, sel)[1]


def fd_hvp(grad_fn, x: np.ndarray, v: np.ndarray, h: float | None = None) -> np.ndarray:
    """Hessian-vector product by central differences of an exact gradient."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise ValueError("hvp direction must be non-zero")
    if h is None:
        h = 1e-4 * max(1.0, float(np.linalg.norm(x)))
    u = v / nv
    return (grad_fn(x + h * u) - grad_fn(x - h * u)) * (nv / (2.0 * h))


def hvp(net: Network, x, sel: ScalarSelector, v) -> np.ndarray:
    if not net.smooth:
        raise UnsupportedActivationError("Hessian products need smooth activations")
    x = _check_input(net, x)
    return fd_hvp(lambda p: gradient(net, p, sel), x, v)


# -- serialization -----------------------------------------------------------

def _fmt(arr: np.ndarray) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in np.ravel(arr)) + "]"


def dumps(net: Network) -> str:
    parts = []
    for layer in net.layers:
        act = "null" if layer.activation is None else json.dumps(layer.activation.value)
        parts.append(
            "    {\n"
            f'      "in": {layer.weight.shape[1]},\n'
            f'      "out": {layer.weight.shape[0]},\n'
            f'      "activation": {act},\n'
            f'      "weight": {_fmt(layer.weight)},\n'
            f'      "bias": {_fmt(layer.bias)}\n'
            "    }"
        )
    return (
        "{\n"
        f'  "schema": "{MODEL_SCHEMA}",\n'
        f'  "input_dim": {net.input_dim},\n'
        f'  "class_count": {net.class_count},\n'
        '  "layers": [\n' + ",\n".join(parts) + "\n  ]\n}\n"
    )


def loads(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a model file: {exc}") from exc
    if doc.get("schema") != MODEL_SCHEMA:
        raise ModelFormatError(f"unsupported model schema {doc.get('schema')!r}")
    layers = []
    for spec in doc["layers"]:
        W = np.array(spec["weight"], dtype=np.float64).reshape(spec["out"], spec["in"])
        act = spec["activation"]
        layers.append(Layer(W, np.array(spec["bias"], dtype=np.float64),
                            None if act is None else ActivationKind(act)))
    net = Network(tuple(layers))
    if net.input_dim != doc["input_dim"] or net.class_count != doc["class_count"]:
        raise ModelFormatError("header dimensions disagree with layers")
    return net


def save(net: Network, path) -> None:
    Path(path).write_text(dumps(net))


def load(path) -> Network:
    return loads(Path(path).read_text())
