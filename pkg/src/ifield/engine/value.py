"""Eager reverse-mode differentiation over dense float64 arrays (at most 2-D).

Every operation records its parents and a closure mapping the output gradient
to one gradient per parent. Graphs are only recorded when at least one input
requires a gradient, so pure numeric evaluation (finite differences, inference)
costs no tape.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

_uids = itertools.count(1)

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def _as_array(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    if arr.ndim > 2:
        raise ValueError(f"only 0-D, 1-D and 2-D arrays are supported, got shape {arr.shape}")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Value:
    """A node of the computation graph holding a float64 array."""

    __array_ufunc__ = None

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        *,
        name: str | None = None,
        _parents: tuple["Value", ...] = (),
        _backward: BackwardFn | None = None,
        _op: str = "",
    ) -> None:
        self.data = data if isinstance(data, np.ndarray) and data.dtype == np.float64 else _as_array(data)
        if self.data.ndim > 2:
            raise ValueError(f"only 0-D, 1-D and 2-D arrays are supported, got shape {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self.uid = next(_uids)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Value":
        return Value(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Value{label}(shape={self.shape}{flag}, op={self._op or 'leaf'})"

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other) -> "Value":
        other = as_value(other)
        a_shape, b_shape = self.shape, other.shape
        return _record(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
            "add",
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Value":
        other = as_value(other)
        a_shape, b_shape = self.shape, other.shape
        return _record(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)),
            "sub",
        )

    def __rsub__(self, other) -> "Value":
        return as_value(other) - self

    def __mul__(self, other) -> "Value":
        other = as_value(other)
        a, b = self.data, other.data
        return _record(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Value":
        other = as_value(other)
        a, b = self.data, other.data
        return _record(
            a / b,
            (self, other),
            lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)),
            "div",
        )

    def __rtruediv__(self, other) -> "Value":
        return as_value(other) / self

    def __neg__(self) -> "Value":
        return _record(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float) -> "Value":
        if isinstance(exponent, Value):
            raise TypeError("only constant exponents are supported")
        p = float(exponent)
        x = self.data
        return _record(x**p, (self,), lambda g: (g * p * x ** (p - 1.0),), "pow")

    def __matmul__(self, other) -> "Value":
        other = as_value(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
        return _record(a @ b, (self, other), lambda g: (g @ b.T, a.T @ g), "matmul")

    def __rmatmul__(self, other) -> "Value":
        return as_value(other) @ self

    # -------------------------------------------------------------- reshaping
    @property
    def T(self) -> "Value":
        return _record(self.data.T, (self,), lambda g: (g.T,), "transpose")

    def reshape(self, *shape) -> "Value":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        original = self.shape
        return _record(self.data.reshape(shape), (self,), lambda g: (g.reshape(original),), "reshape")

    def __getitem__(self, index) -> "Value":
        original = self.shape

        def _backward(g: np.ndarray):
            full = np.zeros(original, dtype=np.float64)
            np.add.at(full, index, g)
            return (full,)

        return _record(np.array(self.data[index], dtype=np.float64), (self,), _backward, "getitem")

    # ------------------------------------------------------------- reductions
    def sum(self, axis: int | None = None, keepdims: bool = False) -> "Value":
        original = self.shape

        def _backward(g: np.ndarray):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, original).copy(),)

        return _record(self.data.sum(axis=axis, keepdims=keepdims), (self,), _backward, "sum")

    def mean(self, axis: int | None = None, keepdims: bool = False) -> "Value":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    # ------------------------------------------------------------ elementwise
    def exp(self) -> "Value":
        out = np.exp(self.data)
        return _record(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> "Value":
        x = self.data
        return _record(np.log(x), (self,), lambda g: (g / x,), "log")

    def tanh(self) -> "Value":
        out = np.tanh(self.data)
        return _record(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def sigmoid(self) -> "Value":
        out = expit(self.data)
        return _record(out, (self,), lambda g: (g * out * (1.0 - out),), "sigmoid")

    def abs(self) -> "Value":
        # subgradient 0 at the kink
        sign = np.sign(self.data)
        return _record(np.abs(self.data), (self,), lambda g: (g * sign,), "abs")

    def clip(self, lo: float, hi: float) -> "Value":
        x = self.data
        inside = ((x >= lo) & (x <= hi)).astype(np.float64)
        return _record(np.clip(x, lo, hi), (self,), lambda g: (g * inside,), "clip")

    def softmax(self, axis: int = -1) -> "Value":
        out = _softmax(self.data, axis)

        def _backward(g: np.ndarray):
            dot = (g * out).sum(axis=axis, keepdims=True)
            return (out * (g - dot),)

        return _record(out, (self,), _backward, "softmax")

    def log_softmax(self, axis: int = -1) -> "Value":
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - lse
        probs = np.exp(out)

        def _backward(g: np.ndarray):
            return (g - probs * g.sum(axis=axis, keepdims=True),)

        return _record(out, (self,), _backward, "log_softmax")

    def norm(self, axis: int | None = None) -> "Value":
        """Euclidean norm; the gradient at a zero vector is 0."""
        x = self.data
        out = np.sqrt((x * x).sum(axis=axis))

        def _backward(g: np.ndarray):
            n = out if axis is None else np.expand_dims(out, axis)
            gg = g if axis is None else np.expand_dims(g, axis)
            safe = np.where(n > 0.0, n, 1.0)
            return (np.where(n > 0.0, gg * x / safe, 0.0),)

        return _record(out, (self,), _backward, "norm")


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = np.exp(x - x.max(axis=axis, keepdims=True))
    return shifted / shifted.sum(axis=axis, keepdims=True)


def _record(data: np.ndarray, parents: tuple[Value, ...], backward: BackwardFn, op: str) -> Value:
    data = np.asarray(data, dtype=np.float64)
    if any(p.requires_grad for p in parents):
        return Value(data, requires_grad=True, _parents=parents, _backward=backward, _op=op)
    return Value(data, _op=op)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


# ---------------------------------------------------------------- n-ary ops
def concat(values: Sequence[Value], axis: int = 0) -> Value:
    values = [as_value(v) for v in values]
    sizes = [v.shape[axis] for v in values]
    bounds = np.cumsum([0, *sizes])

    def _backward(g: np.ndarray):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(values))
        )

    return _record(np.concatenate([v.data for v in values], axis=axis), tuple(values), _backward, "concat")


def stack(values: Sequence[Value], axis: int = 0) -> Value:
    values = [as_value(v) for v in values]

    def _backward(g: np.ndarray):
        return tuple(np.take(g, i, axis=axis) for i in range(len(values)))

    return _record(np.stack([v.data for v in values], axis=axis), tuple(values), _backward, "stack")


def maximum(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    pick_a = (a.data >= b.data).astype(np.float64)
    a_shape, b_shape = a.shape, b.shape
    return _record(
        np.maximum(a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a_shape), _unbroadcast(g * (1.0 - pick_a), b_shape)),
        "maximum",
    )


def minimum(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    pick_a = (a.data <= b.data).astype(np.float64)
    a_shape, b_shape = a.shape, b.shape
    return _record(
        np.minimum(a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * pick_a, a_shape), _unbroadcast(g * (1.0 - pick_a), b_shape)),
        "minimum",
    )


def scale_grad(x: Value, factor: float) -> Value:
    """Identity in the forward pass; multiplies the incoming gradient by ``factor``."""
    return _record(x.data.copy(), (x,), lambda g: (g * factor,), "scale_grad")


# ---------------------------------------------------------------- backward
GradientMap = dict[int, np.ndarray]


def _topological_order(root: Value) -> list[Value]:
    order: list[Value] = []
    seen: set[int] = set()
    stack_: list[tuple[Value, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if node.uid in seen:
            continue
        seen.add(node.uid)
        stack_.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and parent.uid not in seen:
                stack_.append((parent, False))
    return order


def backward(root: Value, *, retain_graph: bool = False) -> GradientMap:
    """Backpropagate from a scalar ``root``.

    Leaf gradients are accumulated into ``leaf.grad``; the returned map holds
    this pass's contribution keyed by leaf ``uid``.
    """
    if root.data.size != 1:
        raise ValueError(f"backward requires a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return {}

    order = _topological_order(root)
    grads: dict[int, np.ndarray] = {root.uid: np.ones_like(root.data)}
    leaves: GradientMap = {}
    for node in reversed(order):
        g = grads.pop(node.uid, None)
        if g is None:
            continue
        if node.is_leaf:
            leaves[node.uid] = g
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g) if node._backward is not None else ()
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent.uid in grads:
                grads[parent.uid] = grads[parent.uid] + pg
            else:
                grads[parent.uid] = np.asarray(pg, dtype=np.float64).reshape(parent.shape)

    if not retain_graph:
        for node in order:
            if not node.is_leaf:
                node._parents = ()
                node._backward = None
                node.requires_grad = False
    return leaves


__all__ = [
    "Value",
    "GradientMap",
    "as_value",
    "backward",
    "concat",
    "stack",
    "maximum",
    "minimum",
    "scale_grad",
]
