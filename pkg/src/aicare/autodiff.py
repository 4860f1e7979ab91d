"""Dense float64 tensors with reverse-mode gradients.

Everything the risk models compute runs on the small op set defined here:
a `Tensor` wraps a numpy array and records the backward closure of the op
that produced it, and `GradTape` owns the reverse sweep and the per-leaf
gradient accumulators.  The module also carries the Adam optimizer,
global-norm gradient clipping and a central finite-difference checker.

CPU-only, float64-only, dense-only by design: the models are desk-scale
and double precision keeps gradient checks tight.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """Immutable dense float64 array node in a computation graph.

    Leaf tensors are built directly from data; interior tensors are built
    by the ops below, which attach parent references and a backward
    closure.  Construction rejects NaN/Inf.
    """

    __slots__ = ("data", "_parents", "_backward", "requires_grad")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward: Callable | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if _backward is None and not np.all(np.isfinite(arr)):
            raise ValueError("Tensor data must be finite (NaN/Inf rejected)")
        self.data = arr
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, key):
        return take(self, key)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g, acc):
        acc(a, _unbroadcast(g, a.shape))
        acc(b, _unbroadcast(g, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g, acc):
        acc(a, _unbroadcast(g, a.shape))
        acc(b, _unbroadcast(-g, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g, acc):
        acc(a, _unbroadcast(g * b.data, a.shape))
        acc(b, _unbroadcast(g * a.data, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy stacking/broadcast semantics."""
    out_data = np.matmul(a.data, b.data)

    def backward(g, acc):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        acc(a, _unbroadcast(ga, a.shape))
        acc(b, _unbroadcast(gb, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function, overflow-safe for any finite input."""
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                        np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def backward(g, acc):
        acc(x, g * out_data * (1.0 - out_data))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)

    def backward(g, acc):
        acc(x, g * (1.0 - out_data * out_data))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def backward(g, acc):
        acc(x, g * out_data)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def backward(g, acc):
        acc(x, g / x.data)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)

    def backward(g, acc):
        acc(x, g * 0.5 / out_data)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def square(x: Tensor) -> Tensor:
    out_data = x.data * x.data

    def backward(g, acc):
        acc(x, g * 2.0 * x.data)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), computed overflow-safe."""
    d = x.data
    out_data = np.maximum(d, 0.0) + np.log1p(np.exp(-np.abs(d)))
    sig = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                   np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def backward(g, acc):
        acc(x, g * sig)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max-subtraction)."""
    if x.data.shape == () or x.data.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g, acc):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        acc(x, out_data * (g - dot))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g, acc):
        if axis is None:
            acc(x, np.broadcast_to(g, x.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            acc(x, np.broadcast_to(g, x.shape).copy())

    return Tensor(out_data, _parents=(x,), _backward=backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return tsum(x, axis=axis, keepdims=keepdims) * Tensor(1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)

    def backward(g, acc):
        acc(x, g.reshape(x.shape))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    out_data = np.transpose(x.data, axes)
    inv = np.argsort(axes)

    def backward(g, acc):
        acc(x, np.transpose(g, inv))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g, acc):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            acc(t, piece)

    return Tensor(out_data, _parents=tuple(tensors), _backward=backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g, acc):
        for i, t in enumerate(tensors):
            acc(t, np.take(g, i, axis=axis))

    return Tensor(out_data, _parents=tuple(tensors), _backward=backward)


def take(x: Tensor, key) -> Tensor:
    out_data = x.data[key]

    def backward(g, acc):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        acc(x, full)

    return Tensor(out_data, _parents=(x,), _backward=backward)


class GradTape:
    """Single-owner reverse sweep over a recorded computation graph.

    A tape must not be shared between concurrent executions; build one
    per backward pass.  The sweep visits each node exactly once, in
    reverse topological order, and accumulates gradients on leaves.
    """

    def __init__(self):
        self._grads: dict[int, np.ndarray] = {}

    def gradient(self, output: Tensor, leaves: Iterable[Tensor]) -> list[np.ndarray]:
        """Gradients of scalar `output` with respect to each leaf."""
        if output.data.size != 1:
            raise ValueError("gradient() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack_ = [output]
        while stack_:
            node = stack_[-1]
            if id(node) in seen:
                stack_.pop()
                continue
            pending = [p for p in node._parents if id(p) not in seen]
            if pending:
                stack_.extend(pending)
            else:
                seen.add(id(node))
                order.append(node)
                stack_.pop()

        grads = self._grads
        grads.clear()
        grads[id(output)] = np.ones_like(output.data)

        def acc(t: Tensor, g: np.ndarray):
            if not t.requires_grad and t._backward is None:
                return
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g

        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            node._backward(g, acc)

        out = []
        for leaf in leaves:
            g = grads.get(id(leaf))
            out.append(np.zeros_like(leaf.data) if g is None else g)
        return out


class AdamState:
    """Per-parameter first/second moment accumulators for Adam.

    `t` counts completed updates and strictly increases by one per call
    to `adam_update`.
    """

    def __init__(self, shapes: dict[str, tuple[int, ...]], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                state: AdamState) -> dict[str, np.ndarray]:
    """One bias-corrected Adam step; mutates `state`, returns new params."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter '{name}'")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1 ** t)
        v_hat = state.v[name] / (1.0 - b2 ** t)
        out[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray],
                   max_norm: float = 1.0) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most `max_norm`."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return {k: g.copy() for k, g in grads.items()}
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def finite_difference_check(loss_fn: Callable[[dict[str, Tensor]], Tensor],
                            params: dict[str, np.ndarray],
                            eps: float = 1e-5) -> float:
    """Worst relative error of tape gradients vs central differences.

    `loss_fn` must be deterministic and accept a dict of leaf Tensors.
    """
    if not (1e-6 <= eps <= 1e-4):
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
    loss = loss_fn(leaves)
    tape = GradTape()
    names = list(params)
    analytic = dict(zip(names, tape.gradient(loss, [leaves[n] for n in names])))

    worst = 0.0
    for name, p in params.items():
        flat = p.ravel()
        num = np.zeros_like(flat)
        for i in range(flat.size):
            for sign in (+1.0, -1.0):
                bumped = {k: v.copy() for k, v in params.items()}
                bumped[name].ravel()[i] += sign * eps
                val = loss_fn({k: Tensor(v, requires_grad=True)
                               for k, v in bumped.items()}).item()
                if not np.isfinite(val):
                    raise ValueError(
                        f"loss non-finite at perturbed point ({name}[{i}])")
                num[i] += sign * val
            num[i] /= (2.0 * eps)
        a = analytic[name].ravel()
        denom = np.maximum(np.abs(a) + np.abs(num), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - num) / denom)))
    return worst
