"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Every trainable model in this package is built from the handful of primitive
operations defined here.  Each operation returns a new Tensor that remembers
its inputs and a backward closure; backward() walks the resulting DAG once in
reverse topological order.  Graph recording can be suspended with no_grad()
for read-only evaluation (beam scoring), which avoids retaining history.
"""

from __future__ import annotations

import contextlib
import contextvars

import numpy as np

MASKED_LOGPROB = -1e30  # finite surrogate for -inf in masked log-softmax

_grad_mode = contextvars.ContextVar("wordsync_grad_mode", default=True)


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@contextlib.contextmanager
def no_grad():
    """Suspend graph recording inside the with-block."""
    token = _grad_mode.set(False)
    try:
        yield
    finally:
        _grad_mode.reset(token)


def grad_enabled():
    return _grad_mode.get()


class Tensor:
    """Dense float64 array plus optional gradient and graph linkage.

    values and grad (when allocated) always share one shape.  Parameters are
    created with requires_grad=True and carry a zero gradient buffer from the
    start; intermediate nodes allocate their buffers lazily during backward.
    """

    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward", "_needs")

    def __init__(self, values, requires_grad=False, name=None, _parents=(), _backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._needs = requires_grad or any(p._needs for p in _parents)
        self.grad = np.zeros_like(self.values) if requires_grad else None

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self):
        return float(self.values)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.values.shape}{tag})"


def parameter(values, name=None):
    return Tensor(values, requires_grad=True, name=name)


def constant(values):
    return Tensor(values)


def _accumulate(t, g):
    if not t._needs:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _make(values, parents, backward):
    if _grad_mode.get() and any(p._needs for p in parents):
        return Tensor(values, _parents=tuple(parents), _backward=backward)
    return Tensor(values)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    out_values = a.values + b.values

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _make(out_values, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")
    out_values = a.values - b.values

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _make(out_values, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    out_values = a.values * b.values

    def backward(g):
        _accumulate(a, g * b.values)
        _accumulate(b, g * a.values)

    return _make(out_values, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out_values = a.values * c

    def backward(g):
        _accumulate(a, g * c)

    return _make(out_values, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a @ b for a 2-D matrix against a vector or matrix."""
    if a.values.ndim != 2 or b.values.ndim not in (1, 2):
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    out_values = a.values @ b.values

    def backward(g):
        if b.values.ndim == 1:
            _accumulate(a, np.outer(g, b.values))
            _accumulate(b, a.values.T @ g)
        else:
            _accumulate(a, g @ b.values.T)
            _accumulate(b, a.values.T @ g)

    return _make(out_values, (a, b), backward)


def tanh(a: Tensor) -> Tensor:
    out_values = np.tanh(a.values)

    def backward(g):
        _accumulate(a, g * (1.0 - out_values * out_values))

    return _make(out_values, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out_values = 1.0 / (1.0 + np.exp(-a.values))

    def backward(g):
        _accumulate(a, g * out_values * (1.0 - out_values))

    return _make(out_values, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out_values = np.maximum(a.values, 0.0)

    def backward(g):
        _accumulate(a, g * (a.values > 0.0))

    return _make(out_values, (a,), backward)


def narrow(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice of a vector."""
    if a.values.ndim != 1:
        raise ShapeError(f"narrow expects a vector, got shape {a.shape}")
    out_values = a.values[start:stop].copy()

    def backward(g):
        if a._needs:
            if a.grad is None:
                a.grad = np.zeros_like(a.values)
            a.grad[start:stop] += g

    return _make(out_values, (a,), backward)


def concat(tensors) -> Tensor:
    tensors = list(tensors)
    for t in tensors:
        if t.values.ndim != 1:
            raise ShapeError(f"concat expects vectors, got shape {t.shape}")
    out_values = np.concatenate([t.values for t in tensors])
    offsets = np.cumsum([0] + [t.size for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _accumulate(t, g[lo:hi])

    return _make(out_values, tuple(tensors), backward)


def take_row(a: Tensor, index: int) -> Tensor:
    """Row of a matrix (embedding lookup)."""
    if a.values.ndim != 2:
        raise ShapeError(f"take_row expects a matrix, got shape {a.shape}")
    index = int(index)
    out_values = a.values[index].copy()

    def backward(g):
        if a._needs:
            if a.grad is None:
                a.grad = np.zeros_like(a.values)
            a.grad[index] += g

    return _make(out_values, (a,), backward)


def pick(a: Tensor, index: int) -> Tensor:
    """Scalar extraction of one vector entry."""
    if a.values.ndim != 1:
        raise ShapeError(f"pick expects a vector, got shape {a.shape}")
    index = int(index)
    out_values = np.asarray(a.values[index])

    def backward(g):
        if a._needs:
            if a.grad is None:
                a.grad = np.zeros_like(a.values)
            a.grad[index] += g

    return _make(out_values, (a,), backward)


def sum_(a: Tensor) -> Tensor:
    out_values = np.asarray(a.values.sum())

    def backward(g):
        _accumulate(a, np.broadcast_to(g, a.values.shape).astype(np.float64))

    return _make(out_values, (a,), backward)


def mean_(a: Tensor) -> Tensor:
    return scale(sum_(a), 1.0 / a.size)


def add_n(tensors) -> Tensor:
    """Sum of same-shape tensors in one graph node (keeps loss graphs shallow)."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("add_n of an empty list")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ShapeError(f"add_n: shapes {shape} and {t.shape} differ")
    out_values = tensors[0].values.copy()
    for t in tensors[1:]:
        out_values += t.values

    def backward(g):
        for t in tensors:
            _accumulate(t, g)

    return _make(out_values, tuple(tensors), backward)


def log_softmax(logits: Tensor, allowed=None) -> Tensor:
    """Log-softmax over a vector, optionally restricted to allowed indices.

    Masked entries receive the finite surrogate MASKED_LOGPROB and zero
    gradient, so all values stay finite while carrying effectively no mass.
    """
    if logits.values.ndim != 1:
        raise ShapeError(f"log_softmax expects a vector, got shape {logits.shape}")
    n = logits.size
    if allowed is None:
        idx = np.arange(n)
    else:
        idx = np.asarray(sorted(set(int(i) for i in allowed)), dtype=np.intp)
        if idx.size == 0:
            raise ValueError("log_softmax: empty set of allowed indices")
        if idx[0] < 0 or idx[-1] >= n:
            raise IndexError(f"log_softmax: allowed index out of range for size {n}")
    a = logits.values[idx]
    m = a.max()
    lse = m + np.log(np.exp(a - m).sum())
    out_values = np.full(n, MASKED_LOGPROB)
    out_values[idx] = a - lse

    def backward(g):
        if logits._needs:
            ga = g[idx]
            dx = np.zeros(n)
            dx[idx] = ga - np.exp(out_values[idx]) * ga.sum()
            _accumulate(logits, dx)

    return _make(out_values, (logits,), backward)


def dropout(a: Tensor, rate: float, rng) -> Tensor:
    """Inverted dropout; identity when rate is 0."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.values.shape) >= rate) / (1.0 - rate)
    out_values = a.values * keep

    def backward(g):
        _accumulate(a, g * keep)

    return _make(out_values, (a,), backward)


def backward(loss: Tensor):
    """Accumulate d(loss)/d(param) into every reachable parameter's grad.

    loss must be a scalar node of the current graph.  Traversal is iterative,
    so arbitrarily deep derivation graphs do not hit the recursion limit.
    """
    if loss.values.shape != ():
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.values.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.values)
    loss.grad += 1.0
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if not node.requires_grad:
            node.grad = None  # free intermediate buffers as we go


def finite_diff_check(build_loss, params, step=1e-4, max_coords=6, rng=None):
    """Max relative error between analytic and central-difference gradients.

    build_loss must deterministically rebuild the scalar loss graph from the
    current parameter values on every call.  For each parameter up to
    max_coords coordinates are probed (all of them for small tensors).
    Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    backward(build_loss())
    analytic = [p.grad.copy() for p in params]

    def eval_loss():
        with no_grad():
            return float(build_loss().values)

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.values.reshape(-1)
        gflat = grad.reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = eval_loss()
            flat[i] = orig - step
            f_minus = eval_loss()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = gflat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
