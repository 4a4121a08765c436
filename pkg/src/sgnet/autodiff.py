"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array and remembers how it was produced; calling
`backward` on a scalar walks the recorded graph once in reverse topological
order and accumulates gradients into every tensor that requires them.

The op set is exactly what the message-passing model needs: affine maps,
pointwise nonlinearities, a numerically safe softmax, concatenation, row
gather/scatter (for batching messages per graph), segment reductions (for
sum/max aggregation), and the two training losses. No broadcasting beyond
row-wise bias and column-wise scaling is supported on purpose.
"""

from __future__ import annotations

import numpy as np

_EPS_PROB = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumers")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self._consumers = 0

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            # An intermediate with a single consumer receives exactly one
            # gradient and that gradient is never mutated afterwards, so the
            # array (possibly a view into the consumer's grad) can be adopted
            # directly. Anything else gets an owned copy.
            if self._consumers == 1 and self._backward is not None:
                self.grad = g
            else:
                self.grad = np.array(g)
        else:
            self.grad += g

    def backward(self):
        if self.data.shape != ():
            raise ValueError("backward() starts from a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _make(data, parents, backward) -> Tensor:
    req = False
    grad_parents = []
    for p in parents:
        if p.requires_grad:
            req = True
            p._consumers += 1
            grad_parents.append(p)
    return Tensor(data, requires_grad=req, _parents=tuple(grad_parents),
                  _backward=backward if req else None)


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also supports adding a length-m bias to an (n, m) matrix."""
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g if a.data.shape == g.shape else g.sum(axis=0))
        if b.requires_grad:
            b._accumulate(g if b.data.shape == g.shape else g.sum(axis=0))

    return _make(out, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _make(out, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; b may be a python float or an (n, 1) column scaling
    an (n, m) matrix."""
    if isinstance(b, (int, float)):
        k = float(b)
        out = a.data * k

        def backward(g):
            if a.requires_grad:
                a._accumulate(g * k)

        return _make(out, (a,), backward)

    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            ga = g * b.data
            a._accumulate(ga if a.data.shape == ga.shape else ga.sum(axis=1, keepdims=True))
        if b.requires_grad:
            gb = g * a.data
            b._accumulate(gb if b.data.shape == gb.shape else gb.sum(axis=1, keepdims=True))

    return _make(out, (a, b), backward)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """w @ x for a vector x, or x @ w.T row-wise for a matrix x; w is (out, in)."""
    if x.data.ndim == 1:
        out = w.data @ x.data

        def backward(g):
            if w.requires_grad:
                w._accumulate(np.outer(g, x.data))
            if x.requires_grad:
                x._accumulate(w.data.T @ g)

    else:
        out = x.data @ w.data.T

        def backward(g):
            if w.requires_grad:
                w._accumulate(g.T @ x.data)
            if x.requires_grad:
                x._accumulate(g @ w.data)

    return _make(out, (x, w), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = W x + b (vector) or row-wise X W^T + b (matrix)."""
    if w.data.ndim != 2 or b.data.ndim != 1 or w.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"affine: bad parameter shapes {w.data.shape} / {b.data.shape}")
    if x.data.shape[-1] != w.data.shape[1]:
        raise ValueError(f"affine: input width {x.data.shape} vs weight {w.data.shape}")
    return add(linear(x, w), b)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)

    def backward(g):
        x._accumulate(g * (x.data > 0.0))

    return _make(out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        x._accumulate(g * out * (1.0 - out))

    return _make(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - out * out))

    return _make(out, (x,), backward)


def log(x: Tensor) -> Tensor:
    out = np.log(x.data)

    def backward(g):
        x._accumulate(g / x.data)

    return _make(out, (x,), backward)


def clamp_min(x: Tensor, lo: float) -> Tensor:
    out = np.maximum(x.data, lo)

    def backward(g):
        x._accumulate(g * (x.data >= lo))

    return _make(out, (x,), backward)


_TINY = np.finfo(np.float64).tiny  # keeps softmax outputs strictly positive


def softmax(x: Tensor) -> Tensor:
    """Stable softmax over a 1-D tensor: strictly positive entries summing to
    one (entries whose exponential underflows are floored at the smallest
    normal float; the sum is unaffected to machine precision)."""
    if x.data.ndim != 1:
        raise ValueError("softmax expects a 1-D tensor")
    e = np.maximum(np.exp(x.data - x.data.max()), _TINY)
    out = e / e.sum()

    def backward(g):
        x._accumulate(out * (g - np.dot(g, out)))

    return _make(out, (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise stable softmax over a 2-D tensor."""
    if x.data.ndim != 2:
        raise ValueError("softmax_rows expects a 2-D tensor")
    e = np.maximum(np.exp(x.data - x.data.max(axis=1, keepdims=True)), _TINY)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        x._accumulate(out * (g - (g * out).sum(axis=1, keepdims=True)))

    return _make(out, (x,), backward)


def pick_rows(x: Tensor, cols) -> Tensor:
    """x[i, cols[i]] per row of a 2-D tensor; returns a 1-D tensor."""
    cols = np.asarray(cols, dtype=np.intp)
    rows_idx = np.arange(x.data.shape[0])
    out = x.data[rows_idx, cols]

    def backward(g):
        acc = np.zeros_like(x.data)
        acc[rows_idx, cols] = g
        x._accumulate(acc)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# Shape plumbing
# ---------------------------------------------------------------------------

def concat(parts: list[Tensor]) -> Tensor:
    """1-D concatenation."""
    out = np.concatenate([p.data for p in parts])
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._accumulate(g[lo:hi])

    return _make(out, tuple(parts), backward)


def hstack(parts: list[Tensor]) -> Tensor:
    """Column-wise concatenation of (n, *) matrices."""
    out = np.concatenate([p.data for p in parts], axis=1)
    offsets = np.cumsum([0] + [p.data.shape[1] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._accumulate(g[:, lo:hi])

    return _make(out, tuple(parts), backward)


def vstack(parts: list[Tensor]) -> Tensor:
    """Row-wise concatenation (used to fuse per-gate weight matrices)."""
    out = np.concatenate([p.data for p in parts], axis=0)
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._accumulate(g[lo:hi])

    return _make(out, tuple(parts), backward)


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    """Contiguous column slice of a 2-D tensor."""
    out = x.data[:, lo:hi]

    def backward(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        x.grad[:, lo:hi] += g

    return _make(out, (x,), backward)


def rows(x: Tensor, idx) -> Tensor:
    """Gather rows by integer index; the backward pass scatter-adds."""
    idx = np.asarray(idx, dtype=np.intp)
    out = x.data[idx]

    if idx.size > 64:
        # sorted segment reduction beats np.add.at on larger gathers
        perm = np.argsort(idx, kind="stable")
        sorted_idx = idx[perm]
        starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
        dests = sorted_idx[starts]

        def backward(g):
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[dests] += np.add.reduceat(g[perm], starts, axis=0)

    else:

        def backward(g):
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, idx, g)

    return _make(out, (x,), backward)


def scatter_rows(x: Tensor, idx, n_rows: int) -> Tensor:
    """Place row i of x at position idx[i] of an (n_rows, m) zero matrix.
    Indices must be unique."""
    idx = np.asarray(idx, dtype=np.intp)
    out = np.zeros((n_rows, x.data.shape[1]))
    out[idx] = x.data

    def backward(g):
        x._accumulate(g[idx])

    return _make(out, (x,), backward)


def append_zero_rows(x: Tensor, k: int) -> Tensor:
    if k == 0:
        return x
    out = np.concatenate([x.data, np.zeros((k, x.data.shape[1]))], axis=0)
    n = x.data.shape[0]

    def backward(g):
        x._accumulate(g[:n])

    return _make(out, (x,), backward)


def flatten(x: Tensor) -> Tensor:
    out = x.data.reshape(-1)
    shape = x.data.shape

    def backward(g):
        x._accumulate(g.reshape(shape))

    return _make(out, (x,), backward)


def segment_sum(x: Tensor, seg, n_segments: int) -> Tensor:
    """Sum rows of x into their segment; empty segments stay zero."""
    seg = np.asarray(seg, dtype=np.intp)
    out = np.zeros((n_segments, x.data.shape[1]))
    np.add.at(out, seg, x.data)

    def backward(g):
        x._accumulate(g[seg])

    return _make(out, (x,), backward)


def segment_max(x: Tensor, seg, n_segments: int) -> Tensor:
    """Elementwise max of rows per segment; empty segments yield zero rows.
    Gradient flows to the first row attaining each maximum."""
    seg = np.asarray(seg, dtype=np.intp)
    m = x.data.shape[1]
    out = np.zeros((n_segments, m))
    first = {}
    for r, s in enumerate(seg):
        first.setdefault(int(s), []).append(r)
    for s, rws in first.items():
        out[s] = x.data[rws].max(axis=0)

    def backward(g):
        acc = np.zeros_like(x.data)
        for s, rws in first.items():
            block = x.data[rws]
            arg = block.argmax(axis=0)
            acc[np.asarray(rws)[arg], np.arange(m)] += g[s]
        x._accumulate(acc)

    return _make(out, (x,), backward)


def pick(x: Tensor, i: int) -> Tensor:
    """Scalar element of a 1-D tensor."""
    out = np.asarray(x.data[i])

    def backward(g):
        acc = np.zeros_like(x.data)
        acc[i] = g
        x._accumulate(acc)

    return _make(out, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())

    def backward(g):
        x._accumulate(np.full_like(x.data, float(g)))

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

class _WarnCounter:
    """Counts clamped cross-entropy evaluations (target probability ~ 0)."""

    def __init__(self):
        self.clamped = 0


ce_warnings = _WarnCounter()


def cross_entropy(probs: Tensor, target: int) -> Tensor:
    """-log p[target] for a probability vector; probabilities below 1e-12 are
    clamped (and counted) instead of producing infinities."""
    if probs.data.ndim != 1:
        raise ValueError("cross_entropy expects a 1-D probability vector")
    if not 0 <= target < probs.data.shape[0]:
        raise ValueError(f"target index {target} out of range")
    if probs.data[target] < _EPS_PROB:
        ce_warnings.clamped += 1
    p = clamp_min(pick(probs, target), _EPS_PROB)
    return mul(log(p), -1.0)


def cross_entropy_rows(probs: Tensor, targets) -> Tensor:
    """Per-row -log p[target] over (B, C) probabilities; returns a 1-D tensor."""
    targets = np.asarray(targets, dtype=np.intp)
    picked = probs.data[np.arange(probs.data.shape[0]), targets]
    ce_warnings.clamped += int(np.count_nonzero(picked < _EPS_PROB))
    p = clamp_min(pick_rows(probs, targets), _EPS_PROB)
    return mul(log(p), -1.0)


def l2_loss(a: Tensor, b: Tensor) -> Tensor:
    """Squared Euclidean norm of (a - b)."""
    d = sub(a, b)
    return sum_all(mul(d, d))
