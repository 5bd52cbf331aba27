"""Small dense-tensor engine with reverse-mode automatic differentiation.

Graphs are built on the fly: every op returns a new :class:`Tensor` that keeps
references to its inputs and a closure mapping the output gradient to input
gradients. :func:`backward` walks the graph once in reverse topological order.

Broadcasting is deliberately not supported; binary ops require equal shapes
and callers tile explicitly with :func:`tile_rows`.
"""

import numpy as np

from .errors import IndexOutOfRange, InvalidArgument, ShapeError

DTYPE = np.float64
PROB_FLOOR = 1e-12


class Tensor:
    """A float64 array that can take part in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def is_finite(self):
        return bool(np.isfinite(self.data).all())

    def zero_grad(self):
        self.grad = None

    def numpy(self):
        return self.data.copy()

    def item(self):
        return float(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data, parents, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


# -- linear algebra ----------------------------------------------------------


def matmul(a, b):
    """Matrix product. Either operand may be 1-D (matrix-vector / vector-matrix)."""
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2) or (ad.ndim == 1 and bd.ndim == 1):
        raise ShapeError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[0]:
        raise ShapeError(f"matmul: inner dimensions {ad.shape} @ {bd.shape} disagree")

    def back(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return bd @ g, np.outer(ad, g)

    return _result(ad @ bd, (a, b), back)


def transpose(x):
    if x.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {x.data.shape}")
    return _result(x.data.T.copy(), (x,), lambda g: (g.T,))


# -- elementwise -------------------------------------------------------------


def add(a, b):
    _same_shape(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def add_n(xs):
    """Sum of equally-shaped tensors."""
    xs = tuple(xs)
    if not xs:
        raise InvalidArgument("add_n: no operands")
    for x in xs[1:]:
        _same_shape(xs[0], x, "add_n")
    total = xs[0].data.copy()
    for x in xs[1:]:
        total += x.data
    return _result(total, xs, lambda g: (g,) * len(xs))


def sub(a, b):
    _same_shape(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(x, factor):
    factor = float(factor)
    return _result(x.data * factor, (x,), lambda g: (g * factor,))


def one_minus(x):
    return _result(1.0 - x.data, (x,), lambda g: (-g,))


def tanh(x):
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x):
    # split by sign so exp never overflows
    xd = x.data
    e = np.exp(-np.abs(xd))
    y = np.where(xd >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


def sum_(x):
    shape = x.data.shape
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


# -- structural --------------------------------------------------------------


def concat(*xs):
    """Concatenate along the last axis."""
    if not xs:
        raise InvalidArgument("concat: no operands")
    lead = xs[0].data.shape[:-1]
    for x in xs:
        if x.data.ndim == 0 or x.data.shape[:-1] != lead:
            raise ShapeError("concat: operands must agree on all but the last axis")
    widths = [x.data.shape[-1] for x in xs]
    bounds = np.cumsum([0] + widths)

    def back(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return _result(np.concatenate([x.data for x in xs], axis=-1), tuple(xs), back)


def slice_(x, start, stop):
    """Slice ``[start, stop)`` of the last axis."""
    width = x.data.shape[-1]
    if not 0 <= start <= stop <= width:
        raise IndexOutOfRange(f"slice [{start}, {stop}) outside last axis of size {width}")
    shape = x.data.shape

    def back(g):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return (full,)

    return _result(x.data[..., start:stop].copy(), (x,), back)


def row(x, i):
    """Row ``i`` of a matrix as a vector."""
    if x.data.ndim != 2:
        raise ShapeError(f"row: expected a matrix, got shape {x.data.shape}")
    n = x.data.shape[0]
    if not 0 <= i < n:
        raise IndexOutOfRange(f"row {i} of matrix with {n} rows")
    shape = x.data.shape

    def back(g):
        full = np.zeros(shape)
        full[i] = g
        return (full,)

    return _result(x.data[i].copy(), (x,), back)


def stack(xs):
    """Stack equally-shaped vectors as the rows of a matrix."""
    xs = tuple(xs)
    if not xs:
        raise InvalidArgument("stack: no operands")
    for x in xs[1:]:
        _same_shape(xs[0], x, "stack")
    return _result(np.stack([x.data for x in xs]), xs, lambda g: tuple(g))


def tile_rows(v, n):
    """Repeat a vector as ``n`` identical rows."""
    if v.data.ndim != 1:
        raise ShapeError(f"tile_rows: expected a vector, got shape {v.data.shape}")
    return _result(np.tile(v.data, (n, 1)), (v,), lambda g: (g.sum(axis=0),))


def gather_rows(table, ids):
    """Rows ``ids`` of ``table``; the backward pass scatter-adds into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    n = table.data.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexOutOfRange(f"gather_rows: ids must lie in [0, {n})")
    shape = table.data.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, ids, g)
        return (full,)

    return _result(table.data[ids], (table,), back)


# -- probabilistic -----------------------------------------------------------


def softmax(x):
    if x.data.ndim != 1 or x.data.size == 0:
        raise ShapeError(f"softmax: expected a non-empty vector, got shape {x.data.shape}")
    e = np.exp(x.data - x.data.max())
    y = e / e.sum()

    def back(g):
        return (y * (g - np.dot(g, y)),)

    return _result(y, (x,), back)


def cross_entropy(probs, target):
    """Negative log-probability of ``target``; probabilities are floored at 1e-12."""
    n = probs.data.shape[0]
    if not 0 <= target < n:
        raise IndexOutOfRange(f"cross_entropy: target {target} outside [0, {n})")
    p = probs.data[target]
    clamped = p <= PROB_FLOOR
    value = -np.log(PROB_FLOOR if clamped else p)

    def back(g):
        grad = np.zeros(n)
        if not clamped:
            grad[target] = -float(g) / p
        return (grad,)

    return _result(np.asarray(value), (probs,), back)


def dropout(x, rate, training, rng=None):
    """Inverted dropout. ``rng`` is a numpy Generator or an integer seed."""
    if not 0.0 <= rate < 1.0:
        raise InvalidArgument(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return _result(x.data * mask, (x,), lambda g: (g * mask,))


# -- reverse pass ------------------------------------------------------------


def topological_order(root):
    """Nodes reachable from ``root``, each listed after all of its inputs."""
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def backward(loss):
    """Populate ``.grad`` of every differentiable tensor feeding ``loss``.

    Leaf tensors accumulate into ``.grad`` across calls until cleared with
    :func:`zero_grads`; intermediate tensors receive a fresh gradient.
    """
    if loss.data.size != 1 or loss.data.ndim != 0:
        raise InvalidArgument(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    pending = {id(loss): np.ones(())}
    for node in reversed(topological_order(loss)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if not node._parents:
            if node.grad is None:
                node.grad = np.array(g, dtype=DTYPE)
            else:
                node.grad += g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            prev = pending.get(key)
            pending[key] = pg if prev is None else prev + pg


def zero_grads(tensors):
    for t in tensors:
        t.grad = None
