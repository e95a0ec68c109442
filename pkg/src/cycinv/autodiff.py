"""Reverse-mode automatic differentiation over dense float tensors.

Tensors are C-contiguous NumPy arrays (float32 for model math; graphs may be
built in float64, which the numeric side of :func:`grad_check` relies on).
Graph nodes record their construction order, which is a valid topological
order, so :func:`backward` is a single reverse sweep that runs each node's
backward rule exactly once. There is no implicit broadcasting: elementwise
ops require equal shapes, and the only "broadcasting" op is the explicit
:func:`bias_add` used for affine layers.
"""

import itertools

import numpy as np

from . import backend

_ids = itertools.count()


def build(shape, values):
    """Construct a float32 tensor from explicit values; length must match shape."""
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ValueError(f"shape extents must be positive, got {shape}")
    arr = np.asarray(values, dtype=np.float32).reshape(-1)
    n = int(np.prod(shape))
    if arr.size != n:
        raise ValueError(f"got {arr.size} values for shape {shape} ({n} elements)")
    return np.ascontiguousarray(arr.reshape(shape))


def zeros(shape):
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ValueError(f"shape extents must be positive, got {shape}")
    return np.zeros(shape, dtype=np.float32)


def randn(shape, seed):
    """Standard-normal tensor from a fresh Philox stream keyed by seed."""
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ValueError(f"shape extents must be positive, got {shape}")
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return gen.standard_normal(shape, dtype=np.float32)


class Node:
    """One tape entry: cached forward value plus the backward rule that
    scatters the accumulated output gradient to the parents."""

    def __init__(self, value, parents=(), op="const", bw=None):
        self.value = value
        self.parents = parents
        self.op = op
        self.grad = None
        self._bw = bw
        self._id = next(_ids)
        self._backward_runs = 0

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def is_leaf(self):
        return not self.parents

    @property
    def trainable(self):
        return False

    def __repr__(self):
        return f"<{type(self).__name__} {self.op} shape={self.value.shape}>"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return mul(self, other)
        return scalar_mul(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Variable(Node):
    """Trainable leaf; the only kind of node that keeps its gradient."""

    def __init__(self, value, name=None):
        value = np.ascontiguousarray(value)
        if value.dtype not in (np.float32, np.float64):
            value = value.astype(np.float32)
        super().__init__(value, op="variable")
        self.name = name

    @property
    def trainable(self):
        return True


def constant(value, dtype=np.float32):
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim and not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    return Node(arr, op="const")


def detach(node):
    """Cut the graph: a constant carrying the node's current value."""
    return Node(node.value, op="detach")


def _accum(node, g):
    if node.is_leaf and not node.trainable:
        return
    if g.dtype != node.value.dtype:
        g = g.astype(node.value.dtype)
    if node.grad is None:
        node.grad = np.array(g)  # own the buffer; contributions may alias
    else:
        node.grad += g


def _common(values):
    dt = np.result_type(*[v.dtype for v in values])
    return [v if v.dtype == dt else v.astype(dt) for v in values]


def _check_same_shape(a, b, op):
    if a.value.shape != b.value.shape:
        raise ValueError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


def add(a, b):
    _check_same_shape(a, b, "add")
    va, vb = _common([a.value, b.value])

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return Node(va + vb, (a, b), "add", bw)


def sub(a, b):
    _check_same_shape(a, b, "sub")
    va, vb = _common([a.value, b.value])

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return Node(va - vb, (a, b), "sub", bw)


def mul(a, b):
    _check_same_shape(a, b, "mul")
    va, vb = _common([a.value, b.value])

    def bw(g):
        _accum(a, g * vb)
        _accum(b, g * va)

    return Node(va * vb, (a, b), "mul", bw)


def scalar_mul(a, k):
    k = float(k)
    kk = np.asarray(k, dtype=a.value.dtype)

    def bw(g):
        _accum(a, g * kk)

    return Node(a.value * kk, (a,), "scalar_mul", bw)


def bias_add(a, b):
    """Add a length-n bias row-wise to a [B, n] matrix (explicit, not implicit
    broadcasting); the bias gradient is the column sum."""
    if a.value.ndim != 2 or b.value.ndim != 1 or a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"bias_add: incompatible shapes {a.value.shape}, {b.value.shape}")
    va, vb = _common([a.value, b.value])

    def bw(g):
        _accum(a, g)
        _accum(b, g.sum(axis=0))

    return Node(va + vb[None, :], (a, b), "bias_add", bw)


def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError("matmul requires 2-D operands")
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul: inner dims {a.value.shape} x {b.value.shape}")
    va, vb = _common([a.value, b.value])

    def bw(g):
        _accum(a, g @ vb.T)
        _accum(b, va.T @ g)

    return Node(va @ vb, (a, b), "matmul", bw)


def _flat(arr):
    return np.ascontiguousarray(arr).reshape(-1)


def _unary_kernel(a, op, fwd, bwd, cache_output):
    """Elementwise op through the kernel backend; kernels see 1-D views."""
    x = _flat(a.value)
    y = fwd(x)

    cached = y if cache_output else x

    def bw(g):
        _accum(a, bwd(cached, _flat(g)).reshape(a.value.shape))

    return Node(y.reshape(a.value.shape), (a,), op, bw)


def leaky_relu(a, slope=0.2):
    k = backend.kernels
    x = _flat(a.value)
    y = k.leaky_relu_fwd(x, slope)

    def bw(g):
        _accum(a, k.leaky_relu_bwd(x, _flat(g), slope).reshape(a.value.shape))

    return Node(y.reshape(a.value.shape), (a,), "leaky_relu", bw)


def sigmoid(a):
    k = backend.kernels
    return _unary_kernel(a, "sigmoid", k.sigmoid_fwd, k.sigmoid_bwd, cache_output=True)


def tanh(a):
    k = backend.kernels
    return _unary_kernel(a, "tanh", k.tanh_fwd, k.tanh_bwd, cache_output=True)


def exp(a):
    k = backend.kernels
    return _unary_kernel(a, "exp", k.exp_fwd, k.exp_bwd, cache_output=True)


def log(a):
    if not np.all(a.value > 0):
        raise ValueError("log requires strictly positive inputs")
    k = backend.kernels
    return _unary_kernel(a, "log", k.log_fwd, k.log_bwd, cache_output=False)


def sum(a):  # noqa: A001 - mirrors the op vocabulary
    total = np.sum(a.value, dtype=np.float64)

    def bw(g):
        _accum(a, np.full(a.value.shape, float(g), dtype=a.value.dtype))

    return Node(np.asarray(total, dtype=a.value.dtype), (a,), "sum", bw)


def mean(a):
    size = a.value.size
    total = np.sum(a.value, dtype=np.float64) / size

    def bw(g):
        _accum(a, np.full(a.value.shape, float(g) / size, dtype=a.value.dtype))

    return Node(np.asarray(total, dtype=a.value.dtype), (a,), "mean", bw)


def concat(a, b, axis):
    sa, sb = a.value.shape, b.value.shape
    if len(sa) != len(sb) or any(i != axis and sa[i] != sb[i] for i in range(len(sa))):
        raise ValueError(f"concat: incompatible shapes {sa}, {sb} along axis {axis}")
    va, vb = _common([a.value, b.value])
    split = sa[axis]

    def bw(g):
        ga, gb = np.split(g, [split], axis=axis)
        _accum(a, ga)
        _accum(b, gb)

    return Node(np.concatenate([va, vb], axis=axis), (a, b), "concat", bw)


def reshape(a, shape):
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.value.size:
        raise ValueError(f"reshape: {a.value.shape} -> {shape} changes element count")

    def bw(g):
        _accum(a, g.reshape(a.value.shape))

    return Node(a.value.reshape(shape), (a,), "reshape", bw)


def slice_cols(a, start, stop):
    """Contiguous column slice of a [B, n] matrix; backward scatters into zeros."""
    if a.value.ndim != 2:
        raise ValueError("slice_cols requires a 2-D node")
    n = a.value.shape[1]
    if not (0 <= start < stop <= n):
        raise ValueError(f"slice_cols: bad range [{start}:{stop}] for width {n}")

    def bw(g):
        full = np.zeros(a.value.shape, dtype=g.dtype)
        full[:, start:stop] = g
        _accum(a, full)

    return Node(np.ascontiguousarray(a.value[:, start:stop]), (a,), "slice_cols", bw)


def _check_logits_targets(logits, targets):
    if logits.value.ndim != 2:
        raise ValueError("logits must be [B, C]")
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    b, c = logits.value.shape
    if targets.shape[0] != b:
        raise ValueError(f"expected {b} target indices, got {targets.shape[0]}")
    if targets.min() < 0 or targets.max() >= c:
        raise ValueError(f"target index out of range for {c} classes")
    return targets


def softmax_cross_entropy(logits, target_index):
    """Mean over the batch of -log softmax(logits)[target], max-stabilized."""
    targets = _check_logits_targets(logits, target_index)
    k = backend.kernels
    loss, probs = k.softmax_ce_fwd(np.ascontiguousarray(logits.value), targets)

    def bw(g):
        _accum(logits, k.softmax_ce_bwd(probs, targets, float(g)))

    return Node(np.asarray(loss, dtype=logits.value.dtype), (logits,), "softmax_ce", bw)


def log_softmax_prob(logits, target_index):
    """Per-row log-probability of the chosen class; returns a [B] node."""
    targets = _check_logits_targets(logits, target_index)
    k = backend.kernels
    vals, probs = k.logsoftmax_pick_fwd(np.ascontiguousarray(logits.value), targets)

    def bw(g):
        _accum(logits, k.logsoftmax_pick_bwd(probs, targets, np.ascontiguousarray(g)))

    return Node(np.asarray(vals, dtype=logits.value.dtype), (logits,), "log_softmax_prob", bw)


def _as_batch_matrix(arr):
    b = arr.shape[0] if arr.ndim > 1 else 1
    return np.ascontiguousarray(arr).reshape(b, -1)


def mse(a, b):
    """Sum of squared differences divided by the batch (leading) dimension."""
    _check_same_shape(a, b, "mse")
    k = backend.kernels
    va, vb = _common([a.value, b.value])
    ma, mb = _as_batch_matrix(va), _as_batch_matrix(vb)
    loss = k.mse_fwd(ma, mb)

    def bw(g):
        d = k.mse_bwd(ma, mb, float(g)).reshape(a.value.shape)
        _accum(a, d)
        _accum(b, -d)

    return Node(np.asarray(loss, dtype=va.dtype), (a, b), "mse", bw)


def l1(a, b):
    """Sum of absolute differences divided by the batch (leading) dimension."""
    _check_same_shape(a, b, "l1")
    k = backend.kernels
    va, vb = _common([a.value, b.value])
    ma, mb = _as_batch_matrix(va), _as_batch_matrix(vb)
    loss = k.l1_fwd(ma, mb)

    def bw(g):
        d = k.l1_bwd(ma, mb, float(g)).reshape(a.value.shape)
        _accum(a, d)
        _accum(b, -d)

    return Node(np.asarray(loss, dtype=va.dtype), (a, b), "l1", bw)


def _reachable(loss):
    seen = {id(loss): loss}
    stack = [loss]
    while stack:
        node = stack.pop()
        for p in node.parents:
            if id(p) not in seen:
                seen[id(p)] = p
                stack.append(p)
    return list(seen.values())


def backward(loss, wrt=None):
    """Reverse sweep from a single-element node; fills .grad on trainable leaves.

    wrt, when given, is an iterable of Variables: gradients of all other
    leaves are cleared before returning, so e.g. a generator loss can be
    backpropagated through the discriminator without leaving gradients on
    the discriminator's parameters.
    """
    if loss.value.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.value.shape}")
    nodes = _reachable(loss)
    for n in nodes:
        n.grad = None
        n._backward_runs = 0
    loss.grad = np.ones_like(loss.value)
    for n in sorted(nodes, key=lambda n: n._id, reverse=True):
        if n.grad is None:
            continue
        if n._bw is not None:
            n._bw(n.grad)
            n._backward_runs += 1
        if not n.is_leaf:
            n.grad = None  # intermediates are not needed after their sweep
    if wrt is not None:
        wanted = {id(v) for v in wrt}
        for n in nodes:
            if n.is_leaf and id(n) not in wanted:
                n.grad = None


def grad_check(f, x, eps=1e-3):
    """Max relative error between the analytic gradient of f at x and central
    finite differences.

    f builds a scalar graph from a single leaf Variable. The analytic side
    runs in the tensor dtype (float32); the numeric side re-evaluates f on
    float64 copies of x so the difference quotient is not drowned by
    single-precision rounding. Relative error per coordinate is
    |a - n| / max(1e-8, |a| + |n|).
    """
    if not (1e-5 <= eps <= 1e-2):
        raise ValueError(f"eps must be in [1e-5, 1e-2], got {eps}")
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float32))
    v = Variable(x)
    loss = f(v)
    backward(loss)
    analytic = (
        np.zeros(x.size, dtype=np.float64)
        if v.grad is None
        else v.grad.astype(np.float64).reshape(-1)
    )

    x64 = x.astype(np.float64)
    numeric = np.empty(x.size, dtype=np.float64)
    for i in range(x.size):
        xp = x64.copy()
        xp.flat[i] += eps
        fp = float(f(Variable(xp)).value)
        xm = x64.copy()
        xm.flat[i] -= eps
        fm = float(f(Variable(xm)).value)
        numeric[i] = (fp - fm) / (2.0 * eps)

    rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(rel.max()) if rel.size else 0.0
