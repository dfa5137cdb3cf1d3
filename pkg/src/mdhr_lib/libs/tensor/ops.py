"""
The operator set the model is built from. Each function computes its result
with numpy and, if any input requires a gradient, attaches the adjoint that
maps the output gradient back onto the inputs.

Conventions: convolutions are cross-correlations (no kernel flip); ReLU and
LeakyReLU take subgradient 0 at their kink; broadcasting follows numpy's
singleton-expansion rules and gradients are summed back over expanded axes.
"""

import numpy as np

from mdhr_lib.helpers.errors import DimensionError, DomainError, UsageError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.tensor.tensor import Tensor, Node, debug_checks_enabled

logger = setup_logger(__name__, "warning")


def _as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor._wrap(np.asarray(value, dtype=dtype))

def _result(op, data, inputs, adjoint):
    requires_grad = any(t.requires_grad for t in inputs)
    node = Node(op, inputs, adjoint) if requires_grad else None
    return Tensor._wrap(data, requires_grad, node)

def _check_finite(op, *arrays):
    if debug_checks_enabled():
        for a in arrays:
            assert not np.isnan(a).any(), "{}: NaN in input".format(op)

def broadcast_shape(a_shape, b_shape):
    """
    >>> broadcast_shape((3, 7, 7), (7, 7))
    (3, 7, 7)
    >>> broadcast_shape((2, 3), (4,))
    Traceback (most recent call last):
    ...
    mdhr_lib.helpers.errors.DimensionError: shapes (2, 3) and (4,) don't broadcast
    """
    try:
        return tuple(np.broadcast_shapes(tuple(a_shape), tuple(b_shape)))
    except ValueError:
        raise DimensionError("shapes {} and {} don't broadcast".format(tuple(a_shape), tuple(b_shape)))

def unbroadcast(grad, shape):
    """Sums ``grad`` over the axes that broadcasting expanded to reach it from ``shape``."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise

def add(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    broadcast_shape(a.shape, b.shape)
    def adjoint(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)
    return _result("add", a.data + b.data, (a, b), adjoint)

def sub(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    broadcast_shape(a.shape, b.shape)
    def adjoint(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)
    return _result("sub", a.data - b.data, (a, b), adjoint)

def mul(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    broadcast_shape(a.shape, b.shape)
    def adjoint(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)
    return _result("mul", a.data * b.data, (a, b), adjoint)

def neg(x):
    return _result("neg", -x.data, (x,), lambda g: (-g,))

def relu(x):
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))

def leaky_relu(x, slope=0.2):
    slopes = np.where(x.data > 0, 1.0, np.where(x.data < 0, slope, 0.0)).astype(x.dtype)
    out = np.where(x.data > 0, x.data, slope * x.data)
    return _result("leaky_relu", out, (x,), lambda g: (g * slopes,))

def elu(x, alpha=1.0):
    positive = x.data > 0
    expx = np.exp(np.minimum(x.data, 0))
    out = np.where(positive, x.data, alpha * (expx - 1))
    deriv = np.where(positive, 1.0, alpha * expx)
    return _result("elu", out, (x,), lambda g: (g * deriv,))

def log(x):
    _check_finite("log", x.data)
    if (x.data <= 0).any():
        raise DomainError("log of non-positive value (min {})".format(x.data.min()))
    return _result("log", np.log(x.data), (x,), lambda g: (g / x.data,))

def clamp(x, low, high):
    """Limits values to [low, high]; the gradient only flows where no clipping happened."""
    inside = (x.data >= low) & (x.data <= high)
    return _result("clamp", np.clip(x.data, low, high), (x,), lambda g: (g * inside,))

def l2_normalize(x, axis=-1):
    """
    Divides by the L2 norm along ``axis``. Vectors of norm zero map to zero,
    with zero gradient.

    >>> l2_normalize(Tensor([3.0, 4.0])).data
    array([0.6, 0.8])
    """
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    nonzero = norm > 0
    safe = np.where(nonzero, norm, 1)
    y = np.where(nonzero, x.data / safe, 0)
    def adjoint(g):
        gx = (g - y * (g * y).sum(axis=axis, keepdims=True)) / safe
        return (np.where(nonzero, gx, 0),)
    return _result("l2_normalize", y, (x,), adjoint)

elementwise_kinds = {
    "add": add, "sub": sub, "mul": mul, "relu": relu, "leaky_relu": leaky_relu,
    "elu": elu, "log": log, "l2_normalize": l2_normalize,
}

def elementwise(kind, *operands, **kwargs):
    """Dispatches ``kind`` (one of ``elementwise_kinds``) on the operands."""
    if kind not in elementwise_kinds:
        raise UsageError("unknown elementwise kind {!r}".format(kind))
    return elementwise_kinds[kind](*operands, **kwargs)


# softmax

def softmax(x, axis=-1, mask=None):
    """
    Numerically stable softmax along ``axis``. With a boolean ``mask``,
    entries where the mask is False get probability 0 and the remaining ones
    are renormalized; every slice along ``axis`` must keep at least one entry.

    >>> softmax(Tensor([1.0, 1.0, 1.0, 1.0])).data
    array([0.25, 0.25, 0.25, 0.25])
    """
    _check_finite("softmax", x.data)
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
        if not mask.any(axis=axis).all():
            raise DomainError("softmax mask leaves an empty slice along axis {}".format(axis))
        z = np.where(mask, z, -np.inf)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    if mask is not None:
        e = np.where(mask, e, 0)
    y = e / e.sum(axis=axis, keepdims=True)
    def adjoint(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
    return _result("softmax", y, (x,), adjoint)


# reductions

def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    axes = []
    for a in axis:
        if not -ndim <= a < ndim:
            raise DimensionError("axis {} out of range for rank {}".format(a, ndim))
        axes.append(a % ndim)
    return tuple(sorted(set(axes)))

def reduce(kind, x, axis=None, keepdims=False):
    """
    ``kind`` is "sum", "mean", or "global_avg_pool_2d" (mean over the last
    two axes, e.g. [C,H,W] -> [C]).

    >>> reduce("global_avg_pool_2d", Tensor([[[1.0, 2.0], [3.0, 4.0]]])).data
    array([2.5])
    """
    if kind == "global_avg_pool_2d":
        if x.ndim < 2:
            raise DimensionError("global average pooling needs at least 2 axes")
        return reduce("mean", x, (-2, -1))
    if kind not in ("sum", "mean"):
        raise UsageError("unknown reduction {!r}".format(kind))
    axes = _normalize_axes(axis, x.ndim)
    count = 1
    for a in axes:
        count *= x.shape[a]
    if count == 0:
        raise DomainError("empty reduction over axes {} of shape {}".format(axes, x.shape))
    out = x.data.sum(axis=axes, keepdims=keepdims)
    if kind == "mean":
        out = out / count
    scale = 1.0 if kind == "sum" else 1.0 / count
    def adjoint(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g * scale, x.shape).astype(x.dtype),)
    return _result(kind, np.asarray(out, dtype=x.dtype), (x,), adjoint)

def sum(x, axis=None, keepdims=False):
    return reduce("sum", x, axis, keepdims)

def mean(x, axis=None, keepdims=False):
    return reduce("mean", x, axis, keepdims)

def global_avg_pool_2d(x):
    return reduce("global_avg_pool_2d", x)


# shapes

def reshape(x, shape):
    original = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError("can't reshape {} into {}".format(original, shape))
    return _result("reshape", out, (x,), lambda g: (g.reshape(original),))

def transpose(x, axes=None):
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result("transpose", x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))

def _is_basic_index(index):
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)

def getitem(x, index):
    out = x.data[index]
    basic = _is_basic_index(index)
    def adjoint(g):
        gx = np.zeros_like(x.data)
        if basic:
            gx[index] += g
        else:
            np.add.at(gx, index, g)
        return (gx,)
    return _result("getitem", np.array(out), (x,), adjoint)

def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise UsageError("concat of an empty list")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError("concat: {}".format(e))
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    def adjoint(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _result("concat", out, tuple(tensors), adjoint)

def stack(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise UsageError("stack of an empty list")
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError("stack: {}".format(e))
    def adjoint(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return _result("stack", out, tuple(tensors), adjoint)

def pick(x, index, axis=-1):
    """
    Selects one entry per slice along ``axis``: ``index`` has the shape of
    ``x`` without that axis.
    """
    index = np.asarray(index)
    n = x.shape[axis]
    if index.size and (index.min() < 0 or index.max() >= n):
        raise DomainError("pick index out of range [0, {})".format(n))
    expanded = np.expand_dims(index, axis)
    try:
        out = np.take_along_axis(x.data, expanded, axis=axis)
    except (ValueError, IndexError) as e:
        raise DimensionError("pick: {}".format(e))
    def adjoint(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, expanded, np.expand_dims(g, axis), axis=axis)
        return (gx,)
    return _result("pick", np.squeeze(out, axis=axis), (x,), adjoint)


# linear algebra

def matvec_linear(x, weight, bias=None):
    """
    Affine map over the trailing axis: x[..., din] -> x @ weight.T + bias.

    >>> matvec_linear(Tensor([2.0, 3.0]), Tensor([[1.0, 1.0]]), Tensor([1.0])).data
    array([6.])
    """
    if weight.ndim != 2:
        raise DimensionError("linear weight must be 2-D, got shape {}".format(weight.shape))
    dout, din = weight.shape
    if x.shape[-1] != din:
        raise DimensionError("linear expects trailing extent {}, got shape {}".format(din, x.shape))
    if bias is not None and bias.shape != (dout,):
        raise DimensionError("linear bias must have shape ({},), got {}".format(dout, bias.shape))
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)
    def adjoint(g):
        g2 = g.reshape(-1, dout)
        x2 = x.data.reshape(-1, din)
        grads = [g @ weight.data, g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)
    return _result("linear", out, inputs, adjoint)

linear = matvec_linear

def matmul(a, b):
    """Batched matrix product over the last two axes."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul: can't multiply {} by {}".format(a.shape, b.shape))
    broadcast_shape(a.shape[:-2], b.shape[:-2])
    def adjoint(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)
    return _result("matmul", a.data @ b.data, (a, b), adjoint)


# convolutions

def conv_output_size(size, kernel, stride, padding):
    """
    >>> conv_output_size(112, 3, 4, 1)
    28
    """
    return (size + 2 * padding - kernel) // stride + 1

def conv2d(input, kernel, bias=None, stride=1, padding=0):
    """
    2-D cross-correlation of input [B,C,H,W] with kernel [Cout,C,kh,kw].

    >>> conv2d(Tensor([[[[1.0, 2.0], [3.0, 4.0]]]]), Tensor([[[[2.0]]]])).data[0, 0]
    array([[2., 4.],
           [6., 8.]])
    """
    if input.ndim != 4 or kernel.ndim != 4:
        raise DimensionError("conv2d expects 4-D input and kernel, got {} and {}".format(input.shape, kernel.shape))
    if stride < 1 or padding < 0:
        raise UsageError("conv2d needs stride >= 1 and padding >= 0")
    B, C, H, W = input.shape
    Cout, Ck, kh, kw = kernel.shape
    if C != Ck:
        raise DimensionError("conv2d: input has {} channels, kernel expects {}".format(C, Ck))
    if H + 2 * padding < kh or W + 2 * padding < kw:
        raise DimensionError("conv2d: kernel {}x{} larger than padded input {}x{}".format(kh, kw, H + 2 * padding, W + 2 * padding))
    if bias is not None and bias.shape != (Cout,):
        raise DimensionError("conv2d bias must have shape ({},), got {}".format(Cout, bias.shape))
    Ho = conv_output_size(H, kh, stride, padding)
    Wo = conv_output_size(W, kw, stride, padding)
    x = input.data
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    w = kernel.data
    h_span = stride * (Ho - 1) + 1
    w_span = stride * (Wo - 1) + 1

    # one matrix product per kernel tap keeps the working set at input size
    out = np.zeros((B, Ho, Wo, Cout), dtype=np.result_type(x, w))
    for i in range(kh):
        for j in range(kw):
            patch = x[:, :, i:i + h_span:stride, j:j + w_span:stride]
            out += np.tensordot(patch, w[:, :, i, j], axes=([1], [1]))
    out = out.transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    inputs = (input, kernel) if bias is None else (input, kernel, bias)
    def adjoint(g):
        gx = np.zeros_like(x)
        gw = np.zeros_like(w)
        g_last = g.transpose(0, 2, 3, 1)
        for i in range(kh):
            for j in range(kw):
                patch = x[:, :, i:i + h_span:stride, j:j + w_span:stride]
                gw[:, :, i, j] = np.tensordot(g, patch, axes=([0, 2, 3], [0, 2, 3]))
                gx[:, :, i:i + h_span:stride, j:j + w_span:stride] += \
                    np.tensordot(g_last, w[:, :, i, j], axes=([3], [0])).transpose(0, 3, 1, 2)
        if padding:
            gx = gx[:, :, padding:padding + H, padding:padding + W]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)
    return _result("conv2d", out, inputs, adjoint)

def conv1d(input, kernel, bias=None, padding=0):
    """
    1-D cross-correlation along the last axis of input [B,Cin,T] with
    kernel [Cout,Cin,k], stride 1.

    >>> conv1d(Tensor([[[1.0, 2.0, 3.0, 4.0]]]), Tensor([[[1.0, 1.0]]])).data
    array([[[3., 5., 7.]]])
    """
    if input.ndim != 3 or kernel.ndim != 3:
        raise DimensionError("conv1d expects 3-D input and kernel, got {} and {}".format(input.shape, kernel.shape))
    if padding < 0:
        raise UsageError("conv1d needs padding >= 0")
    B, C, T = input.shape
    Cout, Ck, k = kernel.shape
    if C != Ck:
        raise DimensionError("conv1d: input has {} channels, kernel expects {}".format(C, Ck))
    if T + 2 * padding < k:
        raise DimensionError("conv1d: kernel {} longer than padded input {}".format(k, T + 2 * padding))
    if bias is not None and bias.shape != (Cout,):
        raise DimensionError("conv1d bias must have shape ({},), got {}".format(Cout, bias.shape))
    To = T + 2 * padding - k + 1
    x = input.data
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    w = kernel.data
    out = np.zeros((B, To, Cout), dtype=np.result_type(x, w))
    for i in range(k):
        out += np.tensordot(x[:, :, i:i + To], w[:, :, i], axes=([1], [1]))
    out = out.transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    inputs = (input, kernel) if bias is None else (input, kernel, bias)
    def adjoint(g):
        gx = np.zeros_like(x)
        gw = np.zeros_like(w)
        g_last = g.transpose(0, 2, 1)
        for i in range(k):
            gw[:, :, i] = np.tensordot(g, x[:, :, i:i + To], axes=([0, 2], [0, 2]))
            gx[:, :, i:i + To] += np.tensordot(g_last, w[:, :, i], axes=([2], [0])).transpose(0, 2, 1)
        if padding:
            gx = gx[:, :, padding:padding + T]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)
    return _result("conv1d", out, inputs, adjoint)
