"""
Dense tensors with reverse-mode automatic differentiation.

Every operation in ``ops`` returns a new ``Tensor``; when any of its inputs
requires a gradient, the output carries a ``Node`` that remembers the inputs
and the adjoint function. ``backward`` orders the graph reachable from a
scalar output into a ``Tape`` and replays the adjoints in reverse.
"""

import threading
from contextlib import contextmanager

import numpy as np

from mdhr_lib.helpers.errors import UsageError, ConfigError
from mdhr_lib.helpers.logger import setup_logger

logger = setup_logger(__name__, "warning")

supported_dtypes = {"float32": np.float32, "float64": np.float64}

# per-thread defaults, so tapes on separate threads never see each other's settings
_state = threading.local()


def get_default_dtype():
    return getattr(_state, "dtype", np.float64)

def set_default_dtype(name):
    if name not in supported_dtypes:
        raise ConfigError("precision", "expected one of {}, got {!r}".format(sorted(supported_dtypes), name))
    _state.dtype = supported_dtypes[name]

@contextmanager
def precision(name):
    """
    Switches the default dtype of newly created tensors for the current
    thread, restoring the previous one on exit.

    >>> with precision("float32"):
    ...     Tensor([1.0, 2.0]).dtype
    dtype('float32')
    >>> Tensor([1.0]).dtype
    dtype('float64')
    """
    previous = get_default_dtype()
    set_default_dtype(name)
    try:
        yield
    finally:
        _state.dtype = previous

def debug_checks_enabled():
    return getattr(_state, "debug", False)

@contextmanager
def debug_checks():
    """Turns on NaN assertions inside operations for the current thread."""
    previous = debug_checks_enabled()
    _state.debug = True
    try:
        yield
    finally:
        _state.debug = previous


class Node(object):
    """One executed operation: its name, the input tensors and the adjoint."""

    __slots__ = ("op", "inputs", "adjoint")

    def __init__(self, op, inputs, adjoint):
        self.op = op
        self.inputs = inputs
        self.adjoint = adjoint

    def __repr__(self):
        return "<Node {} ({} inputs)>".format(self.op, len(self.inputs))


class Tensor(object):
    """
    A dense n-dimensional array of floats that can take part in gradient
    computation. ``data`` is a numpy array; ``grad`` is allocated (zeroed) for
    tensors created with ``requires_grad=True`` and accumulates across
    ``backward`` calls until ``zero_grad`` is called.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.array(data, dtype=dtype or get_default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._node = None

    @classmethod
    def _wrap(cls, data, requires_grad=False, node=None):
        t = cls.__new__(cls)
        t.data = data
        t.requires_grad = requires_grad
        t.grad = None
        t._node = node
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._node is None

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self):
        return Tensor._wrap(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return "<Tensor shape={} dtype={}{}>".format(
            self.shape, self.dtype, " requires_grad" if self.requires_grad else "")

    def __len__(self):
        return self.shape[0]

    # operator sugar, all routed through ops so they land on the tape

    def __add__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.mul(other, self)

    def __neg__(self):
        from mdhr_lib.libs.tensor import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from mdhr_lib.libs.tensor import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from mdhr_lib.libs.tensor import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from mdhr_lib.libs.tensor import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from mdhr_lib.libs.tensor import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from mdhr_lib.libs.tensor import ops
        return ops.reduce("sum", self, axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from mdhr_lib.libs.tensor import ops
        return ops.reduce("mean", self, axis, keepdims=keepdims)


class Tape(object):
    """
    The operations needed to differentiate ``output``, in topological order:
    every tensor appears after all of its inputs. Built fresh for each
    backward pass from the graph hanging off the output, so there's no
    global recording state.
    """

    def __init__(self, records):
        self.records = records

    @classmethod
    def from_output(cls, output):
        order = []
        visited = set()
        # iterative post-order DFS - model graphs are deep enough to hit the recursion limit
        stack = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited or not tensor.requires_grad:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            if tensor._node is not None:
                for parent in reversed(tensor._node.inputs):
                    if parent.requires_grad and id(parent) not in visited:
                        stack.append((parent, False))
        return cls(order)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ops(self):
        return [t._node.op for t in self.records if t._node is not None]


def backward(output):
    """
    Populates ``grad`` of every leaf reachable from the scalar ``output``
    with d(output)/d(leaf). Calling it again adds to the existing grads.
    """
    if output.size != 1:
        raise UsageError("backward() needs a scalar output, got shape {}".format(output.shape))
    if not output.requires_grad:
        raise UsageError("backward() called on a tensor that doesn't require grad")
    tape = Tape.from_output(output)
    pending = {id(output): np.ones_like(output.data)}
    for tensor in reversed(tape.records):
        g = pending.pop(id(tensor), None)
        if g is None:
            continue
        node = tensor._node
        if node is None:
            if tensor.grad is None:
                tensor.grad = np.zeros_like(tensor.data)
            tensor.grad += g
            continue
        for parent, parent_grad in zip(node.inputs, node.adjoint(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if id(parent) in pending:
                pending[id(parent)] = pending[id(parent)] + parent_grad
            else:
                pending[id(parent)] = parent_grad
    return tape
