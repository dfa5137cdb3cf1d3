import math

import numpy as np

from mdhr_lib.helpers.errors import CheckpointError
from mdhr_lib.libs.tensor import Tensor, ops
from mdhr_lib.libs.tensor.tensor import get_default_dtype


class Parameter(Tensor):
    """
    A trainable leaf tensor. ``decay`` tells the optimizer whether decoupled
    weight decay applies (weights yes; biases and anchors no).
    """

    def __init__(self, data, decay=True, dtype=None):
        super(Parameter, self).__init__(data, requires_grad=True, dtype=dtype)
        self.decay = decay


class Module(object):
    """
    Base class for anything that owns parameters. Attributes holding a
    ``Parameter``, another ``Module``, or a list/dict of those are found
    by ``named_parameters`` in attribute assignment order, which gives every
    parameter a stable dotted name.
    """

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            for item in _walk(prefix + name, value):
                yield item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        """
        Copies arrays from ``state`` into the parameters, keeping each
        parameter's dtype. Names and shapes have to match exactly.
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise CheckpointError("parameter names differ: missing {}, unexpected {}".format(missing, unexpected))
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise CheckpointError("parameter {} has shape {}, checkpoint has {}".format(name, p.shape, value.shape))
            p.data = value.astype(p.dtype)
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _walk(name, value):
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        for item in value.named_parameters(name + "."):
            yield item
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            for sub in _walk("{}.{}".format(name, i), item):
                yield sub
    elif isinstance(value, dict):
        for key, item in value.items():
            for sub in _walk("{}.{}".format(name, key), item):
                yield sub


def param_count(model):
    """Exact number of trainable scalars registered on ``model``."""
    return int(sum(p.size for p in model.parameters()))


def kaiming_uniform(rng, shape, fan_in):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())

def zeros(shape):
    return np.zeros(shape, dtype=get_default_dtype())


class Conv2d(Module):

    def __init__(self, rng, in_channels, out_channels, kernel_size, stride=1, padding=0, bias=True):
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(zeros(out_channels), decay=False) if bias else None

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Conv1d(Module):

    def __init__(self, rng, in_channels, out_channels, kernel_size, padding=0, bias=True):
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.weight = Parameter(kaiming_uniform(rng, (out_channels, in_channels, kernel_size), fan_in))
        self.bias = Parameter(zeros(out_channels), decay=False) if bias else None

    def forward(self, x):
        return ops.conv1d(x, self.weight, self.bias, padding=self.padding)


class Linear(Module):

    def __init__(self, rng, in_features, out_features, bias=True):
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features))
        self.bias = Parameter(zeros(out_features), decay=False) if bias else None

    def forward(self, x):
        return ops.matvec_linear(x, self.weight, self.bias)
