import math
from collections import OrderedDict

import numpy as np

from mdhr_lib.helpers.errors import NonFiniteError, UsageError
from mdhr_lib.helpers.logger import setup_logger

logger = setup_logger(__name__, "warning")


class OptimizerState(object):
    """First/second moments per named parameter plus the shared step count."""

    def __init__(self, named_parameters):
        self.m = OrderedDict()
        self.v = OrderedDict()
        for name, p in named_parameters:
            self.m[name] = np.zeros_like(p.data)
            self.v[name] = np.zeros_like(p.data)
        self.step = 0

    def state_dict(self):
        state = OrderedDict()
        for name in self.m:
            state["m." + name] = self.m[name]
            state["v." + name] = self.v[name]
        state["step"] = np.array([self.step], dtype=np.float64)
        return state

    def load_state_dict(self, state):
        for name in self.m:
            self.m[name] = np.asarray(state["m." + name], dtype=self.m[name].dtype).reshape(self.m[name].shape)
            self.v[name] = np.asarray(state["v." + name], dtype=self.v[name].dtype).reshape(self.v[name].shape)
        self.step = int(np.asarray(state["step"]).reshape(-1)[0])


def check_gradients(named_parameters):
    for name, p in named_parameters:
        if p.grad is None:
            raise UsageError("parameter {} has no gradient".format(name))
        if not np.isfinite(p.grad).all():
            bad = int((~np.isfinite(p.grad)).sum())
            raise NonFiniteError(name, "{} non-finite gradient entries in {}".format(bad, name))

def clip_gradients(named_parameters, max_norm):
    """Rescales all gradients together so their global L2 norm is at most ``max_norm``."""
    named_parameters = list(named_parameters)
    total = math.sqrt(sum(float((p.grad * p.grad).sum()) for _, p in named_parameters))
    if total > max_norm:
        scale = max_norm / total
        for _, p in named_parameters:
            p.grad *= scale
        logger.debug("Clipped gradient norm {:.4g} to {}".format(total, max_norm))
    return total


def adamw_step(named_parameters, state, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    One AdamW update with decoupled weight decay:
    theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta). Decay is
    skipped for parameters whose ``decay`` flag is off (biases, anchors).
    Gradients are checked first; nothing is updated if any is non-finite.
    """
    named_parameters = list(named_parameters)
    check_gradients(named_parameters)
    state.step += 1
    correction1 = 1 - beta1 ** state.step
    correction2 = 1 - beta2 ** state.step
    for name, p in named_parameters:
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + eps)
        if getattr(p, "decay", True) and weight_decay:
            update = update + weight_decay * p.data
        p.data -= (lr * update).astype(p.dtype)


def cosine_lr(epoch, total, lr0):
    """
    >>> cosine_lr(0, 200, 0.0001)
    0.0001
    >>> cosine_lr(100, 200, 0.0001)
    5e-05
    """
    if total <= 0:
        return lr0
    if not 0 <= epoch <= total:
        raise UsageError("epoch {} outside [0, {}]".format(epoch, total))
    return lr0 * 0.5 * (1 + math.cos(math.pi * epoch / total))
