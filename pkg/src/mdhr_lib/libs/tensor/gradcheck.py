import numpy as np

from mdhr_lib.libs.tensor.tensor import Tensor, precision


def numerical_gradient(f, point, eps=1e-5):
    """Central finite differences of the scalar function ``f`` at ``point`` (64-bit)."""
    base = np.array(point, dtype=np.float64)
    grad = np.zeros_like(base)
    with precision("float64"):
        for idx in np.ndindex(base.shape):
            original = base[idx]
            base[idx] = original + eps
            f_plus = f(Tensor(base)).item()
            base[idx] = original - eps
            f_minus = f(Tensor(base)).item()
            base[idx] = original
            grad[idx] = (f_plus - f_minus) / (2 * eps)
    return grad

def analytic_gradient(f, point):
    with precision("float64"):
        x = Tensor(point, requires_grad=True)
        f(x).backward()
    return x.grad

def gradcheck(f, point, eps=1e-5):
    """
    Compares the tape gradient of the scalar function ``f`` at ``point`` with
    central finite differences and returns the largest relative error,
    |g_ad - g_fd| / max(1, |g_ad|, |g_fd|), over all coordinates.

    >>> from mdhr_lib.libs.tensor import ops
    >>> gradcheck(lambda x: ops.sum(x * x), np.array([1.0, 2.0])) < 1e-8
    True
    """
    g_ad = analytic_gradient(f, point)
    g_fd = numerical_gradient(f, point, eps)
    if g_ad.size == 0:
        return 0.0
    err = np.abs(g_ad - g_fd) / np.maximum(1.0, np.maximum(np.abs(g_ad), np.abs(g_fd)))
    return float(err.max())

def parameter_gradcheck(loss_fn, parameter, eps=1e-5, max_entries=None, rng=None):
    """
    Like ``gradcheck`` but for a parameter that ``loss_fn()`` closes over.
    With ``max_entries`` only that many randomly chosen coordinates are
    perturbed. The parameter's gradient is left zeroed.
    """
    parameter.zero_grad()
    loss_fn().backward()
    g_ad = parameter.grad.copy()
    parameter.zero_grad()
    coords = list(np.ndindex(parameter.shape))
    if max_entries is not None and len(coords) > max_entries:
        rng = rng if rng is not None else np.random.default_rng(0)
        coords = [coords[i] for i in rng.choice(len(coords), size=max_entries, replace=False)]
    worst = 0.0
    for idx in coords:
        original = parameter.data[idx]
        parameter.data[idx] = original + eps
        f_plus = loss_fn().item()
        parameter.data[idx] = original - eps
        f_minus = loss_fn().item()
        parameter.data[idx] = original
        g_fd = (f_plus - f_minus) / (2 * eps)
        worst = max(worst, abs(g_ad[idx] - g_fd) / max(1.0, abs(g_ad[idx]), abs(g_fd)))
    return float(worst)
