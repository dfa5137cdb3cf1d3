"""
Training objective and evaluation metrics: the class-weighted asymmetric
multi-label AU loss, the regional combination cross-entropy, their weighted
sum, and frame-based F1.
"""

import csv
import os
from collections import OrderedDict, namedtuple

import numpy as np

from mdhr_lib.helpers.errors import DimensionError, DomainError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.tensor import ops

logger = setup_logger(__name__, "warning")

probability_epsilon = 1e-7
default_lambda = 0.01
lambda_sweep = (0.0, 0.0001, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5)
default_threshold = 0.5

metrics_columns = ("epoch", "au_id", "precision", "recall", "f1", "macro_f1")

# (active frames, inactive frames) per AU, from the published label distributions
BP4D_LABEL_COUNTS = OrderedDict([
    (1, (31042, 115805)), (2, (25110, 121737)), (4, (29755, 117092)),
    (6, (67676, 79171)), (7, (80616, 66231)), (10, (87270, 59577)),
    (12, (82530, 64317)), (14, (68375, 78472)), (15, (24869, 121978)),
    (17, (50406, 96441)), (23, (24288, 122559)), (24, (22229, 124618)),
])

DISFA_LABEL_COUNTS = OrderedDict([
    (1, (6506, 124308)), (2, (5644, 125170)), (4, (19933, 110881)),
    (6, (10327, 120487)), (9, (5473, 125341)), (12, (16851, 113963)),
    (25, (36247, 94567)), (26, (11533, 119281)),
])


def class_weights(active_counts, total_frames):
    """
    Inverse occurrence rate, normalized so the weights average to one:
    w_n = N * (1/r_n) / sum_i(1/r_i) with r_n = active_n / total.

    >>> class_weights([25, 75], 100)
    array([1.5, 0.5])
    """
    active = np.asarray(active_counts, dtype=np.float64)
    total = np.broadcast_to(np.asarray(total_frames, dtype=np.float64), active.shape)
    if active.ndim != 1 or not active.size:
        raise DimensionError("class_weights needs a non-empty 1-D list of counts")
    degenerate = (active <= 0) | (active >= total)
    if degenerate.any():
        raise DomainError("AU columns {} never or always occur".format(np.flatnonzero(degenerate).tolist()))
    inverse = total / active
    return len(active) * inverse / inverse.sum()

def class_weights_from_counts(label_counts, au_ids):
    """``label_counts`` maps AU -> (active, inactive), as in the presets."""
    missing = [au for au in au_ids if au not in label_counts]
    if missing:
        raise DomainError("no label counts for AUs {}".format(missing))
    active = [label_counts[au][0] for au in au_ids]
    total = [sum(label_counts[au]) for au in au_ids]
    return class_weights(active, total)

def class_weights_from_labels(labels, mask=None):
    """labels: [..., N] binary array over the training frames."""
    labels = np.asarray(labels)
    flat = labels.reshape(-1, labels.shape[-1]).astype(bool)
    if mask is not None:
        flat = flat[np.asarray(mask).reshape(-1).astype(bool)]
    return class_weights(flat.sum(axis=0), flat.shape[0])


def _frame_mask(mask, shape, dtype):
    if mask is None:
        return None, float(np.prod(shape))
    mask = np.asarray(mask, dtype=dtype)
    if mask.shape != shape:
        raise DimensionError("mask {} doesn't match frames {}".format(mask.shape, shape))
    count = float(mask.sum())
    if count == 0:
        raise DomainError("mask excludes every frame")
    return mask, count

def au_loss(P, Y, weights, mask=None):
    """
    -sum_n w_n [y log p + p (1 - y) log(1 - p)] per frame, averaged over the
    (unmasked) B*T frames. P is clamped to [1e-7, 1 - 1e-7] first.
    """
    Y = np.asarray(Y, dtype=P.dtype)
    weights = np.asarray(weights, dtype=P.dtype)
    if Y.shape != P.shape:
        raise DimensionError("labels {} don't match predictions {}".format(Y.shape, P.shape))
    if weights.shape != P.shape[-1:]:
        raise DimensionError("{} class weights for {} AUs".format(weights.shape[0] if weights.ndim else 0, P.shape[-1]))
    p = ops.clamp(P, probability_epsilon, 1 - probability_epsilon)
    positive = ops.mul(ops.log(p), Y)
    negative = ops.mul(ops.mul(p, ops.log(ops.sub(1.0, p))), 1 - Y)
    per_frame = ops.sum(ops.mul(ops.add(positive, negative), weights), axis=-1)
    frame_mask, count = _frame_mask(mask, P.shape[:-1], P.dtype)
    if frame_mask is not None:
        per_frame = ops.mul(per_frame, frame_mask)
    return ops.mul(ops.sum(per_frame), -1.0 / count)

def sub_loss(distributions, targets, mask=None):
    """
    Cross-entropy of every region's combination distribution [..., 2**N_sub]
    against the target indices [...], averaged over frames and summed over
    regions.
    """
    if not distributions:
        raise DomainError("sub_loss needs at least one region")
    total = None
    for name, dist in distributions.items():
        target = np.asarray(targets[name])
        if target.shape != dist.shape[:-1]:
            raise DimensionError("{} targets {} don't match distribution {}".format(name, target.shape, dist.shape))
        picked = ops.clamp(ops.pick(dist, target, axis=-1), probability_epsilon, 1.0)
        per_frame = ops.log(picked)
        frame_mask, count = _frame_mask(mask, target.shape, dist.dtype)
        if frame_mask is not None:
            per_frame = ops.mul(per_frame, frame_mask)
        term = ops.mul(ops.sum(per_frame), -1.0 / count)
        total = term if total is None else ops.add(total, term)
    return total

def total_loss(l_au, l_sub, lam=default_lambda):
    """L_AU + lambda * L_sub. Without a combination loss only L_AU is left."""
    if lam < 0:
        raise DomainError("lambda must be non-negative, got {}".format(lam))
    if l_sub is None or lam == 0:
        return l_au
    return ops.add(l_au, ops.mul(l_sub, lam))


F1Report = namedtuple("F1Report", ["precision", "recall", "f1", "macro_f1"])


class ConfusionCounts(object):
    """
    Per-AU true/false positive/negative frame counts. Counts from separate
    shards add up to the counts of their union.
    """

    def __init__(self, tp, fp, fn, tn):
        self.tp = np.asarray(tp, dtype=np.int64)
        self.fp = np.asarray(fp, dtype=np.int64)
        self.fn = np.asarray(fn, dtype=np.int64)
        self.tn = np.asarray(tn, dtype=np.int64)

    @classmethod
    def empty(cls, n):
        return cls(*[np.zeros(n, dtype=np.int64) for _ in range(4)])

    @classmethod
    def from_predictions(cls, P, Y, threshold=default_threshold, mask=None):
        P = np.asarray(getattr(P, "data", P))
        Y = np.asarray(Y).astype(bool)
        if P.shape != Y.shape:
            raise DimensionError("labels {} don't match predictions {}".format(Y.shape, P.shape))
        predicted = (P >= threshold).reshape(-1, P.shape[-1])
        truth = Y.reshape(-1, Y.shape[-1])
        if mask is not None:
            keep = np.asarray(mask).reshape(-1).astype(bool)
            if keep.shape[0] != predicted.shape[0]:
                raise DimensionError("mask covers {} frames, predictions {}".format(keep.shape[0], predicted.shape[0]))
            predicted, truth = predicted[keep], truth[keep]
        return cls((predicted & truth).sum(axis=0), (predicted & ~truth).sum(axis=0),
                   (~predicted & truth).sum(axis=0), (~predicted & ~truth).sum(axis=0))

    def __add__(self, other):
        if self.tp.shape != other.tp.shape:
            raise DimensionError("can't add counts over {} and {} AUs".format(self.tp.shape, other.tp.shape))
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def __eq__(self, other):
        return isinstance(other, ConfusionCounts) and all(
            np.array_equal(getattr(self, a), getattr(other, a)) for a in ("tp", "fp", "fn", "tn"))

    def report(self):
        """Per-AU precision/recall/F1 (0 where undefined) and the macro F1."""
        with np.errstate(divide="ignore", invalid="ignore"):
            precision = np.where(self.tp + self.fp > 0, self.tp / np.maximum(self.tp + self.fp, 1), 0.0)
            recall = np.where(self.tp + self.fn > 0, self.tp / np.maximum(self.tp + self.fn, 1), 0.0)
            both = precision + recall
            f1 = np.where(both > 0, 2 * precision * recall / np.where(both > 0, both, 1), 0.0)
        return F1Report(precision, recall, f1, float(f1.mean()) if f1.size else 0.0)

    def __repr__(self):
        return "ConfusionCounts(tp={}, fp={}, fn={}, tn={})".format(
            self.tp.tolist(), self.fp.tolist(), self.fn.tolist(), self.tn.tolist())


def f1_scores(P, Y, threshold=default_threshold, mask=None):
    """
    >>> f1_scores(np.array([[1.0], [1.0], [1.0], [0.0]]), np.array([[1], [1], [0], [1]])).f1
    array([0.66666667])
    """
    return ConfusionCounts.from_predictions(P, Y, threshold, mask).report()


def write_metrics(path, epoch, au_ids, report):
    """Appends one row per AU to a metrics CSV, writing the header on creation."""
    new = not os.path.exists(path)
    with open(path, "a", newline="") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(metrics_columns)
        for au, p, r, f1 in zip(au_ids, report.precision, report.recall, report.f1):
            writer.writerow([epoch, au, "{:.6f}".format(p), "{:.6f}".format(r), "{:.6f}".format(f1), "{:.6f}".format(report.macro_f1)])

def read_metrics(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
