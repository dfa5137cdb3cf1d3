"""
Per-AU temporal head: a channel-wise temporal convolution over each AU's
node sequence, then a cosine similarity against a learned anchor vector.
"""

from collections import OrderedDict

from mdhr_lib.helpers.errors import DimensionError, UsageError
from mdhr_lib.libs.model.module import Module, Parameter, Conv1d
from mdhr_lib.libs.tensor import ops

temporal_kernel = 5
anchor_init_bound = 0.1


def sc_predict(sequence, anchor):
    """
    Cosine similarity of ReLU(sequence) and ReLU(anchor) over the last axis.
    A rectified vector that is all zero gives probability 0. The result is
    clamped to [0, 1] since rounding can push aligned vectors just past 1.

    >>> from mdhr_lib.libs.tensor import Tensor
    >>> round(sc_predict(Tensor([3.0, 4.0, -1.0]), Tensor([3.0, 4.0, -9.0])).item(), 6)
    1.0
    """
    v = ops.l2_normalize(ops.relu(sequence), axis=-1)
    s = ops.l2_normalize(ops.relu(anchor), axis=-1)
    return ops.clamp(ops.sum(ops.mul(v, s), axis=-1), 0.0, 1.0)


class TemporalHead(Module):

    def __init__(self, au_ids, width, rng, tcn=True):
        self.width = width
        self.au_ids = list(au_ids)
        self.convs = OrderedDict()
        if tcn:
            for au in self.au_ids:
                self.convs[str(au)] = Conv1d(rng, width, width, temporal_kernel, padding=temporal_kernel // 2)
        anchors = rng.uniform(-anchor_init_bound, anchor_init_bound, size=(len(self.au_ids), width))
        self.anchors = Parameter(anchors, decay=False)

    @property
    def N(self):
        return len(self.au_ids)

    def tcn_forward(self, sequence, n):
        """
        sequence: [T, b] or [B, T, b] for AU index ``n``; returns the same
        shape. Without a TCN the sequence passes through.
        """
        if sequence.ndim not in (2, 3):
            raise DimensionError("tcn_forward expects [T, b] or [B, T, b], got {}".format(sequence.shape))
        if sequence.shape[-2] < 1:
            raise UsageError("tcn_forward needs at least one frame")
        if sequence.shape[-1] != self.width:
            raise DimensionError("sequence width {} != {}".format(sequence.shape[-1], self.width))
        if not self.convs:
            return sequence
        batched = sequence.ndim == 3
        x = sequence if batched else ops.reshape(sequence, (1,) + sequence.shape)
        # conv1d runs along the last axis: [B, T, b] -> [B, b, T]
        y = self.convs[str(self.au_ids[n])](ops.transpose(x, (0, 2, 1)))
        y = ops.transpose(y, (0, 2, 1))
        return y if batched else ops.reshape(y, sequence.shape)

    def forward(self, nodes):
        """nodes: [B, T, N, b] -> probabilities [B, T, N]."""
        if nodes.ndim != 4 or nodes.shape[2] != self.N:
            raise DimensionError("head expects [B, T, {}, {}], got {}".format(self.N, self.width, nodes.shape))
        probs = []
        for n in range(self.N):
            smoothed = self.tcn_forward(nodes[:, :, n], n)
            probs.append(sc_predict(smoothed, self.anchors[n]))
        return ops.stack(probs, axis=-1)


def tcn_forward(head, sequence, n):
    return head.tcn_forward(sequence, n)
