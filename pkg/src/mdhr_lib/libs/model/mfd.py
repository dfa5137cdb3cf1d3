"""
Multi-scale facial dynamics: frame-to-frame feature differences at every
pyramid level, resized to the top level's 7x7 grid, averaged over the 2k
differences around the target frame, weighted per spatial cell by a softmax
over scales, and added onto the target frame's top-level feature map.
"""

from dataclasses import dataclass, field
from typing import List

from mdhr_lib.helpers.errors import ConfigError, DimensionError, UsageError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.model.backbone import final_spatial_size
from mdhr_lib.libs.model.module import Module, Conv2d
from mdhr_lib.libs.tensor import ops

logger = setup_logger(__name__, "warning")


@dataclass
class MfdConfig:
    k: int = 5
    target_channels: int = 64
    target_spatial: int = final_spatial_size
    resize_strides: List[int] = field(default_factory=lambda: [4, 2, 1, 1])
    in_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 64])

    @classmethod
    def from_backbone(cls, backbone_config, k=5):
        """
        Resize kernel and stride of scale l are S_l / 7, the ratio that maps
        every pyramid level onto the top level's grid.
        """
        sizes = backbone_config.spatial_sizes()
        return cls(k=k, target_channels=backbone_config.stage_channels[-1],
                   target_spatial=sizes[-1],
                   resize_strides=[s // sizes[-1] for s in sizes],
                   in_channels=list(backbone_config.stage_channels))

    @property
    def L(self):
        return len(self.resize_strides)

    def validate(self, backbone_config=None):
        if self.k < 1:
            raise ConfigError("mfd.k", "must be at least 1")
        if len(self.in_channels) != len(self.resize_strides):
            raise ConfigError("mfd.resize_strides", "needs one stride per scale")
        if any(s < 1 for s in self.resize_strides):
            raise ConfigError("mfd.resize_strides", "strides must be positive")
        if backbone_config is not None:
            sizes = backbone_config.spatial_sizes()
            for l, (size, stride) in enumerate(zip(sizes, self.resize_strides)):
                if size % stride or size // stride != self.target_spatial:
                    raise ConfigError("mfd.resize_strides", "scale {}: size {} / stride {} doesn't give {}".format(l, size, stride, self.target_spatial))
            if self.target_channels != backbone_config.stage_channels[-1]:
                raise ConfigError("mfd.target_channels", "must equal the top backbone stage's channels ({})".format(backbone_config.stage_channels[-1]))
        return self


def temporal_difference(window, k):
    """
    window: 2k+1 feature pyramids (each a list of L tensors), oldest first.
    Returns, per scale, the 2k differences x^{j+1} - x^{j} in time order.
    """
    if len(window) != 2 * k + 1:
        raise UsageError("temporal_difference needs a window of {} pyramids, got {}".format(2 * k + 1, len(window)))
    L = len(window[0])
    for pyramid in window:
        if len(pyramid) != L:
            raise DimensionError("pyramids in a window must all have {} levels".format(L))
    return [[ops.sub(window[j + 1][l], window[j][l]) for j in range(2 * k)] for l in range(L)]

def temporal_average(maps):
    if not maps:
        raise UsageError("temporal_average of an empty list")
    return ops.mean(ops.stack(maps, axis=0), axis=0)

def sliding_difference_average(sequence, T, k):
    """
    Batched averaging for one scale. ``sequence`` holds the resized
    differences of a padded clip, [B, T+2k-1, ...]; target frame t gets the
    mean of differences t .. t+2k-1. Returns [B, T, ...].
    """
    if sequence.shape[1] != T + 2 * k - 1:
        raise DimensionError("expected {} differences along axis 1, got {}".format(T + 2 * k - 1, sequence.shape[1]))
    return ops.stack([ops.mean(sequence[:, t:t + 2 * k], axis=1) for t in range(T)], axis=1)

def fuse(averaged, weights, x_top):
    """
    G = sum_l w_l * d_l + x_top. ``weights`` are [..., h, w] maps, broadcast
    across the channel axis of the [..., c, h, w] dynamics.
    """
    if len(averaged) != len(weights):
        raise DimensionError("{} dynamic maps but {} weight maps".format(len(averaged), len(weights)))
    motion = None
    for d, w in zip(averaged, weights):
        if d.shape != x_top.shape:
            raise DimensionError("dynamic map {} doesn't match the static map {}".format(d.shape, x_top.shape))
        if w.shape != d.shape[:-3] + d.shape[-2:]:
            raise DimensionError("weight map {} doesn't match dynamic map {}".format(w.shape, d.shape))
        term = ops.mul(ops.reshape(w, w.shape[:-2] + (1,) + w.shape[-2:]), d)
        motion = term if motion is None else ops.add(motion, term)
    return ops.add(motion, x_top)


fusion_modes = ("adaptive", "sum", "concat")


class MultiScaleDynamics(Module):
    """
    ``scales`` picks the pyramid levels whose dynamics are used (all of them
    by default, 0 is the shallowest). ``fusion`` decides how they are merged
    before being added to the static map: ``adaptive`` weights them per cell,
    ``sum`` adds them unweighted and ``concat`` stacks them along channels
    and projects back to c channels with a 1x1 convolution. Only
    ``adaptive`` produces weight maps.
    """

    def __init__(self, config, rng, scales=None, fusion="adaptive"):
        self.config = config.validate()
        self.scales = check_scales(scales, config.L)
        if fusion not in fusion_modes:
            raise ConfigError("model.fusion", "unknown fusion {!r}, choose from {}".format(fusion, fusion_modes))
        self.fusion = fusion
        c = config.target_channels
        n = len(self.scales)
        self.resize = [Conv2d(rng, config.in_channels[l], c, config.resize_strides[l], stride=config.resize_strides[l], bias=False)
                       for l in self.scales]
        self.scale_logits = []
        self.project = None
        if fusion == "adaptive":
            # one 1x1 conv per scale, each turning the concatenated dynamics into a single logit map
            self.scale_logits = [Conv2d(rng, n * c, 1, 1) for _ in range(n)]
        elif fusion == "concat":
            # no bias, so still frames still give back the static map
            self.project = Conv2d(rng, n * c, c, 1, bias=False)

    @property
    def weighted(self):
        return self.fusion == "adaptive"

    def resize_dynamics(self, raw, l):
        """raw: [..., C_l, S_l, S_l] difference map(s) at pyramid level l -> [..., c, 7, 7]."""
        if l not in self.scales:
            raise UsageError("scale {} is not among the used scales {}".format(l, self.scales))
        lead = raw.shape[:-3]
        x = ops.reshape(raw, (-1,) + raw.shape[-3:])
        out = self.resize[self.scales.index(l)](x)
        return ops.reshape(out, lead + out.shape[1:])

    def adaptive_weights(self, averaged):
        """
        averaged: one map [..., c, 7, 7] per used scale -> as many weight maps
        [..., 7, 7], summing to one over scales at every cell.
        """
        if not self.weighted:
            raise UsageError("{} fusion has no weight maps".format(self.fusion))
        if len(averaged) != len(self.scales):
            raise DimensionError("expected {} scales, got {}".format(len(self.scales), len(averaged)))
        lead = averaged[0].shape[:-3]
        stacked = ops.concat([ops.reshape(d, (-1,) + d.shape[-3:]) for d in averaged], axis=1)
        logits = ops.concat([conv(stacked) for conv in self.scale_logits], axis=1)
        weights = ops.softmax(logits, axis=1)
        return [ops.reshape(weights[:, i], lead + weights.shape[2:]) for i in range(len(self.scales))]

    def combine(self, averaged, x_top):
        """Returns (G, weight maps or None)."""
        if self.fusion == "adaptive":
            weights = self.adaptive_weights(averaged)
            return fuse(averaged, weights, x_top), weights
        if self.fusion == "sum":
            motion = averaged[0]
            for d in averaged[1:]:
                motion = ops.add(motion, d)
            return ops.add(motion, x_top), None
        lead = averaged[0].shape[:-3]
        stacked = ops.concat([ops.reshape(d, (-1,) + d.shape[-3:]) for d in averaged], axis=1)
        motion = self.project(stacked)
        return ops.add(ops.reshape(motion, lead + motion.shape[1:]), x_top), None

    def forward_window(self, window, x_top=None):
        """
        Single-frame path: ``window`` is 2k+1 pyramids of [C_l, S_l, S_l] maps
        centred on the target frame. Returns (G, weight maps or None).
        """
        k = self.config.k
        raw = temporal_difference(window, k)
        averaged = [temporal_average([self.resize_dynamics(d, l) for d in raw[l]]) for l in self.scales]
        if x_top is None:
            x_top = window[k][-1]
        return self.combine(averaged, x_top)

    def forward(self, pyramid, T):
        """
        Batched path. pyramid: L tensors [B, T+2k, C_l, S_l, S_l] for padded
        clips. Returns G [B*T, c, 7, 7] and the weights [B*T, n_scales, 7, 7]
        (None unless fusion is adaptive).
        """
        k = self.config.k
        B, F = pyramid[0].shape[:2]
        if F != T + 2 * k:
            raise DimensionError("clips need T+2k = {} frames, got {}".format(T + 2 * k, F))
        averaged = []
        for l in self.scales:
            x = pyramid[l]
            diffs = ops.sub(x[:, 1:], x[:, :-1])
            resized = self.resize_dynamics(diffs, l)
            mean = sliding_difference_average(resized, T, k)
            averaged.append(ops.reshape(mean, (B * T,) + mean.shape[2:]))
        x_top = top_level_targets(pyramid[-1], T, k)
        G, weights = self.combine(averaged, x_top)
        return G, ops.stack(weights, axis=1) if weights is not None else None


def check_scales(scales, L):
    """
    >>> check_scales(None, 4)
    [0, 1, 2, 3]
    >>> check_scales([3, 1], 4)
    [1, 3]
    """
    if scales is None:
        return list(range(L))
    scales = sorted(int(s) for s in scales)
    if not scales:
        raise ConfigError("model.mfd_scales", "needs at least one scale")
    if len(set(scales)) != len(scales) or scales[0] < 0 or scales[-1] >= L:
        raise ConfigError("model.mfd_scales", "scales must be distinct levels in 0..{}, got {}".format(L - 1, scales))
    return scales


def top_level_targets(top, T, k):
    """The target frames' top-level maps: padded indices k .. k+T-1, flattened to [B*T, ...]."""
    targets = top[:, k:k + T]
    return ops.reshape(targets, (targets.shape[0] * T,) + targets.shape[2:])
