"""
A small multi-stage CNN standing in for the pretrained backbone. Each stage
is conv3x3(stride) -> ReLU -> conv3x3 -> ReLU and its output is one level of
the feature pyramid the dynamics module differences.
"""

from dataclasses import dataclass, field
from typing import List

from mdhr_lib.helpers.errors import ConfigError, DimensionError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.model.module import Module, Conv2d
from mdhr_lib.libs.tensor import ops

logger = setup_logger(__name__, "warning")

final_spatial_size = 7


@dataclass
class BackboneConfig:
    in_channels: int = 3
    stage_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 64])
    stage_strides: List[int] = field(default_factory=lambda: [4, 2, 2, 1])
    input_size: int = 112

    @property
    def L(self):
        return len(self.stage_channels)

    def spatial_sizes(self):
        """
        >>> BackboneConfig().spatial_sizes()
        [28, 14, 7, 7]
        >>> BackboneConfig(input_size=224, stage_strides=[4, 2, 2, 2]).spatial_sizes()
        [56, 28, 14, 7]
        """
        sizes = []
        size = self.input_size
        for stride in self.stage_strides:
            size //= stride
            sizes.append(size)
        return sizes

    def validate(self):
        if self.in_channels < 1:
            raise ConfigError("backbone.in_channels", "must be positive")
        if not self.stage_channels:
            raise ConfigError("backbone.stage_channels", "at least one stage is needed")
        if len(self.stage_strides) != len(self.stage_channels):
            raise ConfigError("backbone.stage_strides", "needs one stride per stage ({} stages)".format(len(self.stage_channels)))
        if any(c < 1 for c in self.stage_channels):
            raise ConfigError("backbone.stage_channels", "channel counts must be positive")
        if any(s < 1 for s in self.stage_strides):
            raise ConfigError("backbone.stage_strides", "strides must be positive")
        total = 1
        for s in self.stage_strides:
            total *= s
        if self.input_size % total:
            raise ConfigError("backbone.stage_strides", "product {} doesn't divide input_size {}".format(total, self.input_size))
        sizes = self.spatial_sizes()
        if sizes[-1] != final_spatial_size:
            raise ConfigError("backbone.stage_strides", "final spatial size is {}, must be {}".format(sizes[-1], final_spatial_size))
        for l, size in enumerate(sizes):
            if size % final_spatial_size:
                raise ConfigError("backbone.stage_strides", "stage {} size {} isn't a multiple of {}".format(l, size, final_spatial_size))
        return self


class Backbone(Module):

    def __init__(self, config, rng):
        self.config = config.validate()
        self.stages = []
        in_channels = config.in_channels
        for channels, stride in zip(config.stage_channels, config.stage_strides):
            self.stages.append([
                Conv2d(rng, in_channels, channels, 3, stride=stride, padding=1),
                Conv2d(rng, channels, channels, 3, stride=1, padding=1),
            ])
            in_channels = channels

    def forward(self, frames):
        """
        frames: [B*W, C, H, H] -> list of L stage outputs [B*W, C_l, S_l, S_l].
        """
        size = self.config.input_size
        if frames.ndim != 4 or frames.shape[1] != self.config.in_channels or frames.shape[2:] != (size, size):
            raise DimensionError("backbone expects [N, {}, {}, {}] frames, got {}".format(self.config.in_channels, size, size, frames.shape))
        maps = []
        x = frames
        for first, second in self.stages:
            x = ops.relu(first(x))
            x = ops.relu(second(x))
            maps.append(x)
        return maps


def backbone_forward(backbone, frames):
    return backbone.forward(frames)
