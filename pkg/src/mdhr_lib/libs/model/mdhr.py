"""
The assembled network: backbone pyramid, multi-scale dynamics, regional
relationships and the temporal head, run on padded clips.
"""

from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field
from typing import List, Optional

from mdhr_lib.helpers.errors import ConfigError, DimensionError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.model.backbone import Backbone
from mdhr_lib.libs.model.head import TemporalHead
from mdhr_lib.libs.model.hsr import HierarchicalRelations
from mdhr_lib.libs.model.mfd import MultiScaleDynamics, top_level_targets, fusion_modes
from mdhr_lib.libs.model.module import Module
from mdhr_lib.libs.model.regions import RegionMap, SYNTHETIC_REGION_MAP
from mdhr_lib.libs.tensor import ops

logger = setup_logger(__name__, "info")

ModelOutput = namedtuple("ModelOutput", ["probs", "combinations", "weight_maps", "active"])

component_toggles = ("mfd", "aux", "crm", "tcn")


@dataclass
class ModelConfig:
    b: int = 32
    region_map: RegionMap = field(default_factory=lambda: SYNTHETIC_REGION_MAP)
    mfd: bool = True
    aux: bool = True
    crm: bool = True
    tcn: bool = True
    slope: float = 0.2
    mfd_scales: Optional[List[int]] = None
    fusion: str = "adaptive"

    def validate(self):
        if self.b < 1:
            raise ConfigError("model.b", "must be positive")
        if self.crm and not self.aux:
            raise ConfigError("model.crm", "cross-region edges are gated on the aux predictions; enable model.aux")
        if not 0 <= self.slope < 1:
            raise ConfigError("model.slope", "LeakyReLU slope must be in [0, 1)")
        if self.fusion not in fusion_modes:
            raise ConfigError("model.fusion", "unknown fusion {!r}, choose from {}".format(self.fusion, fusion_modes))
        return self


class MDHR(Module):

    def __init__(self, backbone_config, mfd_config, model_config, rng):
        self.k = mfd_config.k
        self.config = model_config.validate()
        mfd_config.validate(backbone_config)
        self.backbone = Backbone(backbone_config, rng)
        self.dynamics = MultiScaleDynamics(mfd_config, rng, scales=model_config.mfd_scales, fusion=model_config.fusion) \
            if model_config.mfd else None
        self.relations = HierarchicalRelations(model_config.region_map, mfd_config.target_channels, model_config.b, rng,
                                               aux=model_config.aux, crm=model_config.crm, slope=model_config.slope)
        self.head = TemporalHead(model_config.region_map.au_ids, model_config.b, rng, tcn=model_config.tcn)

    @property
    def region_map(self):
        return self.config.region_map

    def pyramid(self, frames):
        """frames [B, F, 3, H, H] -> L maps [B, F, C_l, S_l, S_l]."""
        B, F = frames.shape[:2]
        maps = self.backbone(ops.reshape(frames, (B * F,) + frames.shape[2:]))
        return [ops.reshape(x, (B, F) + x.shape[1:]) for x in maps]

    def forward(self, frames):
        """
        frames: padded clips [B, T+2k, 3, H, H]. Returns a ModelOutput with
        probs [B, T, N], per-region combination distributions [B, T, 2**N_sub],
        scale weight maps [B, T, n_scales, 7, 7] (None without MFD or with
        unweighted fusion) and the first-stage activation flags [B, T, N] (None without edges).
        """
        if frames.ndim != 5:
            raise DimensionError("model expects [B, T+2k, C, H, W] clips, got {}".format(frames.shape))
        B, F = frames.shape[:2]
        T = F - 2 * self.k
        if T < 1:
            raise DimensionError("clip of {} frames is too short for k={}".format(F, self.k))
        weight_maps = None
        if self.dynamics is not None:
            G, weights = self.dynamics(self.pyramid(frames), T)
            if weights is not None:
                weight_maps = weights.data.reshape((B, T) + weights.shape[1:])
        else:
            # padding frames only feed the differences, so skip them
            top = self.pyramid(frames[:, self.k:self.k + T])[-1]
            G = top_level_targets(top, T, 0)
        relations = self.relations(G)
        nodes = ops.reshape(relations.nodes, (B, T) + relations.nodes.shape[1:])
        probs = self.head(nodes)
        combinations = OrderedDict((name, ops.reshape(dist, (B, T, dist.shape[-1])))
                                   for name, dist in relations.distributions.items())
        active = relations.active.reshape((B, T, -1)) if relations.active is not None else None
        return ModelOutput(probs, combinations, weight_maps, active)


def build_model(run_config, rng):
    model = MDHR(run_config.backbone, run_config.mfd, run_config.model, rng)
    logger.debug("Built model with toggles {}".format({c: getattr(run_config.model, c) for c in component_toggles}))
    return model
