from mdhr_lib.libs.model.module import Module, Parameter, Conv2d, Conv1d, Linear, param_count
from mdhr_lib.libs.model.backbone import Backbone, BackboneConfig, backbone_forward
from mdhr_lib.libs.model.regions import RegionMap, BP4D_REGION_MAP, DISFA_REGION_MAP, SYNTHETIC_REGION_MAP, \
    encode_combination, decode_combination
from mdhr_lib.libs.model.mfd import MfdConfig, MultiScaleDynamics
from mdhr_lib.libs.model.hsr import HierarchicalRelations, slice_regions, decide_activation, build_edges
from mdhr_lib.libs.model.head import TemporalHead, sc_predict
from mdhr_lib.libs.model.mdhr import MDHR, ModelConfig, ModelOutput, build_model, component_toggles
