"""
Run configuration: one JSON document holding the backbone, dynamics, model,
training and data settings, checked for cross-module consistency on load.
"""

import copy
from collections import OrderedDict
from dataclasses import dataclass, field, asdict, fields
from typing import Optional

from mdhr_lib.helpers.config_parse import read_config, merge_defaults
from mdhr_lib.helpers.errors import ConfigError
from mdhr_lib.helpers.general import local_path_gen, config_hash
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.model.backbone import BackboneConfig
from mdhr_lib.libs.model.mdhr import ModelConfig, component_toggles
from mdhr_lib.libs.model.mfd import MfdConfig, check_scales
from mdhr_lib.libs.model.regions import RegionMap, BP4D_REGION_MAP, DISFA_REGION_MAP, SYNTHETIC_REGION_MAP
from mdhr_lib.libs.objective import lambda_sweep
from mdhr_lib.libs.tensor.tensor import supported_dtypes

logger = setup_logger(__name__, "info")

local_path = local_path_gen("mdhr_lib")
default_run_config_path = local_path("resources", "default_run.json")

region_map_presets = OrderedDict([
    ("synthetic", SYNTHETIC_REGION_MAP),
    ("bp4d", BP4D_REGION_MAP),
    ("disfa", DISFA_REGION_MAP),
])

label_count_presets = ("none", "bp4d", "disfa")


@dataclass
class TrainConfig:
    batch_size: int = 8
    lr: float = 0.0001
    epochs: int = 200
    validation_interval: int = 25
    weight_decay: float = 0.0005
    T: int = 16
    k: int = 5
    lam: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: Optional[float] = None
    threshold: float = 0.5
    prefetch: int = 2
    class_weights: str = "none"

    def validate(self):
        for name in ("batch_size", "validation_interval", "T", "k", "prefetch"):
            if getattr(self, name) < 1:
                raise ConfigError("train.{}".format(name), "must be at least 1")
        if self.epochs < 0:
            raise ConfigError("train.epochs", "must be non-negative")
        for name in ("lr", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError("train.{}".format(name), "must be positive")
        if self.weight_decay < 0:
            raise ConfigError("train.weight_decay", "must be non-negative")
        if self.lam < 0:
            raise ConfigError("train.lam", "must be non-negative")
        if self.lam not in lambda_sweep:
            logger.info("lambda {} is outside the usual sweep {}".format(self.lam, lambda_sweep))
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError("train.{}".format(name), "must be in [0, 1)")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("train.grad_clip", "must be positive or null")
        if not 0 < self.threshold < 1:
            raise ConfigError("train.threshold", "must be in (0, 1)")
        if self.class_weights not in label_count_presets:
            raise ConfigError("train.class_weights", "must be one of {} ('none' derives them from the training labels)".format(label_count_presets))
        return self


@dataclass
class RunConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    mfd: MfdConfig = field(default_factory=MfdConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    train_dir: str = "data/synth/train"
    eval_dir: str = "data/synth/eval"
    output_dir: str = "runs/default"
    precision: str = "float64"
    seed: int = 0

    def validate(self):
        self.backbone.validate()
        self.mfd.validate(self.backbone)
        self.model.validate()
        self.train.validate()
        if self.mfd.k != self.train.k:
            raise ConfigError("mfd.k", "must equal train.k ({})".format(self.train.k))
        check_scales(self.model.mfd_scales, self.mfd.L)
        if self.precision not in supported_dtypes:
            raise ConfigError("precision", "must be one of {}".format(sorted(supported_dtypes)))
        return self

    def to_dict(self):
        """The JSON form, with the region map spelled out."""
        model = OrderedDict((f.name, getattr(self.model, f.name)) for f in fields(self.model))
        model["region_map"] = self.model.region_map.to_dict()
        return {
            "backbone": asdict(self.backbone),
            "mfd": {"resize_strides": list(self.mfd.resize_strides)},
            "model": dict(model),
            "train": asdict(self.train),
            "data": {"train_dir": self.train_dir, "eval_dir": self.eval_dir},
            "output_dir": self.output_dir,
            "precision": self.precision,
            "seed": self.seed,
        }

    def hash(self):
        return config_hash(self.to_dict())

    def architecture_hash(self):
        """Hash of the parts that decide parameter names and shapes."""
        d = self.to_dict()
        return config_hash({"backbone": d["backbone"], "mfd": d["mfd"], "model": d["model"]})


def _section(document, name):
    section = document.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(name, "expected an object")
    return section

def _build(cls, section, name, exclude=()):
    known = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(name, "unknown keys {}".format(unknown))
    try:
        return cls(**{key: section[key] for key in section if key in known})
    except TypeError as e:
        raise ConfigError(name, str(e))

def parse_region_map(value):
    if isinstance(value, str):
        if value not in region_map_presets:
            raise ConfigError("model.region_map", "unknown preset {!r}, choose from {}".format(value, list(region_map_presets)))
        return region_map_presets[value]
    if not isinstance(value, dict):
        raise ConfigError("model.region_map", "expected a preset name or an up/mid/low object")
    return RegionMap(value)


def apply_overrides(document, overrides):
    """
    ``overrides`` holds command-line values: epochs, lam, seed, batch_size,
    precision, fusion, mfd_scales and disable (a list of component names).
    None means unset.
    """
    if not overrides:
        return document
    train = document.setdefault("train", {})
    model = document.setdefault("model", {})
    for key in ("epochs", "lam", "batch_size"):
        if overrides.get(key) is not None:
            train[key] = overrides[key]
    for key in ("seed", "precision"):
        if overrides.get(key) is not None:
            document[key] = overrides[key]
    for key in ("fusion", "mfd_scales"):
        if overrides.get(key) is not None:
            model[key] = overrides[key]
    for component in overrides.get("disable") or []:
        if component not in component_toggles:
            raise ConfigError("disable", "unknown component {!r}, choose from {}".format(component, component_toggles))
        model[component] = False
        if component == "aux":
            model["crm"] = False
    return document


def run_config_from_dict(document):
    document = copy.deepcopy(document)
    backbone = _build(BackboneConfig, _section(document, "backbone"), "backbone")
    train = _build(TrainConfig, _section(document, "train"), "train")
    mfd_section = _section(document, "mfd")
    unknown = sorted(set(mfd_section) - {"resize_strides"})
    if unknown:
        raise ConfigError("mfd", "unknown keys {} (k lives in train.k)".format(unknown))
    backbone.validate()
    mfd = MfdConfig.from_backbone(backbone, k=train.k)
    if mfd_section.get("resize_strides") is not None:
        mfd.resize_strides = list(mfd_section["resize_strides"])
    model_section = dict(_section(document, "model"))
    region_map = parse_region_map(model_section.pop("region_map", "synthetic"))
    model = _build(ModelConfig, model_section, "model", exclude=("region_map",))
    model.region_map = region_map
    data = _section(document, "data")
    unknown = sorted(set(data) - {"train_dir", "eval_dir"})
    if unknown:
        raise ConfigError("data", "unknown keys {}".format(unknown))
    unknown = sorted(set(document) - {"backbone", "mfd", "model", "train", "data", "output_dir", "precision", "seed"})
    if unknown:
        raise ConfigError("run", "unknown sections {}".format(unknown))
    config = RunConfig(backbone=backbone, mfd=mfd, model=model, train=train,
                       train_dir=data.get("train_dir", RunConfig.train_dir),
                       eval_dir=data.get("eval_dir", RunConfig.eval_dir),
                       output_dir=document.get("output_dir", RunConfig.output_dir),
                       precision=document.get("precision", RunConfig.precision),
                       seed=int(document.get("seed", RunConfig.seed)))
    return config.validate()


def load_run_config(path=None, overrides=None):
    """
    Reads a run config (the packaged default if ``path`` is None), fills in
    missing keys from the default, applies command-line overrides and
    validates the result.
    """
    defaults = read_config(default_run_config_path)
    document = read_config(path) if path is not None else copy.deepcopy(defaults)
    merge_defaults(document, defaults, path or "default run config")
    apply_overrides(document, overrides)
    return run_config_from_dict(document)
