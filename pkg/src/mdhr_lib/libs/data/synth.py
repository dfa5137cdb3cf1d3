"""
Synthetic stand-in for the face video corpora. Every AU is a Gaussian blob
that lives in its home band of the image and jitters back and forth while
the AU is "active"; its label at frame t is 1 iff the blob moved more than
``threshold`` pixels since frame t-1. Coarse AUs are big blobs with big
moves, fine AUs small blobs with subtle ones.
"""

import os
from dataclasses import dataclass, field, asdict
from typing import List

import numpy as np

from mdhr_lib.helpers.config_parse import read_config, write_config
from mdhr_lib.helpers.errors import ConfigError
from mdhr_lib.helpers.general import make_rng, local_path_gen
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.data.storage import write_sequence, video_dir_format
from mdhr_lib.libs.model.regions import region_names, RegionMap

logger = setup_logger(__name__, "info")

spec_file = "spec.json"
default_spec_path = local_path_gen("mdhr_lib")("resources", "default_synth.json")
blob_scales = ("coarse", "fine")

scale_defaults = {
    "coarse": {"sigma": 6.0, "amplitude": 3.0, "intensity": 1.0},
    "fine": {"sigma": 2.5, "amplitude": 1.5, "intensity": 0.6},
}


@dataclass
class BlobSpec:
    au: int
    region: str
    scale: str = "coarse"
    amplitude: float = None
    sigma: float = None
    intensity: float = None

    def __post_init__(self):
        defaults = scale_defaults.get(self.scale, scale_defaults["coarse"])
        for name, value in defaults.items():
            if getattr(self, name) is None:
                setattr(self, name, value)


def default_blobs():
    layout = [(1, "up", "coarse"), (2, "up", "fine"), (4, "up", "coarse"), (7, "up", "fine"),
              (6, "mid", "coarse"), (9, "mid", "fine"), (12, "low", "coarse"), (25, "low", "fine")]
    return [BlobSpec(au, region, scale) for au, region, scale in layout]


@dataclass
class SynthSpec:
    image_size: int = 112
    n_train: int = 40
    n_eval: int = 10
    frames: int = 96
    noise: float = 0.02
    threshold: float = 0.75
    activity: float = 0.5
    segment_min: int = 4
    segment_max: int = 12
    seed: int = 0
    blobs: List[BlobSpec] = field(default_factory=default_blobs)

    @property
    def au_ids(self):
        return [blob.au for blob in self.blobs]

    @classmethod
    def from_dict(cls, config):
        config = dict(config)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(config) - known)
        if unknown:
            raise ConfigError("synth", "unknown fields {}".format(unknown))
        if "blobs" in config:
            try:
                config["blobs"] = [BlobSpec(**blob) for blob in config["blobs"]]
            except TypeError as e:
                raise ConfigError("synth.blobs", str(e))
        return cls(**config).validate()

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.image_size < 7 or self.image_size % 7:
            raise ConfigError("synth.image_size", "must be a positive multiple of 7")
        for name in ("n_train", "n_eval"):
            if getattr(self, name) < 0:
                raise ConfigError("synth.{}".format(name), "must be non-negative")
        if self.frames < 1:
            raise ConfigError("synth.frames", "must be at least 1")
        if self.noise < 0:
            raise ConfigError("synth.noise", "must be non-negative")
        if self.threshold < 0:
            raise ConfigError("synth.threshold", "must be non-negative")
        if not 0 <= self.activity <= 1:
            raise ConfigError("synth.activity", "must be a probability")
        if not 1 <= self.segment_min <= self.segment_max:
            raise ConfigError("synth.segment_min", "need 1 <= segment_min <= segment_max")
        if not self.blobs:
            raise ConfigError("synth.blobs", "at least one AU is needed")
        if len(set(self.au_ids)) != len(self.au_ids):
            raise ConfigError("synth.blobs", "duplicate AUs {}".format(self.au_ids))
        for i, blob in enumerate(self.blobs):
            if blob.region not in region_names:
                raise ConfigError("synth.blobs.{}.region".format(i), "unknown region {!r}".format(blob.region))
            if blob.scale not in blob_scales:
                raise ConfigError("synth.blobs.{}.scale".format(i), "must be one of {}".format(blob_scales))
            if blob.amplitude < 0 or blob.sigma <= 0:
                raise ConfigError("synth.blobs.{}".format(i), "amplitude must be >= 0 and sigma > 0")
        return self

    def check_region_map(self, region_map):
        """Each blob's band has to be its AU's home region."""
        for i, blob in enumerate(self.blobs):
            home = region_map.home.get(blob.au)
            if home is None:
                raise ConfigError("synth.blobs.{}.au".format(i), "AU {} isn't in the region map".format(blob.au))
            if home != blob.region:
                raise ConfigError("synth.blobs.{}.region".format(i), "AU {} is homed in {}, blob is in {}".format(blob.au, home, blob.region))

    def region_map(self):
        """The region map these blobs imply, AUs in blob order within each band."""
        return RegionMap({name: [b.au for b in self.blobs if b.region == name] for name in region_names})


def band_limits(region, size):
    """Pixel rows [top, bottom) of a region's band, matching the 7-row feature slicing."""
    start, stop = {"up": (0, 3), "mid": (2, 5), "low": (4, 7)}[region]
    return start * size / 7.0, stop * size / 7.0


def activity_schedule(spec, rng):
    """Boolean [frames]: alternating runs of random length, each active with probability ``activity``."""
    active = np.zeros(spec.frames, dtype=bool)
    directions = np.zeros((spec.frames, 2))
    t = 0
    while t < spec.frames:
        length = int(rng.integers(spec.segment_min, spec.segment_max + 1))
        on = rng.random() < spec.activity
        angle = rng.uniform(0, 2 * np.pi)
        active[t:t + length] = on
        directions[t:t + length] = (np.cos(angle), np.sin(angle))
        t += length
    return active, directions


def blob_trajectory(spec, blob, rng, video_id=""):
    """
    Positions [frames, 2] as (x, y) plus the rest position. While active the
    blob sits at rest + amplitude * direction on even frames and at rest on
    odd ones, so every active frame is one amplitude-sized move.
    """
    size = spec.image_size
    top, bottom = band_limits(blob.region, size)
    margin = min(blob.sigma, (bottom - top) / 4.0)
    rest = np.array([rng.uniform(margin, size - 1 - margin), rng.uniform(top + margin, bottom - 1 - margin)])
    active, directions = activity_schedule(spec, rng)
    even = (np.arange(spec.frames) % 2 == 0)
    offsets = directions * blob.amplitude * (active & even)[:, None]
    positions = rest[None, :] + offsets
    low = np.array([0.0, top])
    high = np.array([size - 1.0, bottom - 1.0])
    clipped = np.clip(positions, low, high)
    escaped = np.any(clipped != positions, axis=1)
    if escaped.any():
        logger.warning("{}: AU{} blob left its {} band on {} frames, clipped".format(video_id, blob.au, blob.region, int(escaped.sum())))
    return clipped, rest


def labels_from_trajectory(positions, rest, threshold):
    """AU on at frame t iff the blob moved more than ``threshold`` since t-1 (the rest spot before frame 0)."""
    positions = np.asarray(positions, dtype=np.float64)
    previous = np.concatenate([np.asarray(rest, dtype=np.float64)[None, :], positions[:-1]], axis=0)
    return (np.linalg.norm(positions - previous, axis=1) > threshold).astype(np.int64)


def render_frames(spec, trajectories):
    """Frames [T, 3, H, H] float32: noise-free blobs, then Gaussian noise."""
    size = spec.image_size
    grid = np.arange(size, dtype=np.float64)
    frames = np.zeros((spec.frames, 3, size, size), dtype=np.float64)
    n = len(spec.blobs)
    for i, (blob, (positions, _)) in enumerate(zip(spec.blobs, trajectories)):
        color = 0.5 + 0.5 * np.cos(2 * np.pi * (i / float(n) + np.arange(3) / 3.0))
        gx = np.exp(-(grid[None, :] - positions[:, 0:1]) ** 2 / (2 * blob.sigma ** 2))
        gy = np.exp(-(grid[None, :] - positions[:, 1:2]) ** 2 / (2 * blob.sigma ** 2))
        image = gy[:, :, None] * gx[:, None, :]
        frames += blob.intensity * color[None, :, None, None] * image[:, None, :, :]
    return frames

def render_video(spec, rng, video_id=""):
    """Returns (frames [T, 3, H, H] float32, labels [T, N], trajectory dict)."""
    trajectories = [blob_trajectory(spec, blob, rng, video_id) for blob in spec.blobs]
    frames = render_frames(spec, trajectories)
    if spec.noise:
        frames += rng.normal(0.0, spec.noise, size=frames.shape)
    labels = np.stack([labels_from_trajectory(p, rest, spec.threshold) for p, rest in trajectories], axis=1)
    trajectory = {
        "au_ids": spec.au_ids,
        "threshold": spec.threshold,
        "rest": [rest.tolist() for _, rest in trajectories],
        "positions": [p.tolist() for p, _ in trajectories],
    }
    return frames.astype(np.float32), labels, trajectory


def synth_generate(spec, out_dir, n_videos=None, frames_per_video=None, region_map=None):
    """
    Writes ``train/`` and ``eval/`` video folders plus ``spec.json`` under
    ``out_dir``. ``n_videos`` (split 4:1 like the defaults) and
    ``frames_per_video`` override the spec. Labels use ``region_map`` AU order
    if given, blob order otherwise.
    """
    if n_videos is not None:
        n_eval = max(1, n_videos // 5) if n_videos > 1 else 0
        spec.n_train, spec.n_eval = n_videos - n_eval, n_eval
    if frames_per_video is not None:
        spec.frames = frames_per_video
    spec.validate()
    if region_map is None:
        region_map = spec.region_map()
    spec.check_region_map(region_map)
    order = [spec.au_ids.index(au) for au in region_map.au_ids]
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for split, count in (("train", spec.n_train), ("eval", spec.n_eval)):
        split_dir = os.path.join(out_dir, split)
        for index in range(count):
            video_id = video_dir_format.format(index)
            rng = make_rng(spec.seed, "synth", split, index)
            frames, labels, trajectory = render_video(spec, rng, "{}/{}".format(split, video_id))
            write_sequence(os.path.join(split_dir, video_id), frames, labels[:, order], region_map.au_ids, trajectory)
        written[split] = count
        logger.info("Wrote {} {} videos of {} frames to {}".format(count, split, spec.frames, split_dir))
    write_config(spec.to_dict(), os.path.join(out_dir, spec_file))
    return written

def load_spec(path):
    return SynthSpec.from_dict(read_config(path))
