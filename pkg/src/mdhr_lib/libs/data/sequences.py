"""
Turning videos into padded clips: boundary padding, train/eval clip
sampling, combination targets and batch assembly.
"""

from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from mdhr_lib.helpers.errors import DimensionError, UsageError
from mdhr_lib.libs.model.regions import encode_combinations

clip_modes = ("train_random_one", "eval_sliding")

# ``valid`` target frames starting at original frame ``start``; the rest of the T are tail padding
ClipSpan = namedtuple("ClipSpan", ["start", "valid"])


def pad_video(frames, k):
    """
    Repeats the first frame k times in front and the last frame k times at
    the end. Works on lists and on arrays (along axis 0).

    >>> pad_video(["f1", "f2", "f3"], 1)
    ['f1', 'f1', 'f2', 'f3', 'f3']
    """
    if k < 0:
        raise UsageError("k must be non-negative, got {}".format(k))
    if len(frames) == 0:
        raise UsageError("can't pad an empty video")
    if isinstance(frames, np.ndarray):
        return np.concatenate([np.repeat(frames[:1], k, axis=0), frames, np.repeat(frames[-1:], k, axis=0)], axis=0)
    frames = list(frames)
    return [frames[0]] * k + frames + [frames[-1]] * k


def clip_sampler(length, T, mode, rng=None):
    """
    Clip spans for a video of ``length`` frames. ``train_random_one`` draws
    one span at a random offset; ``eval_sliding`` tiles the video with
    ceil(length / T) back-to-back spans, the last one possibly short.

    >>> clip_sampler(20, 16, "eval_sliding")
    [ClipSpan(start=0, valid=16), ClipSpan(start=16, valid=4)]
    """
    if length < 1:
        raise UsageError("can't sample clips from an empty video")
    if T < 1:
        raise UsageError("clip length T must be at least 1")
    if mode == "train_random_one":
        if rng is None:
            raise UsageError("train_random_one sampling needs an rng")
        if length <= T:
            return [ClipSpan(0, length)]
        return [ClipSpan(int(rng.integers(0, length - T + 1)), T)]
    if mode == "eval_sliding":
        return [ClipSpan(start, min(T, length - start)) for start in range(0, length, T)]
    raise UsageError("unknown clip mode {!r}, choose from {}".format(mode, clip_modes))


def clip_window(frames, span, T, k):
    """
    The T + 2k frames a span needs, taken from the unpadded video: indices
    before 0 repeat the first frame, indices past the end repeat the last one.
    """
    indices = np.clip(np.arange(span.start - k, span.start + T + k), 0, len(frames) - 1)
    return frames[indices]

def clip_labels(labels, span, T):
    """Labels [T, N] for a span plus the [T] mask of real frames."""
    indices = np.clip(np.arange(span.start, span.start + T), 0, len(labels) - 1)
    mask = np.arange(T) < span.valid
    return labels[indices], mask


def make_combo_targets(labels, region_map):
    """
    Per region, the combination index of that region's AUs in every frame.
    ``labels`` has the region map's AU order on its last axis.
    """
    labels = np.asarray(labels)
    if labels.shape[-1] != region_map.N:
        raise DimensionError("labels have {} AU columns, region map has {}".format(labels.shape[-1], region_map.N))
    targets = OrderedDict()
    for name, aus in region_map.regions.items():
        if not aus:
            continue
        columns = [region_map.index_of(au) for au in aus]
        targets[name] = encode_combinations(labels[..., columns])
    return targets


@dataclass
class SequenceBatch:
    """
    ``frames`` are the padded windows [B, T+2k, C, H, W] so every target
    frame has its 2k neighbours; ``labels`` [B, T, N] and ``mask`` [B, T]
    refer to the T target frames only.
    """
    frames: np.ndarray
    labels: np.ndarray
    combo_targets: Dict[str, np.ndarray]
    mask: np.ndarray
    clip_origin: List[Tuple[str, int]] = field(default_factory=list)

    @property
    def B(self):
        return self.frames.shape[0]

    @property
    def T(self):
        return self.labels.shape[1]


def make_batch(items, T, k, region_map, dtype=None):
    """items: (video_id, frames, labels, span) tuples -> SequenceBatch."""
    if not items:
        raise UsageError("can't build an empty batch")
    windows, labels, masks, origins = [], [], [], []
    for video_id, frames, video_labels, span in items:
        windows.append(clip_window(frames, span, T, k))
        clip_y, mask = clip_labels(video_labels, span, T)
        labels.append(clip_y)
        masks.append(mask)
        origins.append((video_id, span.start))
    frames = np.stack(windows)
    if dtype is not None:
        frames = frames.astype(dtype)
    labels = np.stack(labels).astype(np.int64)
    return SequenceBatch(frames, labels, make_combo_targets(labels, region_map), np.stack(masks), origins)
