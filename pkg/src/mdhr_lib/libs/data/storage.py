"""
On-disk video layout::

    <root>/video_0000/frames.mdt       T_v x 3 x H x H tensor file
    <root>/video_0000/labels.json      {"au_ids": [...], "labels": [[0, 1, ...], ...]}
    <root>/video_0000/trajectory.json  (synthetic data only) blob positions
    <root>/spec.json                   (synthetic data only) generator settings
"""

import json
import os
from collections import namedtuple

import numpy as np

from mdhr_lib.helpers.errors import ConfigError, FormatError, UsageError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.tensor import read_tensor, write_tensor

logger = setup_logger(__name__, "warning")

frames_file = "frames.mdt"
labels_file = "labels.json"
trajectory_file = "trajectory.json"
video_dir_format = "video_{:04d}"

VideoRecord = namedtuple("VideoRecord", ["video_id", "frames", "labels", "au_ids"])


def video_dirs(root):
    """Sorted ``video_*`` directories under ``root``."""
    if not os.path.isdir(root):
        raise ConfigError("data", "dataset directory {} doesn't exist".format(root))
    names = sorted(n for n in os.listdir(root) if n.startswith("video_") and os.path.isdir(os.path.join(root, n)))
    return [os.path.join(root, n) for n in names]


def write_labels(path, labels, au_ids):
    labels = np.asarray(labels).astype(int)
    with open(path, "w") as f:
        json.dump({"au_ids": [int(a) for a in au_ids], "labels": labels.tolist()}, f)

def read_labels(path, au_ids=None):
    """
    Returns (labels [T_v, N] int array, au_ids). If ``au_ids`` is given the
    file has to list exactly those AUs in that order.
    """
    with open(path) as f:
        text = f.read()
    try:
        document = json.loads(text)
    except ValueError as e:
        raise FormatError(path, getattr(e, "pos", 0), "invalid JSON: {}".format(e))
    if not isinstance(document, dict) or "au_ids" not in document or "labels" not in document:
        raise FormatError(path, 0, "expected an object with 'au_ids' and 'labels'")
    file_aus = [int(a) for a in document["au_ids"]]
    rows = document["labels"]
    n = len(file_aus)
    for t, row in enumerate(rows):
        if len(row) != n:
            raise FormatError(path, 0, "frame {} has {} labels, file lists {} AUs".format(t, len(row), n))
        if any(v not in (0, 1) for v in row):
            raise FormatError(path, 0, "frame {} has non-binary labels".format(t))
    if au_ids is not None and file_aus != list(au_ids):
        raise ConfigError("data.au_ids", "{} lists AUs {}, the model expects {}".format(path, file_aus, list(au_ids)))
    labels = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    return labels, file_aus


def write_sequence(directory, frames, labels, au_ids, trajectory=None):
    frames = np.asarray(frames)
    labels = np.asarray(labels)
    if frames.shape[0] != labels.shape[0]:
        raise UsageError("{} frames but {} label rows".format(frames.shape[0], labels.shape[0]))
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, frames_file), frames)
    write_labels(os.path.join(directory, labels_file), labels, au_ids)
    if trajectory is not None:
        with open(os.path.join(directory, trajectory_file), "w") as f:
            json.dump(trajectory, f)

def read_sequence(directory, au_ids=None, mmap=False):
    frames = read_tensor(os.path.join(directory, frames_file), mmap=mmap)
    labels, file_aus = read_labels(os.path.join(directory, labels_file), au_ids)
    if frames.shape[0] != labels.shape[0]:
        raise FormatError(os.path.join(directory, labels_file), 0, "{} label rows for {} frames".format(labels.shape[0], frames.shape[0]))
    return VideoRecord(os.path.basename(os.path.normpath(directory)), frames, labels, file_aus)

def read_trajectory(directory):
    with open(os.path.join(directory, trajectory_file)) as f:
        return json.load(f)
