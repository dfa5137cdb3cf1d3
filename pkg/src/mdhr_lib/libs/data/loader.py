import numpy as np

from mdhr_lib.helpers.errors import ConfigError, UsageError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.data.sequences import clip_sampler, make_batch
from mdhr_lib.libs.data.storage import video_dirs, read_sequence

logger = setup_logger(__name__, "info")


class SequenceDataset(object):
    """
    The videos of one split directory, loaded on first use. Labels are
    checked against the region map's AU order.
    """

    def __init__(self, root, region_map):
        self.root = root
        self.region_map = region_map
        self.paths = video_dirs(root)
        if not self.paths:
            raise ConfigError("data", "no video_* directories in {}".format(root))
        self._videos = None

    def __len__(self):
        return len(self.paths)

    @property
    def videos(self):
        if self._videos is None:
            self._videos = [read_sequence(path, self.region_map.au_ids) for path in self.paths]
            logger.debug("Loaded {} videos from {}".format(len(self._videos), self.root))
        return self._videos

    def all_labels(self):
        return np.concatenate([video.labels for video in self.videos], axis=0)

    def _batches(self, items, batch_size, T, k, dtype):
        for start in range(0, len(items), batch_size):
            yield make_batch(items[start:start + batch_size], T, k, self.region_map, dtype)

    def train_batches(self, T, k, batch_size, rng, dtype=None):
        """
        One random clip per video, videos in a shuffled order; the rng is
        consumed entirely before the first batch is built.
        """
        if batch_size < 1:
            raise UsageError("batch_size must be at least 1")
        items = []
        for video in self.videos:
            span, = clip_sampler(len(video.frames), T, "train_random_one", rng)
            items.append((video.video_id, video.frames, video.labels, span))
        order = rng.permutation(len(items))
        return self._batches([items[i] for i in order], batch_size, T, k, dtype)

    def eval_batches(self, T, k, batch_size, dtype=None):
        """Back-to-back clips over every video; tail padding is masked out."""
        items = []
        for video in self.videos:
            for span in clip_sampler(len(video.frames), T, "eval_sliding"):
                items.append((video.video_id, video.frames, video.labels, span))
        return self._batches(items, batch_size, T, k, dtype)


def open_external_dataset(root, region_map):
    """
    BP4D and DISFA aren't redistributable, so there's no parser for their
    release formats. Convert them (after face alignment and cropping to the
    backbone's input size) into the layout ``synth_generate`` writes: one
    ``video_XXXX`` folder per subject/task with ``frames.mdt`` holding
    [T_v, 3, H, H] float32 frames and ``labels.json`` listing the AUs in the
    region map's order (``BP4D_REGION_MAP.au_ids`` / ``DISFA_REGION_MAP.au_ids``).
    Such a folder opens like any other split.
    """
    return SequenceDataset(root, region_map)
