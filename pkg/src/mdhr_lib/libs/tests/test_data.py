"""tests for clip sampling, batching, the on-disk layout and the synthetic blob generator"""
import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from mdhr_lib.helpers.errors import ConfigError, DimensionError, FormatError, UsageError
from mdhr_lib.libs.data import pad_video, clip_sampler, clip_window, make_combo_targets, make_batch, ClipSpan, \
    read_sequence, write_sequence, read_labels, read_trajectory, SynthSpec, BlobSpec, synth_generate, \
    labels_from_trajectory, SequenceDataset
from mdhr_lib.libs.data.sequences import clip_labels
from mdhr_lib.libs.data.storage import video_dirs, frames_file
from mdhr_lib.libs.data.synth import blob_trajectory, band_limits
from mdhr_lib.libs.model.regions import RegionMap, SYNTHETIC_REGION_MAP
from mdhr_lib.libs.tensor.serialize import encode_header

small_map = RegionMap({"up": [1, 2], "mid": [6, 9], "low": [9, 12]})


def tiny_spec(**kwargs):
    settings = dict(image_size=28, n_train=2, n_eval=1, frames=12, noise=0.0, seed=3)
    settings.update(kwargs)
    return SynthSpec(**settings).validate()


class TestClips(unittest.TestCase):

    def test_pad_video(self):
        assert(pad_video(["f1", "f2", "f3"], 1) == ["f1", "f1", "f2", "f3", "f3"])
        assert(pad_video(["f1"], 2) == ["f1"] * 5)
        assert(pad_video(["f1", "f2"], 0) == ["f1", "f2"])
        padded = pad_video(np.arange(3), 2)
        assert(list(padded) == [0, 0, 0, 1, 2, 2, 2])
        with self.assertRaises(UsageError):
            pad_video([], 1)

    def test_eval_tiling(self):
        assert(clip_sampler(20, 16, "eval_sliding") == [ClipSpan(0, 16), ClipSpan(16, 4)])
        assert(clip_sampler(16, 16, "eval_sliding") == [ClipSpan(0, 16)])
        assert(clip_sampler(5, 16, "eval_sliding") == [ClipSpan(0, 5)])

    def test_random_clip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            span, = clip_sampler(30, 8, "train_random_one", rng)
            assert(0 <= span.start <= 22 and span.valid == 8)
        assert(clip_sampler(6, 8, "train_random_one", rng) == [ClipSpan(0, 6)])
        with self.assertRaises(UsageError):
            clip_sampler(30, 8, "train_random_one")
        with self.assertRaises(UsageError):
            clip_sampler(30, 8, "everything")

    def test_window_repeats_edges(self):
        frames = np.arange(6)
        assert(list(clip_window(frames, ClipSpan(0, 4), 4, 2)) == [0, 0, 0, 1, 2, 3, 4, 5])
        assert(list(clip_window(frames, ClipSpan(4, 2), 4, 1)) == [3, 4, 5, 5, 5, 5])

    def test_tail_mask(self):
        labels = np.eye(3, dtype=int)
        clip_y, mask = clip_labels(labels, ClipSpan(1, 2), 4)
        assert(list(mask) == [True, True, False, False])
        assert(np.array_equal(clip_y[:2], labels[1:3]))

    def test_combination_targets(self):
        # small_map order: AU1, AU2, AU6, AU9, AU12; AU9 counts towards mid and low
        labels = np.array([[0, 1, 0, 1, 1], [1, 1, 1, 0, 0]])
        targets = make_combo_targets(labels, small_map)
        assert(list(targets["up"]) == [2, 3])
        assert(list(targets["mid"]) == [2, 1])
        assert(list(targets["low"]) == [3, 0])
        with self.assertRaises(DimensionError):
            make_combo_targets(labels[:, :4], small_map)

    def test_batch(self):
        frames = np.arange(5 * 3 * 2 * 2, dtype=np.float32).reshape(5, 3, 2, 2)
        labels = np.zeros((5, 5), dtype=int)
        labels[:, 0] = 1
        batch = make_batch([("a", frames, labels, ClipSpan(0, 3)), ("b", frames, labels, ClipSpan(3, 2))], 3, 1, small_map, np.float64)
        assert(batch.frames.shape == (2, 5, 3, 2, 2))
        assert(batch.frames.dtype == np.float64)
        assert(batch.labels.shape == (2, 3, 5))
        assert(batch.mask.tolist() == [[True, True, True], [True, True, False]])
        assert(batch.combo_targets["up"].shape == (2, 3))
        assert(batch.clip_origin == [("a", 0), ("b", 3)])
        assert(batch.B == 2 and batch.T == 3)
        with self.assertRaises(UsageError):
            make_batch([], 3, 1, small_map)


class TestStorage(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.video = os.path.join(self.dir, "video_0000")
        self.frames = np.random.default_rng(0).random((4, 3, 7, 7)).astype(np.float32)
        self.labels = np.array([[1, 0, 0, 1, 0]] * 4)
        write_sequence(self.video, self.frames, self.labels, small_map.au_ids, {"note": "x"})

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_round_trip(self):
        record = read_sequence(self.video, small_map.au_ids)
        assert(record.video_id == "video_0000")
        assert(np.array_equal(record.frames, self.frames))
        assert(np.array_equal(record.labels, self.labels))
        assert(record.au_ids == small_map.au_ids)
        assert(read_trajectory(self.video) == {"note": "x"})
        assert(video_dirs(self.dir) == [self.video])

    def test_corrupted_frames(self):
        with open(os.path.join(self.video, frames_file), "r+b") as f:
            f.write(b"JUNK")
        with self.assertRaises(FormatError) as cm:
            read_sequence(self.video)
        assert(cm.exception.offset == 0)

    def test_au_mismatch(self):
        with self.assertRaises(ConfigError) as cm:
            read_sequence(self.video, [1, 2, 6, 9])
        assert(cm.exception.field == "data.au_ids")

    def test_ragged_labels(self):
        path = os.path.join(self.dir, "labels.json")
        with open(path, "w") as f:
            json.dump({"au_ids": [1, 2], "labels": [[0, 1], [1]]}, f)
        with self.assertRaises(FormatError):
            read_labels(path)

    def test_broken_json(self):
        path = os.path.join(self.dir, "labels.json")
        with open(path, "w") as f:
            f.write('{"au_ids": [1], "labels": [[0], ')
        with self.assertRaises(FormatError) as cm:
            read_labels(path)
        assert(cm.exception.offset > 0)

    def test_frame_count_mismatch(self):
        with open(os.path.join(self.video, frames_file), "wb") as f:
            f.write(encode_header((3, 1)) + b"\x00" * 12)
        with self.assertRaises(FormatError):
            read_sequence(self.video)

    def test_missing_root(self):
        with self.assertRaises(ConfigError):
            SequenceDataset(os.path.join(self.dir, "nowhere"), small_map)


class TestDataset(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        rng = np.random.default_rng(1)
        for i, length in enumerate((7, 12)):
            labels = (rng.random((length, 5)) < 0.5).astype(int)
            write_sequence(os.path.join(self.dir, "video_{:04d}".format(i)), rng.random((length, 3, 7, 7)), labels, small_map.au_ids)
        self.dataset = SequenceDataset(self.dir, small_map)

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_eval_covers_every_frame_once(self):
        batches = list(self.dataset.eval_batches(4, 1, 2))
        assert(sum(int(b.mask.sum()) for b in batches) == 7 + 12)
        assert(sum(b.B for b in batches) == 2 + 3)

    def test_train_batches_are_reproducible(self):
        first = [b.clip_origin for b in self.dataset.train_batches(4, 1, 1, np.random.default_rng(9))]
        second = [b.clip_origin for b in self.dataset.train_batches(4, 1, 1, np.random.default_rng(9))]
        assert(first == second)
        assert(sorted(o[0] for batch in first for o in batch) == ["video_0000", "video_0001"])

    def test_all_labels(self):
        assert(self.dataset.all_labels().shape == (19, 5))


class TestSynth(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_labels_from_trajectory(self):
        positions = [(10, 10), (10, 10), (12, 10)]
        assert(list(labels_from_trajectory(positions, (10, 10), 0.75)) == [0, 0, 1])
        assert(list(labels_from_trajectory([(11, 10)], (10, 10), 0.75)) == [1])

    def test_still_blobs_are_never_active(self):
        spec = tiny_spec(blobs=[BlobSpec(1, "up", amplitude=0.0), BlobSpec(12, "low", "fine", amplitude=0.0)])
        synth_generate(spec, self.dir)
        for path in video_dirs(os.path.join(self.dir, "train")):
            assert(read_sequence(path).labels.sum() == 0)

    def test_blobs_stay_in_their_band(self):
        spec = tiny_spec()
        rng = np.random.default_rng(0)
        for blob in spec.blobs:
            positions, _ = blob_trajectory(spec, blob, rng)
            top, bottom = band_limits(blob.region, spec.image_size)
            assert((positions[:, 1] >= top).all() and (positions[:, 1] <= bottom - 1).all())

    def test_generation_is_deterministic(self):
        first, second = os.path.join(self.dir, "a"), os.path.join(self.dir, "b")
        written = synth_generate(tiny_spec(noise=0.05), first)
        synth_generate(tiny_spec(noise=0.05), second)
        assert(written == {"train": 2, "eval": 1})
        for split in ("train", "eval"):
            for a, b in zip(video_dirs(os.path.join(first, split)), video_dirs(os.path.join(second, split))):
                with open(os.path.join(a, frames_file), "rb") as fa, open(os.path.join(b, frames_file), "rb") as fb:
                    assert(fa.read() == fb.read())
        assert(os.path.exists(os.path.join(first, "spec.json")))

    def test_labels_replay_from_trajectory(self):
        synth_generate(tiny_spec(frames=30), self.dir, region_map=SYNTHETIC_REGION_MAP)
        for path in video_dirs(os.path.join(self.dir, "train")):
            record = read_sequence(path, SYNTHETIC_REGION_MAP.au_ids)
            trajectory = read_trajectory(path)
            for i, au in enumerate(trajectory["au_ids"]):
                replay = labels_from_trajectory(trajectory["positions"][i], trajectory["rest"][i], trajectory["threshold"])
                assert(np.array_equal(replay, record.labels[:, record.au_ids.index(au)]))

    def test_video_count_override(self):
        written = synth_generate(tiny_spec(), self.dir, n_videos=5, frames_per_video=3)
        assert(written == {"train": 4, "eval": 1})
        record = read_sequence(video_dirs(os.path.join(self.dir, "eval"))[0])
        assert(record.frames.shape == (3, 3, 28, 28))

    def test_spec_checks(self):
        with self.assertRaises(ConfigError):
            SynthSpec(image_size=30).validate()
        with self.assertRaises(ConfigError):
            SynthSpec.from_dict({"speed": 3})
        with self.assertRaises(ConfigError):
            tiny_spec(blobs=[BlobSpec(1, "up"), BlobSpec(1, "low")])
        with self.assertRaises(ConfigError):
            synth_generate(tiny_spec(blobs=[BlobSpec(9, "low")]), self.dir, region_map=SYNTHETIC_REGION_MAP)

    def test_spec_round_trip(self):
        spec = tiny_spec()
        again = SynthSpec.from_dict(spec.to_dict())
        assert(again == spec)
        # same node order, but the blobs only list AU9 in its home band
        assert(again.region_map().au_ids == SYNTHETIC_REGION_MAP.au_ids)
        assert(again.region_map().regions["low"] == [12, 25])


if __name__ == "__main__":
    unittest.main()
