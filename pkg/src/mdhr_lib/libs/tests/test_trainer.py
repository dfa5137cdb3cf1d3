"""tests for the optimizer, checkpoints, run configs and the training loop"""
import os
import shutil
import tempfile
import unittest

import numpy as np
from mock import patch

from mdhr_lib.helpers.errors import CheckpointError, ConfigError, NonFiniteError, TrainingAborted
from mdhr_lib.helpers.general import make_rng
from mdhr_lib.libs.data import write_sequence
from mdhr_lib.libs.model import Parameter, build_model
from mdhr_lib.libs.tensor import Tensor, ops, backward
from mdhr_lib.libs.trainer import OptimizerState, adamw_step, cosine_lr, clip_gradients, save_checkpoint, \
    load_checkpoint, read_manifest, load_run_config, run_config_from_dict, apply_overrides, train, evaluate
from mdhr_lib.libs.trainer.config import RunConfig
from mdhr_lib.libs.trainer.train import training_class_weights
import mdhr_lib.libs.trainer.train  # noqa: F401  (ensure submodule is loaded)
import sys
_train_module = sys.modules["mdhr_lib.libs.trainer.train"]
from mdhr_lib.libs.data.loader import SequenceDataset

small_regions = {"up": [1, 2], "mid": [6, 9], "low": [9, 12]}


def tiny_document(root, **train):
    settings = {"batch_size": 2, "epochs": 1, "validation_interval": 1, "T": 4, "k": 1, "lr": 0.001}
    settings.update(train)
    return {
        "backbone": {"stage_channels": [4, 4], "stage_strides": [2, 2], "input_size": 28},
        "model": {"b": 4, "region_map": dict(small_regions)},
        "train": settings,
        "data": {"train_dir": os.path.join(root, "train"), "eval_dir": os.path.join(root, "eval")},
        "output_dir": os.path.join(root, "run"),
    }

def write_tiny_videos(root):
    """Alternating labels, so every AU column has both states."""
    rng = np.random.default_rng(0)
    au_ids = [1, 2, 6, 9, 12]
    for split, count in (("train", 2), ("eval", 1)):
        for i in range(count):
            labels = (np.arange(8)[:, None] + np.arange(5)[None, :]) % 2
            frames = rng.random((8, 3, 28, 28)).astype(np.float32)
            write_sequence(os.path.join(root, split, "video_{:04d}".format(i)), frames, labels, au_ids)


class TestOptimizer(unittest.TestCase):

    def param(self, value, grad, decay=True):
        p = Parameter(np.array([value]), decay=decay)
        p.grad = np.array([grad])
        return p

    def test_first_step_moves_by_lr(self):
        p = self.param(1.0, 1.0)
        adamw_step([("p", p)], OptimizerState([("p", p)]), lr=1e-4, weight_decay=0.0)
        assert(abs(p.data[0] - (1.0 - 1e-4)) < 1e-10)

    def test_decay_is_geometric(self):
        p = self.param(2.0, 0.0)
        state = OptimizerState([("p", p)])
        for _ in range(3):
            adamw_step([("p", p)], state, lr=0.1, weight_decay=0.5)
        assert(abs(p.data[0] - 2.0 * 0.95 ** 3) < 1e-12)
        assert(state.step == 3)

    def test_bias_is_not_decayed(self):
        p = self.param(2.0, 0.0, decay=False)
        adamw_step([("p", p)], OptimizerState([("p", p)]), lr=0.1, weight_decay=0.5)
        assert(p.data[0] == 2.0)

    def test_non_finite_gradient(self):
        good, bad = self.param(1.0, 1.0), self.param(1.0, np.nan)
        named = [("good", good), ("bad", bad)]
        with self.assertRaises(NonFiniteError) as cm:
            adamw_step(named, OptimizerState(named), lr=0.1, weight_decay=0.0)
        assert(cm.exception.name == "bad")
        assert(good.data[0] == 1.0)

    def test_minimizes_a_quadratic(self):
        p = Parameter(np.zeros(3))
        state = OptimizerState([("p", p)])
        for _ in range(300):
            p.zero_grad()
            backward(ops.sum(ops.mul(ops.sub(p, 3.0), ops.sub(p, 3.0))))
            adamw_step([("p", p)], state, lr=0.05, weight_decay=0.0)
        assert(np.allclose(p.data, 3.0, atol=0.3))

    def test_cosine_schedule(self):
        assert(cosine_lr(0, 200, 1e-4) == 1e-4)
        assert(abs(cosine_lr(100, 200, 1e-4) - 5e-5) < 1e-15)
        assert(abs(cosine_lr(200, 200, 1e-4)) < 1e-15)
        rates = [cosine_lr(e, 10, 1.0) for e in range(11)]
        assert(all(a >= b for a, b in zip(rates, rates[1:])))

    def test_clip_gradients(self):
        a, b = self.param(0.0, 3.0), self.param(0.0, 4.0)
        norm = clip_gradients([("a", a), ("b", b)], 1.0)
        assert(norm == 5.0)
        assert(np.allclose([a.grad[0], b.grad[0]], [0.6, 0.8]))

    def test_state_round_trip(self):
        p = self.param(1.0, 1.0)
        state = OptimizerState([("p", p)])
        adamw_step([("p", p)], state, lr=0.1, weight_decay=0.0)
        restored = OptimizerState([("p", p)])
        restored.load_state_dict(state.state_dict())
        assert(restored.step == 1)
        assert(np.array_equal(restored.m["p"], state.m["p"]))
        assert(np.array_equal(restored.v["p"], state.v["p"]))


class TestRunConfig(unittest.TestCase):

    def test_packaged_default(self):
        config = load_run_config()
        assert(config.train.T == 16 and config.train.k == 5)
        assert(config.mfd.k == 5 and config.mfd.resize_strides == [4, 2, 1, 1])
        assert(config.model.region_map.N == 8)

    def test_overrides(self):
        config = load_run_config(overrides={"epochs": 3, "lam": 0.1, "seed": 4, "disable": ["aux"]})
        assert(config.train.epochs == 3 and config.train.lam == 0.1 and config.seed == 4)
        assert(not config.model.aux and not config.model.crm)
        with self.assertRaises(ConfigError):
            apply_overrides({}, {"disable": ["everything"]})

    def test_dynamics_overrides(self):
        config = load_run_config(overrides={"fusion": "concat", "mfd_scales": [2, 0]})
        assert(config.model.fusion == "concat" and config.model.mfd_scales == [2, 0])
        assert(load_run_config().model.fusion == "adaptive")
        with self.assertRaises(ConfigError) as cm:
            load_run_config(overrides={"mfd_scales": [4]})
        assert(cm.exception.field == "model.mfd_scales")
        with self.assertRaises(ConfigError) as cm:
            load_run_config(overrides={"fusion": "max"})
        assert(cm.exception.field == "model.fusion")

    def test_partial_file_gets_defaults(self):
        root = tempfile.mkdtemp()
        try:
            path = os.path.join(root, "run.json")
            with open(path, "w") as f:
                f.write('{"train": {"epochs": 2}}')
            config = load_run_config(path)
            assert(config.train.epochs == 2 and config.train.batch_size == 8)
        finally:
            shutil.rmtree(root)

    def test_errors_name_the_field(self):
        root = tempfile.mkdtemp()
        try:
            document = tiny_document(root)
            document["train"]["momentum"] = 0.9
            with self.assertRaises(ConfigError) as cm:
                run_config_from_dict(document)
            assert(cm.exception.field == "train")
            document = tiny_document(root)
            document["mfd"] = {"resize_strides": [1, 1]}
            with self.assertRaises(ConfigError) as cm:
                run_config_from_dict(document)
            assert(cm.exception.field == "mfd.resize_strides")
            document = tiny_document(root)
            document["mfd"] = {"k": 2}
            with self.assertRaises(ConfigError):
                run_config_from_dict(document)
            document = tiny_document(root)
            document["precision"] = "float16"
            with self.assertRaises(ConfigError):
                run_config_from_dict(document)
            document = tiny_document(root)
            document["model"]["region_map"] = "ck+"
            with self.assertRaises(ConfigError):
                run_config_from_dict(document)
        finally:
            shutil.rmtree(root)

    def test_hashes(self):
        a = RunConfig()
        b = RunConfig()
        b.train.epochs = 7
        assert(a.hash() != b.hash())
        assert(a.architecture_hash() == b.architecture_hash())


class TestTraining(unittest.TestCase):

    def setUp(self):
        self.root = tempfile.mkdtemp()
        write_tiny_videos(self.root)
        self.config = run_config_from_dict(tiny_document(self.root))

    def tearDown(self):
        shutil.rmtree(self.root)

    def test_checkpoint_round_trip(self):
        model = build_model(self.config, make_rng(0, "init"))
        state = OptimizerState(model.named_parameters())
        state.step = 5
        path = os.path.join(self.root, "ckpt")
        save_checkpoint(path, model, state, self.config, 3, 0.25)
        other = build_model(self.config, make_rng(1, "init"))
        restored = OptimizerState(other.named_parameters())
        manifest = load_checkpoint(path, other, self.config, restored)
        assert(manifest["epoch"] == 3 and manifest["metric"] == 0.25)
        assert(restored.step == 5)
        for (name, p), (_, q) in zip(model.named_parameters(), other.named_parameters()):
            assert np.array_equal(p.data, q.data), name

    def test_checkpoint_architecture_mismatch(self):
        model = build_model(self.config, make_rng(0, "init"))
        path = os.path.join(self.root, "ckpt")
        save_checkpoint(path, model, None, self.config, 0)
        document = tiny_document(self.root)
        document["model"]["b"] = 8
        wider = run_config_from_dict(document)
        with self.assertRaises(CheckpointError):
            load_checkpoint(path, build_model(wider, make_rng(0, "init")), wider)
        with self.assertRaises(CheckpointError):
            read_manifest(self.root)

    def test_zero_epochs(self):
        self.config.train.epochs = 0
        result = train(self.config)
        assert(result.best_epoch is None)
        assert(read_manifest(result.last_checkpoint)["epoch"] == 0)
        assert(not os.path.exists(result.metrics_path))

    def test_one_epoch(self):
        model = build_model(self.config, make_rng(self.config.seed, "init"))
        before = {name: p.data.copy() for name, p in model.named_parameters()}
        result = train(self.config, model=model)
        assert(result.best_epoch == 1)
        assert(0.0 <= result.best_macro_f1 <= 1.0)
        assert(os.path.exists(os.path.join(result.best_checkpoint, "manifest.json")))
        with open(result.metrics_path) as f:
            assert(len(f.read().strip().splitlines()) == 1 + 5)
        assert(any(not np.array_equal(before[name], p.data) for name, p in model.named_parameters()))

    def test_same_seed_same_run(self):
        """two runs with one seed write identical metrics and end on identical weights"""
        results = []
        for name in ("first", "second"):
            document = tiny_document(self.root, epochs=2)
            document["output_dir"] = os.path.join(self.root, name)
            results.append(train(run_config_from_dict(document)))
        with open(results[0].metrics_path, "rb") as f:
            first = f.read()
        with open(results[1].metrics_path, "rb") as f:
            second = f.read()
        assert(first and first == second)
        assert(results[0].best_epoch == results[1].best_epoch)
        models = []
        for result in results:
            model = build_model(self.config, make_rng(99, "init"))
            load_checkpoint(result.last_checkpoint, model, self.config)
            models.append(model)
        for (name, p), (_, q) in zip(models[0].named_parameters(), models[1].named_parameters()):
            assert np.array_equal(p.data, q.data), name

    def test_nan_loss_aborts(self):
        with patch.object(_train_module, "batch_loss", return_value=(Tensor(np.nan), None)):
            with self.assertRaises(TrainingAborted) as cm:
                train(self.config)
        assert(cm.exception.checkpoint.endswith("last"))
        assert(read_manifest(cm.exception.checkpoint)["epoch"] == 0)

    def test_evaluate_counts_every_frame(self):
        model = build_model(self.config, make_rng(0, "init"))
        result = evaluate(model, SequenceDataset(self.config.eval_dir, self.config.model.region_map), self.config)
        counts = result.counts
        assert(result.au_ids == [1, 2, 6, 9, 12])
        assert(((counts.tp + counts.fp + counts.fn + counts.tn) == 8).all())

    def test_preset_weights_need_every_au(self):
        self.config.train.class_weights = "disfa"
        dataset = SequenceDataset(self.config.train_dir, self.config.model.region_map)
        assert(np.allclose(training_class_weights(self.config, dataset).mean(), 1.0))
        self.config.train.class_weights = "bp4d"
        with self.assertRaises(ConfigError):
            training_class_weights(self.config, dataset)


if __name__ == "__main__":
    unittest.main()
