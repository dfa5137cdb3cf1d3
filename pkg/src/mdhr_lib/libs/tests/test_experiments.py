"""tests for the end-to-end acceptance experiments and their report"""
import io
import json
import os
import shutil
import tempfile
import unittest

from mock import patch

from mdhr_lib import cli
from mdhr_lib.helpers.errors import ConfigError, UsageError
from mdhr_lib.libs.data.synth import SynthSpec
from mdhr_lib.libs.experiments import ExperimentRunner, run_experiments, mfd_variant_settings, report_file
from mdhr_lib.libs.trainer import TrainResult


def tiny_document():
    return {
        "backbone": {"stage_channels": [4, 4], "stage_strides": [2, 2], "input_size": 28},
        "model": {"b": 4},
        "train": {"batch_size": 2, "epochs": 1, "validation_interval": 1, "T": 4, "k": 1, "lr": 0.001},
    }

def tiny_spec():
    return SynthSpec(image_size=28, frames=10, noise=0.0, seed=1)

def scored_by(score_of):
    """A stand-in for train() that scores a run config without training."""
    def fake_train(run_config, train_set=None, eval_set=None):
        return TrainResult(score_of(run_config), 1, None, None, None)
    return fake_train

def mfd_matters(run_config):
    return 0.95 if run_config.model.mfd else 0.60


class TestExperiments(unittest.TestCase):

    def setUp(self):
        self.root = tempfile.mkdtemp()
        self.runner = ExperimentRunner(self.root, tiny_document(), epochs=3, spec=tiny_spec(), n_videos=3)

    def tearDown(self):
        shutil.rmtree(self.root)

    def run_named(self, score_of, names, **kwargs):
        with patch("mdhr_lib.libs.experiments.train", side_effect=scored_by(score_of)) as train:
            results = run_experiments(self.runner, names, **kwargs)
        return results, [call[0][0] for call in train.call_args_list]

    def test_variant_configs(self):
        config = self.runner.run_config("full", 3, model={"fusion": "sum"}, lam=0.5)
        assert(config.train.epochs == 3 and config.seed == 3 and config.train.lam == 0.5)
        assert(config.model.fusion == "sum")
        assert(config.output_dir == os.path.join(self.root, "runs", "full"))
        assert(config.train_dir == os.path.join(self.root, "data", "train"))
        assert(os.path.isdir(config.train_dir) and os.path.isdir(config.eval_dir))

    def test_synthetic_passes(self):
        (result,), configs = self.run_named(mfd_matters, ["synthetic"])
        assert(result.passed)
        assert(result.scores == {"full": 0.95, "no_mfd": 0.60})
        assert([c.model.mfd for c in configs] == [True, False])
        assert(configs[0].seed == configs[1].seed == 0)

    def test_synthetic_needs_the_target(self):
        (result,), _ = self.run_named(lambda c: 0.85 if c.model.mfd else 0.5, ["synthetic"])
        assert(not result.passed)

    def test_synthetic_needs_a_strict_gap(self):
        (result,), _ = self.run_named(lambda c: 0.95, ["synthetic"])
        assert(not result.passed)
        assert("not below" in result.detail)

    def test_lambda_counts_ties_as_wins(self):
        """0.01 wins seeds 0 and 1 and ties seed 2: three of five"""
        def score(c):
            if c.train.lam == 0.0:
                return 0.8
            return {0: 0.9, 1: 0.85, 2: 0.8}.get(c.seed, 0.7)
        (result,), configs = self.run_named(score, ["lambda"])
        assert(result.passed)
        assert(len(configs) == 10)
        assert(sorted(set(c.seed for c in configs)) == [0, 1, 2, 3, 4])
        assert(result.scores["seed_2"] == {"0.01": 0.8, "0.0": 0.8})

    def test_lambda_fails_on_two_of_five(self):
        def score(c):
            if c.train.lam == 0.0:
                return 0.8
            return 0.9 if c.seed < 2 else 0.7
        (result,), _ = self.run_named(score, ["lambda"])
        assert(not result.passed)
        assert("on 2 of 5" in result.detail)

    def test_mfd_variants(self):
        (result,), configs = self.run_named(lambda c: 0.5 + 0.1 * len(c.model.mfd_scales or []), ["mfd-variants"])
        assert(result.passed)
        assert(list(result.scores) == [name for name, _ in mfd_variant_settings(2)])
        settings = [(c.model.mfd, c.model.mfd_scales, c.model.fusion) for c in configs]
        assert(settings == [(False, None, "adaptive"), (True, [0], "adaptive"), (True, [1], "adaptive"),
                            (True, [0, 1], "adaptive"), (True, None, "sum"), (True, None, "concat"),
                            (True, None, "adaptive")])
        assert(result.detail.startswith("best setting: scales_0_1"))

    def test_report(self):
        self.run_named(mfd_matters, ["synthetic", "lambda"], seeds=2)
        with open(os.path.join(self.root, report_file)) as f:
            report = json.load(f)
        assert(report["epochs"] == 3)
        assert(report["synthetic"]["passed"])
        assert(report["lambda"]["passed"] and len(report["lambda"]["scores"]) == 2)

    def test_bad_requests(self):
        with self.assertRaises(UsageError):
            run_experiments(self.runner, ["speed"])
        with self.assertRaises(ConfigError):
            ExperimentRunner(self.root, tiny_document(), epochs=0)

    def test_data_is_generated_once(self):
        with patch("mdhr_lib.libs.experiments.synth_generate") as generate:
            ExperimentRunner(self.root, tiny_document(), spec=tiny_spec())
        assert(not generate.called)


class TestAcceptanceCommand(unittest.TestCase):

    def setUp(self):
        self.root = tempfile.mkdtemp()
        self.config_path = os.path.join(self.root, "run.json")
        with open(self.config_path, "w") as f:
            json.dump(tiny_document(), f)
        self.spec_path = os.path.join(self.root, "spec.json")
        with open(self.spec_path, "w") as f:
            json.dump({"image_size": 28, "frames": 10, "noise": 0.0, "seed": 1}, f)
        self.work_dir = os.path.join(self.root, "work")

    def tearDown(self):
        shutil.rmtree(self.root)

    def run_cli(self, score_of, *argv):
        argv = ["acceptance", "--work-dir", self.work_dir, "--config", self.config_path, "--spec", self.spec_path,
                "--videos", "3", "--epochs", "2"] + list(argv)
        with patch("mdhr_lib.libs.experiments.train", side_effect=scored_by(score_of)):
            with patch("sys.stdout", new_callable=io.StringIO) as out:
                code = cli.main(argv)
        return code, out.getvalue()

    def test_passing_run(self):
        code, out = self.run_cli(mfd_matters, "--experiment", "synthetic", "--experiment", "lambda")
        assert(code == cli.EXIT_OK)
        assert("FAIL" not in out and out.count("PASS") == 2)
        assert(os.path.exists(os.path.join(self.work_dir, report_file)))

    def test_failing_run_exits_one(self):
        code, out = self.run_cli(lambda c: 0.5, "--experiment", "synthetic")
        assert(code == cli.EXIT_FAILED)
        assert("synthetic" in out and "FAIL" in out)

    def test_bad_epochs(self):
        code, _ = self.run_cli(mfd_matters, "--experiment", "synthetic", "--epochs", "0")
        assert(code == cli.EXIT_CONFIG)


if __name__ == "__main__":
    unittest.main()
