"""
End-to-end experiments on the synthetic blob dataset. Each one trains a few
model variants from the same run config and compares their held-out
macro-F1 (the best validation score of each run):

  * ``synthetic``: the full model must reach ``target_macro_f1``, and the
    same seed with the dynamics module disabled must score strictly lower
  * ``lambda``: the auxiliary loss weight 0.01 against 0, over several
    seeds; 0.01 has to match or beat 0 on at least 3 of every 5 seeds
  * ``mfd-variants``: single scales, scale pairs and unweighted fusion
    against the adaptive all-scale default. Scores are recorded, nothing
    is asserted.

Results go to ``acceptance.json`` in the work directory.
"""

import copy
import math
import os
from collections import OrderedDict, namedtuple

from mdhr_lib.helpers.config_parse import read_config, write_config
from mdhr_lib.helpers.errors import ConfigError, UsageError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.data.loader import SequenceDataset
from mdhr_lib.libs.data.synth import load_spec, synth_generate, default_spec_path, spec_file
from mdhr_lib.libs.trainer.config import default_run_config_path, apply_overrides, run_config_from_dict
from mdhr_lib.libs.trainer.train import train

logger = setup_logger(__name__, "info")

report_file = "acceptance.json"
target_macro_f1 = 0.90
default_epochs = 60
lambda_pair = (0.01, 0.0)
lambda_seeds = 5
lambda_win_share = 0.6

ExperimentResult = namedtuple("ExperimentResult", ["name", "passed", "scores", "detail"])


class ExperimentRunner(object):
    """
    Trains variants of ``document`` (a run config dict; the packaged default
    if None) for ``epochs`` epochs on a synthetic dataset generated once into
    ``<work_dir>/data``. Every variant writes its checkpoints and metrics to
    ``<work_dir>/runs/<variant>``.
    """

    def __init__(self, work_dir, document=None, epochs=default_epochs, spec=None, n_videos=None, frames_per_video=None):
        if epochs < 1:
            raise ConfigError("train.epochs", "experiments need at least one epoch, got {}".format(epochs))
        self.work_dir = work_dir
        self.document = copy.deepcopy(document) if document is not None else read_config(default_run_config_path)
        self.epochs = epochs
        self.data_dir = os.path.join(work_dir, "data")
        if not os.path.exists(os.path.join(self.data_dir, spec_file)):
            synth_generate(spec or load_spec(default_spec_path), self.data_dir,
                           n_videos=n_videos, frames_per_video=frames_per_video)
        else:
            logger.info("Reusing the synthetic data in {}".format(self.data_dir))
        self._datasets = None

    def run_config(self, name, seed, model=None, **overrides):
        document = copy.deepcopy(self.document)
        document.setdefault("train", {})["epochs"] = self.epochs
        document["data"] = {"train_dir": os.path.join(self.data_dir, "train"),
                            "eval_dir": os.path.join(self.data_dir, "eval")}
        document["output_dir"] = os.path.join(self.work_dir, "runs", name)
        document.setdefault("model", {}).update(model or {})
        overrides["seed"] = seed
        return run_config_from_dict(apply_overrides(document, overrides))

    def datasets(self, run_config):
        if self._datasets is None:
            region_map = run_config.model.region_map
            self._datasets = (SequenceDataset(run_config.train_dir, region_map),
                              SequenceDataset(run_config.eval_dir, region_map))
        return self._datasets

    def score(self, name, seed=0, model=None, **overrides):
        """Trains one variant and returns its best held-out macro-F1."""
        run_config = self.run_config(name, seed, model, **overrides)
        train_set, eval_set = self.datasets(run_config)
        result = train(run_config, train_set, eval_set)
        macro = result.best_macro_f1 if result.best_macro_f1 is not None else 0.0
        logger.info("{} (seed {}): macro-F1 {:.4f}".format(name, seed, macro))
        return macro


def synthetic_learning(runner, seed=0):
    full = runner.score("full", seed)
    ablated = runner.score("no_mfd", seed, disable=["mfd"])
    scores = OrderedDict([("full", full), ("no_mfd", ablated)])
    reached, lower = full >= target_macro_f1, ablated < full
    detail = "full {:.4f} {} {:.2f}; without dynamics {:.4f}, {} the full model".format(
        full, ">=" if reached else "<", target_macro_f1, ablated, "below" if lower else "not below")
    return ExperimentResult("synthetic", reached and lower, scores, detail)

def lambda_direction(runner, seeds=lambda_seeds):
    with_aux, without_aux = lambda_pair
    scores = OrderedDict()
    wins = 0
    for seed in range(seeds):
        a = runner.score("lambda_{}_seed_{}".format(with_aux, seed), seed, lam=with_aux)
        b = runner.score("lambda_{}_seed_{}".format(without_aux, seed), seed, lam=without_aux)
        scores["seed_{}".format(seed)] = {str(with_aux): a, str(without_aux): b}
        wins += int(a >= b)
    needed = required_wins(seeds)
    detail = "lambda {} >= lambda {} on {} of {} seeds (need {})".format(with_aux, without_aux, wins, seeds, needed)
    return ExperimentResult("lambda", wins >= needed, scores, detail)

def required_wins(seeds):
    """
    >>> required_wins(5), required_wins(1)
    (3, 1)
    """
    return int(math.ceil(lambda_win_share * seeds))

def mfd_variant_settings(L):
    """
    The dynamics settings compared by ``mfd-variants``, as (name, model
    section) pairs.

    >>> [name for name, _ in mfd_variant_settings(3)]
    ['no_mfd', 'scale_0', 'scale_1', 'scale_2', 'scales_0_1', 'scales_1_2', 'all_sum', 'all_concat', 'all_adaptive']
    """
    settings = [("no_mfd", {"mfd": False})]
    settings += [("scale_{}".format(l), {"mfd_scales": [l]}) for l in range(L)]
    settings += [("scales_{}_{}".format(l, l + 1), {"mfd_scales": [l, l + 1]}) for l in range(L - 1)]
    settings += [("all_{}".format(fusion), {"fusion": fusion}) for fusion in ("sum", "concat", "adaptive")]
    return settings

def mfd_variants(runner, seed=0):
    L = runner.run_config("mfd_levels", seed).mfd.L
    base = {"mfd": True, "mfd_scales": None, "fusion": "adaptive"}
    scores = OrderedDict()
    for name, model in mfd_variant_settings(L):
        scores[name] = runner.score("mfd_{}".format(name), seed, model=dict(base, **model))
    best = max(scores, key=scores.get)
    return ExperimentResult("mfd-variants", True, scores, "best setting: {} ({:.4f})".format(best, scores[best]))


experiments = OrderedDict([
    ("synthetic", synthetic_learning),
    ("lambda", lambda_direction),
    ("mfd-variants", mfd_variants),
])

def run_experiments(runner, names, seeds=lambda_seeds, seed=0):
    """Runs the named experiments in order and writes the report. Returns the results."""
    unknown = [name for name in names if name not in experiments]
    if unknown:
        raise UsageError("unknown experiments {}, choose from {}".format(unknown, list(experiments)))
    results = []
    for name in names:
        if name == "lambda":
            result = lambda_direction(runner, seeds)
        else:
            result = experiments[name](runner, seed)
        logger.info("{}: {} ({})".format(name, "passed" if result.passed else "FAILED", result.detail))
        results.append(result)
    report = OrderedDict((r.name, {"passed": r.passed, "scores": r.scores, "detail": r.detail}) for r in results)
    report["epochs"] = runner.epochs
    write_config(report, os.path.join(runner.work_dir, report_file))
    return results
