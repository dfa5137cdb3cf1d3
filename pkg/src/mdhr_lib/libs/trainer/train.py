import os
import time
from collections import namedtuple

import numpy as np

from mdhr_lib.helpers.env import host_report, format_host_report
from mdhr_lib.helpers.errors import ConfigError, DomainError, NonFiniteError, TrainingAborted
from mdhr_lib.helpers.general import make_rng
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.helpers.runners import BatchPrefetcher
from mdhr_lib.libs import objective
from mdhr_lib.libs.data.loader import SequenceDataset
from mdhr_lib.libs.model.mdhr import build_model
from mdhr_lib.libs.tensor import Tensor, backward, precision
from mdhr_lib.libs.tensor.tensor import supported_dtypes
from mdhr_lib.libs.trainer.checkpoint import save_checkpoint
from mdhr_lib.libs.trainer.optim import OptimizerState, adamw_step, clip_gradients, cosine_lr

logger = setup_logger(__name__, "info")

metrics_file = "metrics.csv"
last_checkpoint = "last"
best_checkpoint = "best"

TrainResult = namedtuple("TrainResult", ["best_macro_f1", "best_epoch", "metrics_path", "best_checkpoint", "last_checkpoint"])
EvalResult = namedtuple("EvalResult", ["counts", "report", "au_ids"])

label_counts = {"bp4d": objective.BP4D_LABEL_COUNTS, "disfa": objective.DISFA_LABEL_COUNTS}


def training_class_weights(run_config, train_set):
    au_ids = run_config.model.region_map.au_ids
    try:
        if run_config.train.class_weights != "none":
            return objective.class_weights_from_counts(label_counts[run_config.train.class_weights], au_ids)
        return objective.class_weights_from_labels(train_set.all_labels())
    except DomainError as e:
        raise ConfigError("train.class_weights", str(e))


def batch_loss(model, batch, weights, lam, dtype):
    out = model(Tensor(batch.frames, dtype=dtype))
    l_au = objective.au_loss(out.probs, batch.labels, weights, batch.mask)
    l_sub = None
    if out.combinations:
        l_sub = objective.sub_loss(out.combinations, batch.combo_targets, batch.mask)
    return objective.total_loss(l_au, l_sub, lam), out


def evaluate(model, dataset, run_config):
    """Frame-based F1 over back-to-back clips of every video; tail padding is masked out."""
    train = run_config.train
    dtype = supported_dtypes[run_config.precision]
    counts = objective.ConfusionCounts.empty(model.region_map.N)
    with precision(run_config.precision):
        for batch in dataset.eval_batches(train.T, train.k, train.batch_size, dtype):
            out = model(Tensor(batch.frames, dtype=dtype))
            counts = counts + objective.ConfusionCounts.from_predictions(out.probs, batch.labels, train.threshold, batch.mask)
    return EvalResult(counts, counts.report(), list(model.region_map.au_ids))


def train(run_config, train_set=None, eval_set=None, model=None):
    """
    Trains for ``train.epochs`` epochs, validating every
    ``validation_interval`` epochs and after the last one. ``last`` holds the
    latest finished epoch, ``best`` the best validation macro-F1. A
    non-finite loss or gradient stops the run with ``TrainingAborted``.
    """
    cfg = run_config.train
    region_map = run_config.model.region_map
    dtype = supported_dtypes[run_config.precision]
    if train_set is None:
        train_set = SequenceDataset(run_config.train_dir, region_map)
    if eval_set is None:
        eval_set = SequenceDataset(run_config.eval_dir, region_map)
    out_dir = run_config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, metrics_file)
    if os.path.exists(metrics_path):
        os.remove(metrics_path)
    last_path = os.path.join(out_dir, last_checkpoint)
    best_path = os.path.join(out_dir, best_checkpoint)

    logger.info("Host: {}".format(format_host_report(host_report())))
    with precision(run_config.precision):
        if model is None:
            model = build_model(run_config, make_rng(run_config.seed, "init"))
        weights = training_class_weights(run_config, train_set)
        logger.info("Class weights: {}".format(", ".join("AU{}={:.3f}".format(au, w) for au, w in zip(region_map.au_ids, weights))))
        state = OptimizerState(model.named_parameters())
        save_checkpoint(last_path, model, state, run_config, 0)
        best_f1, best_epoch = None, None

        for epoch in range(1, cfg.epochs + 1):
            lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr)
            started = time.time()
            losses = []
            batches = train_set.train_batches(cfg.T, cfg.k, cfg.batch_size, make_rng(run_config.seed, "clips", epoch), dtype)
            for batch in BatchPrefetcher(batches, cfg.prefetch):
                loss, _ = batch_loss(model, batch, weights, cfg.lam, dtype)
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingAborted("loss became {} in epoch {}".format(value, epoch), last_path)
                model.zero_grad()
                backward(loss)
                if cfg.grad_clip is not None:
                    clip_gradients(model.named_parameters(), cfg.grad_clip)
                try:
                    adamw_step(model.named_parameters(), state, lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps)
                except NonFiniteError as e:
                    raise TrainingAborted("epoch {}: {}".format(epoch, e), last_path)
                losses.append(value)
            logger.info("Epoch {}/{}: lr {:.3g}, loss {:.5f}, {:.1f}s".format(epoch, cfg.epochs, lr, float(np.mean(losses)), time.time() - started))
            save_checkpoint(last_path, model, state, run_config, epoch)

            if epoch % cfg.validation_interval == 0 or epoch == cfg.epochs:
                result = evaluate(model, eval_set, run_config)
                macro = result.report.macro_f1
                objective.write_metrics(metrics_path, epoch, result.au_ids, result.report)
                if best_f1 is None or macro > best_f1:
                    best_f1, best_epoch = macro, epoch
                    save_checkpoint(best_path, model, state, run_config, epoch, macro)
                logger.info("Validation after epoch {}: macro-F1 {:.4f} (best {:.4f} at epoch {})".format(epoch, macro, best_f1, best_epoch))

    return TrainResult(best_f1, best_epoch, metrics_path, best_path if best_epoch else None, last_path)
