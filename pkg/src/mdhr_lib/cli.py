"""
Command-line entry points: ``mdhr synth-data | train | eval | gradcheck | inspect | acceptance``.

Exit codes: 0 ok, 1 a check, an acceptance experiment or the training run failed, 2 bad config or
checkpoint, 3 I/O or file format problem.
"""

import argparse
import os
import sys

import numpy as np

from mdhr_lib.helpers.config_parse import read_config, write_config, merge_defaults
from mdhr_lib.helpers.errors import CheckpointError, ConfigError, FormatError, TrainingAborted
from mdhr_lib.helpers.general import make_rng
from mdhr_lib.helpers.logger import setup_logger, configure_root_handler
from mdhr_lib.libs.checks import run_checks, checks, gradcheck_tolerance
from mdhr_lib.libs.experiments import ExperimentRunner, run_experiments, experiments, default_epochs, lambda_seeds, report_file
from mdhr_lib.libs.data.loader import SequenceDataset
from mdhr_lib.libs.data.sequences import ClipSpan, make_batch
from mdhr_lib.libs.data.synth import load_spec, synth_generate, default_spec_path
from mdhr_lib.libs.model.mdhr import build_model, component_toggles
from mdhr_lib.libs.model.mfd import fusion_modes
from mdhr_lib.libs.model.module import param_count
from mdhr_lib.libs.model.regions import region_names, region_rows
from mdhr_lib.libs.objective import write_metrics
from mdhr_lib.libs.tensor import Tensor, precision, write_tensor, MAGIC_F64
from mdhr_lib.libs.tensor.tensor import supported_dtypes
from mdhr_lib.libs.trainer.checkpoint import load_checkpoint, checkpoint_config_document
from mdhr_lib.libs.trainer.config import load_run_config, run_config_from_dict, default_run_config_path
from mdhr_lib.libs.trainer.train import train, evaluate

logger = setup_logger(__name__, "info")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def cmd_synth_data(args):
    spec = load_spec(args.spec or default_spec_path)
    if args.seed is not None:
        spec.seed = args.seed
    written = synth_generate(spec, args.out, n_videos=args.videos, frames_per_video=args.frames)
    print("Wrote {} train and {} eval videos to {}".format(written["train"], written["eval"], args.out))
    return EXIT_OK

def _overrides(args):
    return {
        "epochs": args.epochs,
        "lam": args.lam,
        "seed": args.seed,
        "batch_size": args.batch_size,
        "precision": args.precision,
        "disable": args.disable,
        "fusion": args.fusion,
        "mfd_scales": args.mfd_scales,
    }

def cmd_train(args):
    run_config = load_run_config(args.config, _overrides(args))
    if args.output_dir:
        run_config.output_dir = args.output_dir
    try:
        result = train(run_config)
    except TrainingAborted as e:
        logger.error("Training aborted: {}".format(e))
        return EXIT_FAILED
    if result.best_epoch is None:
        print("No epochs run; initial checkpoint in {}".format(result.last_checkpoint))
    else:
        print("Best macro-F1 {:.4f} at epoch {}; metrics in {}".format(result.best_macro_f1, result.best_epoch, result.metrics_path))
    return EXIT_OK

def _checkpoint_config(args):
    if args.config:
        return load_run_config(args.config)
    return run_config_from_dict(checkpoint_config_document(args.checkpoint))

def _load_model(run_config, checkpoint):
    with precision(run_config.precision):
        model = build_model(run_config, make_rng(run_config.seed, "init"))
    manifest = load_checkpoint(checkpoint, model, run_config)
    return model, manifest

def format_f1_table(result):
    lines = ["{:>6}  {:>9}  {:>9}  {:>9}".format("AU", "precision", "recall", "F1")]
    report = result.report
    for au, p, r, f1 in zip(result.au_ids, report.precision, report.recall, report.f1):
        lines.append("{:>6}  {:>9.4f}  {:>9.4f}  {:>9.4f}".format("AU{}".format(au), p, r, f1))
    lines.append("{:>6}  {:>9}  {:>9}  {:>9.4f}".format("macro", "", "", report.macro_f1))
    return "\n".join(lines)

def cmd_eval(args):
    run_config = _checkpoint_config(args)
    model, manifest = _load_model(run_config, args.checkpoint)
    dataset = SequenceDataset(args.data or run_config.eval_dir, run_config.model.region_map)
    result = evaluate(model, dataset, run_config)
    print(format_f1_table(result))
    if args.csv:
        if os.path.exists(args.csv):
            os.remove(args.csv)
        write_metrics(args.csv, manifest.get("epoch", 0), result.au_ids, result.report)
    return EXIT_OK

def cmd_gradcheck(args):
    results = run_checks(args.module, args.seed)
    failed = False
    for name, error in results:
        ok = error < gradcheck_tolerance
        failed = failed or not ok
        print("{:<28} max rel. error {:.3e}  {}".format(name, error, "ok" if ok else "FAIL"))
    return EXIT_FAILED if failed else EXIT_OK

def weight_summary(weight_maps):
    """Mean weight of every scale inside each face band, for maps [T, L, 7, 7]."""
    summary = {}
    for name, (start, stop) in region_rows(weight_maps.shape[-2]).items():
        means = weight_maps[:, :, start:stop, :].mean(axis=(0, 2, 3))
        summary[name] = {"mean_weight_per_scale": [float(m) for m in means], "dominant_scale": int(np.argmax(means))}
    return summary

def dump_weight_maps(model, run_config, out_dir, data_dir=None):
    dataset = SequenceDataset(data_dir or run_config.eval_dir, run_config.model.region_map)
    video = dataset.videos[0]
    T = run_config.train.T
    batch = make_batch([(video.video_id, video.frames, video.labels, ClipSpan(0, min(T, len(video.frames))))],
                       T, run_config.train.k, run_config.model.region_map)
    dtype = supported_dtypes[run_config.precision]
    with precision(run_config.precision):
        out = model(Tensor(batch.frames, dtype=dtype))
    weights = out.weight_maps[0]
    os.makedirs(out_dir, exist_ok=True)
    write_tensor(os.path.join(out_dir, "weight_maps.mdt"), weights, MAGIC_F64)
    summary = weight_summary(weights)
    summary["video"] = video.video_id
    summary["max_sum_deviation"] = float(np.abs(weights.sum(axis=1) - 1).max())
    write_config(summary, os.path.join(out_dir, "weight_summary.json"))
    return summary

def cmd_inspect(args):
    run_config = _checkpoint_config(args)
    model, manifest = _load_model(run_config, args.checkpoint)
    print("parameters: {}".format(param_count(model)))
    print("epoch: {}, metric: {}".format(manifest.get("epoch"), manifest.get("metric")))
    if args.dump_weights:
        if model.dynamics is None:
            raise ConfigError("model.mfd", "the checkpoint has no dynamics module, so no weight maps")
        if not model.dynamics.weighted:
            raise ConfigError("model.fusion", "{} fusion has no scale weight maps".format(model.dynamics.fusion))
        summary = dump_weight_maps(model, run_config, args.dump_weights, args.data)
        for name in region_names:
            print("{}: dominant scale {}".format(name, summary[name]["dominant_scale"]))
    return EXIT_OK

def _acceptance_document(path):
    if path is None:
        return None
    document = read_config(path)
    merge_defaults(document, read_config(default_run_config_path), path)
    return document

def cmd_acceptance(args):
    spec = load_spec(args.spec) if args.spec else None
    runner = ExperimentRunner(args.work_dir, _acceptance_document(args.config), epochs=args.epochs, spec=spec,
                              n_videos=args.videos, frames_per_video=args.frames)
    names = list(experiments) if not args.experiment or "all" in args.experiment else args.experiment
    results = run_experiments(runner, names, seeds=args.seeds, seed=args.seed)
    for result in results:
        print("{:<14} {}  {}".format(result.name, "PASS" if result.passed else "FAIL", result.detail))
    print("report: {}".format(os.path.join(args.work_dir, report_file)))
    return EXIT_OK if all(result.passed for result in results) else EXIT_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="mdhr", description="Facial action unit recognition with multi-scale dynamics and hierarchical relations")
    parser.add_argument('--log-level', dest='log_level', type=str, default="info", help="Root logging level")
    subparsers = parser.add_subparsers(dest='cmd', required=True, help="Command")

    synth_parser = subparsers.add_parser('synth-data', help="Generates the synthetic blob dataset")
    synth_parser.add_argument('--spec', dest='spec', type=str, default=None, help="Generator settings (JSON); packaged default if omitted")
    synth_parser.add_argument('--out', dest='out', type=str, required=True)
    synth_parser.add_argument('--videos', dest='videos', type=int, default=None, help="Total videos, split 4:1 into train/eval")
    synth_parser.add_argument('--frames', dest='frames', type=int, default=None)
    synth_parser.add_argument('--seed', dest='seed', type=int, default=None)
    synth_parser.set_defaults(func=cmd_synth_data)

    train_parser = subparsers.add_parser('train', help="Trains a model")
    train_parser.add_argument('--config', dest='config', type=str, default=None, help="Run config (JSON); packaged default if omitted")
    train_parser.add_argument('--epochs', dest='epochs', type=int, default=None)
    train_parser.add_argument('--lambda', dest='lam', type=float, default=None)
    train_parser.add_argument('--seed', dest='seed', type=int, default=None)
    train_parser.add_argument('--batch-size', dest='batch_size', type=int, default=None)
    train_parser.add_argument('--precision', dest='precision', choices=sorted(supported_dtypes), default=None)
    train_parser.add_argument('--disable', dest='disable', action='append', choices=component_toggles, default=None)
    train_parser.add_argument('--output-dir', dest='output_dir', type=str, default=None)
    train_parser.add_argument('--fusion', dest='fusion', choices=fusion_modes, default=None)
    train_parser.add_argument('--mfd-scales', dest='mfd_scales', type=int, nargs='+', default=None, help="Pyramid scales (0-based) fed to the dynamics module")
    train_parser.set_defaults(func=cmd_train)

    eval_parser = subparsers.add_parser('eval', help="Per-AU F1 of a checkpoint")
    eval_parser.add_argument('--checkpoint', dest='checkpoint', type=str, required=True)
    eval_parser.add_argument('--config', dest='config', type=str, default=None, help="Defaults to the config stored with the checkpoint")
    eval_parser.add_argument('--data', dest='data', type=str, default=None, help="Evaluation split; the config's eval_dir if omitted")
    eval_parser.add_argument('--csv', dest='csv', type=str, default=None)
    eval_parser.set_defaults(func=cmd_eval)

    gradcheck_parser = subparsers.add_parser('gradcheck', help="Finite-difference gradient checks")
    gradcheck_parser.add_argument('--module', dest='module', choices=list(checks) + ["all"], default="all")
    gradcheck_parser.add_argument('--seed', dest='seed', type=int, default=0)
    gradcheck_parser.set_defaults(func=cmd_gradcheck)

    inspect_parser = subparsers.add_parser('inspect', help="Parameter count and scale weight maps")
    inspect_parser.add_argument('--checkpoint', dest='checkpoint', type=str, required=True)
    inspect_parser.add_argument('--config', dest='config', type=str, default=None)
    inspect_parser.add_argument('--data', dest='data', type=str, default=None)
    inspect_parser.add_argument('--dump-weights', dest='dump_weights', type=str, default=None)
    inspect_parser.set_defaults(func=cmd_inspect)
    acceptance_parser = subparsers.add_parser('acceptance', help="Trains and compares variants on synthetic data; exits 1 if an experiment fails")
    acceptance_parser.add_argument('--work-dir', dest='work_dir', type=str, required=True, help="Synthetic data, runs and acceptance.json go here")
    acceptance_parser.add_argument('--experiment', dest='experiment', action='append', choices=list(experiments) + ["all"], default=None)
    acceptance_parser.add_argument('--epochs', dest='epochs', type=int, default=default_epochs)
    acceptance_parser.add_argument('--seeds', dest='seeds', type=int, default=lambda_seeds, help="Seeds of the lambda comparison")
    acceptance_parser.add_argument('--seed', dest='seed', type=int, default=0)
    acceptance_parser.add_argument('--config', dest='config', type=str, default=None)
    acceptance_parser.add_argument('--spec', dest='spec', type=str, default=None, help="Generator settings (JSON); packaged default if omitted")
    acceptance_parser.add_argument('--videos', dest='videos', type=int, default=None)
    acceptance_parser.add_argument('--frames', dest='frames', type=int, default=None)
    acceptance_parser.set_defaults(func=cmd_acceptance)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_root_handler(args.log_level)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as e:
        logger.error("{}: {}".format(type(e).__name__, e))
        return EXIT_CONFIG
    except (FormatError, OSError) as e:
        logger.error("{}: {}".format(type(e).__name__, e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
