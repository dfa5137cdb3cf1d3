"""
Checkpoint directories::

    <dir>/params/<parameter name>.mdt
    <dir>/optimizer/<m.|v.><parameter name>.mdt, step.mdt
    <dir>/manifest.json   config hashes, epoch, metric
    <dir>/config.json     the run config the model was built from
"""

import os
import shutil
import time

import numpy as np

from mdhr_lib.helpers.config_parse import read_config, write_config
from mdhr_lib.helpers.errors import CheckpointError
from mdhr_lib.helpers.logger import setup_logger
from mdhr_lib.libs.tensor import read_tensor, write_tensor, MAGIC_F32, MAGIC_F64

logger = setup_logger(__name__, "info")

manifest_file = "manifest.json"
config_file = "config.json"
params_dir = "params"
optimizer_dir = "optimizer"


def _magic_for(dtype):
    return MAGIC_F64 if np.dtype(dtype) == np.float64 else MAGIC_F32

def _write_arrays(directory, arrays, magic):
    os.makedirs(directory)
    for name, value in arrays.items():
        write_tensor(os.path.join(directory, name + ".mdt"), value, magic)

def _read_arrays(directory):
    if not os.path.isdir(directory):
        raise CheckpointError("{} is missing".format(directory))
    arrays = {}
    for filename in sorted(os.listdir(directory)):
        if filename.endswith(".mdt"):
            arrays[filename[:-len(".mdt")]] = read_tensor(os.path.join(directory, filename))
    return arrays


def save_checkpoint(directory, model, state, run_config, epoch, metric=None):
    """
    Writes into a sibling temp directory and swaps it in, so ``directory``
    always holds a complete checkpoint.
    """
    magic = _magic_for(run_config.precision)
    tmp = directory.rstrip(os.sep) + ".tmp"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    _write_arrays(os.path.join(tmp, params_dir), model.state_dict(), magic)
    if state is not None:
        _write_arrays(os.path.join(tmp, optimizer_dir), state.state_dict(), magic)
    manifest = {
        "config_hash": run_config.hash(),
        "architecture_hash": run_config.architecture_hash(),
        "epoch": epoch,
        "metric": metric,
        "precision": run_config.precision,
        "parameters": [name for name, _ in model.named_parameters()],
        "saved_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    write_config(manifest, os.path.join(tmp, manifest_file))
    write_config(run_config.to_dict(), os.path.join(tmp, config_file))
    if os.path.exists(directory):
        shutil.rmtree(directory)
    os.rename(tmp, directory)
    logger.info("Saved checkpoint for epoch {} to {}".format(epoch, directory))
    return manifest


def read_manifest(directory):
    path = os.path.join(directory, manifest_file)
    if not os.path.exists(path):
        raise CheckpointError("{} isn't a checkpoint (no {})".format(directory, manifest_file))
    return read_config(path)

def checkpoint_config_document(directory):
    return read_config(os.path.join(directory, config_file))


def load_checkpoint(directory, model, run_config, state=None):
    """
    Loads parameters (and optimizer moments if ``state`` is given). The
    architecture recorded in the manifest has to match ``run_config``;
    other config differences are only logged.
    """
    manifest = read_manifest(directory)
    if manifest.get("architecture_hash") != run_config.architecture_hash():
        raise CheckpointError("{} was saved for a different architecture than the given config".format(directory))
    if manifest.get("config_hash") != run_config.hash():
        logger.info("Checkpoint {} was trained with different settings; architecture matches".format(directory))
    model.load_state_dict(_read_arrays(os.path.join(directory, params_dir)))
    if state is not None:
        arrays = _read_arrays(os.path.join(directory, optimizer_dir))
        try:
            state.load_state_dict(arrays)
        except (KeyError, ValueError) as e:
            raise CheckpointError("optimizer state in {} doesn't fit the model: {}".format(directory, e))
    return manifest
