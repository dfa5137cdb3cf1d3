from mdhr_lib.libs.trainer.config import TrainConfig, RunConfig, load_run_config, run_config_from_dict, apply_overrides
from mdhr_lib.libs.trainer.optim import OptimizerState, adamw_step, cosine_lr, clip_gradients
from mdhr_lib.libs.trainer.checkpoint import save_checkpoint, load_checkpoint, read_manifest
from mdhr_lib.libs.trainer.train import train, evaluate, TrainResult, EvalResult
