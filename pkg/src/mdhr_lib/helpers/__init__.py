from mdhr_lib.helpers.config_parse import read_config, write_config, merge_defaults
from mdhr_lib.helpers.general import local_path_gen, make_rng, config_hash, Singleton
from mdhr_lib.helpers.runners import BooleanEvent, BackgroundRunner, BatchPrefetcher
from mdhr_lib.helpers.logger import setup_logger, configure_root_handler
from mdhr_lib.helpers.env import host_report
from mdhr_lib.helpers.errors import MdhrError, DimensionError, DomainError, UsageError, ConfigError, FormatError, \
    CheckpointError, NonFiniteError, TrainingAborted
