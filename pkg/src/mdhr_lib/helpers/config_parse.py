import json

from mdhr_lib.helpers.errors import ConfigError
from mdhr_lib.helpers.logger import setup_logger
logger = setup_logger(__name__, "warning")

def read_config(config_path):
    """
    Reads a JSON document. Syntax errors become ``ConfigError`` naming the
    file; a missing file raises the usual ``OSError``.
    """
    with open(config_path) as f:
        try:
            data = json.load(f)
        except ValueError as e:
            raise ConfigError(config_path, "invalid JSON: {}".format(e))
    return data

def write_config(config_dict, config_path):
    with open(config_path, 'w') as f:
        json.dump(config_dict, f, indent=2, sort_keys=True)

def merge_defaults(config, defaults, name, prefix=""):
    # type: (dict, dict, str, str) -> dict
    """
    Adds keys that are present in ``defaults`` but not in ``config``,
    descending into nested dictionaries. ``config`` is changed in place and
    returned.

    >>> c = merge_defaults({"train": {"epochs": 1}}, {"train": {"epochs": 200, "lr": 0.0001}, "seed": 0}, "test_runner")
    >>> c["train"]["lr"], c["train"]["epochs"], c["seed"]
    (0.0001, 1, 0)
    """
    if not isinstance(config, dict):
        raise ConfigError(prefix.rstrip(".") or name, "expected an object, got {}".format(type(config).__name__))
    keys_added = False
    for key, value in defaults.items():
        if key not in config:
            config[key] = json.loads(json.dumps(value))
            keys_added = True
            logger.debug("Adding key {}{} (from the default config) to the config for {}!".format(prefix, key, name))
        elif isinstance(value, dict) and value and isinstance(config[key], dict):
            merge_defaults(config[key], value, name, "{}{}.".format(prefix, key))
    if keys_added:
        logger.info("Added keys from default config to {} {}".format(name, prefix.rstrip(".") or "(top level)"))
    return config

