import hashlib
import json
import os
import sys

import numpy as np


def local_path_gen(_name_):
    """This function generates a ``local_path`` function you can use
    to get an absolute path to a file in a module's directory. You need
    to pass ``__name__`` to ``local_path_gen``. Example usage:

    .. code-block:: python

        from mdhr_lib.helpers.general import local_path_gen
        local_path = local_path_gen(__name__)
        ...
        config_path = local_path("resources", "default_run.json")

    The resulting local_path function supports multiple arguments,
    passing all of them to ``os.path.join`` internally."""
    app_path = os.path.dirname(sys.modules[_name_].__file__)

    def local_path(*path):
        return os.path.join(app_path, *path)
    return local_path

def make_rng(seed, *stream):
    """
    Returns a numpy ``Generator`` for a named sub-stream of a run seed, so
    that e.g. weight init and clip sampling don't share one random sequence
    and adding a consumer doesn't shift the others.

    >>> make_rng(3, "init").integers(1000) == make_rng(3, "init").integers(1000)
    True
    >>> make_rng(3, "init").integers(10**9) == make_rng(3, "clips").integers(10**9)
    False
    """
    words = [int(seed)]
    for part in stream:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "little"))
        else:
            words.append(int(part))
    return np.random.default_rng(np.random.SeedSequence(words))

def config_hash(config):
    """
    SHA-256 over the canonical JSON dump of a config dictionary.

    >>> config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    True
    """
    dump = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(dump.encode("utf-8")).hexdigest()


# noinspection PyTypeChecker,PyArgumentList
class Singleton:
    _instance = None

    def __new__(cls, *args, **kwargs):
        if not isinstance(cls._instance, cls):
            cls._instance = object.__new__(cls)
        return cls._instance
