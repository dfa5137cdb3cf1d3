import configparser
import logging
import os

from mdhr_lib.helpers.general import Singleton


logger = logging.getLogger(__name__)
logger.setLevel(logging.WARNING)

# every logger handed out by setup_logger, so levels can be re-applied later
logger_names = set()

log_conf_env_var = "MDHR_LOG_CONF"
default_log_conf_path = "log_conf.ini"
log_format = "%(asctime)s %(name)s %(levelname)s: %(message)s"


def setup_logger(logger_name, requested_level):
    # type: (str, str) -> logging.Logger
    """
    Creates (or fetches) the logger for a library module. The level asked for
    in code is only a default: an entry for ``logger_name`` in the override
    file wins over it.
    """
    default = check_log_level(requested_level, logging.WARNING)
    level = LoggingConfig().get_level(logger_name, default)
    logger.debug("Logger {} gets level {}".format(logger_name, get_log_level_name(level)))
    module_logger = logging.getLogger(logger_name)
    module_logger.setLevel(level)
    logger_names.add(logger_name)
    return module_logger

def get_logger_names():
    return sorted(logger_names)

def check_log_level(log_level_name, default_value):
    # type: (str, int) -> int
    """
    Turns a level name into a ``logging`` level, falling back to
    ``default_value`` for names ``logging`` doesn't know.

    >>> check_log_level("debug", logging.ERROR) == logging.DEBUG
    True
    >>> check_log_level("loud", logging.ERROR) == logging.ERROR
    True
    """
    try:
        return logging._checkLevel(log_level_name.upper())
    except ValueError:
        return default_value

def get_log_level_name(level):
    """
    >>> get_log_level_name(logging.WARNING)
    'WARNING'
    """
    return logging.getLevelName(level)

def configure_root_handler(level_name):
    """
    Installs the stream handler used by the ``mdhr`` commands and moves every
    registered library logger to ``level_name``, except the ones the override
    file pins. Library modules never call this.
    """
    level = check_log_level(level_name, logging.INFO)
    root = logging.getLogger()
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(log_format))
        root.addHandler(handler)
    root.setLevel(level)
    overrides = LoggingConfig()
    for name in get_logger_names():
        if not overrides.is_overridden(name):
            logging.getLogger(name).setLevel(level)
    return root


class LoggingConfig(Singleton):
    """
    Per-logger level overrides read from an INI file, so that e.g. the
    trainer can be made verbose without touching the code::

        [global]
        default_level = warning

        [mdhr_lib.libs.trainer.train]
        level = debug

    The path comes from ``MDHR_LOG_CONF`` (``log_conf.ini`` in the working
    directory otherwise). A missing file overrides nothing. Passing a path
    explicitly re-reads the overrides from that file.
    """

    reserved_sections = ("global",)
    _initialized = False

    def __init__(self, conf_path=None):
        if self._initialized and conf_path is None:
            return
        self.path = conf_path or os.environ.get(log_conf_env_var, default_log_conf_path)
        self.default_log_level = logging.WARNING
        self.overrides = {}
        self._load()
        self._initialized = True

    def get_level(self, logger_name, default_value=logging.NOTSET):
        if default_value == logging.NOTSET:
            default_value = self.default_log_level
        return self.overrides.get(logger_name, default_value)

    def is_overridden(self, logger_name):
        return logger_name in self.overrides

    def _load(self):
        self.overrides = {}
        if not os.path.exists(self.path):
            return
        parser = configparser.ConfigParser()
        parser.read(self.path)
        if parser.has_section("global"):
            name = parser.get("global", "default_level", fallback="warning")
            self.default_log_level = check_log_level(name, logging.WARNING)
        for section in parser.sections():
            if section in self.reserved_sections or not parser.has_option(section, "level"):
                continue
            level = check_log_level(parser.get(section, "level"), logging.NOTSET)
            if level == logging.NOTSET:
                logger.warning("{}: unknown level for [{}], ignored".format(self.path, section))
                continue
            self.overrides[section] = level

    def reload_config(self):
        """Re-reads the override file and applies it to loggers that already exist."""
        self._load()
        for name, level in self.overrides.items():
            target = logging.getLogger(name)
            if target.level != level:
                logger.info("Logger {}: {} -> {}".format(name, get_log_level_name(target.level), get_log_level_name(level)))
                target.setLevel(level)

    def __str__(self):
        lines = ["default log level: {}".format(get_log_level_name(self.default_log_level))]
        if not self.overrides:
            lines.append("\tno overrides ({} absent or empty)".format(self.path))
        for name in sorted(self.overrides):
            lines.append("\t{} : {}".format(name, get_log_level_name(self.overrides[name])))
        return "\n".join(lines)
