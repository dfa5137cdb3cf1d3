"""tests for the logger helpers and the level override file"""
import logging
import os
import shutil
import tempfile
import unittest

from mdhr_lib.helpers.logger import setup_logger, check_log_level, LoggingConfig, get_logger_names, \
    configure_root_handler


class TestLogger(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.conf = os.path.join(self.dir, "log_conf.ini")
        with open(self.conf, "w") as f:
            f.write("[global]\ndefault_level = error\n\n[mdhr_lib.tests.loud]\nlevel = debug\n")

    def tearDown(self):
        LoggingConfig(os.path.join(self.dir, "absent.ini"))
        shutil.rmtree(self.dir)

    def test_requested_level(self):
        l = setup_logger("mdhr_lib.tests.plain", "info")
        assert(l.level == logging.INFO)
        assert("mdhr_lib.tests.plain" in get_logger_names())
        assert(check_log_level("nonsense", logging.ERROR) == logging.ERROR)

    def test_override_file(self):
        config = LoggingConfig(self.conf)
        assert(config.is_overridden("mdhr_lib.tests.loud"))
        assert(config.get_level("mdhr_lib.tests.loud") == logging.DEBUG)
        assert(config.get_level("mdhr_lib.tests.other") == logging.ERROR)
        assert(setup_logger("mdhr_lib.tests.loud", "warning").level == logging.DEBUG)
        assert("mdhr_lib.tests.loud : DEBUG" in str(config))

    def test_reload_applies_levels(self):
        l = setup_logger("mdhr_lib.tests.loud", "warning")
        config = LoggingConfig(self.conf)
        l.setLevel(logging.WARNING)
        config.reload_config()
        assert(l.level == logging.DEBUG)

    def test_root_handler_keeps_overrides(self):
        LoggingConfig(self.conf)
        loud = setup_logger("mdhr_lib.tests.loud", "warning")
        plain = setup_logger("mdhr_lib.tests.plain", "warning")
        root = logging.getLogger()
        level = root.level
        try:
            configure_root_handler("error")
            assert(plain.level == logging.ERROR)
            assert(loud.level == logging.DEBUG)
            assert(root.handlers)
        finally:
            root.setLevel(level)


if __name__ == "__main__":
    unittest.main()
