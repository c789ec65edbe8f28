import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from utils.logger import console_level, get_logger, run_context, set_console_level, setup_logger


class TestRunContext:
    """Records carry the run tag"""

    def test_tag_inside_and_outside_run(self):
        """Default tag is '-', the block tags with variant/seed"""
        logger = get_logger()
        seen = []
        sink = logger.add(lambda message: seen.append(message.record["extra"]["run"]), level="DEBUG")
        try:
            logger.debug("outside")
            with run_context("adversarial_ir", 3):
                logger.debug("inside")
            logger.debug("after")
        finally:
            logger.remove(sink)
        assert seen == ["-", "adversarial_ir/seed3", "-"]


class TestConsoleLevel:
    """Console level bookkeeping"""

    def test_set_and_reset(self):
        """set_console_level is visible until the next setup"""
        set_console_level("INFO")
        assert console_level() == "INFO"
        setup_logger(log_to_file=False)
        assert console_level() == "WARNING"
