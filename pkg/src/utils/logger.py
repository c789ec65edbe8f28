"""
loguru setup shared by the CLI, the trainer and ablation workers

Every record carries a ``run`` tag ("-" outside a run, "<variant>/seed<N>"
inside one) so interleaved worker output stays attributable.
"""
import sys
from contextlib import contextmanager
from typing import Iterator, Optional

from loguru import logger

from config import LOG_FILE, LOG_LEVEL, LOG_TO_FILE, LOGS_DIR


CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<magenta>{extra[run]}</magenta> | <cyan>{name}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {process} | {extra[run]} | {name}:{function}:{line} - {message}"

_console_handler_id: Optional[int] = None
_console_level = "WARNING"


def _add_console(level: str) -> int:
    return logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)


def setup_logger(console_level: str = "WARNING", log_to_file: bool = LOG_TO_FILE):
    """
    Reset loguru to the mmir handlers

    Console gets WARNING by default (INFO with ``mmir --debug``). The rotating
    file handler under logs/ is only added when MMIR_LOG_TO_FILE is set; it
    is enqueued because ablation workers write to the same file.
    """
    global _console_handler_id, _console_level

    logger.remove()
    logger.configure(extra={"run": "-"})
    _console_level = console_level
    _console_handler_id = _add_console(console_level)

    if log_to_file:
        LOGS_DIR.mkdir(parents=True, exist_ok=True)
        logger.add(
            LOG_FILE,
            format=FILE_FORMAT,
            level=LOG_LEVEL,
            rotation="10 MB",
            retention="7 days",
            compression="zip",
            enqueue=True,
        )
    return logger


def set_console_level(level: str) -> None:
    """Swap the console handler for one at ``level``; the file handler is untouched"""
    global _console_handler_id, _console_level

    if _console_handler_id is not None:
        logger.remove(_console_handler_id)
    _console_level = level
    _console_handler_id = _add_console(level)


def console_level() -> str:
    return _console_level


def init_worker(level: str) -> None:
    """ProcessPoolExecutor initializer: child processes start from the parent's console level"""
    setup_logger(console_level=level)


@contextmanager
def run_context(variant: str, seed: int) -> Iterator[None]:
    """Tag every record logged inside the block with ``variant/seedN``"""
    with logger.contextualize(run=f"{variant}/seed{seed}"):
        yield


def get_logger():
    return logger


setup_logger()
