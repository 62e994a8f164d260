import logging

import pytest

from app_setup import setup_logging
from config import LOG_LEVEL, QUIET_LOG_LEVEL


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)


def _lab_handlers():
    return [h for h in logging.getLogger().handlers if getattr(h, "_heavyball_lab", False)]


def test_repeated_setup_does_not_stack_handlers():
    setup_logging()
    setup_logging()
    assert len(_lab_handlers()) == 1
    assert logging.getLogger().level == LOG_LEVEL


def test_quiet_mode():
    setup_logging(quiet=True)
    assert logging.getLogger().level == QUIET_LOG_LEVEL
    assert _lab_handlers()[0].level == QUIET_LOG_LEVEL


def test_log_file_receives_records(tmp_path):
    path = tmp_path / "lab.log"
    setup_logging(log_file=str(path))
    assert len(_lab_handlers()) == 2
    logging.getLogger("heavy_ball").info("hello from the lab")
    for handler in _lab_handlers():
        handler.flush()
    assert "hello from the lab" in path.read_text(encoding="utf-8")
