import logging

import pytest


@pytest.fixture(autouse=True)
def _restore_geocnn_log_level():
    """Undo logger level changes made by CLI ``main()`` calls in tests"""
    logger = logging.getLogger('geocnn')
    level = logger.level
    yield
    logger.setLevel(level)
