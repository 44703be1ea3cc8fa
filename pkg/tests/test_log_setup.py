import io

import numpy as np
import pytest
from loguru import logger

from utils.log_setup import _truncate_long_strings, add_log_handler, project_filter


@pytest.fixture
def clean_logger():
    logger.remove()
    yield
    logger.remove()


def test_project_filter():
    assert project_filter({"extra": {"lpdec": True}})
    assert not project_filter({"extra": {}})


def test_truncation_of_strings_and_vectors():
    data = {"name": "x" * 40, "x": list(range(20)), "nested": {"gamma": [0.5] * 3}}
    truncated = _truncate_long_strings(data, 10, "[...]", True)
    assert truncated["name"] == "xxxxx[...]"
    assert truncated["x"] == list(range(10)) + ["[...]"]
    assert truncated["nested"] == {"gamma": [0.5, 0.5, 0.5]}
    assert data["x"] == list(range(20))
    assert _truncate_long_strings(data, 10, "[...]", False) == data


def test_handler_only_shows_project_records(clean_logger):
    sink = io.StringIO()
    add_log_handler("INFO", sink=sink)
    logger.bind(lpdec=True).info("from the decoder")
    logger.info("from somewhere else")
    text = sink.getvalue()
    assert "from the decoder" in text
    assert "from somewhere else" not in text


def test_payload_is_serialized(clean_logger):
    sink = io.StringIO()
    add_log_handler("DEBUG", sink=sink)
    logger.bind(lpdec=True).debug("point", payload={"objective": -1.5, "pivots": 3})
    logger.bind(lpdec=True).debug("vector", payload=np.array([0.0, 1.0]))
    text = sink.getvalue()
    assert '{"objective":-1.5,"pivots":3}' in text
    assert "0.0" in text and "1.0" in text


def test_handler_is_reused_or_replaced(clean_logger):
    first = add_log_handler("INFO", sink=io.StringIO())
    assert add_log_handler("INFO", sink=io.StringIO()) == first
    second = add_log_handler("DEBUG", sink=io.StringIO())
    assert second != first
    assert add_log_handler("NOPE") is None
