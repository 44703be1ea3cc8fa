import copy
import json
import sys
from typing import Any, Literal, TYPE_CHECKING

import pydantic_core
from loguru import logger

if TYPE_CHECKING:
    from loguru import Record
    from loguru._handler import Handler  # type: ignore

LogLevel = Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]

# Records bound with this marker belong to the decoder project.
PROJECT_MARKER = "lpdec"

log = logger.bind(lpdec=True)


def project_filter(record: "Record") -> bool:
    """Only let through records emitted by the decoder modules."""
    return bool(record["extra"].get(PROJECT_MARKER))


def _is_flat_dict(data: Any) -> bool:
    """Checks if a dictionary contains only non-dict/non-list values (is one level deep)."""
    if not isinstance(data, dict):
        return False
    return not any(isinstance(value, (dict, list)) for value in data.values())


def _truncate_long_strings(
    data: Any, max_len: int, truncation_marker: str, truncation_enabled: bool
) -> Any:
    """
    Recursively traverses a data structure (dicts, lists) and truncates
    long string values. Long numeric lists (vectors x, gamma) are cut to
    `max_len` elements. Creates copies to avoid modifying original data.
    """
    if not truncation_enabled or max_len <= len(truncation_marker):
        if isinstance(data, (dict, list)):
            return copy.deepcopy(data)
        return data

    if isinstance(data, str):
        if len(data) > max_len:
            return data[: max_len - len(truncation_marker)] + truncation_marker
        return data
    elif isinstance(data, dict):
        return {
            k: _truncate_long_strings(v, max_len, truncation_marker, truncation_enabled)
            for k, v in data.items()
        }
    elif isinstance(data, list):
        items = [
            _truncate_long_strings(item, max_len, truncation_marker, truncation_enabled)
            for item in data[:max_len]
        ]
        if len(data) > max_len:
            items.append(truncation_marker)
        return items
    else:
        return data


def stdout_format(record: "Record") -> str:
    """
    Format function for the project's handler.
    Serializes and truncates data passed under the 'payload' key in extra.
    """
    LOG_OPTIONS_PREFIX = "_log_"
    TRUNCATION_ENABLED_KEY = f"{LOG_OPTIONS_PREFIX}truncation_enabled"
    MAX_LENGTH_KEY = f"{LOG_OPTIONS_PREFIX}max_length"
    TRUNCATION_MARKER_KEY = f"{LOG_OPTIONS_PREFIX}truncation_marker"
    DATA_KEY = "payload"

    original_extra = record["extra"]
    data_to_process = original_extra.get(DATA_KEY)

    serialized_data_json = ""
    if data_to_process is not None:
        try:
            # numpy arrays and scalars become lists / floats here.
            if hasattr(data_to_process, "tolist"):
                data_to_process = data_to_process.tolist()
            serializable_data = pydantic_core.to_jsonable_python(
                data_to_process, serialize_unknown=True
            )

            truncation_enabled = original_extra.get(TRUNCATION_ENABLED_KEY, True)
            max_length = original_extra.get(MAX_LENGTH_KEY, 256)
            truncation_marker = original_extra.get(TRUNCATION_MARKER_KEY, "[...]")

            # An explicit max_length forces truncation on.
            if MAX_LENGTH_KEY in original_extra:
                truncation_enabled = True

            truncated_data = _truncate_long_strings(
                serializable_data,
                max_length,
                truncation_marker,
                truncation_enabled,
            )

            if _is_flat_dict(truncated_data):
                json_string = json.dumps(truncated_data, separators=(",", ":"), default=str)
                serialized_data_json = " - " + json_string
            else:
                json_string = json.dumps(truncated_data, indent=2, default=str)
                serialized_data_json = "\n" + json_string

        except (TypeError, ValueError) as e:
            serialized_data_json = f" - {{Serialization Error: {e}}}"
        except Exception as e:
            serialized_data_json = f" - {{Processing Error: {e}}}"

    record["extra"]["_lpdec_serialized_data"] = serialized_data_json

    base_template = (
        "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>"
    )
    base_template += "{extra[_lpdec_serialized_data]}"
    base_template += "\n{exception}"
    return base_template.rstrip()


def add_log_handler(log_level: LogLevel, sink: Any = None) -> int | None:
    """
    Adds or updates the loguru handler for the decoder modules.
    The handler is replaced only if the level differs from the installed one.
    Returns the id of the active handler, or None if the level is invalid.
    """
    try:
        desired_level_no = log.level(log_level).no
    except ValueError:
        log.error(f"Invalid LOG_LEVEL '{log_level}'. Cannot add/update handler.")
        return None

    handlers: dict[int, "Handler"] = logger._core.handlers  # type: ignore
    handler_id_to_remove = None

    for handler_id, handler in handlers.items():
        existing_filter = handler._filter
        is_our_filter = (
            existing_filter is not None
            and getattr(existing_filter, "__name__", None) == project_filter.__name__
            and getattr(existing_filter, "__module__", None) == project_filter.__module__
        )
        if not is_our_filter:
            continue
        if handler.levelno == desired_level_no:
            log.debug(f"Handler {handler_id} already exists with level '{log_level}'.")
            return handler_id
        log.info(
            f"Handler {handler_id} found with level {handler.levelno}, "
            f"replacing it with level {desired_level_no}."
        )
        handler_id_to_remove = handler_id
        break

    if handler_id_to_remove is not None:
        try:
            logger.remove(handler_id_to_remove)
        except ValueError:
            log.warning(f"Could not remove handler {handler_id_to_remove}, it was already gone.")

    handler_id = logger.add(
        sink if sink is not None else sys.stdout,
        level=log_level,
        format=stdout_format,
        filter=project_filter,
    )
    log.debug(f"Added new loguru handler {handler_id} with level {log_level}.")
    return handler_id
