"""
Reading and writing scenario files (JSON).
"""
import json
from pathlib import Path
from typing import Union

from loguru import logger
from pydantic import ValidationError

from app.scenarios.models import Scenario
from app.utils.errors import ConfigurationError


def _describe_validation_error(error: ValidationError) -> ConfigurationError:
    first = error.errors()[0]
    path = ".".join(str(part) for part in first.get("loc", ())) or "<scenario>"
    message = first.get("msg", "invalid value")
    return ConfigurationError(f"Invalid scenario field '{path}': {message}",
                              {"field": path, "errors": error.error_count()})


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """
    Parse and validate scenario JSON.

    Raises:
    -------
    ConfigurationError
        With line/column for malformed JSON, or the field path for invalid values.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Malformed scenario JSON: {exc.msg}",
                                 {"source": source, "line": exc.lineno, "column": exc.colno}) from exc
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise _describe_validation_error(exc).with_context(source=source) from exc


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load a scenario file.

    Parameters:
    -----------
    path : Union[str, Path]
        JSON scenario file.

    Returns:
    --------
    Scenario
        The validated scenario with defaults applied.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("Scenario file not found", {"path": str(path)})
    scenario = parse_scenario(path.read_text(encoding="utf-8"), source=str(path))
    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    return scenario.model_dump_json(indent=2) + "\n"


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    """Write ``scenario`` as canonical JSON; load_scenario(path) returns an equal scenario."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_scenario(scenario), encoding="utf-8")
    logger.debug(f"Saved scenario '{scenario.name}' to {path}")
    return path
