"""
Flat ``key = value`` configuration files.

Keys are case-insensitive; ``#`` starts a comment. Missing keys keep their
defaults (the published parameter table), unknown keys are rejected.
"""

import configparser
import re
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

from iotbot_sampler.errors import ConfigurationError
from iotbot_sampler.experiments import ExperimentConfig

_SECTION = "experiment"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in text.split(",") if item.strip())


# file key -> (ExperimentConfig field, parser, expected-type wording)
CONFIG_KEYS: Dict[str, Tuple[str, Callable[[str], Any], str]] = {
    "n_devices": ("n_devices", int, "integer"),
    "vulnerable_fraction": ("vulnerable_fraction", float, "number"),
    "packets_per_device": ("packets_per_device", int, "integer"),
    "n_v_max": ("n_v_max", int, "integer"),
    "n_nv_max": ("n_nv_max", int, "integer"),
    "f_max": ("f_max", float, "number"),
    "n_p": ("window_packets", int, "integer"),
    "mean_scan_interarrival": ("mean_scan_interarrival", float, "number"),
    "f_v": ("f_v", float, "number"),
    "f_nv": ("f_nv", float, "number"),
    "p1": ("p1", float, "number"),
    "p2": ("p2", float, "number"),
    "n_trials": ("n_trials", int, "integer"),
    "seed": ("seed", int, "integer"),
    "alpha": ("alpha", float, "number"),
    "buffer_capacity": ("buffer_capacity", int, "integer"),
    "deep_match": ("deep_match", _parse_bool, "boolean"),
    "coverage_period": ("coverage_period", _parse_optional_int, "integer or 'auto'"),
    "f_v_grid": ("f_v_grid", _parse_floats, "comma-separated numbers"),
    "f_nv_grid": ("f_nv_grid", _parse_floats, "comma-separated numbers"),
    "p1_values": ("p1_values", _parse_floats, "comma-separated numbers"),
    "p2_values": ("p2_values", _parse_floats, "comma-separated numbers"),
}

# Spelling used when writing a config back out
_DISPLAY_KEYS = {"n_v_max": "N_v_max", "n_nv_max": "N_nv_max", "n_p": "N_p"}


def _line_of(text: str, key: str) -> Optional[int]:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key)
    return f"line {line}, key '{key}'" if line is not None else f"key '{key}'"


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse config text into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(f"[{_SECTION}]\n{text}", source=source)
    except configparser.DuplicateOptionError as e:
        raise ConfigurationError(f"{source}: line {e.lineno - 1}: duplicate key '{e.option}'") from e
    except configparser.ParsingError as e:
        lineno, line = e.errors[0]
        raise ConfigurationError(f"{source}: line {lineno - 1}: cannot parse {line.strip()}") from e
    except configparser.Error as e:
        raise ConfigurationError(f"{source}: {e.message}") from e
    extra = [name for name in parser.sections() if name != _SECTION]
    if extra:
        raise ConfigurationError(f"{source}: sections are not supported (found [{extra[0]}])")

    values: Dict[str, Any] = {}
    for key, raw in parser.items(_SECTION):
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{source}: {_where(text, key)}: unknown configuration key")
        field_name, convert, expected = CONFIG_KEYS[key]
        try:
            values[field_name] = convert(raw)
        except ValueError:
            raise ConfigurationError(
                f"{source}: {_where(text, key)}: expected {expected}, got {raw!r}") from None

    try:
        return ExperimentConfig(**values)
    except ConfigurationError as e:
        raise ConfigurationError(f"{source}: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e.strerror or e}") from e
    return parse_config(text, source=str(path))


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(f"{item:g}" for item in value)
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    """Config text that :func:`parse_config` reads back to ``cfg``."""
    lines = ["# iotbot-sampler experiment configuration"]
    for key, (field_name, _, _) in CONFIG_KEYS.items():
        lines.append(f"{_DISPLAY_KEYS.get(key, key)} = {_format(getattr(cfg, field_name))}")
    return "\n".join(lines) + "\n"
