"""Flat key-value run configuration with include support.

Files hold one `key = value` per line, full-line comments starting with '#',
and `include other.cfg` directives (paths relative to the including file).
Later assignments override earlier ones.  Resolution against a subcommand's
option schema rejects unknown keys and reports every violation at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


@dataclass
class Option:
    name: str
    type: type = str
    default: object = None
    required: bool = False
    choices: tuple | None = None


def read_config_file(path):
    """Parse one config file (plus includes) into an ordered key -> str map."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("include "):
            out.update(read_config_file(path.parent / line[len("include "):].strip()))
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_value(option, text):
    if option.type is bool:
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return option.type(text)


def resolve_options(schema, file_values, cli_values):
    """Merge defaults < config file < explicit CLI flags against a schema.

    schema is an iterable of Option; cli_values maps option name -> value or
    None (None meaning the flag was not given).  All violations are collected
    and raised together.
    """
    options = {opt.name: opt for opt in schema}
    errors = []
    for key in file_values:
        if key not in options:
            errors.append(f"unknown config key {key!r}")
    resolved = {name: opt.default for name, opt in options.items()}
    for key, text in file_values.items():
        if key not in options:
            continue
        try:
            resolved[key] = _parse_value(options[key], text)
        except (TypeError, ValueError) as err:
            errors.append(f"config key {key!r}: {err}")
    for key, value in cli_values.items():
        if key in options and value is not None:
            resolved[key] = value
    for name, opt in options.items():
        if opt.required and resolved[name] is None:
            errors.append(f"missing required option {name!r}")
        if opt.choices and resolved[name] is not None and resolved[name] not in opt.choices:
            errors.append(f"option {name!r} must be one of {list(opt.choices)}, "
                          f"got {resolved[name]!r}")
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return resolved


def write_resolved_config(resolved, path, version):
    """Record the exact settings a run used, next to its outputs."""
    lines = [f"# wordsync {version}", f"version = {version}"]
    for key in sorted(resolved):
        value = resolved[key]
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
