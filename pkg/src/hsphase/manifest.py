"""Line-oriented key=value manifests with section headers.

One format serves experiment configs, observation sidecars, and output
manifests; files are deterministic (fixed key order, repr-exact floats) so
artifacts diff cleanly and rerun byte-identically.
"""

from __future__ import annotations

import configparser
import hashlib
import io


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case
    return parser


def dumps(sections: dict[str, dict[str, object]]) -> str:
    parser = _new_parser()
    for name, pairs in sections.items():
        parser[name] = {key: format_value(val) for key, val in pairs.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_manifest(path, sections: dict[str, dict[str, object]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(sections))


def read_manifest(path) -> dict[str, dict[str, str]]:
    parser = _new_parser()
    with open(path, encoding="utf-8") as f:
        parser.read_file(f)
    return {name: dict(parser[name]) for name in parser.sections()}


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_hash(sections: dict[str, dict[str, object]]) -> str:
    return hashlib.sha256(dumps(sections).encode()).hexdigest()[:16]
