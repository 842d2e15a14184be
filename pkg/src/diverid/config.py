"""Plain-text key=value configuration files.

Format: one `key = value` pair per line, `#` starts a comment, blank lines
ignored. Keys are dotted, e.g. `filter.hw_min = 10`. Values stay strings;
consumers convert.
"""

from __future__ import annotations

from pathlib import Path

from .errors import DataFormatError


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise DataFormatError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())
