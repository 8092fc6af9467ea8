"""Plain-text ``key = value`` configuration files."""

from __future__ import annotations

from pathlib import Path


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def as_int_list(value: str) -> list[int]:
    return [int(v) for v in value.replace(" ", "").split(",") if v]


def as_float_list(value: str) -> list[float]:
    return [float(v) for v in value.replace(" ", "").split(",") if v]


def as_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")
