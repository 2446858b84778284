"""Plain `key = value` text files for configs, manifests, and reports.

One setting per line, `#` comments, blank lines ignored.  Serialization is
sorted by key and newline-terminated so identical settings produce identical
bytes (manifest hashes depend on this).
"""

from __future__ import annotations

from .errors import ValidationError


def parse_kv(text: str, source: str = "<config>") -> dict:
    """Parse key = value lines into an ordered dict of strings."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(
                f"{source}: line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValidationError(f"{source}: line {line_no}: empty key")
        if key in out:
            raise ValidationError(
                f"{source}: line {line_no}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv_file(path) -> dict:
    with open(path) as fh:
        return parse_kv(fh.read(), source=str(path))


def format_kv(mapping: dict) -> str:
    lines = []
    for key in sorted(mapping):
        value = mapping[key]
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_kv_file(path, mapping: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_kv(mapping))


def get_str(kv: dict, key: str, default=None) -> str:
    if key not in kv:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    return kv[key]


def get_float(kv: dict, key: str, default=None) -> float:
    if key not in kv:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise ValidationError(f"key {key!r}: {kv[key]!r} is not a number") from None


def get_int(kv: dict, key: str, default=None) -> int:
    if key not in kv:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ValidationError(f"key {key!r}: {kv[key]!r} is not an integer") from None


def get_bool(kv: dict, key: str, default=None) -> bool:
    if key not in kv:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    value = kv[key].lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ValidationError(f"key {key!r}: {kv[key]!r} is not a boolean")
