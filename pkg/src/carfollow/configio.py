"""Key=value config files, deterministic serialization helpers, config hash.

Every output the package writes must be byte-identical across reruns with the
same config and seed, so all float formatting goes through `fmt` (shortest
round-trip repr) and all JSON through `dump_json` (sorted keys, no whitespace
drift, a leading "meta" entry carrying config hash and seed).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Mapping


def fmt(x: Any) -> str:
    """Deterministic text for one cell: shortest round-trip repr for floats;
    None renders as the absence marker '-'."""
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        # float() strips float subclasses (e.g. numpy scalars) whose repr
        # is not the plain shortest round-trip form.
        return repr(float(x))
    return str(x)


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse `key=value` lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_kv_file(path: str | Path) -> dict[str, str]:
    return parse_kv_text(Path(path).read_text())


def write_kv_file(path: str | Path, values: Mapping[str, Any], header: str = "") -> None:
    lines = []
    if header:
        lines.append(f"# {header}")
    for key in sorted(values):
        lines.append(f"{key}={fmt(values[key])}")
    Path(path).write_text("\n".join(lines) + "\n")


def config_hash(values: Mapping[str, Any]) -> str:
    """Stable 12-hex-digit digest of a flat config mapping."""
    canonical = "\n".join(f"{k}={fmt(values[k])}" for k in sorted(values))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def header_comment(cfg_hash: str, seed: int) -> str:
    return f"# config_hash={cfg_hash} seed={seed}"


def dump_json(path: str | Path, payload: Mapping[str, Any], cfg_hash: str, seed: int) -> None:
    """Write JSON with a meta entry first and fully deterministic bytes."""
    body: dict[str, Any] = {"meta": {"config_hash": cfg_hash, "seed": seed}}
    for key, value in payload.items():
        body[key] = value
    Path(path).write_text(json.dumps(body, sort_keys=True, indent=1) + "\n")


def load_json(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())


def write_csv(
    path: str | Path,
    columns: Iterable[str],
    rows: Iterable[Iterable[Any]],
    comment_lines: Iterable[str] = (),
) -> None:
    """Plain CSV with optional leading '#' comment lines, repr-exact floats."""
    lines = list(comment_lines)
    cols = list(columns)
    lines.append(",".join(cols))
    for row in rows:
        cells = [fmt(c) for c in row]
        if len(cells) != len(cols):
            raise ValueError("row width does not match header")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]], list[str]]:
    """Read a CSV written by write_csv: (columns, rows, comment_lines)."""
    comments: list[str] = []
    header: list[str] | None = None
    rows: list[list[str]] = []
    for line in Path(path).read_text().splitlines():
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cells = line.split(",")
        if header is None:
            header = cells
        else:
            rows.append(cells)
    if header is None:
        raise ValueError(f"no header row in {path}")
    return header, rows, comments
