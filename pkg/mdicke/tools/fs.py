"""File system operations for result files and the ground-state cache."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

from rich.console import Console

console = Console(stderr=True)


def format_field(value: Any) -> str:
    """CSV text of one cell: shortest round-trip floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value:  # NaN
            return ""
        return repr(float(value))
    if hasattr(value, "item"):
        # numpy scalars
        return format_field(value.item())
    return str(value)


def atomic_write_bytes(file_path: Path, payload: bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    target = Path(file_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_text(file_path: Path, content: str) -> None:
    atomic_write_bytes(file_path, content.encode("utf-8"))


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with LF line endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_field(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(file_path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a UTF-8 CSV file atomically and report it."""
    target = Path(file_path)
    atomic_write_text(target, render_csv(header, rows))
    console.print(f"[green]File written:[/green] {target}")
    return target


def write_json(file_path: Path, data: Any) -> Path:
    """Write pretty-printed JSON atomically."""
    target = Path(file_path)
    atomic_write_text(target, json.dumps(data, indent=2, ensure_ascii=False, default=str) + "\n")
    console.print(f"[green]File written:[/green] {target}")
    return target
