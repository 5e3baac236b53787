"""Small helpers for the tabular text formats used by the toolkit.

All readers skip blank lines and lines starting with '#', require an exact
header row, and report 1-based physical row numbers in error messages.
All writers emit deterministic bytes: fixed header, fixed row order decided
by the caller, and shortest round-trip decimal formatting for floats.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .errors import FormatError


def fmt_num(value: float) -> str:
    # str() of a Python float is the shortest decimal that round-trips.
    return str(float(value))


def read_table(path: str | Path, header: tuple[str, ...]) -> list[tuple[int, list[str]]]:
    """Read a tab-separated table, returning (row_number, fields) pairs.

    The first non-comment line must equal the expected header exactly.
    Every data row must have the same number of fields as the header.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise FormatError(f"{path}: cannot read: {err}") from err
    rows: list[tuple[int, list[str]]] = []
    saw_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if not saw_header:
            if tuple(f.strip() for f in fields) != header:
                raise FormatError(
                    f"{path}:{lineno}: expected header {chr(9).join(header)!r}, got {line!r}"
                )
            saw_header = True
            continue
        if len(fields) != len(header):
            raise FormatError(
                f"{path}:{lineno}: expected {len(header)} tab-separated fields, got {len(fields)}"
            )
        rows.append((lineno, [f.strip() for f in fields]))
    if not saw_header:
        raise FormatError(f"{path}: missing header row {chr(9).join(header)!r}")
    return rows


def parse_float(path: str | Path, lineno: int, field: str, what: str) -> float:
    try:
        value = float(field)
    except ValueError as err:
        raise FormatError(f"{path}:{lineno}: {what} {field!r} is not a number") from err
    if value != value or value in (float("inf"), float("-inf")):
        raise FormatError(f"{path}:{lineno}: {what} {field!r} is not finite")
    return value


def write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as err:
        raise FormatError(f"{path}: cannot write: {err}") from err


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str | Path, subcommand: str, params: dict[str, object],
                   inputs: dict[str, str | Path]) -> Path:
    """Write manifest.txt describing one command run.

    Keys are sorted so reruns with the same inputs produce identical bytes.
    The output directory itself is deliberately not recorded.
    """
    from . import __version__

    entries: dict[str, str] = {
        "subcommand": subcommand,
        "version": __version__,
    }
    for key, value in params.items():
        entries[key] = str(value)
    for name, path in inputs.items():
        entries[f"input.{name}.path"] = str(path)
        entries[f"input.{name}.sha256"] = sha256_file(path)
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    out = Path(out_dir) / "manifest.txt"
    write_text(out, "\n".join(lines) + "\n")
    return out
