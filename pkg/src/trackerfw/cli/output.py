"""Stdout rendering for the ``fw`` commands.

Command results go to stdout as plain, stable text; diagnostics and logs go
to stderr. Nothing here wraps or highlights, so output can be compared
byte for byte.
"""

import json
from typing import Any, Iterable

from rich.console import Console
from rich.markup import escape

console = Console(highlight=False, soft_wrap=True)
err_console = Console(stderr=True, highlight=False, soft_wrap=True)


def emit(line: str = "") -> None:
    console.out(line, highlight=False)


def emit_lines(lines: Iterable[str]) -> None:
    for line in lines:
        emit(line)


def emit_json(data: Any) -> None:
    emit(json.dumps(data, indent=2))


def emit_error(message: str) -> None:
    err_console.print(f"[bold red]error:[/bold red] {escape(message)}")


def header_lines(rows: Iterable[tuple[str, int, int]]) -> list[str]:
    """``field  0x...`` lines, each value zero-padded to its field width."""
    return [f"{field:<22}0x{value:0{width * 2}x}" for field, value, width in rows]


def printable(raw: bytes) -> str:
    return raw.decode("ascii", errors="replace")


def transcript_lines(lines: Iterable[str], passed: bool) -> list[str]:
    rendered = [f"  {line}" for line in lines]
    rendered.append("PASS" if passed else "FAIL")
    return rendered
