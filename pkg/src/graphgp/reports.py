"""Structured text reports: scalar key-value lines plus named CSV blocks.

The layout is a stable contract: scalars first (``key: value``), then one
``[section]`` per table with a CSV header line and rows.  Tooling that
consumes reports keys off the schema, which ``report_schema`` extracts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass
class Table:
    name: str
    header: Sequence[str]
    rows: List[Sequence] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.header):
            raise ValueError(
                f"[{self.name}] row has {len(row)} cells for {len(self.header)} columns"
            )
        self.rows.append(row)


@dataclass
class Report:
    command: str
    scalars: dict = field(default_factory=dict)
    tables: List[Table] = field(default_factory=list)

    def set(self, key: str, value) -> None:
        self.scalars[key] = value

    def table(self, name: str, header: Sequence[str]) -> Table:
        t = Table(name, header)
        self.tables.append(t)
        return t

    def to_text(self) -> str:
        lines = [f"command: {self.command}"]
        for key, value in self.scalars.items():
            lines.append(f"{key}: {_fmt(value)}")
        for t in self.tables:
            lines.append("")
            lines.append(f"[{t.name}]")
            lines.append(",".join(t.header))
            for row in t.rows:
                lines.append(",".join(_fmt(cell) for cell in row))
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def report_schema(text: str) -> List[str]:
    """Schema fingerprint: scalar keys in order, then section:header pairs."""
    schema = []
    section = None
    expect_header = False
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            expect_header = True
            continue
        if expect_header:
            schema.append(f"{section}:{line}")
            expect_header = False
            continue
        if section is None and ":" in line:
            schema.append(line.split(":", 1)[0])
    return schema
