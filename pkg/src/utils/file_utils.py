"""Utility functions for writing result files."""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence


def ensure_directory(path: Path) -> Path:
    """Create ``path`` and its parents if missing.

    Args:
        path: Directory to create

    Returns:
        The same path
    """
    path = Path(path)
    path.mkdir(exist_ok=True, parents=True)
    return path


def format_cell(value: Any) -> str:
    """Render one CSV cell.

    Floats use ``repr`` so values round-trip exactly; None becomes an empty
    cell; booleans are written as true/false.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(
    path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]
) -> Path:
    """Write rows as CSV with a single header line and ``\\n`` line endings.

    Args:
        path: Output file
        columns: Column order; keys missing from a row become empty cells
        rows: Row mappings

    Returns:
        Path to the written file
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
    return path


def write_json(path: Path, data: Any) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path


def write_ndjson(path: Path, records: Iterable[Mapping[str, Any]]) -> Path:
    """Write one compact JSON object per line."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            f.write("\n")
    return path


def parse_grid(text: Optional[str]) -> List[float]:
    """Parse a comma-separated sweep grid such as ``"10,20,30"``.

    Integral values come back as ints so cluster counts stay integers.

    Raises:
        ValueError: An entry is not a number
    """
    if not text:
        return []
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            value = int(part)
        except ValueError:
            try:
                value = float(part)
            except ValueError:
                raise ValueError(f"Invalid grid value: {part!r}") from None
        values.append(value)
    return values
