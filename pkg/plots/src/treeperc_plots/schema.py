"""CSV schema validation shared by the figure scripts."""

import csv
from pathlib import Path


class SchemaError(ValueError):
    """The input file does not match the documented schema."""


def read_csv_columns(path, required):
    """Read a CSV into {column: list[str]}, enforcing the required columns.

    A missing column is a hard error naming the offending column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing required column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {col: [row[col] for row in rows] for col in header}
