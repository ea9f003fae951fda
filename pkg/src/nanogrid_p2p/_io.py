from __future__ import annotations

import csv
from pathlib import Path


def read_rows(path: str | Path, columns: tuple[str, ...]):
    """Yield dict rows of a CSV file after checking the required columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, skipinitialspace=True)
        fieldnames = [name.strip() for name in (reader.fieldnames or [])]
        reader.fieldnames = fieldnames
        missing = [c for c in columns if c not in fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        yield from reader
