"""Shared output helper for the experiment scripts."""

import csv
import pathlib

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results"


def write_rows(name, rows):
    RESULTS.mkdir(exist_ok=True)
    path = RESULTS / name
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
    return path
