"""Per-candidate trace files: CSV with a fixed header, one row per candidate."""
from __future__ import annotations

import csv
import math

COLUMNS = ("k", "selected", "n_k", "score", "threshold", "phi")


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    # repr round-trips exactly and does not depend on the locale
    return repr(x)


class TraceWriter:
    """Append-only writer; use as a context manager."""

    def __init__(self, path, efficiency=False):
        self.path = path
        self.columns = COLUMNS + (("efficiency",) if efficiency else ())
        self._fh = None
        self._last_k = 0

    def __enter__(self):
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise OSError(f"cannot open trace file {self.path}: {exc}") from exc
        self._fh.write(",".join(self.columns) + "\n")
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def write(self, k, selected, n_k, score, threshold, phi, efficiency=None):
        if k <= self._last_k:
            raise ValueError(f"trace records must have increasing k ({k} after {self._last_k})")
        self._last_k = k
        row = [k, bool(selected), n_k, score, threshold, phi]
        if len(self.columns) > len(COLUMNS):
            row.append(math.nan if efficiency is None else efficiency)
        self._fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace(path):
    """Rows as dicts with ints for k/selected/n_k and floats elsewhere."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for key, val in row.items():
                rec[key] = int(val) if key in ("k", "selected", "n_k") else float(val)
            out.append(rec)
    return out
