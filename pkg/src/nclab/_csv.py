import csv
import io
import os
from typing import Iterable, Sequence


def fmt(x) -> str:
    """17 significant digits for floats, plain ``str`` for ints and flags."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_rows(dest, header: Sequence[str], rows: Iterable[Sequence]) -> str | None:
    """Write CSV to a path, an open text file, or (``dest=None``) return it as a string."""
    if dest is None:
        buf = io.StringIO()
        _emit(buf, header, rows)
        return buf.getvalue()
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            _emit(fh, header, rows)
        return None
    _emit(dest, header, rows)
    return None


def _emit(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
