"""Plain (x, y) CSV series for external plotting."""

from __future__ import annotations

import csv
import math
from pathlib import Path

SERIES = {
    "count": ("count_vs_log_inv_E.csv", ("log_inv_E", "total")),
    "ladder": ("ladder_log_lambda.csv", ("n", "log_lambda")),
    "residual": ("residual_vs_lambda.csv", ("lambda", "ratio")),
}


def _fmt(v):
    return repr(int(v)) if isinstance(v, int) else repr(float(v) + 0.0)


def _rows(kind, data):
    if data is None:
        return []
    if kind == "count":
        return [(math.log(1.0 / E), int(N)) for E, N in zip(data.E_grid, data.totals)]
    if kind == "ladder":
        return [(int(n), math.log(lam)) for n, lam in zip(data.n, data.lambda_n)]
    return [(float(lam), float(r)) for lam, r in data]


def emit_plot_data(results: dict, target) -> list:
    """Write one CSV per series into the directory ``target``.

    ``results`` may hold 'count' (a CountReport), 'ladder' (an EigenLadder)
    and 'residual' (pairs (lam, ratio)).  Missing series give header-only
    files.  Returns the written paths.
    """
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind, (name, header) in SERIES.items():
        path = target / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in _rows(kind, results.get(kind)):
                w.writerow([_fmt(v) for v in row])
        paths.append(path)
    return paths
