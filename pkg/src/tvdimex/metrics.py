"""Error norms, the overshoot-aware quasinorm, space-time errors and EOC tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "l1_norm",
    "l2_norm",
    "linf_norm",
    "range_growth",
    "l1o_quasinorm",
    "spacetime_errors",
    "eoc",
    "ErrorReport",
    "eoc_table",
]


def _weight(dx, volume_weighted):
    return dx if volume_weighted else 1.0 / dx


def l1_norm(e, dx, volume_weighted=True):
    """``dx * sum|e|`` (or ``sum|e| / dx`` with ``volume_weighted=False``).

    ``dx`` may be a cell area for 2D fields.
    """
    return float(_weight(dx, volume_weighted) * np.sum(np.abs(e)))


def l2_norm(e, dx, volume_weighted=True):
    return float(math.sqrt(_weight(dx, volume_weighted) * np.sum(np.abs(e) ** 2)))


def linf_norm(e):
    return float(np.max(np.abs(e)))


def range_growth(ranges, range0):
    """Running maximum of ``range(w^m) - range(w^0)`` over ``m <= n``.

    Parameters
    ----------
    ranges : sequence of float
        ``max - min`` of the numerical solution after each step.
    range0 : float
        Range of the initial data.

    Returns
    -------
    ndarray
        Non-negative, non-decreasing; entry ``n`` belongs to step ``n + 1``.
    """
    r = np.asarray(ranges, dtype=float) - range0
    return np.maximum.accumulate(np.maximum(r, 0.0)) if r.size else r


def l1o_quasinorm(w, dx, growth, volume_weighted=True):
    """L1 norm of ``w`` plus the range growth counted in every cell.

    ``growth`` is the running range growth at the current step (see
    :func:`range_growth`).  Pass the error field for error lines or the raw
    solution for maximum-principle reports.
    """
    w = np.asarray(w)
    return float(_weight(dx, volume_weighted) * (np.sum(np.abs(w)) + w.size * growth))


def spacetime_errors(exact_ranges, num_ranges):
    """Mean and maximum over the steps of ``range(exact) - range(numerical)``."""
    ex = np.asarray(exact_ranges, dtype=float)
    nm = np.asarray(num_ranges, dtype=float)
    if ex.shape != nm.shape:
        raise ValueError("trajectories must have the same number of steps")
    if ex.size == 0:
        raise ValueError("empty trajectories")
    d = ex - nm
    return float(np.mean(d)), float(np.max(d))


def eoc(e_coarse, e_fine, n_coarse, n_fine, dim=1):
    """Experimental order between two resolutions.

    ``n`` counts cells, so in ``dim`` dimensions the mesh-size ratio is
    ``(n_fine/n_coarse)**(1/dim)``.  Returns ``nan`` when an error is zero.
    """
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    h_ratio = (n_fine / n_coarse) ** (1.0 / dim)
    return math.log(e_coarse / e_fine) / math.log(h_ratio)


@dataclass
class ErrorReport:
    """Convergence table; ``rows`` are dicts keyed by column name."""

    columns: list
    rows: list = field(default_factory=list)
    spacetime: dict = field(default_factory=dict)

    def column(self, name):
        return [r.get(name) for r in self.rows]

    def to_csv(self, path=None, digits=12):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for r in self.rows:
            wr.writerow([_fmt(r.get(c), digits) for c in self.columns])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _fmt(v, digits):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{v:.{digits}g}"
    return str(v)


def eoc_table(ns, errors, dim=1, norms=("L1", "L2", "Linf", "L1o"), eoc_for=("L1", "L2")):
    """Tabulate errors by resolution with EOC columns.

    Parameters
    ----------
    ns : sequence of int
        Cell counts, coarse to fine.
    errors : dict
        ``{norm_name: sequence}`` aligned with ``ns``.
    """
    if len(ns) < 2:
        raise ValueError("need at least two resolutions")
    present = [n for n in norms if n in errors]
    cols = ["N"]
    for n in present:
        cols.append(n)
        if n in eoc_for:
            cols.append(f"EOC_{n}")
    rep = ErrorReport(cols)
    for i, N in enumerate(ns):
        row = {"N": int(N)}
        for n in present:
            row[n] = float(errors[n][i])
            if n in eoc_for:
                row[f"EOC_{n}"] = (eoc(errors[n][i - 1], errors[n][i], ns[i - 1], N, dim)
                                   if i > 0 else None)
        rep.rows.append(row)
    return rep
