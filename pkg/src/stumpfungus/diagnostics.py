"""Posterior diagnostics: two-sample KS statistics, summaries, plot data."""
from __future__ import annotations

import io as _io
import csv
import math
from dataclasses import dataclass

import numpy as np

from .io import atomic_write_text


def ks_two_sample(a, b):
    """Exact sup-distance between the empirical CDFs of two samples."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample requires nonempty samples")
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class KsReport:
    """Per-marginal KS statistics between two posteriors."""

    per_marginal: tuple  # of (name, ks)
    median_ks: float


def ks_report(samples_a, samples_b, names=None):
    """KS per common marginal; ``names`` restricts and orders the columns."""
    if names is None:
        names = [n for n in samples_a.names if n in set(samples_b.names)]
    if not names:
        raise ValueError("no common parameter names to compare")
    per = tuple(
        (n, ks_two_sample(samples_a.column(n), samples_b.column(n)))
        for n in names
    )
    return KsReport(per, float(np.median([k for _, k in per])))


@dataclass(frozen=True)
class TimingReport:
    label: str
    wall_time_seconds: float
    burn_in: int
    draws: int
    seed: int

    def __post_init__(self):
        if self.wall_time_seconds < 0:
            raise ValueError("wall time must be nonnegative")

    def to_dict(self):
        return {
            "label": self.label,
            "wall_time_seconds": self.wall_time_seconds,
            "burn_in": self.burn_in,
            "draws": self.draws,
            "seed": self.seed,
        }


def summarize(samples):
    """Per-parameter mean, sd, and 5/50/95% quantiles.

    Quantiles interpolate linearly between order statistics; needs >= 2 draws.
    """
    if samples.draws < 2:
        raise ValueError("summarize requires at least 2 draws")
    out = []
    for name in samples.names:
        col = samples.column(name)
        q5, q50, q95 = np.quantile(col, [0.05, 0.5, 0.95], method="linear")
        out.append({
            "name": name,
            "mean": float(np.mean(col)),
            "sd": float(np.std(col, ddof=1)),
            "q5": float(q5),
            "q50": float(q50),
            "q95": float(q95),
        })
    return out


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _hist_edges(col):
    lo = float(col.min())
    hi = float(col.max())
    n = col.size
    if n < 2 or hi == lo:
        return np.array([lo, hi])
    iqr = float(np.subtract(*np.percentile(col, [75, 25])))
    width = 2.0 * iqr / n ** (1.0 / 3.0)  # Freedman-Diaconis
    if width <= 0.0:
        return np.array([lo, hi])
    bins = min(int(math.ceil((hi - lo) / width)), 10_000)
    return np.linspace(lo, hi, bins + 1)


def _write_csv(path, header, rows):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    atomic_write_text(path, buf.getvalue())


def emit_plot_data(obj, path):
    """Write plot-ready CSVs under directory ``path``; returns file list.

    Posterior samples produce a histogram and an ECDF file per marginal;
    KS reports produce a single table with a trailing median row.
    """
    import os

    os.makedirs(path, exist_ok=True)
    written = []
    if isinstance(obj, KsReport):
        target = os.path.join(path, "ks.csv")
        rows = [(name, float(ks)) for name, ks in obj.per_marginal]
        rows.append(("median", float(obj.median_ks)))
        _write_csv(target, ("name", "ks"), rows)
        return [target]
    for name in obj.names:
        col = np.asarray(obj.column(name), dtype=float)
        edges = _hist_edges(col)
        if edges[0] == edges[-1]:
            counts = np.array([col.size])
            edges = np.array([edges[0], edges[-1]])
        else:
            counts, edges = np.histogram(col, bins=edges)
        hist_path = os.path.join(path, f"{_safe(name)}_hist.csv")
        _write_csv(
            hist_path,
            ("bin_left", "bin_right", "count"),
            [
                (float(edges[i]), float(edges[i + 1]), int(counts[i]))
                for i in range(len(counts))
            ],
        )
        written.append(hist_path)
        xs = np.sort(col)
        ecdf_path = os.path.join(path, f"{_safe(name)}_ecdf.csv")
        _write_csv(
            ecdf_path,
            ("x", "F"),
            [(float(x), float((i + 1) / xs.size)) for i, x in enumerate(xs)],
        )
        written.append(ecdf_path)
    return written
