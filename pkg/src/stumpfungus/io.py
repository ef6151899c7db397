"""File formats: posterior JSON, dataset CSVs, atomic writes.

All writes go through a temp-file-and-rename so partially written files are
never observed.  Reals round-trip losslessly (python float repr).
"""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile

import numpy as np


class DataError(ValueError):
    """Malformed input file; message carries the path and line number."""


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_posterior(samples, model_id, config, path):
    """Posterior sample file: deterministic JSON, row-major draws.

    Wall time is deliberately not serialized so identical (seed, config)
    runs produce byte-identical files; use the bench command for timings.
    """
    doc = {
        "model_id": model_id,
        "names": list(samples.names),
        "draws": [[float(x) for x in row] for row in samples.matrix],
        "seed": config.seed,
        "config": config.to_dict(),
        "accept_rate": float(samples.accept_rate),
        "wall_time_seconds": None,
    }
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_posterior(path):
    """Returns (PosteriorSamples, model_id, config_dict)."""
    from .hmc import PosteriorSamples

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    samples = PosteriorSamples(
        names=tuple(doc["names"]),
        matrix=np.asarray(doc["draws"], dtype=float),
        accept_rate=float(doc.get("accept_rate", 0.0)),
        wall_time_seconds=doc.get("wall_time_seconds") or 0.0,
    )
    return samples, doc.get("model_id"), doc.get("config", {})


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _read_rows(path, expected_header):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: missing header row") from None
        if [h.strip() for h in header] != list(expected_header):
            raise DataError(
                f"{path}:1: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(expected_header)} fields, "
                    f"got {len(row)}"
                )
            rows.append((lineno, row))
        return rows


def _write_csv(path, header, rows):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


MARBLES_HEADER = ("box", "outcome")
RATS_HEADER = ("n", "y")
ATTAIN_HEADER = ("sid", "sex", "pid", "cc", "vrq", "attain")


def load_marbles_csv(path, n_boxes=6):
    draws = []
    for lineno, row in _read_rows(path, MARBLES_HEADER):
        try:
            box = int(row[0])
            outcome = int(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if not 0 <= box < n_boxes:
            raise DataError(
                f"{path}:{lineno}: box index {box} out of range [0, {n_boxes})"
            )
        if outcome not in (0, 1):
            raise DataError(f"{path}:{lineno}: outcome must be 0 or 1, got {outcome}")
        draws.append((box, outcome))
    return draws


def save_marbles_csv(draws, path):
    _write_csv(path, MARBLES_HEADER, draws)


def load_rats_csv(path):
    rows = []
    for lineno, row in _read_rows(path, RATS_HEADER):
        try:
            n = int(row[0])
            y = int(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if n < 1:
            raise DataError(f"{path}:{lineno}: n must be positive, got {n}")
        if not 0 <= y <= n:
            raise DataError(f"{path}:{lineno}: need 0 <= y <= n, got y={y}, n={n}")
        rows.append((n, y))
    return rows


def save_rats_csv(rows, path):
    _write_csv(path, RATS_HEADER, rows)


def load_attain_csv(path):
    """Returns a dict of column arrays: sid, sex, pid (int), cc, vrq, attain."""
    sid, sex, pid, cc, vrq, attain = [], [], [], [], [], []
    for lineno, row in _read_rows(path, ATTAIN_HEADER):
        try:
            sid.append(int(row[0]))
            sex.append(int(row[1]))
            pid.append(int(row[2]))
            cc.append(float(row[3]))
            vrq.append(float(row[4]))
            attain.append(float(row[5]))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if sid[-1] < 0 or sex[-1] not in (0, 1) or pid[-1] < 0:
            raise DataError(f"{path}:{lineno}: group index out of range")
        if not (np.isfinite(cc[-1]) and np.isfinite(vrq[-1]) and np.isfinite(attain[-1])):
            raise DataError(f"{path}:{lineno}: non-finite real value")
    return {
        "sid": np.asarray(sid, dtype=np.int64),
        "sex": np.asarray(sex, dtype=np.int64),
        "pid": np.asarray(pid, dtype=np.int64),
        "cc": np.asarray(cc, dtype=float),
        "vrq": np.asarray(vrq, dtype=float),
        "attain": np.asarray(attain, dtype=float),
    }


def save_attain_csv(columns, path):
    n = len(columns["sid"])
    rows = [
        (
            int(columns["sid"][i]),
            int(columns["sex"][i]),
            int(columns["pid"][i]),
            float(columns["cc"][i]),
            float(columns["vrq"][i]),
            float(columns["attain"][i]),
        )
        for i in range(n)
    ]
    _write_csv(path, ATTAIN_HEADER, rows)
