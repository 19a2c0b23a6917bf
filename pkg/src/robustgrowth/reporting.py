"""Artifact writers: delimited tables, JSON summaries, checksum manifests.

Every numeric cell is formatted with ``%.17g`` so the text round-trips to the
exact binary double.  Combined with sorted JSON keys and fixed row ordering,
re-running a command with the same configuration and seed reproduces every
artifact byte for byte; the manifest records SHA-256 checksums so that claim
can be verified mechanically (see the ``replay`` command).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def format_float(value) -> str:
    """Shortest exact decimal rendering of a double (17 significant digits)."""
    return FLOAT_FORMAT % float(value)


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_table(path, header, rows, comments=()) -> Path:
    """Comma-delimited table with optional '#' comment lines before the header."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_slice_csv(path, table) -> Path:
    """Slice table: columns x, theta_hat, theta_star_y1..theta_star_yk.

    The comment header records the family name, parameters, and y-values so
    the file is self-describing.
    """
    params = ", ".join(f"{k}={format_float(v)}" for k, v in
                       sorted(table.params.items()))
    comments = [
        f"family: {table.family}",
        f"params: {params}",
        "y_values: " + ", ".join(format_float(y) for y in table.y_values),
    ]
    header = ["x", "theta_hat"] + [f"theta_star_y{j + 1}"
                                   for j in range(table.y_values.size)]
    rows = []
    for i, x in enumerate(table.x_grid):
        rows.append([x, table.theta_hat[i]] + list(table.theta_star[:, i]))
    return write_table(path, header, rows, comments)


def write_growth_csv(path, report) -> Path:
    """One row per (strategy, snapshot, path): path_id, strategy, measure, T,
    growth.  Excluded paths appear with growth = nan so path ids stay dense."""
    samples = report.samples
    rows = []
    for si, name in enumerate(report.strategy_names):
        for ti, t in enumerate(report.snapshot_times):
            for pid in range(report.n_paths):
                rows.append([pid, name, report.measure, t, samples[si, ti, pid]])
    comments = [
        f"dt={format_float(report.dt)}, n_paths={report.n_paths}, "
        f"seed={report.seed}, excluded={report.n_excluded}",
    ]
    header = ["path_id", "strategy", "measure", "T", "growth"]
    return write_table(path, header, rows, comments)


def write_ergodic_csv(path, report) -> Path:
    header = ["observable", "time_average", "target", "se", "z_score"]
    rows = [[r.name, r.time_average, r.target, r.se, r.z_score]
            for r in report.rows]
    comments = [
        f"T={format_float(report.t_horizon)}, dt={format_float(report.dt)}, "
        f"n_paths={report.n_paths}, seed={report.seed}, se_method={report.method}",
    ]
    return write_table(path, header, rows, comments)


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclasses for json."""
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    text = json.dumps(jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


MANIFEST_NAME = "manifest.json"


def write_manifest(outdir, command, options, config, artifacts) -> Path:
    """Record what was run and the checksum of every artifact it produced.

    ``artifacts`` is an iterable of paths inside ``outdir``; only their names
    relative to ``outdir`` are stored, so a replay into a different directory
    compares cleanly.
    """
    outdir = Path(outdir)
    checksums = {}
    for p in artifacts:
        p = Path(p)
        checksums[p.relative_to(outdir).as_posix()] = sha256_file(p)
    from . import __version__

    payload = {
        "command": command,
        "options": options,
        "config": config,
        "package_version": __version__,
        "artifacts": checksums,
    }
    return write_json(outdir / MANIFEST_NAME, payload)


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
