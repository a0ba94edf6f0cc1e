"""Results directories: trajectory/diagnostic CSVs, JSON summary, manifest.

Layout of a results directory::

    config.ini        run configuration (re-parseable)
    trajectory.csv    t, x_1_1..x_N_d, v_1_1..v_N_d
    diagnostics.csv   t, e_kin, e_pot, e_tot, dissipation, r_min, r_max, agg_r, v_max, max_radius
    summary.json      certificates, criterion verdicts, events, run statistics
    manifest.json     sha256 of every file above

Floats are written with ``repr`` (shortest round-trip decimal form).
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, format_config, parse_config
from .integrator import Trajectory
from .model import SimState

DIAGNOSTIC_COLUMNS = (
    "e_kin",
    "e_pot",
    "e_tot",
    "dissipation",
    "r_min",
    "r_max",
    "agg_r",
    "v_max",
    "max_radius",
)
FILES = ("config.ini", "trajectory.csv", "diagnostics.csv", "summary.json")


@dataclass
class RunRecord:
    """Everything a run emits, in array form; the input to acceptance checks."""

    config: RunConfig
    t: np.ndarray
    x: np.ndarray  # (K, N, d)
    v: np.ndarray  # (K, N, d)
    diag: dict[str, np.ndarray]
    events: list[dict] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @classmethod
    def from_trajectory(cls, config: RunConfig, traj: Trajectory) -> "RunRecord":
        t = traj.times()
        x = np.stack([s.state.x for s in traj.samples])
        v = np.stack([s.state.v for s in traj.samples])
        diag = {name: traj.series(name) for name in DIAGNOSTIC_COLUMNS}
        stats = {"steps_accepted": traj.steps_accepted, "steps_rejected": traj.steps_rejected}
        return cls(config, t, x, v, diag, [dict(e) for e in traj.events], stats)

    @property
    def params(self):
        return self.config.params

    @property
    def aborted(self) -> bool:
        return any(e["kind"] in ("collision", "step_underflow") for e in self.events)

    def state(self, k: int) -> SimState:
        return SimState(self.t[k], self.x[k], self.v[k])


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def trajectory_header(n: int, dim: int) -> list[str]:
    xs = [f"x_{i + 1}_{k + 1}" for i in range(n) for k in range(dim)]
    vs = [f"v_{i + 1}_{k + 1}" for i in range(n) for k in range(dim)]
    return ["t", *xs, *vs]


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _sanitize(obj):
    """JSON has no inf/nan; spell them as strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_outputs(record: RunRecord, report: dict, directory) -> dict:
    """Write a results directory and return its manifest (file name to sha256)."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(format_config(record.config))
        k, n, d = record.x.shape
        rows = np.concatenate([record.t[:, None], record.x.reshape(k, n * d), record.v.reshape(k, n * d)], axis=1)
        _write_csv(out / "trajectory.csv", trajectory_header(n, d), rows)
        diag_rows = np.column_stack([record.t] + [record.diag[c] for c in DIAGNOSTIC_COLUMNS])
        _write_csv(out / "diagnostics.csv", ["t", *DIAGNOSTIC_COLUMNS], diag_rows)
        summary = dict(report)
        summary["events"] = record.events
        summary["stats"] = record.stats
        text = json.dumps(_sanitize(summary), indent=2, sort_keys=True, default=_json_default)
        (out / "summary.json").write_text(text + "\n")
        manifest = {name: sha256_file(out / name) for name in FILES}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return manifest


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def read_outputs(directory) -> tuple[RunRecord, dict]:
    """Load a results directory written by :func:`write_outputs`."""
    src = Path(directory)
    config = parse_config((src / "config.ini").read_text())
    n, d = config.params.n, config.params.dim
    header, traj = _read_csv(src / "trajectory.csv")
    if header != trajectory_header(n, d):
        raise ValueError(f"{src / 'trajectory.csv'}: header does not match N={n}, d={d}")
    t = traj[:, 0]
    x = traj[:, 1 : 1 + n * d].reshape(-1, n, d)
    v = traj[:, 1 + n * d :].reshape(-1, n, d)
    dheader, dtable = _read_csv(src / "diagnostics.csv")
    if dheader != ["t", *DIAGNOSTIC_COLUMNS]:
        raise ValueError(f"{src / 'diagnostics.csv'}: unexpected header")
    diag = {name: dtable[:, i + 1] for i, name in enumerate(DIAGNOSTIC_COLUMNS)}
    summary = json.loads((src / "summary.json").read_text())
    record = RunRecord(config, t, x, v, diag, summary.get("events", []), summary.get("stats", {}))
    return record, summary


def check_manifest(directory) -> list[str]:
    """Names of files whose hash differs from the manifest (or that are missing)."""
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    bad = []
    for name, digest in sorted(manifest.items()):
        path = src / name
        if not path.exists() or sha256_file(path) != digest:
            bad.append(name)
    return bad
