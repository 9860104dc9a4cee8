"""Artifact I/O: raw little-endian arrays with JSON sidecars, CSV tables, manifests."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..grid import PhaseGrid

MANIFEST_NAME = "manifest.json"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def grid_axes(grid: PhaseGrid, momentum: bool = True) -> list[dict]:
    """Axis description of a phase-space array: momentum/separation axes first, then r."""
    names = ["x", "y", "z"][: grid.dim]
    axes = []
    if momentum:
        for a in names:
            axes.append({"name": f"P_{a}", "n": grid.n_s, "start": float(grid.P[0]),
                         "step": float(grid.dP), "units": "hbar/length"})
    for a in names:
        axes.append({"name": a, "n": grid.n_r, "start": float(grid.r[0]),
                     "step": float(grid.dr), "units": "length"})
    return axes


def write_array(path: str | Path, data: np.ndarray, axes: list[dict] | None = None,
                units: str = "", tags: dict | None = None) -> tuple[Path, Path]:
    """Write ``data`` as raw little-endian row-major float64 (complex as re/im pairs).

    Returns the paths of the ``.bin`` file and its ``.json`` sidecar.
    """
    path = Path(path).with_suffix(".bin")
    arr = np.asarray(data)
    is_complex = np.iscomplexobj(arr)
    dtype = "<c16" if is_complex else "<f8"
    arr = np.ascontiguousarray(arr, dtype=dtype)
    path.write_bytes(arr.tobytes(order="C"))
    sidecar = {
        "shape": list(arr.shape),
        "dtype": "complex128 (float64 re/im pairs)" if is_complex else "float64",
        "numpy_dtype": dtype,
        "byte_order": "little",
        "layout": "row-major (C order)",
        "axes": axes or [],
        "units": units,
        "conventions": tags or {},
        "sha256": sha256_file(path),
    }
    side = path.with_suffix(".json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path, side


def read_array(path: str | Path) -> np.ndarray:
    path = Path(path).with_suffix(".bin")
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype=meta["numpy_dtype"])
    return data.reshape(meta["shape"]).copy()


def write_csv(path: str | Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns must have equal length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        v = float(self.value)
        return {"name": self.name, "value": v if np.isfinite(v) else None,
                "tol": float(self.tol), "passed": bool(self.passed), "detail": self.detail}


def make_check(name: str, value: float, tol: float, detail: str = "",
               at_least: bool = False) -> CheckResult:
    """``value <= tol`` (or ``>= tol`` with ``at_least``); NaN never passes."""
    value = float(value)
    ok = np.isfinite(value) and (value >= tol if at_least else value <= tol)
    return CheckResult(name, value, float(tol), bool(ok), detail)


@dataclass
class RunManifest:
    """Record of one run: config hash, version, artifacts with checksums, checks."""

    config_hash: str
    code_version: str = __version__
    wall_time: float = 0.0
    artifacts: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    kind: str = "run"

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add_artifact(self, root: Path, path: Path, shape=None, kind: str = "") -> None:
        rel = str(Path(path).relative_to(root))
        self.artifacts = [a for a in self.artifacts if a["path"] != rel]
        self.artifacts.append({"path": rel, "kind": kind,
                               "shape": list(shape) if shape is not None else None,
                               "sha256": sha256_file(path)})
        self.artifacts.sort(key=lambda a: a["path"])

    def add_check(self, check: CheckResult) -> None:
        self.checks.append(check.to_dict())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def fingerprint(self) -> str:
        """Hash of everything except the wall time (the only non-deterministic field)."""
        d = self.to_dict()
        d.pop("wall_time")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def write(self, run_dir: str | Path) -> Path:
        path = Path(run_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @classmethod
    def read(cls, run_dir: str | Path) -> "RunManifest":
        d = json.loads((Path(run_dir) / MANIFEST_NAME).read_text())
        d.pop("passed", None)
        return cls(**d)

    def verify_checksums(self, run_dir: str | Path) -> list[str]:
        """Paths whose checksum no longer matches (or that are missing)."""
        bad = []
        for a in self.artifacts:
            p = Path(run_dir) / a["path"]
            if not p.exists() or sha256_file(p) != a["sha256"]:
                bad.append(a["path"])
        return bad
