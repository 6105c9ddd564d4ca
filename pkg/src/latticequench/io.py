"""Deterministic output files: CSV with 17 significant digits, JSON, run manifest.

Every file is written to a temporary name in the target directory and then
renamed, so readers never see partial output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

__all__ = ["fmt", "atomic_write", "write_csv", "write_json", "sha256_file", "RunRecorder", "OUTPUT_ENV"]

OUTPUT_ENV = "LATTICEQUENCH_OUTPUT_DIR"


def fmt(v) -> str:
    """Floats with 17 significant digits; everything else via str()."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else f"{float(v):.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def atomic_write(path: str | Path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str | Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if not np.isfinite(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str | Path, obj) -> Path:
    return atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunRecorder:
    """Collects outputs, stage timings and diagnostics; writes ``manifest.json`` last."""

    def __init__(self, output_dir: str | Path, command: str, config_toml: str):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: list[Path] = []
        self.timings: dict[str, float] = {}
        self.diagnostics: dict = {}
        self.config_toml = config_toml
        self.add_file(atomic_write(self.output_dir / "config.resolved.toml", config_toml))

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def add_file(self, path: Path) -> Path:
        self.files.append(Path(path))
        return path

    def csv(self, name: str, header, rows) -> Path:
        return self.add_file(write_csv(self.path(name), header, rows))

    def json(self, name: str, obj) -> Path:
        return self.add_file(write_json(self.path(name), obj))

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def finalize(self, status: str = "ok") -> Path:
        from . import __version__

        manifest = {
            "command": self.command,
            "status": status,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config": self.config_toml,
            "timings_s": self.timings,
            "diagnostics": self.diagnostics,
            "files": [{"name": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
                      for p in self.files],
        }
        return write_json(self.path("manifest.json"), manifest)
