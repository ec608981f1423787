"""Report serialization: atomic JSON/CSV writes, snapshots and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

TMP_PREFIX = ".tmp-"
TIMING_KEYS = ("timing", "started", "finished")


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats with strings so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_default, allow_nan=True))),
                      indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write_bytes(path, data: bytes) -> Path:
    """Write to a temp file in the target directory, fsync, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=TMP_PREFIX, dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode())


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps(obj))


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return atomic_write_text(path, buf.getvalue())


def write_npy(path, array) -> Path:
    buf = io.BytesIO()
    np.save(buf, np.asarray(array))
    return atomic_write_bytes(path, buf.getvalue())


def cleanup_stale(directory) -> list[Path]:
    """Remove temp files left behind by an interrupted writer."""
    d = Path(directory)
    if not d.is_dir():
        return []
    stale = sorted(d.rglob(TMP_PREFIX + "*"))
    for p in stale:
        p.unlink(missing_ok=True)
    return stale


def write_snapshot(directory, name: str, wf, t: float) -> tuple[Path, Path]:
    """State values as ``name.npy`` plus a JSON sidecar with grid, time and norm."""
    from .spectral import l2_norm

    d = Path(directory)
    arr = write_npy(d / f"{name}.npy", wf.values)
    side = write_json(d / f"{name}.json", {"t": float(t), "norm": l2_norm(wf),
                                           "grid": wf.grid.describe(), "file": arr.name})
    return arr, side


def read_snapshot(npy_path):
    from .spectral import WaveFunction, make_grid

    npy_path = Path(npy_path)
    meta = json.loads(npy_path.with_suffix(".json").read_text())
    g = meta["grid"]
    grid = make_grid(g["d"], tuple(g["n"]), tuple(g["length"]), tuple(g["origin"]))
    return WaveFunction(grid, np.load(npy_path)), meta


def config_hash(config) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(canon.encode()).hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat()


def strip_timing(obj):
    """Copy of a report without wall-clock fields, for determinism comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
