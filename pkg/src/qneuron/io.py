"""CSV output, run manifests and config files."""

from __future__ import annotations

import csv
import hashlib
import io
import os
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import yaml


def code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0:
            return "0"
        return format(x, ".12g")
    return str(x)


def csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue().encode("utf-8")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path) -> str:
    return sha256(Path(path).read_bytes())


def write_atomic(files: dict[Path, bytes]) -> None:
    """Write every file through a temporary sibling, then rename them all.

    Nothing is renamed until all temporaries are on disk, so a failure
    never leaves a partial output behind.
    """
    temps = []
    try:
        for path, data in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
            tmp.write_bytes(data)
            temps.append((tmp, path))
        for tmp, path in temps:
            os.replace(tmp, path)
    finally:
        for tmp, _ in temps:
            if tmp.exists():
                tmp.unlink()


def _plain(obj):
    """Convert numpy scalars and tuples so YAML stays plain."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_yaml(obj) -> bytes:
    return yaml.safe_dump(_plain(obj), sort_keys=False, default_flow_style=False).encode("utf-8")


def load_yaml(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def manifest_name(command: str) -> str:
    return f"manifest_{command}.yaml"


def build_manifest(command: str, parameters: dict, duration: float, outputs: dict[str, bytes]) -> dict:
    return {
        "command": command,
        "parameters": parameters,
        "version": code_version(),
        "duration_s": round(duration, 3),
        "outputs": [{"file": name, "sha256": sha256(data)} for name, data in outputs.items()],
    }
