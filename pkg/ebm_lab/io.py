"""
Configuration loading and reproducible file output.

Numbers are written with 17 significant digits and LF line endings so that
identical runs produce byte-identical CSV files. Every file goes through a
temporary sibling and os.replace, and the run manifest is written last.
"""

import csv
import hashlib
import io
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ebm_lab import __version__
from ebm_lab.errors import ConfigError
from ebm_lab.params import PRESETS, PhysicalParams, RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_PHYSICAL_KEYS = set(PhysicalParams.model_fields)


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _nest(data: Dict[str, Any], problems: List[str]) -> Dict[str, Any]:
    """Expand dotted keys and lift top-level physical parameters into 'physical'."""
    nested: Dict[str, Any] = {}
    for key, value in data.items():
        parts = key.split(".") if isinstance(key, str) else [key]
        if len(parts) == 1 and parts[0] in _PHYSICAL_KEYS:
            parts = ["physical", parts[0]]
        cursor = nested
        for part in parts[:-1]:
            nxt = cursor.setdefault(part, {})
            if not isinstance(nxt, dict):
                problems.append(f"{key}: conflicts with a scalar value for {part!r}")
                break
            cursor = nxt
        else:
            leaf = parts[-1]
            if isinstance(value, dict) and isinstance(cursor.get(leaf), dict):
                cursor[leaf] = _deep_merge(cursor[leaf], _nest(value, problems))
            elif leaf in cursor:
                problems.append(f"{key}: given more than once")
            else:
                cursor[leaf] = value
    return nested


def config_from_mapping(data: Any, source: str = "<config>") -> RunConfig:
    """Validate a (possibly dotted, possibly preset-based) config document.

    Raises:
        ConfigError: With one ``key: reason`` line per problem.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    data = dict(data)
    base: Dict[str, Any] = {}
    preset = data.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"{source}: unknown preset", [f"preset: {preset!r} not in {sorted(PRESETS)}"])
        base = PRESETS[preset].model_dump()

    problems: List[str] = []
    nested = _nest(data, problems)
    if problems:
        raise ConfigError(f"{source}: invalid keys", problems)
    try:
        return RunConfig.model_validate(_deep_merge(base, nested))
    except ValidationError as exc:
        detail = [
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        ]
        raise ConfigError(f"{source}: configuration is invalid", detail) from exc


def load_config(path: PathLike) -> RunConfig:
    """Read a JSON configuration file.

    Raises:
        ConfigError: On missing files, JSON syntax errors (with line and
            column) and validation failures.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_mapping(data, str(path))


def resolve_config(config_path: Optional[PathLike] = None, preset: Optional[str] = None) -> RunConfig:
    """Config file, named preset, or the default aquaplanet."""
    if config_path is not None and preset is not None:
        raise ConfigError("give either a config file or a preset, not both")
    if config_path is not None:
        return load_config(config_path)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("unknown preset", [f"preset: {preset!r} not in {sorted(PRESETS)}"])
        return PRESETS[preset]
    return PRESETS["aquaplanet"]


# ---------------------------------------------------------------------------
# Formatting and atomic writes
# ---------------------------------------------------------------------------

def fmt(value: Any) -> str:
    """17-significant-digit text for numbers, str() for everything else."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "{:.17g}".format(float(value))
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write_text(path, buf.getvalue())


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path: PathLike, payload: Any) -> Path:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    return atomic_write_text(path, text)


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

class OutputFile(BaseModel):
    path: str
    sha256: str
    size: int


class RunManifest(BaseModel):
    """What a CLI run did and which files it produced."""

    command: str
    argv: List[str]
    config: Dict[str, Any]
    tool_version: str = __version__
    started_at: str
    finished_at: str = ""
    outputs: List[OutputFile] = []
    tolerances: Dict[str, float] = {}
    notes: List[str] = []


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir: PathLike, manifest: RunManifest, files: Sequence[Path]) -> Path:
    """Checksum every output, then write manifest.json atomically."""
    out_dir = Path(out_dir)
    outputs = []
    for f in files:
        f = Path(f)
        outputs.append(
            OutputFile(path=f.relative_to(out_dir).as_posix(), sha256=sha256_file(f), size=f.stat().st_size)
        )
    final = manifest.model_copy(update={"outputs": outputs, "finished_at": utc_now()})
    path = write_json(out_dir / "manifest.json", final)
    logger.info("wrote %s (%d outputs)", path, len(outputs))
    return path


# ---------------------------------------------------------------------------
# Domain writers
# ---------------------------------------------------------------------------

def write_profile(out_dir: PathLike, solution, T_s: float, T_mean: float) -> List[Path]:
    """Profile CSV and its JSON sidecar for one equilibrium."""
    out_dir = Path(out_dir)
    stem = f"profile-{solution.id}"
    rows = ((th, T, T_s * T) for th, T in zip(solution.theta, solution.T))
    csv_path = write_csv(out_dir / f"{stem}.csv", ["theta_rad", "T_dimensionless", "T_celsius"], rows)
    u = solution.unknowns
    sidecar = {
        "id": solution.id,
        "case": solution.case.ice_pattern,
        "geometry": solution.case.geometry,
        "symmetric": solution.case.symmetric,
        "Q": solution.Q,
        "theta_c": solution.theta_c,
        "dT_at_c": u.dT_at_c,
        "T_at_landmarks": u.T_at_landmarks,
        "residual_norm": solution.residual_norm,
        "derivative_mismatch": solution.derivative_mismatch,
        "T_mean_C": T_mean,
    }
    json_path = write_json(out_dir / f"{stem}.json", sidecar)
    return [csv_path, json_path]


def read_profile_csv(path: PathLike) -> Dict[str, np.ndarray]:
    """Columns of a CSV written by write_csv (header row, numeric body)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    body = body.reshape(-1, len(header))
    return {name: body[:, i] for i, name in enumerate(header)}
