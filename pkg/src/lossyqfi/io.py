"""Config files, delimited result tables and pulse files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

import numpy as np
import tomli

from .engineer import ControlSequence, EngineeringResult
from .fock import PureState

PULSE_FORMAT = "lossyqfi-pulse"
PULSE_VERSION = 1


class PulseFormatError(ValueError):
    pass


# ---------------------------------------------------------------- config

def load_config(path: str | Path) -> dict[str, Any]:
    """Read a flat TOML file; nested tables are rejected."""
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ValueError(f"config must be flat key-value pairs; found tables {nested}")
    return {key.replace("-", "_"): value for key, value in data.items()}


# ---------------------------------------------------------------- tables

def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    return str(value)


def write_table(
    stream: IO[str],
    header: Mapping[str, Any],
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    """Comment block of ``# key = value`` lines, one header row, then data."""
    for key, value in header.items():
        stream.write(f"# {key} = {format_value(value)}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for col in columns:
            text = format_value(row.get(col))
            if any(ch in text for ch in ',"\n'):
                text = '"' + text.replace('"', '""') + '"'
            cells.append(text)
        stream.write(",".join(cells) + "\n")


def read_table(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse a table written by :func:`write_table` (values stay strings)."""
    import csv

    header, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(" = ")
                header[key] = value
            else:
                body.append(line)
    return header, list(csv.DictReader(body))


# ---------------------------------------------------------------- pulses

@dataclass
class PulseRecord:
    result: EngineeringResult
    target: PureState
    config: dict[str, Any]


def _checksum(payload: Mapping[str, Any]) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_pulse(
    path: str | Path,
    result: EngineeringResult,
    target: PureState,
    config: Mapping[str, Any] | None = None,
) -> None:
    controls = result.controls
    payload = {
        "format": PULSE_FORMAT,
        "version": PULSE_VERSION,
        "config": dict(config or {}),
        "atom_count": target.atom_count,
        "generators": list(controls.generators),
        "dt": float(controls.dt),
        "coefficients": controls.coefficients.tolist(),
        "fidelity": float(result.fidelity),
        "seed": int(result.seed),
        "restarts_used": int(result.restarts_used),
        "converged": bool(result.converged),
        "gradient_norm": float(result.gradient_norm),
        "target": {
            "re": target.amplitudes.real.tolist(),
            "im": target.amplitudes.imag.tolist(),
        },
    }
    payload["checksum"] = _checksum(payload)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_pulse(path: str | Path) -> PulseRecord:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PulseFormatError(f"{path}: not a pulse file ({exc})") from None
    if payload.get("format") != PULSE_FORMAT:
        raise PulseFormatError(f"{path}: unrecognized format tag {payload.get('format')!r}")
    if payload.get("version") != PULSE_VERSION:
        raise PulseFormatError(
            f"{path}: pulse file version {payload.get('version')!r} is not supported "
            f"(this build reads version {PULSE_VERSION})"
        )
    stored = payload.pop("checksum", None)
    if stored != _checksum(payload):
        raise PulseFormatError(f"{path}: checksum mismatch, file is corrupt or was edited")

    controls = ControlSequence(
        payload["dt"], np.array(payload["coefficients"], dtype=float), tuple(payload["generators"])
    )
    target = PureState(
        payload["atom_count"],
        np.array(payload["target"]["re"]) + 1j * np.array(payload["target"]["im"]),
    )
    result = EngineeringResult(
        controls=controls,
        fidelity=payload["fidelity"],
        restarts_used=payload["restarts_used"],
        seed=payload["seed"],
        converged=payload["converged"],
        gradient_norm=payload["gradient_norm"],
    )
    return PulseRecord(result, target, payload["config"])
