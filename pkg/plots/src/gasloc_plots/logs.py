"""Readers for the two gasloc output formats this package consumes.

The benchmark harness writes one JSON trial record per line
(``results.jsonl``); single trials can additionally dump their full
per-iteration state to an ``.npz``. Everything here is read-only and
validates just the fields the figures actually use — a file produced by a
different tool (or a truncated one) should fail loudly, not render nonsense.
"""

import json
from pathlib import Path

import numpy as np


class LogFormatError(ValueError):
    """An input file is not a gasloc log/dump of the expected shape."""


# fields of a trial record the benchmark figure depends on
_RECORD_KEYS = {
    "record": str,
    "feature": str,
    "sensor": str,
    "status": str,
    "trial_index": int,
}
_OK_KEYS = {"localization_error_m", "iterations_used"}


def read_records(paths) -> list[dict]:
    """Load and pool trial records from one or more .jsonl logs."""
    records = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise LogFormatError(f"log not found: {path}")
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                where = f"{path.name}:{lineno}"
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise LogFormatError(f"{where}: not JSON ({exc})") from exc
                _check_record(rec, where)
                if rec["record"] == "trial":
                    records.append(rec)
    if not records:
        raise LogFormatError("no trial records in input log(s)")
    return records


def _check_record(rec: dict, where: str) -> None:
    if not isinstance(rec, dict) or "record" not in rec:
        raise LogFormatError(f"{where}: not a gasloc record")
    if rec["record"] != "trial":  # summary lines etc. are skipped, not errors
        return
    for key, typ in _RECORD_KEYS.items():
        if key not in rec:
            raise LogFormatError(f"{where}: trial record missing {key!r}")
        if not isinstance(rec[key], typ):
            raise LogFormatError(f"{where}: field {key!r} has wrong type")
    if rec["status"] == "ok":
        for key in _OK_KEYS:
            if not isinstance(rec.get(key), (int, float)):
                raise LogFormatError(f"{where}: ok record missing numeric {key!r}")


# arrays a trial dump must carry, with their dimensionality
_DUMP_ARRAYS = {
    "posteriors": 3,
    "trajectory": 2,
    "measurement_positions": 2,
    "measurement_values": 1,
    "measurement_ranks": 1,
    "measurement_iterations": 1,
    "obstacle_mask": 2,
    "wind": 1,
    "true_cell": 1,
    "estimated_cell": 1,
    "entropy_trace": 1,
}


def read_trial_dump(path) -> dict:
    """Load a single-trial .npz dump into plain arrays."""
    path = Path(path)
    if not path.exists():
        raise LogFormatError(f"trial dump not found: {path}")
    try:
        with np.load(path) as data:
            dump = {key: np.asarray(data[key]) for key in data.files}
    except (OSError, ValueError) as exc:
        raise LogFormatError(f"{path.name}: not a readable .npz ({exc})") from exc
    for key, ndim in _DUMP_ARRAYS.items():
        if key not in dump:
            raise LogFormatError(f"{path.name}: dump missing array {key!r}")
        if dump[key].ndim != ndim:
            raise LogFormatError(
                f"{path.name}: array {key!r} has {dump[key].ndim} dims, expected {ndim}")
    if "cell_size" not in dump:
        raise LogFormatError(f"{path.name}: dump missing cell_size")
    if dump["posteriors"].shape[0] == 0:
        raise LogFormatError(f"{path.name}: dump holds zero iterations")
    if dump["posteriors"].shape[1:] != dump["obstacle_mask"].shape:
        raise LogFormatError(f"{path.name}: posterior/obstacle grid shapes differ")
    return dump
