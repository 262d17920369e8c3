"""Report files: JSON, JSON lines, CSV and their hashes."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .exceptions import ArtifactError
from .sweepout import Slice, SweepoutFamily

_LOGGER = logging.getLogger(__name__)


def _encode(value: Any) -> Any:
    """Convert numpy scalars and arrays for json.dumps."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, tuple)):
        return list(value)
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    """Return deterministic JSON text."""
    return json.dumps(data, default=_encode, sort_keys=True, indent=2, allow_nan=True)


def write_json(path: str | Path, data: Any) -> Path:
    """Write data as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data) + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path) -> Any:
    """Read a JSON file."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        _LOGGER.error("Received non-JSON file: %s", path)
        raise ArtifactError(f"{path} is not valid JSON: {err}") from err
    except OSError as err:
        raise ArtifactError(f"Cannot read {path}: {err}") from err


def write_csv(path: str | Path, rows: Iterable[dict[str, Any]], fieldnames: list[str] | None = None) -> Path:
    """Write rows as CSV; the header is taken from the first row unless given."""
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _encode(value) if isinstance(value, np.generic) else value for key, value in row.items()})
    return path


def read_csv(path: str | Path) -> list[dict[str, Any]]:
    """Read a CSV file, converting numeric cells to float."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as err:
        raise ArtifactError(f"Cannot read {path}: {err}") from err
    out = []
    for row in rows:
        parsed = {}
        for key, value in row.items():
            try:
                parsed[key] = float(value)
            except (TypeError, ValueError):
                parsed[key] = value
        out.append(parsed)
    return out


# ---------------------------------------------------------------------------
# families


def family_to_jsonl(family: SweepoutFamily, path: str | Path) -> Path:
    """Write a family as JSON lines: a header, then one slice per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        header = {"mode": family.mode, "shape": list(family.shape)}
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for index in family.indices():
            line = {"index": list(index), "slice": family[index].to_dict()}
            handle.write(json.dumps(line, default=_encode, sort_keys=True) + "\n")
    return path


def family_from_jsonl(path: str | Path) -> SweepoutFamily:
    """Read a family written by family_to_jsonl; malformed slice lines are skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise ArtifactError(f"Cannot read {path}: {err}") from err
    if not lines:
        raise ArtifactError(f"{path} is empty")
    try:
        header = json.loads(lines[0])
        shape = tuple(int(n) for n in header["shape"])
        mode = header["mode"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise ArtifactError(f"{path} has no valid header: {err}") from err
    slices = np.empty(shape, dtype=object)
    seen = np.zeros(shape, dtype=bool)
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            index = tuple(int(i) for i in data["index"])
            slices[index] = Slice.from_dict(data["slice"])
            seen[index] = True
        except json.JSONDecodeError:
            _LOGGER.warning("Received non-JSON line %d in %s", number, path)
        except (KeyError, IndexError, TypeError, ValueError) as err:
            _LOGGER.warning("Skipping malformed line %d in %s: %s", number, path, err)
    if not np.all(seen):
        raise ArtifactError(f"{path} is missing {int(np.sum(~seen))} slices")
    return SweepoutFamily(slices, mode)


def mass_profile_rows(family: SweepoutFamily, masses: np.ndarray) -> list[dict[str, Any]]:
    """Return CSV rows (t, mass) of a k = 1 family, or (t0, t1, ..., mass) for k > 1."""
    rows = []
    for index in family.indices():
        param = family.parameter(index)
        row: dict[str, Any] = {"t": float(param[0])} if family.k == 1 else {f"t{i}": float(v) for i, v in enumerate(param)}
        row["mass"] = float(masses[index])
        rows.append(row)
    return rows


def sha256_file(path: str | Path) -> str:
    """Return the hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class ArtifactStore:
    """Output directory that records the hash of every file written to it."""

    def __init__(self, root: str | Path) -> None:
        """Initialize the store, creating the directory."""
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hashes: dict[str, str] = {}

    def path(self, name: str) -> Path:
        """Return the path of a file inside the store."""
        return self.root / name

    def _record(self, path: Path) -> Path:
        self.hashes[path.relative_to(self.root).as_posix()] = sha256_file(path)
        _LOGGER.debug("Wrote %s", path)
        return path

    def json(self, name: str, data: Any) -> Path:
        """Write a JSON artifact."""
        return self._record(write_json(self.path(name), data))

    def csv(self, name: str, rows: Iterable[dict[str, Any]], fieldnames: list[str] | None = None) -> Path:
        """Write a CSV artifact."""
        return self._record(write_csv(self.path(name), rows, fieldnames))

    def family(self, name: str, family: SweepoutFamily) -> Path:
        """Write a family as JSON lines."""
        return self._record(family_to_jsonl(family, self.path(name)))

    def text(self, name: str, text: str) -> Path:
        """Write a text artifact (SVG)."""
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return self._record(path)
