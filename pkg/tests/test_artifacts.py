"""Tests for report files and the artifact store."""

from __future__ import annotations

import hashlib
import json
import logging

import numpy as np
import pytest

from conftest import chord
from minmax_surfaces.artifacts import (
    ArtifactStore,
    dumps,
    family_from_jsonl,
    family_to_jsonl,
    mass_profile_rows,
    read_csv,
    read_json,
    sha256_file,
    write_csv,
    write_json,
)
from minmax_surfaces.const import UNCONSTRAINED
from minmax_surfaces.exceptions import ArtifactError
from minmax_surfaces.sweepout import BoundaryCondition, SweepoutFamily


@pytest.fixture
def family():
    slices = [chord((-1.0, y), (1.0, y), n=9, bc=BoundaryCondition.FREE) for y in (-0.5, 0.0, 0.5)]
    return SweepoutFamily.from_list(slices, UNCONSTRAINED)


def test_dumps_is_sorted_and_handles_numpy():
    text = dumps({"b": np.float64(1.5), "a": np.arange(3), "c": (1, 2)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": [1, 2]}
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_json_files(tmp_path):
    path = write_json(tmp_path / "sub" / "report.json", {"value": np.int64(3)})
    assert read_json(path) == {"value": 3}
    path.write_text("not json", encoding="utf-8")
    with pytest.raises(ArtifactError):
        read_json(path)
    with pytest.raises(ArtifactError):
        read_json(tmp_path / "missing.json")


def test_csv_files(tmp_path):
    path = write_csv(tmp_path / "profile.csv", [{"t": 0.0, "mass": np.float64(2.0)}, {"t": 1.0, "mass": 1.5}])
    assert path.read_text(encoding="utf-8").splitlines()[0] == "t,mass"
    assert read_csv(path) == [{"t": 0.0, "mass": 2.0}, {"t": 1.0, "mass": 1.5}]
    labels = write_csv(tmp_path / "labels.csv", [{"name": "a", "value": 1}])
    assert read_csv(labels) == [{"name": "a", "value": 1.0}]
    empty = write_csv(tmp_path / "empty.csv", [], fieldnames=["t", "mass"])
    assert read_csv(empty) == []


def test_family_jsonl(tmp_path, family):
    path = family_to_jsonl(family, tmp_path / "family.jsonl")
    header = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert header == {"mode": UNCONSTRAINED, "shape": [3]}
    again = family_from_jsonl(path)
    assert again.mode == UNCONSTRAINED
    assert again.shape == (3,)
    for index in family.indices():
        np.testing.assert_allclose(again[index].vertices, family[index].vertices)
        assert again[index].bc == BoundaryCondition.FREE


def test_family_jsonl_skips_malformed_lines(tmp_path, family, caplog):
    path = family_to_jsonl(family, tmp_path / "family.jsonl")
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines + ["{oops", '{"index": [9]}']) + "\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        again = family_from_jsonl(path)
    assert again.shape == (3,)
    assert "non-JSON line 5" in caplog.text
    assert "malformed line 6" in caplog.text


def test_family_jsonl_errors(tmp_path, family):
    path = family_to_jsonl(family, tmp_path / "family.jsonl")
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(ArtifactError, match="missing 1 slices"):
        family_from_jsonl(path)
    path.write_text('{"shape": [3]}\n', encoding="utf-8")
    with pytest.raises(ArtifactError):
        family_from_jsonl(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(ArtifactError):
        family_from_jsonl(path)


def test_mass_profile_rows(family):
    rows = mass_profile_rows(family, np.array([1.5, 2.0, 1.5]))
    assert rows == [{"t": 0.0, "mass": 1.5}, {"t": 0.5, "mass": 2.0}, {"t": 1.0, "mass": 1.5}]


def test_store_records_hashes(tmp_path, family):
    store = ArtifactStore(tmp_path / "out")
    store.json("summary.json", {"ok": True})
    store.csv("mass_profile.csv", [{"t": 0.0, "mass": 1.0}])
    store.family("families/tight.jsonl", family)
    store.text("plots/mass.svg", "<svg/>")
    assert sorted(store.hashes) == ["families/tight.jsonl", "mass_profile.csv", "plots/mass.svg", "summary.json"]
    expected = hashlib.sha256(b"<svg/>").hexdigest()
    assert store.hashes["plots/mass.svg"] == expected
    assert sha256_file(store.path("plots/mass.svg")) == expected
