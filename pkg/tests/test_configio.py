"""Deterministic serialization: cell formatting, kv configs, hashing, JSON/CSV."""

from __future__ import annotations

import json

import numpy as np
import pytest

from carfollow.configio import (
    config_hash,
    dump_json,
    fmt,
    header_comment,
    load_json,
    parse_kv_file,
    parse_kv_text,
    read_csv,
    write_csv,
    write_kv_file,
)


def test_fmt_cells() -> None:
    assert fmt(0.1) == "0.1"
    assert fmt(0.1 + 0.2) == "0.30000000000000004"
    assert fmt(3) == "3"
    assert fmt(True) == "true"
    assert fmt(False) == "false"
    assert fmt(None) == "-"
    assert fmt("abc") == "abc"


def test_fmt_numpy_scalars_render_plain() -> None:
    assert fmt(np.float64(1.5)) == "1.5"
    assert fmt(np.float64(-249.55993813520223)) == "-249.55993813520223"
    assert fmt(np.int64(7)) == "7"


def test_fmt_float_round_trips() -> None:
    for x in (1 / 3, 1e-17, 123456.789, -0.0):
        assert float(fmt(x)) == x


def test_parse_kv_text() -> None:
    text = "# comment\n\n a = 1 \nb=two words  # trailing\nc=3.5\n"
    assert parse_kv_text(text) == {"a": "1", "b": "two words", "c": "3.5"}


def test_parse_kv_text_rejects_bare_line() -> None:
    with pytest.raises(ValueError):
        parse_kv_text("not_a_pair\n")


def test_kv_file_round_trip(tmp_path) -> None:
    path = tmp_path / "run.cfg"
    values = {"zeta": "9", "alpha": "0.1", "mode": "fast"}
    write_kv_file(path, values)
    assert parse_kv_file(path) == values
    # sorted for determinism
    lines = path.read_text().splitlines()
    assert lines == ["alpha=0.1", "mode=fast", "zeta=9"]


def test_config_hash_properties() -> None:
    h1 = config_hash({"a": "1", "b": "2"})
    h2 = config_hash({"b": "2", "a": "1"})
    h3 = config_hash({"a": "1", "b": "3"})
    assert h1 == h2  # insertion-order independent
    assert h1 != h3
    assert len(h1) == 12
    assert all(c in "0123456789abcdef" for c in h1)


def test_header_comment_format() -> None:
    assert header_comment("abc123def456", 7) == "# config_hash=abc123def456 seed=7"


def test_dump_json_deterministic_and_meta(tmp_path) -> None:
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    payload = {"value": 0.1 + 0.2, "label": "x", "flag": True}
    dump_json(p1, payload, "deadbeef0123", 5)
    dump_json(p2, payload, "deadbeef0123", 5)
    assert p1.read_bytes() == p2.read_bytes()
    data = load_json(p1)
    assert data["meta"] == {"config_hash": "deadbeef0123", "seed": 5}
    assert data["value"] == 0.1 + 0.2  # float survives exactly
    assert data["flag"] is True


def test_dump_json_numpy_floats(tmp_path) -> None:
    p = tmp_path / "n.json"
    dump_json(p, {"x": np.float64(2.5)}, "deadbeef0123", 1)
    assert json.loads(p.read_text())["x"] == 2.5
    assert "np.float64" not in p.read_text()


def test_write_csv_round_trip(tmp_path) -> None:
    path = tmp_path / "t.csv"
    rows = [[1, 0.1 + 0.2, "x"], [2, -0.5, "y"]]
    write_csv(path, ("idx", "val", "tag"), rows, comment_lines=["# config_hash=ff seed=0"])
    cols, out_rows, comments = read_csv(path)
    assert cols == ["idx", "val", "tag"]
    assert comments == ["# config_hash=ff seed=0"]
    assert out_rows == [["1", "0.30000000000000004", "x"], ["2", "-0.5", "y"]]
    assert float(out_rows[0][1]) == 0.1 + 0.2


def test_write_csv_rejects_ragged_rows(tmp_path) -> None:
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", ("a", "b"), [[1]])


def test_write_csv_renders_none_as_dash(tmp_path) -> None:
    path = tmp_path / "n.csv"
    write_csv(path, ("a", "b"), [[None, 1.0]])
    _, rows, _ = read_csv(path)
    assert rows == [["-", "1.0"]]
