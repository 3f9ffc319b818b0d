import csv
import json

import numpy as np
import pytest

from dualrail import cli
from dualrail.params import shipped_path

ZERO = str(shipped_path("params_zero.json"))


def _run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def _summary(path):
    return json.loads((path / "summary.json").read_text())


def _csv_rows(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, list(csv.reader(body))


def test_parse_delays():
    assert np.allclose(cli.parse_delays("0:10:3"), [0, 5, 10])
    assert np.allclose(cli.parse_delays("1,2.5"), [1, 2.5])


def test_spam_summary_values(tmp_path):
    assert _run(tmp_path, "spam", "--rounds", "1") == 0
    head = _summary(tmp_path)["headline"]
    assert 1e-5 < head["misassignment"] < 1e-3
    assert head["erasure_fraction"] == pytest.approx(6.0e-2, rel=0.3)


def test_budget_on_zero_config_is_identity(tmp_path):
    assert _run(tmp_path, "budget", "--config", ZERO) == 0
    _, rows = _csv_rows(tmp_path / "spam_matrix.csv")
    M = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert np.array_equal(M, np.eye(4))
    assert (tmp_path / "budget.txt").exists()


@pytest.mark.parametrize("argv", [("spam", "--rounds", "2"), ("bitflip", "--delays", "0:20:3", "--prep", "10"),
                                  ("spam", "--shots", "500", "--seed", "4")])
def test_identical_runs_give_identical_csv_bytes(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, *argv) == 0 and _run(b, *argv) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ha = json.loads((a / "manifest.json").read_text())["config_hash"]
    hb = json.loads((b / "manifest.json").read_text())["config_hash"]
    assert ha == hb


def test_config_hash_changes_with_the_plan(tmp_path):
    _run(tmp_path / "a", "spam", "--rounds", "1")
    _run(tmp_path / "b", "spam", "--rounds", "2")
    h = [json.loads((tmp_path / d / "manifest.json").read_text())["config_hash"] for d in "ab"]
    assert h[0] != h[1]


@pytest.mark.parametrize("argv", [("spam",), ("bitflip", "--delays", "0:10:2"), ("nth", "--delays", "0:10:2"),
                                  ("ramsey", "--delays", "0:20:3", "--phases", "4"),
                                  ("echo", "--delays", "0:20:3", "--phases", "4"),
                                  ("rb", "--rb-seeds", "1"), ("rocalib", "--shots", "2000"),
                                  ("budget",), ("intrinsic",)])
def test_every_csv_column_is_documented_and_manifest_is_complete(tmp_path, argv):
    assert _run(tmp_path, *argv) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    on_disk = sorted(p.name for p in tmp_path.iterdir())
    assert sorted(manifest["files"]) == on_disk
    for p in tmp_path.glob("*.csv"):
        header, rows = _csv_rows(p)
        documented = {ln[2:].split(":", 1)[0] for ln in header}
        assert set(rows[0]) == documented, p.name
        assert all(len(r) == len(rows[0]) for r in rows)


def test_missing_config_fails_fast(tmp_path, capsys):
    assert _run(tmp_path, "spam", "--config", str(tmp_path / "nope.json")) == 2
    assert "configuration error" in capsys.readouterr().err


def test_corrupt_config_fails_fast(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run(tmp_path / "out", "validate", "--config", str(bad)) == 2
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("flags", [("--rounds", "0"), ("--shots", "0"), ("--prep", "21"), ("--delays=-1,2",), ("--bogus",)])
def test_bad_flags_are_validation_errors(tmp_path, flags):
    assert _run(tmp_path, "spam", *flags) == 2


def test_runtime_error_cleans_up(tmp_path, monkeypatch):
    def boom(params, args, out):
        out.write_text("partial.txt", "half done")
        raise RuntimeError("worker died")
    monkeypatch.setitem(cli.HANDLERS, "spam", boom)
    assert _run(tmp_path, "spam") == 1
    assert list(tmp_path.iterdir()) == []


def test_validate_on_zero_config_passes(tmp_path, capsys):
    assert _run(tmp_path, "validate", "--config", ZERO) == 0
    assert "[PASS]" in capsys.readouterr().out
    assert _summary(tmp_path)["all_passed"] is True


def test_log_level_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DUALRAIL_LOG", "debug")
    assert _run(tmp_path, "budget", "--config", ZERO) == 0
