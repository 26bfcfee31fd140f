import csv
import os

import pytest

from cachecast.cli import main

ROOT = os.path.join(os.path.dirname(__file__), "..")
SMALL = """
layout: {num_caches: 4}
tables: {n_scenarios: 2000}
learning: {events: 200}
simulation: {n_seeds: 2, policies: [proposed, baseline1, baseline2]}
sweep: {parameter: load, values: [1.0, 2.0]}
"""


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_empty_catalog_is_an_error(tmp_path, capsys):
    assert main(["build-tables", "--config", write(tmp_path, "files: []\n"), "--out", str(tmp_path)]) == 2
    assert "empty" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_build_tables_is_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["build-tables", "--config", cfg, "--out", str(a)]) == 0
    assert main(["build-tables", "--config", cfg, "--out", str(b)]) == 0
    for name in ("table_true.csv", "table_true_stderr.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bound_check_pass_and_corrupt(tmp_path):
    cfg = os.path.join(ROOT, "configs", "bound_check.yaml")
    assert main(["bound-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "bound_check.csv")
    assert len(rows) == 16 * 6 and all(r["ok"] == "1" for r in rows)
    assert list(rows[0]) == ["state", "N", "lower", "exact", "refined", "upper", "ok"]
    assert main(["bound-check", "--config", cfg, "--out", str(tmp_path), "--corrupt", "0.3"]) == 1


def test_bound_check_single_node_is_tight(tmp_path):
    cfg = write(tmp_path, "layout: {num_caches: 1, positions: [[300.0, 0.0]]}\n")
    assert main(["bound-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    full = [r for r in read_csv(tmp_path / "bound_check.csv") if r["state"] == "1"]
    assert all(r["lower"] == r["exact"] == r["refined"] == r["upper"] for r in full)


def test_bound_check_too_large(tmp_path):
    cfg = write(tmp_path, "layout: {num_caches: 7}\nfiles: [{num_segments: 2}]\n")
    assert main(["bound-check", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_simulate_policies_flag(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--workers", "1",
                 "--policies", "proposed,baseline1,baseline2"]) == 0
    rows = read_csv(tmp_path / "simulate.csv")
    assert [r["policy"] for r in rows] == ["proposed", "baseline1", "baseline2"]
    assert "lower bound" in capsys.readouterr().out


def test_sweep_row_count(tmp_path):
    text = SMALL.replace("n_seeds: 2", "n_seeds: 20").replace("[1.0, 2.0]", "[1.0, 2.0, 5.0, 10.0, 20.0]")
    cfg = write(tmp_path, text)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--workers", "2"]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 15 and all(r["n_seeds"] == "20" for r in rows)


def test_seed_flag_changes_results(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1"])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "1", "--seed", "9"])
    assert (tmp_path / "a" / "simulate.csv").read_text() != (tmp_path / "b" / "simulate.csv").read_text()


def test_event_log(tmp_path):
    cfg = write(tmp_path, SMALL + "output: {event_log: true}\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--workers", "1"]) == 0
    assert (tmp_path / "events.jsonl").read_text().count("\n") > 0


@pytest.mark.slow
def test_learn_reaches_two_percent(tmp_path):
    cfg = os.path.join(ROOT, "configs", "learn.yaml")
    assert main(["learn", "--config", cfg, "--out", str(tmp_path)]) == 0
    last = read_csv(tmp_path / "learn.csv")[-1]
    assert last["t"] == "10000"
    assert float(last["max_rel_err_v_star"]) < 0.02 and float(last["max_rel_err_v_one"]) < 0.02
    assert (tmp_path / "table_learned.csv").exists()
