import json

import pytest

from hardylab.harness import config as cfgmod
from hardylab.harness import suites
from hardylab.harness.cache import Cache, cache_gc
from hardylab.harness.cli import main
from hardylab.harness.report import Report, canonical, number
from hardylab.harness.run import run

SMALL_SEQ = {"suite": "sequences", "depths": [6], "fractal": {"family": "koch", "depth": 6},
             "samples": {"sequences": 200, "supports": 40, "rh_max_level": 5}}


def test_config_errors_are_collected():
    bad = {"suite": "hardy", "params": [[-1, 0.5, 0.2]], "whitney": {"box": [1, 0, 0, 1]},
           "fractal": {"family": "koch"}}
    with pytest.raises(cfgmod.ConfigError) as err:
        cfgmod.resolve(bad)
    text = str(err.value)
    for piece in ("s must be positive", "p must lie", "q must be", "degenerate box", "snowflake"):
        assert piece in text
    assert len(err.value.problems) >= 5


def test_schema_rejects_unknown_keys():
    with pytest.raises(cfgmod.ConfigError) as err:
        cfgmod.resolve({"suite": "riesz", "colour": "red", "seed": -1})
    assert len(err.value.problems) == 2


def test_trace_threshold_and_riesz_condition():
    with pytest.raises(cfgmod.ConfigError, match="does not exceed"):
        cfgmod.resolve({"suite": "hardy", "params": [[0.1, 2, 2]]})
    with pytest.raises(cfgmod.ConfigError, match="omega"):
        cfgmod.resolve({"suite": "riesz", "riesz": [{"family": "koch", "depth": 6, "omega": 0.1, "r": 2}]})


def test_resolve_layers_and_alias():
    cfg = cfgmod.resolve({"seed": 4}, {"suite": "geometry", "depth": 7})
    assert cfg["suite"] == "geometry-checks"
    assert cfg["depths"] == [7] and cfg["fractal"]["depth"] == 7 and cfg["seed"] == 4
    assert cfg["samples"]["cubes"] == 200
    other = cfgmod.resolve({"seed": 4, "out": "elsewhere"}, {"suite": "geometry", "depth": 7})
    assert cfgmod.config_hash(cfg) == cfgmod.config_hash(other)


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"suite": "hardy", "params": [[0.6, 0.5, 2]]}))
    assert main(["check", "--config", str(path)]) == 2
    assert "p must lie" in capsys.readouterr().err
    assert main(["check", "--config", str(tmp_path / "missing.json"), "--suite", "riesz"]) == 2


def test_cli_run_and_gc(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HARDYLAB_CACHE", str(tmp_path / "cache"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SMALL_SEQ))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    printed = capsys.readouterr().out
    assert "[PASS] sequences.geometric" in printed
    assert (tmp_path / "out" / "sequences" / "report.json").exists()
    assert main(["check", "--config", str(path), "--no-cache"]) == 0
    assert main(["cache-gc"]) == 0
    assert (tmp_path / "cache" / "tasks").exists()


def test_canonical_roundtrip():
    import numpy as np

    rec = canonical({"a": np.float64(1.5), "b": (1, 2), "c": float("inf"), "d": np.arange(2)})
    assert rec == {"a": 1.5, "b": [1, 2], "c": "inf", "d": [0, 1]}
    assert number(rec["c"]) == float("inf")


def test_gc_on_empty_and_unreferenced(tmp_path):
    assert cache_gc(tmp_path / "nothing") == 0
    c = Cache(tmp_path)
    c.put_task("abc", {"record": {}, "entries": []})
    assert cache_gc(tmp_path) > 0
    assert not (tmp_path / "tasks" / "abc.json").exists()


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cache")
    out = tmp_path_factory.mktemp("out")
    cfg = cfgmod.resolve(dict(SMALL_SEQ, out=str(out)))
    cold = run(cfg, Cache(root))
    cold_bytes = (out / "sequences" / "records.json").read_bytes()
    warm = run(cfg, Cache(root))
    return cfg, root, out, cold, warm, cold_bytes


def test_small_suite_is_deterministic(small_run, tmp_path):
    cfg, root, out, cold, warm, cold_bytes = small_run
    assert (out / "sequences" / "records.json").read_bytes() == cold_bytes
    assert cold.records == warm.records
    run(dict(cfg, out=str(tmp_path)), Cache(enabled=False))
    assert (tmp_path / "sequences" / "records.json").read_bytes() == cold_bytes


def test_verdicts_recompute_from_records(small_run):
    _, _, out, cold, _, _ = small_run
    stored = Report.load(out / "sequences")
    assert stored.recompute_verdicts() == stored.verdicts == cold.verdicts
    assert cold.passed and all(line.startswith("[PASS]") for line in cold.summary_lines())


def test_provenance_and_gc_keeps_referenced(small_run, caplog):
    _, root, _, cold, _, _ = small_run
    entries = cold.provenance["cache_entries"]
    assert any(e.startswith("tasks/") for e in entries)
    assert any(e.startswith("clouds/") for e in entries)
    before = sorted(p.name for p in (root / "tasks").iterdir())
    with caplog.at_level("WARNING"):
        cache_gc(root, policy="all")
    assert sorted(p.name for p in (root / "tasks").iterdir()) == before
    assert "referenced by a report" in caplog.text


def test_report_files(tmp_path):
    cfg = cfgmod.resolve({"suite": "riesz", "out": str(tmp_path),
                          "riesz": [{"family": "segment", "depth": 12, "omega": 0.8, "r": 2.0,
                                     "t": [2.0**-3, 2.0**-4, 2.0**-5]}],
                          "samples": {"rel_depth": 5}})
    rep = run(cfg, Cache(enabled=False))
    files = {p.suffix for p in (tmp_path / "riesz").iterdir()}
    assert {".json", ".svg"} <= files
    svg = next((tmp_path / "riesz").glob("*.svg")).read_text()
    assert svg.startswith("<svg") and "</svg>" in svg
    assert rep.passed


def test_series_csv(tmp_path):
    from hardylab.harness.report import series_csv

    text = series_csv({"level": [1, 2], "contribution": [0.5, "inf"], "fringe_flag": [False, True]})
    assert text.splitlines() == ["level,contribution,fringe_flag", "1,0.5,0", "2,inf,1"]


def test_unknown_task_kind():
    with pytest.raises(KeyError):
        suites.execute({"id": "x", "kind": "nope"})
