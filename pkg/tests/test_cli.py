import json

import pytest
from click.testing import CliRunner

from geobench.cli import main
from geobench.metrics.report import RunReport


@pytest.fixture
def runner():
    return CliRunner()


def write_config(path, **updates):
    cfg = {
        "topology": {"regions": 3, "servers_per_region": 2, "partitions": 12},
        "arrival": {"mode": "open", "rate_tps": 80.0},
        "duration_s": 3.0,
        "warmup_s": 0.5,
        "protocol": "echo",
        "seed": 5,
    }
    cfg.update(updates)
    path.write_text(json.dumps(cfg))
    return path


def test_list_protocols(runner):
    result = runner.invoke(main, ["list-protocols"])
    assert result.exit_code == 0
    assert "global_sequencer" in result.output
    assert "quorum_commit" in result.output


def test_generate_writes_stream_and_summary(runner, tmp_path):
    out = tmp_path / "stream.ndjson"
    pl = tmp_path / "placement.json"
    result = runner.invoke(
        main,
        ["generate", "--count", "2000", "--seed", "9",
         "--out", str(out), "--placement-out", str(pl)],
    )
    assert result.exit_code == 0, result.output
    assert "composition: LSH" in result.output
    assert "stream sha256" in result.output
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 2000
    rec = json.loads(lines[0])
    assert set(rec) >= {"id", "origin", "class", "logic_tag", "read_set",
                        "write_set", "submit_time_ns"}


def test_generate_deterministic(runner, tmp_path):
    import hashlib

    digests = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.ndjson"
        result = runner.invoke(
            main, ["generate", "--count", "500", "--seed", "4", "--out", str(out)]
        )
        assert result.exit_code == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_classify_round_trip_and_mismatch_detection(runner, tmp_path):
    out = tmp_path / "stream.ndjson"
    pl = tmp_path / "placement.json"
    runner.invoke(
        main,
        ["generate", "--count", "300", "--seed", "2",
         "--out", str(out), "--placement-out", str(pl)],
    )
    ok = runner.invoke(
        main, ["classify", "--stream", str(out), "--placement", str(pl)]
    )
    assert ok.exit_code == 0, ok.output
    assert "mismatches vs recorded classes: 0" in ok.output

    # tamper with one recorded class: the cross-check must fail with exit 1
    lines = out.read_text().strip().splitlines()
    rec = json.loads(lines[0])
    rec["class"] = "SP-MH" if rec["class"] != "SP-MH" else "SP-LSH"
    lines[0] = json.dumps(rec)
    out.write_text("\n".join(lines) + "\n")
    bad = runner.invoke(
        main, ["classify", "--stream", str(out), "--placement", str(pl)]
    )
    assert bad.exit_code == 1
    assert "mismatches vs recorded classes: 1" in bad.output


def test_run_single_config(runner, tmp_path):
    cfg = write_config(tmp_path / "run.json")
    out_dir = tmp_path / "reports"
    result = runner.invoke(
        main, ["run", "--config", str(cfg), "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    rep = RunReport.load(out_dir / "report_000.json")
    assert rep.committed == rep.submitted
    assert (out_dir / "aggregate.csv").exists()


def test_run_replay_round_trip(runner, tmp_path):
    stream = tmp_path / "stream.ndjson"
    pl = tmp_path / "placement.json"
    runner.invoke(
        main,
        ["generate", "--count", "400", "--seed", "3",
         "--out", str(stream), "--placement-out", str(pl)],
    )
    cfg = write_config(
        tmp_path / "replay.json",
        workload={"kind": "replay", "replay": {"path": str(stream)}},
        topology={"regions": 4, "servers_per_region": 2, "partitions": 64},
        duration_s=10.0,
        warmup_s=0.0,
    )
    out_dir = tmp_path / "reports"
    result = runner.invoke(
        main, ["run", "--config", str(cfg), "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    rep = RunReport.load(out_dir / "report_000.json")
    assert rep.submitted == 400
    assert rep.committed == 400


def test_run_scenario_file(runner, tmp_path):
    out_dir = tmp_path / "sweep"
    result = runner.invoke(
        main,
        ["run", "--scenario", str(_quick_scenario(tmp_path)),
         "--out", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    csv = (out_dir / "aggregate.csv").read_text().strip().splitlines()
    assert len(csv) == 3  # header + 2 points


def _quick_scenario(tmp_path):
    spec = {
        "scenario": "packet_loss",
        "base": {
            "topology": {"regions": 3, "servers_per_region": 2, "partitions": 12},
            "arrival": {"mode": "open", "rate_tps": 60.0},
            "duration_s": 2.0,
            "warmup_s": 0.5,
            "protocol": "echo",
            "seed": 1,
        },
        "axis": [0.0, 0.05],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(spec))
    return path


def test_run_point_flag(runner, tmp_path):
    out_dir = tmp_path / "one"
    result = runner.invoke(
        main,
        ["run", "--scenario", str(_quick_scenario(tmp_path)),
         "--point", "1", "--out", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    assert len(list(out_dir.glob("report_*.json"))) == 1


def test_invalid_config_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"protocol": "echo", "bogus_key": 1}))
    result = runner.invoke(main, ["run", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert "bogus_key" in result.output


def test_missing_wan_file_exits_2_naming_file(runner, tmp_path):
    cfg = write_config(tmp_path / "run.json", wan={"path": "missing_wan.json"})
    result = runner.invoke(
        main, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 2
    assert "missing_wan.json" in result.output


def test_missing_config_file_exits_2(runner, tmp_path):
    result = runner.invoke(
        main, ["run", "--config", str(tmp_path / "none.json"),
               "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 2


def test_report_groups_by_scenario(runner, tmp_path):
    out_dir = tmp_path / "sweep"
    runner.invoke(
        main,
        ["run", "--scenario", str(_quick_scenario(tmp_path)), "--out", str(out_dir)],
    )
    result = runner.invoke(main, ["report", "--in", str(out_dir)])
    assert result.exit_code == 0, result.output
    assert (out_dir / "packet_loss.csv").exists()


def test_report_empty_dir_exits_2(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(main, ["report", "--in", str(empty)])
    assert result.exit_code == 2


def test_report_corrupt_json_names_file(runner, tmp_path):
    d = tmp_path / "dir"
    d.mkdir()
    (d / "report_000.json").write_text("{broken")
    result = runner.invoke(main, ["report", "--in", str(d)])
    assert result.exit_code == 2
    assert "report_000.json" in result.output


def test_internal_assertion_exits_3(runner, monkeypatch, tmp_path):
    from geobench import cli as cli_mod
    from geobench.errors import EngineAssertionError

    def boom(req):
        raise EngineAssertionError("invariant violated")

    monkeypatch.setattr(cli_mod, "op_run", boom)
    cfg = write_config(tmp_path / "run.json")
    result = runner.invoke(
        main, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 3
    assert "internal assertion" in result.output


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "geobench" in result.output
