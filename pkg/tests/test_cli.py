import csv
import json

import numpy as np
import pytest

from spartsm.cli import ConfigError, RunConfig, _option_names, build_parser, main


def _run(*argv):
    return main([str(a) for a in argv])


def _strip_created(obj):
    if isinstance(obj, dict):
        return {k: _strip_created(v) for k, v in obj.items() if k != "created"}
    if isinstance(obj, list):
        return [_strip_created(v) for v in obj]
    return obj


@pytest.fixture
def ggm_csv(tmp_path):
    out = tmp_path / "ggm.csv"
    assert _run("simulate", "--model", "ggm-random", "--d", 4, "--n", 400, "--seed", 3,
                "--out", out, "--truth", tmp_path / "ggm_truth.json") == 0
    return out


def test_simulate_sine_truth(tmp_path):
    out, truth = tmp_path / "d.csv", tmp_path / "t.json"
    assert _run("simulate", "--model", "ggm-sine", "--d", 20, "--n", 5000, "--seed", 7,
                "--out", out, "--truth", truth) == 0
    rec = json.loads(truth.read_text())
    assert rec["seed"] == 7 and rec["change_kind"] == "sine"
    assert rec["n_changes"] == len(rec["mask"]) >= 1
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t"] + [f"x{i}" for i in range(1, 21)]
    assert len(rows) == 5001


def test_simulate_ising_binary(tmp_path):
    out = tmp_path / "i.csv"
    assert _run("simulate", "--model", "ising", "--d", 10, "--n", 427, "--sweeps", 20,
                "--out", out, "--truth", tmp_path / "t.json") == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (427, 11)
    assert set(np.unique(data[:, 1:])) <= {0.0, 1.0}


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "ggm-sine", "--d", "0"],
    ["simulate", "--model", "nope"],
    ["simulate", "--n", "-5"],
    ["fit", "missing.csv"],
    ["simulate", "--bogus-flag"],
    ["simulate", "--threads", "0"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_runtime_error_exit_1(tmp_path):
    # strongly coupled d=30 truncated model: the acceptance guard trips at run time
    assert _run("simulate", "--model", "ggm-truncated", "--d", 30, "--p", 0.5, "--n", 10,
                "--out", tmp_path / "d.csv", "--truth", tmp_path / "t.json") == 1


def test_fit_auto_lambda_and_determinism(ggm_csv, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run("fit", ggm_csv, "--out", a) == 0
    assert _run("fit", ggm_csv, "--out", b) == 0
    fa = json.loads(a.read_text())
    assert fa["lambda"] == pytest.approx(np.sqrt(2 * np.log(10) / 400))
    assert fa["lambda_rule"].startswith("auto")
    assert _strip_created(fa) == _strip_created(json.loads(b.read_text()))


def test_fit_huge_lambda_zero(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("t,x1,x2\n0.0,1.0,0.5\n0.3,-0.2,1.1\n0.6,0.7,-0.4\n1.0,-1.3,0.2\n")
    out = tmp_path / "fit.json"
    assert _run("fit", path, "--lambda", 1e6, "--out", out) == 0
    assert np.all(np.array(json.loads(out.read_text())["alpha"]) == 0)


def test_infer_report(ggm_csv, tmp_path):
    out = tmp_path / "r.json"
    assert _run("infer", ggm_csv, "--targets", "0-1,2", "--threads", 2, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert [r["feature_index"] for r in rep["results"]] == [1, 2]
    assert rep["results"][0]["edge"] == [0, 1]
    for r in rep["results"]:
        assert r["ci"][0] <= r["alpha_tilde"] <= r["ci"][1]
    out1 = tmp_path / "r1.json"
    assert _run("infer", ggm_csv, "--targets", "0-1,2", "--threads", 1, "--out", out1) == 0
    assert _strip_created(rep) == _strip_created(json.loads(out1.read_text()))
    assert _run("infer", ggm_csv, "--targets", "9-9", "--out", out) == 2
    assert _run("infer", ggm_csv, "--targets", "10", "--out", out) == 2


def test_changepoint_outputs(tmp_path):
    data = tmp_path / "ms.csv"
    assert _run("simulate", "--model", "mean-shift", "--n", 5000, "--seed", 1,
                "--out", data, "--truth", tmp_path / "t.json") == 0
    out, stat = tmp_path / "c.json", tmp_path / "s.csv"
    assert _run("changepoint", data, "--features", "moments", "--bins", 1000,
                "--out", out, "--stat-csv", stat) == 0
    rep = json.loads(out.read_text())
    assert any(iv["start"] <= 0.5 <= iv["end"] for iv in rep["intervals"])
    assert np.loadtxt(stat, delimiter=",", skiprows=1).shape == (200, 3)


def test_eval_power_small(tmp_path):
    assert _run("eval", "power", "--reps", 5, "--effects", "0,10", "--d", 6,
                "--out-dir", tmp_path / "p", "--seed", 2) == 0
    summary = json.loads((tmp_path / "p" / "summary.json").read_text())
    assert summary["effects"] == [0.0, 10.0] and len(summary["rejection"]) == 2
    assert (tmp_path / "p" / "power.csv").exists()
    assert _run("eval", "power", "--effects", "a,b", "--out-dir", tmp_path / "q") == 2


def test_eval_outputs_identical_apart_from_timestamp(tmp_path):
    for name in ("a", "b"):
        assert _run("eval", "coverage", "--reps", 4, "--d", 5, "--seed", 9, "--threads", 1 if name == "a" else 2,
                    "--out-dir", tmp_path / name) == 0
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert _strip_created(a) == _strip_created(b)
    assert (tmp_path / "a" / "residuals.csv").read_bytes() == (tmp_path / "b" / "residuals.csv").read_bytes()


def _subparsers(parser):
    out = {}
    for name, sub in parser._subparsers._group_actions[0].choices.items():
        if name == "eval":
            for ename, esub in sub._subparsers._group_actions[0].choices.items():
                out[f"eval {ename}"] = esub
        else:
            out[name] = sub
    return out


def test_help_documents_every_flag_with_default():
    for name, sub in _subparsers(build_parser()).items():
        text = sub.format_help()
        for action in sub._actions:
            if not action.option_strings or action.dest == "help":
                continue
            assert action.option_strings[-1] in text, (name, action.dest)
            assert action.help and "%(default)s" in sub._get_formatter()._get_help_string(action), (name, action.dest)


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["infer", "--help"])
    assert exc.value.code == 0
    assert "(default: 0.95)" in capsys.readouterr().out


def test_run_config_round_trip_and_rejections():
    cfg = RunConfig("fit", 2**63 + 5, {"lam": "auto", "basis": "linear"})
    allowed = _option_names(build_parser())
    assert RunConfig.from_json(cfg.to_json(), allowed) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "fit", "extra": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "fit", "options": {"nope": 1}}, allowed)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "fit", "seed": -1})
    with pytest.raises(ConfigError):
        RunConfig.from_json("{not json")


def test_config_file_drives_and_flags_override(ggm_csv, tmp_path):
    dumped = tmp_path / "cfg.json"
    out = tmp_path / "fit.json"
    assert _run("fit", ggm_csv, "--lambda", "0.3", "--out", out, "--dump-config", dumped) == 0
    cfg = json.loads(dumped.read_text())
    assert cfg["command"] == "fit" and cfg["options"]["lam"] == "0.3"
    out2 = tmp_path / "fit2.json"
    assert _run("fit", ggm_csv, "--config", dumped, "--out", out2) == 0
    assert json.loads(out2.read_text())["lambda"] == 0.3
    out3 = tmp_path / "fit3.json"
    assert _run("fit", ggm_csv, "--config", dumped, "--lambda", "0.5", "--out", out3) == 0
    assert json.loads(out3.read_text())["lambda"] == 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "fit", "options": {"unknown_key": 1}}))
    assert _run("fit", ggm_csv, "--config", bad) == 2
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"command": "infer", "options": {}}))
    assert _run("fit", ggm_csv, "--config", wrong) == 2


def test_threads_env_fallback(ggm_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("SPARTSM_THREADS", "2")
    assert _run("infer", ggm_csv, "--targets", "1", "--out", tmp_path / "r.json") == 0
    monkeypatch.setenv("SPARTSM_THREADS", "0")
    assert _run("infer", ggm_csv, "--targets", "1", "--out", tmp_path / "r.json") != 0
