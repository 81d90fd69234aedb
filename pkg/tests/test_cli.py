import json
import math

import pytest

from hermite_beta.cli import main, read_config


def run(*args):
    return main([str(a) for a in args])


def test_count_half_infinite(tmp_path, capsys):
    assert run("count", "--n", 1000, "--beta", 2, "--seed", 7, "--lo", 0, "--hi", "inf", "--out", tmp_path) == 0
    N = int(capsys.readouterr().out.strip())
    assert 400 < N < 600
    man = read_config(tmp_path / "count_1000_2_7.manifest")
    assert man["command"] == "count" and man["hi"] == "inf" and man["seed"] == "7"


def test_count_engines_agree(tmp_path, capsys):
    assert run("count", "--n", 200, "--lo", -3, "--hi", 5, "--engine", "both", "--x", 0.1, "--out", tmp_path) == 0
    data = json.loads((tmp_path / "count_200_2_0.json").read_text())
    assert data["engines"]["sturm"] == data["engines"]["phase"] == data["count"]


def test_manifest_rerun(tmp_path, capsys):
    assert run("count", "--n", 300, "--seed", 3, "--lo", -1, "--hi", 2, "--out", tmp_path / "a") == 0
    first = capsys.readouterr().out
    assert run("--config", tmp_path / "a" / "count_300_2_3.manifest", "--out", tmp_path / "b") == 0
    assert capsys.readouterr().out == first


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nn = 50\nseed = 1\nlo = -inf\nhi = inf\n")
    assert run("count", "--config", cfg, "--n", 60, "--out", tmp_path) == 0
    assert capsys.readouterr().out.strip() == "60"


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("nn = 50\n")
    assert run("count", "--config", cfg, "--out", tmp_path) == 2


def test_index_clt_thread_invariance(tmp_path):
    common = ["index-clt", "--n", 2000, "--replicas", 150, "--engine", "both", "--seed", 4]
    assert run(*common, "--threads", 4, "--out", tmp_path / "a") == 0
    assert run(*common, "--threads", 1, "--out", tmp_path / "b") == 0
    name = "index-clt_2000_2_4.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_local_law_tn_auto(tmp_path):
    assert run("local-law", "--n", 100_000, "--x", 0.5, "--tn", "auto", "--replicas", 2, "--out", tmp_path) == 0
    man = read_config(tmp_path / "local-law_100000_2_0.manifest")
    assert float(man["tn"]) == pytest.approx(math.log(100_000))


def test_other_commands(tmp_path, capsys):
    assert run("sample", "--n", 5, "--out", tmp_path) == 0
    assert (tmp_path / "model_5_2_0.csv").exists()
    assert run("phase-trace", "--n", 40, "--x", 0.3, "--cut", "margin", "--out", tmp_path) == 0
    assert (tmp_path / "phase-trace_40_2_0.csv").read_text().startswith("l,phi,delta_phi,eta_arg")
    assert run("global-law", "--n", 500, "--out", tmp_path) == 0
    assert run("diagnose-moments", "--n", 1000, "--l", "half", "--samples", 20_000, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "diagnose-moments_1000_2_0.json").read_text())
    assert {"predicted", "empirical", "stderr", "band", "variant", "pass"} <= set(rep)
    assert run("variance-slope", "--ns", "100 1000 10000", "--replicas", 100, "--out", tmp_path) == 0


def test_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("HBETA_OUT", str(tmp_path / "env"))
    assert run("sample", "--n", 4) == 0
    assert (tmp_path / "env" / "sample_4_2_0.manifest").exists()


@pytest.mark.parametrize("args", [
    ["count", "--n", 1],
    ["count", "--beta", -1],
    ["count", "--bogus"],
    ["count", "--lo", 3, "--hi", 1],
    ["local-law", "--x", 2.5],
    ["count", "--lo", "nan"],
])
def test_bad_arguments(tmp_path, args):
    assert run(*args, "--out", tmp_path) == 2


def test_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("sample", "--n", 4, "--out", blocker / "sub") == 2
