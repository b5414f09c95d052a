import csv
import json

import numpy as np
import pytest

from lcac.cli import main
from lcac.experiments import ExperimentPlan, read_summary, run_plan
from lcac.ggd import ConstellationProfile, sample
from lcac.layout import read_pgm
from lcac.profiles import bundled_plans, table2


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def source(tmp_path):
    p = tmp_path / "src.bin"
    p.write_bytes(np.random.default_rng(0).integers(0, 256, 110, dtype=np.uint8).tobytes())
    return p


def _generate(tmp_path, source, name="code.pgm", *extra):
    key = tmp_path / "k.hex"
    flags = ["--new-key"] if not key.exists() else []
    assert _run("generate", "--source", source, "--key", key, "--out", tmp_path / name, *flags, *extra) == 0
    return tmp_path / name, key


def test_generate_writes_a_47_module_pgm(tmp_path, source):
    img, _ = _generate(tmp_path, source)
    assert img.read_bytes().startswith(b"P5\n47 47\n255\n")
    assert read_pgm(img).shape == (47, 47)


def test_missing_key_exits_2_without_output(tmp_path, source, capsys):
    out = tmp_path / "x.pgm"
    assert _run("generate", "--source", source, "--key", tmp_path / "nokey", "--out", out) == 2
    assert not out.exists() and list(tmp_path.iterdir()) == [source]
    assert "not found" in capsys.readouterr().err


def test_generate_then_decode_recovers_source(tmp_path, source):
    img, _ = _generate(tmp_path, source)
    dec = tmp_path / "dec.bin"
    assert _run("decode", img, "--out", dec) == 0
    assert dec.read_bytes() == source.read_bytes()


def test_strategies_differ_only_at_embedded_modules(tmp_path, source):
    a, key = _generate(tmp_path, source, "s1.pgm", "--strategy", "1", "--seed", "5")
    b, _ = _generate(tmp_path, source, "s2.pgm", "--strategy", "2", "--seed", "5")
    diff = np.count_nonzero(read_pgm(a) != read_pgm(b))
    # each strategy overwrites at most 255 bits, so at most 510 modules change
    assert 0 < diff <= 510


def test_generation_is_deterministic(tmp_path, source):
    a, _ = _generate(tmp_path, source, "a.pgm", "--seed", "9")
    b, _ = _generate(tmp_path, source, "b.pgm", "--seed", "9")
    assert a.read_bytes() == b.read_bytes()


def test_verify_exit_codes(tmp_path, source):
    img, key = _generate(tmp_path, source)
    assert _run("verify", img, "--key", key) == 0
    legal = tmp_path / "legal.pgm"
    assert _run("channel", img, "--out", legal, "--seed", "1") == 0
    assert _run("verify", legal, "--key", key) == 0
    copy = tmp_path / "copy.pgm"
    codes = set()
    for seed in range(8):
        assert _run("attack", img, "--profile", "table2:a", "--out", copy, "--seed", seed) == 0
        codes.add(_run("verify", copy, "--key", key))
    assert 1 in codes and codes <= {0, 1}
    assert _run("verify", img, "--key", tmp_path / "missing") == 2


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        _run("generate")
    assert e.value.code == 2
    assert _run("experiment", "no_such_plan") == 2
    assert _run("attack", "--ns", "9", "--trials", "1", "--out", tmp_path / "x.csv") == 2


def test_estimate_recovers_profile(tmp_path):
    prof = table2("p")
    rng = np.random.default_rng(3)
    path = tmp_path / "s.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["constellation", "value"])
        for x, p in zip(prof.points, prof.params):
            for v in sample(p, rng, 50_000):
                w.writerow([int(x), f"{v:.6f}"])
    out = tmp_path / "p.json"
    assert _run("estimate", path, "--out", out) == 0
    est = ConstellationProfile.from_dict(json.loads(out.read_text()))
    assert est.points == prof.points
    for a, b in zip(est.params, prof.params):
        assert abs(a.mu - b.mu) < 1 and abs(a.sigma2 / b.sigma2 - 1) < 0.08 and abs(a.gamma - b.gamma) < 0.15


def test_estimate_errors(tmp_path):
    one = tmp_path / "one.csv"
    one.write_text("constellation,value\n100,101\n100,99\n100,98\n")
    assert _run("estimate", one) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("constellation,value\n100,abc\n")
    assert _run("estimate", bad) == 2
    cols = tmp_path / "cols.csv"
    cols.write_text("x,y\n1,2\n")
    assert _run("estimate", cols) == 2


def test_fit_predict_optimize(tmp_path, capsys):
    model = tmp_path / "m.json"
    assert _run("fit", "--out", model) == 0
    d = json.loads(model.read_text())
    assert set(d["constellation"]["100.0"]) == {"a_mu", "b_mu", "a_sigma", "b_sigma", "c_sigma", "gamma_bar"}
    prof = tmp_path / "p10.json"
    assert _run("predict", "--model", model, "--ns", "10", "--out", prof) == 0
    assert ConstellationProfile.load(prof).M == 4
    res = tmp_path / "opt.json"
    assert _run("optimize", "--model", model, "--out", res) == 0
    assert "before: k_a=147" in capsys.readouterr().out
    assert json.loads(res.read_text())["delta"] == 0.012


def test_attack_batch_csv_name_encodes_provenance(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert _run("attack", "--ns", "4", "--trials", "3") == 0
    assert (tmp_path / "sc_attack_ns4.csv").exists()
    assert _run("channel", "--profile", "table2:b", "--trials", "2") == 0
    assert any(p.name.startswith("table2_b") for p in tmp_path.iterdir())


def test_bundled_plans_are_valid():
    assert bundled_plans() == ["appendixA", "fig17", "table6"]
    for name in bundled_plans():
        assert ExperimentPlan.load(name).name == name


@pytest.mark.parametrize(
    "bad",
    [
        {"name": "x", "kind": "table6", "trials": 0, "master_seed": 1},
        {"name": "x", "kind": "nope", "trials": 1, "master_seed": 1},
        {"name": "x", "kind": "trials", "trials": 1, "master_seed": 1, "channel": "table2:z"},
        {"name": "x", "kind": "trials", "trials": 1, "master_seed": 1, "colour": "red"},
        {"name": "x", "kind": "trials", "trials": 1, "master_seed": 1, "auth": {"k_a": 150}},
    ],
)
def test_invalid_plans(bad):
    with pytest.raises(Exception) as e:
        ExperimentPlan.from_dict(bad)
    assert isinstance(e.value, ValueError)


def test_invalid_plan_file_exits_2(tmp_path):
    p = tmp_path / "plan.json"
    p.write_text(json.dumps({"name": "x", "kind": "trials", "trials": 0, "master_seed": 1}))
    assert _run("experiment", p) == 2


def _small(name, trials=2, **params):
    plan = ExperimentPlan.load(name)
    plan.trials = trials
    plan.params.update(params)
    return plan


def test_fig17_rows():
    out = run_plan(_small("fig17", 1), write=False)
    rows = read_summary(out.summary_csv)
    assert [int(r["f"]) for r in rows[::2]] == list(range(1, 17))
    assert set(rows[0]) == {"f", "k_a", "t_a", "eps_a2_theory", "eps_a2_sim", "eps_a1_sim", "eps_a1_model", "p_zero_sim"}
    theory = [float(r["eps_a2_theory"]) for r in rows[::2]]
    assert all(a > b for a, b in zip(theory, theory[1:]))


def test_table6_rows():
    rows = read_summary(run_plan(_small("table6"), write=False).summary_csv)
    assert [(r["label"], r["k_a"], r["n_s"]) for r in rows] == [("before", "147", "10"), ("after", "179", "10"), ("after", "179", "14")]
    assert float(rows[0]["p_zero_ref"]) == 0.8488


def test_experiment_writes_files_and_records_seed(tmp_path):
    plan = _small("appendixA", 1, occlusions=[[0, 0]])
    out = run_plan(plan, tmp_path)
    assert out.paths["summary"].read_text() == out.summary_csv
    assert f"# master_seed,{plan.master_seed}" in out.summary_csv
    assert out.trials_csv.splitlines()[0] == "cell,trial,seed,eps_c2,eps_c1,eps_a2,eps_a1,verdict"


def test_experiment_cli_trial_override(tmp_path):
    assert _run("experiment", "appendixA", "--trials", "1", "--out", tmp_path) == 0
    assert (tmp_path / "appendixA_summary.csv").exists()
    assert "# trials,1" in (tmp_path / "appendixA_summary.csv").read_text()
