import json
import os
import subprocess
import sys

import pytest

from qsdkit.cli import build_parser, main

S2 = {"p_hat": [[0, 0.5], [0.5, 0]], "p0": [0.5, 0.5]}


@pytest.fixture
def model(tmp_path):
    p = tmp_path / "s2.json"
    p.write_text(json.dumps(S2))
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exact(model, capsys):
    code, out, _ = run(["exact", "--model", model], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["nu"] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert rep["lambda"] == pytest.approx(0.5, abs=1e-12)
    assert rep["R"] == pytest.approx(2 / 3, abs=1e-12)
    assert "0.66666666666666" in out


def test_validate(model, capsys):
    code, out, _ = run(["validate", "--model", model], capsys)
    assert code == 0 and json.loads(out)["valid"] is True


def test_missing_model(tmp_path, capsys):
    code, _, err = run(["exact", "--model", tmp_path / "nope.json"], capsys)
    assert code == 2
    assert "model file not found" in err


def test_invalid_model_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"p_hat": [[0, 1], [1, 0]], "p0": [0, 0]}))
    code, _, err = run(["exact", "--model", p], capsys)
    assert code == 2
    assert "chain.NoAbsorption" in err


def test_renormalize_flag(tmp_path, capsys):
    p = tmp_path / "raw.json"
    p.write_text(json.dumps({"p_hat": [[0, 1], [1, 0]], "p0": [1, 1]}))
    assert run(["validate", "--model", p], capsys)[0] == 2
    assert run(["validate", "--model", p, "--renormalize"], capsys)[0] == 0


def test_unknown_flag_rejected(model, capsys):
    code, _, err = run(["exact", "--model", model, "--bogus", "1"], capsys)
    assert code == 2
    assert "unrecognized" in err


def test_bad_schedule_exit_2(model, capsys):
    code, _, err = run(["sa", "--model", model, "--steps", 10, "--schedule", "power:A=-1"], capsys)
    assert code == 2


def test_help_lists_every_flag():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, p in sub.items():
        text = p.format_help()
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text, (name, opt)


def test_sa_csv(model, tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, _, _ = run(["sa", "--model", model, "--steps", 100, "--seed", 1, "--replicas", 2, "--out", out], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "replica,n,tau,gamma,err_l1,absorptions,x_1,x_2"
    assert lines[-1].startswith("1,100,")


def test_sa_determinism(model, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(["sa", "--model", model, "--steps", 10, "--seed", 1, "--out", p], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_fv_csv(model, tmp_path, capsys):
    out = tmp_path / "fv.csv"
    code, _, _ = run(["fv", "--model", model, "--N", 20, "--T", 1, "--knots", 5, "--out", out], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "replica,t,x_1,x_2,psi_1,psi_2,dev_l1"
    assert len(lines) == 6


def test_fv_single_particle(model, capsys):
    code, _, err = run(["fv", "--model", model, "--N", 1, "--T", 1], capsys)
    assert code == 2 and "[fv.Invalid]" in err


def _config(tmp_path, kind, **cfg):
    p = tmp_path / f"{kind}.json"
    p.write_text(json.dumps({"model": "s2.json", **cfg}))
    return p


def test_exp_config_validation(model, tmp_path, capsys):
    cfg = _config(tmp_path, "rate", schedule="power:A=1,alpha=1,beta=0", steps=100, typo=1)
    code, _, err = run(["exp", "rate", "--config", cfg], capsys)
    assert code == 2 and "unknown config keys" in err
    cfg = _config(tmp_path, "rate", schedule="power:A=1,alpha=1,beta=0")
    code, _, err = run(["exp", "rate", "--config", cfg], capsys)
    assert code == 2 and "missing" in err


def test_exp_clt_condition_exit_2(model, tmp_path, capsys):
    cfg = _config(tmp_path, "clt", schedule="power:A=0.7,alpha=1,beta=0", n_targets=[10, 100])
    code, _, err = run(["exp", "clt", "--config", cfg], capsys)
    assert code == 2 and "ConditionViolated" in err


def test_exp_report_embeds_config(model, tmp_path, capsys):
    cfg = _config(tmp_path, "law", schedule="harmonic-shift", n=[10, 100], replicas=50, seed=3)
    code, out, _ = run(["exp", "law", "--config", cfg, "--csv", tmp_path / "law.csv"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["config"]["n"] == [10, 100]
    assert rep["meta"]["seed"] == 3
    assert (tmp_path / "law.csv").read_text().startswith("replica,n,state\n")


# byte-identical outputs across reruns and worker counts, through the installed entry point

COMMANDS = {
    "exact": lambda d: ["exact", "--model", d / "s2.json", "--out", d / "out.json"],
    "sa": lambda d: ["sa", "--model", d / "s2.json", "--steps", 3000, "--seed", 2, "--replicas", 130, "--out", d / "out.csv"],
    "fv": lambda d: ["fv", "--model", d / "s2.json", "--N", 30, "--T", 2, "--replicas", 130, "--seed", 2, "--out", d / "out.csv"],
    "exp-rate": lambda d: ["exp", "rate", "--config", d / "rate.json", "--out", d / "out.json", "--csv", d / "out.csv"],
    "exp-clt": lambda d: ["exp", "clt", "--config", d / "clt.json", "--out", d / "out.json", "--csv", d / "out.csv"],
    "exp-law": lambda d: ["exp", "law", "--config", d / "law.json", "--out", d / "out.json", "--csv", d / "out.csv"],
    "exp-fvdev": lambda d: ["exp", "fvdev", "--config", d / "fvdev.json", "--out", d / "out.json", "--csv", d / "out.csv"],
}


def _setup_dir(d):
    d.mkdir()
    (d / "s2.json").write_text(json.dumps(S2))
    common = {"model": "s2.json", "seed": 11, "replicas": 130}
    (d / "rate.json").write_text(json.dumps({**common, "schedule": "power:A=1,alpha=1,beta=0", "steps": 2000}))
    (d / "clt.json").write_text(json.dumps({**common, "schedule": "power:A=1,alpha=1,beta=0", "n_targets": [100, 1000]}))
    (d / "law.json").write_text(json.dumps({**common, "schedule": "harmonic-shift", "n": [10, 100]}))
    (d / "fvdev.json").write_text(json.dumps({
        "model": "s2.json", "seed": 11, "replicas": 70, "N_list": [20, 40], "T": 1.0,
        "equilibrium": {"N": 20, "window": [100, 400]},
    }))


def reproduce(tmp_path, name, workers, tag):
    d = tmp_path / f"{name}-{tag}"
    _setup_dir(d)
    env = dict(os.environ, QSD_WORKERS=str(workers))
    argv = [sys.executable, "-m", "qsdkit.cli", *map(str, COMMANDS[name](d))]
    proc = subprocess.run(argv, env=env, capture_output=True, text=True, cwd=d)
    assert proc.returncode == 0, proc.stderr
    return {p.name: p.read_bytes() for p in sorted(d.glob("out.*"))}


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_byte_identical_across_workers(tmp_path, name):
    runs = [reproduce(tmp_path, name, w, k) for k, w in enumerate((1, 1, 3))]
    assert runs[0] and runs[0] == runs[1] == runs[2]
