import pytest

from lof.cli import main
from lof.config import SCHEMA, RunConfig
from lof.env import read_dataset
from lof.errors import ConfigError
from lof.metrics import read_results
from lof.weights import read_checkpoint

FAST = ["--set", "env.horizon=22", "--set", "train.batch_size=2"]


# -- config -------------------------------------------------------------------

def test_defaults_follow_the_reference_table():
    cfg = RunConfig()
    assert cfg["train.dataset_size"] == 1300
    assert (cfg["train.iterations"], cfg["train.batch_size"], cfg["train.lr"]) == (500, 16, 0.003)
    assert (cfg["env.horizon"], cfg["env.map_size"], cfg["agent.num"], cfg["target.num"]) == (40, 30.0, 4, 2)
    assert (cfg["model.alpha"], cfg["model.beta"], cfg["model.rho"]) == (20.0, 10.0, 1.0)
    assert cfg["eval.threshold"] == 0.646


def test_parse_and_reject():
    cfg = RunConfig.parse("agent.num = 3  # comment\n\nmodel.swap = yes\n")
    assert cfg["agent.num"] == 3 and cfg["model.swap"] is True
    with pytest.raises(ConfigError) as exc:
        RunConfig.parse("agent.nmu = 3\n")
    assert exc.value.key == "agent.nmu"
    with pytest.raises(ConfigError) as exc:
        RunConfig.parse("agent.num = four\n")
    assert exc.value.key == "agent.num"
    with pytest.raises(ConfigError):
        RunConfig.parse("just words\n")


def test_validation_names_bad_values():
    with pytest.raises(ConfigError):
        RunConfig.load(overrides={"agent.policy": "teleport"})
    with pytest.raises(ConfigError) as exc:
        RunConfig.load(overrides={"eval.mse_components": "velocity"})
    assert exc.value.key == "eval.mse_components"


def test_text_round_trip_and_hash():
    cfg = RunConfig.load(overrides={"agent.fov": "90"}, environ={})
    back = RunConfig.parse(cfg.text())
    assert back.values == cfg.values and back.hash() == cfg.hash()
    assert RunConfig().hash() != cfg.hash()


def test_lof_seed_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("run.seed = 5\n")
    assert RunConfig.load(path, environ={})["run.seed"] == 5
    assert RunConfig.load(path, environ={"LOF_SEED": "9"})["run.seed"] == 9


# -- commands -----------------------------------------------------------------

def test_help_lists_every_key(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for key in SCHEMA:
        assert key in out


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["generate", "--out", str(a), "--n", "3", "--seed", "7"] + FAST) == 0
    assert main(["generate", "--out", str(b), "--n", "3", "--seed", "7"] + FAST) == 0
    assert a.read_bytes() == b.read_bytes()
    trajs, meta = read_dataset(a)
    assert len(trajs) == 3 and trajs[0].horizon == 22
    assert "config_hash" in meta


def test_lof_seed_changes_generated_data(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["generate", "--out", str(a), "--n", "1"] + FAST) == 0
    monkeypatch.setenv("LOF_SEED", "42")
    assert main(["generate", "--out", str(b), "--n", "1"] + FAST) == 0
    assert a.read_bytes() != b.read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("agent.speed = 3\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert "agent.speed" in capsys.readouterr().err
    assert main(["generate", "--out", str(tmp_path / "x.csv"), "--set", "nokey"]) == 2


def test_io_error_exit_code(tmp_path):
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out-checkpoint", str(tmp_path / "c.txt")]) == 3
    assert main(["generate", "--out", str(tmp_path / "no" / "dir.csv"), "--n", "1"] + FAST) == 3


def test_train_one_iteration_and_rerun(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["generate", "--out", str(data), "--n", "2"] + FAST) == 0
    outs = []
    for k in range(2):
        ck = tmp_path / f"ck{k}.txt"
        assert main(["train", "--data", str(data), "--out-checkpoint", str(ck), "--iterations", "1"] + FAST) == 0
        outs.append((ck.read_bytes(), ck.with_suffix(".log.csv").read_bytes()))
    assert outs[0] == outs[1]
    params, meta = read_checkpoint(tmp_path / "ck0.txt")
    assert meta["iterations"] == "1" and "config_hash" in meta
    log = (tmp_path / "ck0.log.csv").read_text().splitlines()
    assert log[0].startswith("# config_hash = ")
    assert log[1] == "iteration,loss,grad_norm,wall_ms" and log[2].endswith(",")


def test_evaluate_writes_table_and_plots(tmp_path):
    out = tmp_path / "res.csv"
    args = ["evaluate", "--methods", "lof_tm,bci,skf", "--episodes", "2", "--out", str(out)] + FAST
    assert main(args) == 0
    rows = read_results(out)
    assert {r.method for r in rows} == {"lof_tm", "bci", "skf"} and len(rows) == 12
    svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
    assert svgs == ["res_detection.svg", "res_fg.svg", "res_mnll.svg", "res_mse_db.svg"]
    first = {p: p.read_bytes() for p in tmp_path.iterdir()}
    assert main(args) == 0
    assert first == {p: p.read_bytes() for p in tmp_path.iterdir()}
    chash = out.read_text().splitlines()[1].rsplit(",", 1)[1]
    assert f"config_hash={chash}" in (tmp_path / "res_mse_db.svg").read_text()


def test_evaluate_rejects_unknown_method(tmp_path):
    assert main(["evaluate", "--methods", "lof_tm,magic", "--out", str(tmp_path / "r.csv")]) == 2
    assert main(["evaluate", "--methods", "lof", "--episodes", "1", "--out", str(tmp_path / "r.csv")]) == 2


def test_evaluate_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["evaluate", "--methods", "bci,skf", "--episodes", "1", "--out", str(out), "--sweep", "beta=0,5,10"]
    assert main(args + FAST) == 0
    for v in ("0", "5", "10"):
        assert (tmp_path / f"sweep_beta={v}.csv").exists()
    assert len(read_results(out)) == 3 * 2 * 4
    svg = (tmp_path / "sweep_mse_db_vs_beta.svg").read_text()
    assert svg.count("<polyline") == 2
    assert main(["evaluate", "--methods", "bci", "--out", str(out), "--sweep", "nosuch=1"]) == 2


def test_simulate_trace(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--method", "skf", "--out", str(a), "--index", "2"] + FAST) == 0
    assert main(["simulate", "--method", "skf", "--out", str(b), "--index", "2"] + FAST) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "# lof-trace v1"
    header = next(line for line in lines if not line.startswith("#"))
    assert "f0_p1" in header and "f1_c33" in header
    assert len([line for line in lines if not line.startswith("#")]) == 1 + 22
    assert main(["simulate", "--method", "wizard", "--out", str(a)]) == 2
