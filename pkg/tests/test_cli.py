import json
import os

import pytest

from arru.cli import main
from arru.config import ConfigError, parse_config
from arru.schedule import ScheduleKind
from arru.targets import EtaKind, Family
from arru.urn import Mode

ROW1 = """
[run]
design = a
[arms]
p1 = 0.9
p2 = 0.7
"""

MRRU = """
[run]
mode = MRRU
horizon = {h}
[arms]
p1 = 0.7
p2 = 0.5
[thresholds]
rho1 = 0.6
rho2 = 0.6
"""


def test_defaults_for_table_row():
    cfg = parse_config(ROW1, env={})
    assert cfg.mode is Mode.ARRU and cfg.design == "a"
    assert cfg.policy.eta_kind is EtaKind.WEI and cfg.model1.family is Family.BERNOULLI
    assert (cfg.q, cfg.policy.bias_p, cfg.y1_0, cfg.y2_0, cfg.horizon) == (1.25, 0.75, 2, 2, 200)
    assert cfg.policy.clamp_eps == 0.01 and cfg.schedule is ScheduleKind.EXPONENTIAL
    assert (cfg.model1.mean, cfg.model2.mean) == (0.9, 0.7)


@pytest.mark.parametrize("text,needle", [
    ("", "missing design"),
    (ROW1 + "[schedule]\nq = 0.9\n", "q > 1"),
    (ROW1 + "[policy]\nbias_p = 1.5\n", "bias_p"),
    (ROW1 + "[urn]\ny1_0 = 0\n", "y0 > 0"),
    (ROW1.replace("design = a", "design = a\ncolour = red"), "run.colour"),
    (ROW1 + "[extras]\nx = 1\n", "[extras]"),
    (ROW1.replace("p2 = 0.7", ""), "arms.p2"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text, env={})
    assert needle in str(err.value)


def test_seed_env_override():
    text = ROW1.replace("design = a", "design = a\nseed = 3")
    assert parse_config(text, env={}).seed == 3
    assert parse_config(text, env={"SEED": "9"}).seed == 9


def run(tmp_path, name, text, *argv):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(text)
    out = tmp_path / name
    code = main([argv[0], "--config", str(cfg), "--out", str(out), *argv[1:]])
    return code, out


def hashes(out):
    return json.loads((out / "manifest.json").read_text())["files"]


def test_simulate_hash_stable_and_constant_thresholds(tmp_path):
    c1, o1 = run(tmp_path, "a", MRRU.format(h=10), "simulate")
    c2, o2 = run(tmp_path, "b", MRRU.format(h=10), "simulate")
    assert c1 == c2 == 0
    assert hashes(o1) == hashes(o2)
    lines = (o1 / "trajectory.csv").read_bytes().decode("utf-8").split("\n")
    assert lines[-1] == "" and len(lines) == 12
    assert not any(os.path.basename(p).startswith(".tmp") for p in os.listdir(o1))
    head = lines[0].split(",")
    for line in lines[1:-1]:
        row = dict(zip(head, line.split(",")))
        assert row["rho1_tilde"] == row["rho2_tilde"] == "0.6"


def test_montecarlo_parallelism_identical(tmp_path):
    c1, o1 = run(tmp_path, "p1", ROW1, "montecarlo", "--reps", "3", "--parallelism", "1")
    c2, o2 = run(tmp_path, "p3", ROW1, "montecarlo", "--reps", "3", "--parallelism", "3")
    assert c1 == c2 == 0
    assert hashes(o1) == hashes(o2)
    doc = json.loads((o1 / "summary.json").read_text())
    assert set(doc) == {"config_echo", "fingerprint", "reps", "metrics", "wall_time_seconds",
                        "seed"}
    assert (o1 / "replications.csv").read_text().count("\n") == 4


def test_montecarlo_rejects_zero_reps(tmp_path):
    code, _ = run(tmp_path, "z", ROW1, "montecarlo", "--reps", "0")
    assert code == 2


def test_bad_config_exit_code(tmp_path):
    code, _ = run(tmp_path, "bad", "[run]\nmode = ARRU\n", "simulate")
    assert code == 2


@pytest.mark.parametrize("design,rows", [("a", 10), ("c", 9)])
def test_table_row_count(tmp_path, design, rows):
    out = tmp_path / design
    assert main(["table", "--design", design, "--reps", "20", "--out", str(out)]) == 0
    csv = (out / f"table_{design}.csv").read_text().splitlines()
    assert len(csv) == rows + 1


def test_diagnose_increments_passes(tmp_path):
    code, out = run(tmp_path, "inc", ROW1, "diagnose", "--check", "increments", "--reps", "20")
    assert code == 0
    assert json.loads((out / "verdict.json").read_text())["pass"] is True


def test_diagnose_clt_reports_statistics(tmp_path):
    code, out = run(tmp_path, "clt", MRRU.format(h=500), "diagnose", "--check", "clt",
                    "--reps", "200")
    v = json.loads((out / "verdict.json").read_text())
    assert {"ks_D", "p_value", "sample_variance"} <= set(v["observed"])
    assert code == (0 if v["pass"] else 1)


def test_diagnose_unknown_check(tmp_path):
    code, _ = run(tmp_path, "u", ROW1, "diagnose", "--check", "nope")
    assert code == 2


def test_diagnose_rru_lln(tmp_path):
    text = "[run]\nmode = RRU\nhorizon = 20000\n[arms]\np1 = 0.9\np2 = 0.1\n"
    code, out = run(tmp_path, "rru", text, "diagnose", "--check", "lln", "--reps", "20")
    v = json.loads((out / "verdict.json").read_text())
    assert code == 0 and v["observed"]["mean_final_z"] > 0.9
