import json
from pathlib import Path

import pytest

from bowendim.cli import main, parse_floats

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--set", "steps=260", "--set", "burn_in=40"]
AUDIT = ["--set", "audit_samples=2000", "--set", "audit_steps=260", "--set", "decay_steps=120"]

# cmd_dimension reference run at defaults (a=0.18, r=0.01, seed=7)
H_REF = 1.239823426436577


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out), "--threads", "1"])
    return code, (out.read_bytes() if out.exists() else b"")


def body(blob: bytes) -> list[str]:
    return [l for l in blob.decode().splitlines() if not l.startswith("#")]


def test_missing_a_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["pressure"])
    assert err.value.code == 2


def test_invalid_law_exit_2(tmp_path, capsys):
    code, _ = run(["pressure", "--a", "0.4"], tmp_path)
    assert code == 2
    assert "outside" in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    assert run(["pressure", "--a", "0.18", "--config", str(cfg)], tmp_path)[0] == 2


def test_parse_floats():
    assert parse_floats("1.1,1.2") == [1.1, 1.2]
    assert parse_floats("0.14:0.2:4") == [0.14, 0.16, 0.18, 0.2]


def test_pressure_golden_csv(tmp_path):
    argv = ["pressure", "--a", "0.18", "--r", "0.01", "--t-grid", "1.3,1.5", "--steps", "300",
            "--burn-in", "50", "--seed", "7"]
    code, blob = run(argv, tmp_path)
    assert code == 0
    assert blob == (GOLDEN / "pressure_ref.csv").read_bytes()


def test_pressure_header_and_autonomous_point(tmp_path):
    from bowendim.config import DEFAULT
    from bowendim.expfamily import Potential
    from bowendim.operator import BasePointFunctional, grid_from_config
    from bowendim.pressure import estimate_expected_pressure
    from bowendim.randomdriver import ParameterLaw, sample_fiber

    code, blob = run(["pressure", "--a", "0.18", "--r", "0", "--t-grid", "1.5"] + FAST, tmp_path)
    assert code == 0
    head = blob.decode().splitlines()[0]
    assert head.startswith("# bowendim 0.1.0 format=csv/1 command=pressure config=")
    assert head.endswith("seed=7")
    row = body(blob)[1].split(",")
    cfg = DEFAULT.replace(steps=260, burn_in=40)
    est = estimate_expected_pressure(sample_fiber(ParameterLaw(0.18), 7, 260),
                                     Potential(1.5, 0.95), BasePointFunctional(2.0), cfg,
                                     grid_from_config(cfg))
    assert float(row[4]) == est.value


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("steps = 300\nburn_in = 60\n")
    _, blob = run(["pressure", "--a", "0.18", "--config", str(cfg), "--burn-in", "45"], tmp_path)
    conf = json.loads(blob.decode().splitlines()[1][len("# config "):])
    assert conf["steps"] == 300 and conf["burn_in"] == 45


def test_sweep_one_cell_equals_dimension(tmp_path):
    c1, dim = run(["dimension", "--a", "0.18", "--r", "0.01"] + FAST, tmp_path, "d")
    c2, sw = run(["sweep", "--a-grid", "0.18", "--r-grid", "0.01"] + FAST, tmp_path, "s")
    assert c1 == c2 == 0
    assert body(dim) == body(sw)
    assert body(dim)[0] == "a,r,h,residual,t_lo,t_hi,evaluations,seed"


def test_verify_exit_contract(tmp_path):
    code, blob = run(["verify", "--a", "0.18"] + AUDIT, tmp_path)
    doc = json.loads(blob)
    assert code == 0 and doc["passed"]
    assert doc["provenance"]["header"].startswith("bowendim 0.1.0 format=json/1 command=verify")
    code, blob = run(["verify", "--a", "0.18", "--set", "kappa_max=0.1"] + AUDIT, tmp_path)
    assert code == 1 and not json.loads(blob)["passed"]


def test_julia_writes_pgm(tmp_path):
    code, blob = run(["julia", "--a", "0.18", "--r", "0.01", "--depth", "6", "--points", "3000",
                      "--resolution", "64,48"], tmp_path)
    assert code == 0
    assert blob.startswith(b"P5\n# bowendim 0.1.0 format=pgm/1 command=julia")
    assert blob.endswith(b"64 48\n255\n" + blob[-64 * 48:])


def test_oracle_deep_json(tmp_path):
    code, blob = run(["oracle", "--a", "0.18", "--depth", "3"], tmp_path)
    doc = json.loads(blob)
    assert code == 0 and len(doc["log_mass"]) == 3
    assert doc["log_mass"][0] == pytest.approx(-0.1358294397, abs=1e-6)


def test_oracle_tree_failure_exit_1(tmp_path):
    code, _ = run(["oracle", "--a", "0.18", "--mode", "tree", "--depth", "3", "--rel-tol",
                   "1e-4", "--budget", "2000"], tmp_path)
    assert code == 1


def test_dimension_reference_run(tmp_path):
    code, blob = run(["dimension", "--a", "0.18", "--r", "0.01", "--seed", "7"], tmp_path)
    assert code == 0
    assert float(body(blob)[1].split(",")[2]) == pytest.approx(H_REF, abs=1e-4)
