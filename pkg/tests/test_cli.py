import numpy as np
import pytest

from ofdma_rra.cli import SOLVE_ALGS, main
from ofdma_rra.core import Instance, read_instance, write_instance

CONFIG = """\
N = 8
K1 = 1
K2 = 2
R_min = 3
frames_per_drop = 2
min_drops = 2
max_drops = 2
ip_time_limit = 5
seed = 4
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "scenario.cfg"
    p.write_text(CONFIG)
    return p


@pytest.fixture
def instance_file(tmp_path, config):
    out = tmp_path / "inst.csv"
    assert main(["gen", "--config", str(config), "--out", str(out)]) == 0
    return out


def test_gen_writes_readable_instance(instance_file):
    inst = read_instance(instance_file)
    assert inst.rates.shape == (8, 3)
    assert list(inst.cbr_users) == [0]


def test_gen_is_deterministic(tmp_path, config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["gen", "--config", str(config), "--out", str(a), "--drop", "1", "--frame", "1"])
    main(["gen", "--config", str(config), "--out", str(b), "--drop", "1", "--frame", "1"])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("alg", SOLVE_ALGS)
def test_solve_every_algorithm(alg, instance_file, capsys):
    code = main(["solve", "--instance", str(instance_file), "--alg", alg, "--seed", "1", "--time-limit", "10"])
    out = capsys.readouterr().out.strip().splitlines()
    value, nodes, proven, seconds = out[-1].split(",")
    if code == 0:
        assert float(value) > 0 and float(seconds) >= 0
    else:
        assert code == 3 and value == "nan"


def test_solve_values_are_ordered(instance_file, capsys):
    vals = {}
    for alg in ("heur1", "ip", "lp", "oracle"):
        assert main(["solve", "--instance", str(instance_file), "--alg", alg]) == 0
        vals[alg] = float(capsys.readouterr().out.strip().splitlines()[-1].split(",")[0])
    assert vals["heur1"] <= vals["ip"] * (1 + 1e-9)
    assert vals["ip"] == pytest.approx(vals["oracle"], rel=1e-9)
    assert vals["ip"] <= vals["lp"] * (1 + 1e-9)


def test_solve_writes_allocation_file(instance_file, tmp_path, capsys):
    out = tmp_path / "alloc.csv"
    assert main(["solve", "--instance", str(instance_file), "--alg", "heur1", "--out", str(out)]) == 0
    assert out.read_text().strip()
    assert len(capsys.readouterr().out.strip().splitlines()) == 1


def test_solve_infeasible_exit_code(tmp_path, capsys):
    inst = Instance.from_rates(np.array([[1.0, 2.0], [1.0, 2.0]]), [5.0])
    p = tmp_path / "inf.csv"
    write_instance(inst, p)
    assert main(["solve", "--instance", str(p), "--alg", "heur1"]) == 3
    assert capsys.readouterr().out.strip().startswith("nan")


def test_simulate(tmp_path, config, capsys):
    out_dir = tmp_path / "out"
    assert main(["simulate", "--config", str(config), "--out-dir", str(out_dir)]) == 0
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["scenario_stats.csv", "sumrate_vs_load.csv", "sumrate_vs_power.csv", "swap_effect.csv"]
    assert "drops=2" in capsys.readouterr().out


def test_unknown_config_key_is_an_error(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("N = 8\nbogus = 1\n")
    assert main(["gen", "--config", str(p), "--out", str(tmp_path / "x.csv")]) == 2
    assert "bogus" in capsys.readouterr().err


def test_gen_rejects_grid(tmp_path):
    p = tmp_path / "grid.cfg"
    p.write_text("K1 = 2, 3\n")
    assert main(["gen", "--config", str(p), "--out", str(tmp_path / "x.csv")]) == 2


def test_missing_instance_file(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "nope.csv"), "--alg", "heur1"]) == 2
