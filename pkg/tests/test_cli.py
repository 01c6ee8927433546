import csv

import pytest
import yaml

from cantorsum.cli import main, trim_below_one
from cantorsum.config import ConfigError, ExperimentConfig, load_config
from cantorsum.decomposition import ProductSystem
from cantorsum.ifs import central_cantor


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def write_yaml(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_validate_c3(capsys, tmp_path):
    code, out = run(capsys, "validate", "--first", "cantor:3", "--second", "cantor:3")
    assert code == 0
    assert "d1 = 0.63093" in out.out


def test_validate_gauss_normalized(capsys):
    code, out = run(capsys, "validate", "--first", "gauss:1,3")
    assert code == 0 and "hull [0, 1]" in out.out


def test_overlapping_config_rejected(capsys, tmp_path):
    cfg = write_yaml(tmp_path, {"first": {"maps": [{"kind": "affine", "a": 0.6, "b": 0},
                                                   {"kind": "affine", "a": 0.5, "b": 0.5}]}})
    code, out = run(capsys, "validate", "--config", cfg)
    assert code == 2
    assert "maps 1 and 2" in out.err


def test_unknown_key_is_config_error(capsys, tmp_path):
    cfg = write_yaml(tmp_path, {"rhoo": 0.1})
    code, out = run(capsys, "validate", "--config", cfg)
    assert code == 2 and "rhoo" in out.err


def test_flags_override_config(tmp_path):
    cfg = write_yaml(tmp_path, {"rho": 0.1, "eta": 0.05, "rhos": {"dyadic": [5, 9]}})
    c = load_config(cfg, rho=0.2)
    assert c.rho == 0.2 and c.eta == 0.05
    assert c.rhos == [2.0 ** -k for k in range(5, 10)]
    assert load_config(cfg, eta="1e-2").eta == 0.01


def test_infeasible_ranges():
    with pytest.raises(ConfigError):
        ExperimentConfig(rhos=[0.5, 2.0]).validate()
    with pytest.raises(ConfigError):
        load_config(None, lam_lo=1.0, lam_hi=0.0)


def test_spectrum_row_count(capsys, tmp_path):
    code, _ = run(capsys, "spectrum", "--rho", str(2 ** -8), "--lam-n", "4001", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "spectrum.csv")))
    assert rows[0] == ["lambda", "N"] and len(rows) == 4002


def test_tree_exit_code(capsys, tmp_path):
    code, out = run(capsys, "tree", "--rho", "0.05", "--eta", "0.1", "--depth", "3",
                    "--out", str(tmp_path))
    assert code == 0 and "(A) True" in out.out
    assert (tmp_path / "tree.csv").exists()


def test_tree_failure_exit_code(capsys, tmp_path):
    code, _ = run(capsys, "tree", "--second", "cantor:4", "--lam", "0", "--c-branch", "100",
                  "--out", str(tmp_path))
    assert code == 1


def test_limit_affine_single_line(capsys, tmp_path):
    code, out = run(capsys, "limit", "--second", "cantor:4", "--out", str(tmp_path))
    assert code == 0
    assert out.out.splitlines()[0] == "K1: identity, converged at k=1"


def test_limit_bad_tail(capsys, tmp_path):
    code, _ = run(capsys, "limit", "--first", "gauss:1,3", "--tail", "(3)", "--out", str(tmp_path))
    assert code == 2


def test_hypotheses_exit_codes(capsys, tmp_path):
    assert run(capsys, "hypotheses", "--out", str(tmp_path))[0] == 1  # affine: (1) fails
    code, out = run(capsys, "hypotheses", "--first", "gauss:1,3", "--second", "cantor:4",
                    "--out", str(tmp_path))
    assert code == 0 and "witness" in out.out


def test_theorem_check_verdicts(capsys, tmp_path):
    code, out = run(capsys, "theorem-check", "--out", str(tmp_path / "a"))
    assert code == 0 and "-> pass" in out.out
    code, out = run(capsys, "theorem-check", "--second", "cantor:4", "--out", str(tmp_path / "b"))
    assert code == 1 and "-> hypothesis-failure" in out.out
    code, out = run(capsys, "theorem-check", "--first", "gauss:1,3", "--second", "cantor:4",
                    "--out", str(tmp_path / "c"))
    assert code == 0 and "-> pass" in out.out
    assert "(1) essential nonlinearity: holds" in out.out


def test_trim_below_one():
    sys_, how = trim_below_one(ProductSystem(central_cantor(3), central_cantor(3)))
    assert sys_.d < 1 and how
    assert sys_.d > 0.9


@pytest.mark.parametrize("cmd", ["dimension", "decompose", "faithful", "recurrence"])
def test_other_commands_run(capsys, tmp_path, cmd):
    code, out = run(capsys, cmd, "--out", str(tmp_path), "--rhos", "7:12")
    assert code in (0, 1) and out.out


def test_theorem_check_deterministic(capsys, tmp_path):
    for name in ("x", "y"):
        run(capsys, "theorem-check", "--first", "gauss:1,3", "--second", "cantor:4",
            "--seed", "7", "--out", str(tmp_path / name))
    files = sorted(p.name for p in (tmp_path / "x").iterdir())
    assert "theorem.csv" in files
    for f in files:
        assert (tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes()
    assert b"\r\n" not in (tmp_path / "x" / "theorem.csv").read_bytes()
