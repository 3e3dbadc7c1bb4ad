import csv
import subprocess
import sys
from fractions import Fraction

import pytest

from pairbcd import verify
from pairbcd.cli import main

TINY = """
[problem]
kind = quadratic
N = 3
n = 1
a = 1,2,4
b = 1,0,-1
x0 = 2,0,-2

[solver]
max_iters = 50
record_stride = 10
seed = 4

[experiment]
replicas = 30
iters = 40
seed = 8
checkpoints = 0,1,5,40
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_dist_table(cfg, tmp_path):
    out = tmp_path / "dist.csv"
    assert main(["dist", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [(r["i"], r["j"]) for r in rows] == [("1", "2"), ("1", "3"), ("2", "3")]
    expected = [Fraction(3, 7), Fraction(5, 14), Fraction(3, 14)]
    for row, p in zip(rows, expected):
        assert abs(float(row["p_ij"]) - float(p)) <= 1e-15
    assert rows[0]["p_ij"] == f"{3 / 7:.17g}"


def test_solve_writes_trajectory(cfg, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["k", "i", "j", "f", "gap", "r_sq", "residual"]
    assert [int(r["k"]) for r in rows] == [0, 10, 20, 30, 40, 50]
    f = [float(r["f"]) for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(f, f[1:]))
    assert all(r["gap"] != "" and r["r_sq"] != "" for r in rows)


def test_solve_seed_flag(cfg, tmp_path):
    paths = [tmp_path / f"{n}.csv" for n in range(3)]
    for path, seed in zip(paths, ("1", "1", "2")):
        main(["solve", "--config", cfg, "--out", str(path), "--seed", seed])
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_bytes() != paths[2].read_bytes()


def test_bounds_output(cfg, tmp_path, capsys):
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--config", cfg, "--out", str(out), "--k-max", "5",
                 "--eps", "0.1", "--rho", "0.1"]) == 0
    rows = read_csv(out)
    assert len(rows) == 6 and list(rows[0]) == ["k", "ours_sublinear", "ours_linear",
                                                "nng_sublinear", "nng_linear"]
    assert rows[0]["nng_sublinear"] == ""
    report = dict(line.split("=", 1) for line in capsys.readouterr().out.split())
    for key in ("K", "K_bar", "K_tilde", "K_hat", "K_ceil"):
        assert key in report


def test_mc_pass_exit_code(cfg, tmp_path, capsys):
    out = tmp_path / "mc.csv"
    raw = tmp_path / "raw.csv"
    code = main(["mc", "--config", cfg, "--out", str(out), "--replica-out", str(raw)])
    text = capsys.readouterr().out
    assert code == 0 and "certify=pass" in text
    rows = read_csv(out)
    assert [int(r["k"]) for r in rows] == [0, 1, 5, 40]
    assert len(read_csv(raw)) == 30 * 4


def test_mc_flags(cfg, tmp_path, capsys):
    out = tmp_path / "mc.csv"
    code = main(["mc", "--config", cfg, "--out", str(out), "--replicas", "5", "--iters", "12",
                 "--checkpoints", "0,6,12", "--eps", "0.5", "--rho", "0.2"])
    text = capsys.readouterr().out
    assert code in (0, 2)
    assert "replicas=5" in text and "iters=12" in text and "success_fraction=" in text
    assert [int(r["k"]) for r in read_csv(out)] == [0, 6, 12]


def test_mc_certify_failure_exit_code(tmp_path, capsys):
    # a wrong f* override makes every gap large, so the bound check must fail
    path = tmp_path / "bad.ini"
    path.write_text(TINY + "\n[bounds]\nf_star = -100\ntilde_R_sq = 1\n")
    assert main(["mc", "--config", str(path), "--out", str(tmp_path / "o.csv")]) == 2
    assert "certify=fail" in capsys.readouterr().out


def test_usage_and_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(TINY.replace("seed = 4", "seed = 4\nbogus = 1"))
    assert main(["solve", "--config", str(bad)]) == 1
    assert main(["dist"]) == 1
    assert main(["mc", "--config", str(tmp_path / "missing.ini")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["mc", "--replicas", "many"])
    assert exc.value.code == 1


def test_verify_subcommand(capsys):
    assert main(["verify", "--seed", "3", "--instances", "3"]) == 0
    assert "all checks passed" in capsys.readouterr().out
    assert main(["verify", "--only", "kkt", "--instance", "17"]) == 0
    assert main(["verify", "--instance", "17"]) == 1


def test_verify_violation_exit_code(monkeypatch, capsys):
    monkeypatch.setitem(verify.CHECKS, "bounds", lambda rng: ["planted"])
    assert main(["verify", "--only", "bounds", "--instances", "2"]) == 2
    assert capsys.readouterr().out.startswith("VIOLATION bounds: planted")


def test_module_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "pairbcd", "dist", "--config", cfg],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "i,j,p_ij"
