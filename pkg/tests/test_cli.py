import json

import pytest

from gsde_lse.cli import EXIT_CONFIG, EXIT_DIVERGED, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_table1_stdout_csv(capsys):
    code, out, err = run(["table1", "--n", "300", "--J", "3", "--m", "2", "--seed", "1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,T,m,J,seed,lower,upper,gap"
    n, T, m, J, seed, lo, hi, gap = lines[1].split(",")
    assert (n, m, J, seed) == ("300", "2", "3", "1")
    assert float(lo) <= float(hi)
    assert "upper" in err  # human table goes to stderr


def test_table2_and_estimates(tmp_path, capsys):
    prefix = tmp_path / "est"
    code, out, _ = run(["table2", "--J", "2", "4", "--m", "2", "--T", "3", "--estimates", str(prefix)], capsys)
    assert code == 0
    assert [l.split(",")[3] for l in out.strip().splitlines()[1:]] == ["2", "4"]
    text = (tmp_path / "est_n300_J4.csv").read_text().splitlines()
    assert text[0] == "k,j,theta_hat" and len(text) == 1 + 2 * 4


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 11\nm = 2\nJ = 2\nn_values = [200]\n\n[model]\nmodel = "expr"\n'
                   'drift = "-theta * x"\n')
    out_path = tmp_path / "env.csv"
    code, _, _ = run(["custom", "--config", str(cfg), "--seed", "12", "--out", str(out_path)], capsys)
    assert code == 0
    row = out_path.read_text().splitlines()[1].split(",")
    assert row[4] == "12"


def test_simulate_dump(capsys):
    code, out, _ = run(["simulate", "--n", "5", "--m", "2", "--J", "2"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "k,j,i,t_i,x_i,dB_i,sigma2_i"
    assert len(lines) == 1 + 2 * 2 * 6


@pytest.mark.parametrize("argv", [["table1", "--m", "1"], ["table1", "--bogus"], ["table1", "--J", "2", "3"],
                                  ["custom", "--config", "/nonexistent.toml"], []])
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_CONFIG
    assert "config error" in err


def test_divergence_exit_3(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('model = "expr"\ndrift = "theta * x * x"\ndt = 0.5\nm = 2\nJ = 2\nn_values = [200]\n')
    code, _, err = run(["custom", "--config", str(cfg)], capsys)
    assert code == EXIT_DIVERGED
    assert "diverged" in err


def test_verify_small(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, text, _ = run(["verify", "--trials", "2000", "--dt", "0.05", "--out", str(out)], capsys)
    reports = json.loads(out.read_text())
    assert len(reports) == 6
    assert all(l.startswith("[") for l in text.strip().splitlines())
    assert code in (0, 1)
