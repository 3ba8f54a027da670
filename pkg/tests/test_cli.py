import numpy as np
import pytest

from localdecay.cli import build_parser, main, profile_arg
from localdecay.evolve import read_series, read_snapshots, write_series


def run(*args):
    return main([str(a) for a in args])


def test_parser_lists_every_subcommand():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == {"normalize", "evolve", "resolve", "resolve-sweep", "zero",
                                "lowfreq", "synthesize", "compare", "fit", "campaign"}


def test_profile_arg():
    assert profile_arg("bump:20:2") == ("bump", 20.0, 2.0, 1.0)
    assert profile_arg("gaussian:5:1:3") == ("gaussian", 5.0, 1.0, 3.0)
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        profile_arg("square:1:2")


def test_normalize(capsys, tmp_path):
    assert run("normalize", "--r-grid", "3:100:3") == 0
    out = capsys.readouterr().out
    assert out.startswith("#") and len(out.strip().splitlines()) == 4
    assert run("normalize", "--out", tmp_path / "n.txt") == 0
    assert run("normalize", "--out", tmp_path / "n.txt") == 2


def test_evolve_outputs_and_overwrite(tmp_path):
    args = ["evolve", "--background", "minkowski", "--tfinal", 30, "--observers", "5,10",
            "--h", 0.1, "--snapshot-every", 10, "--out", tmp_path]
    assert run(*args) == 0
    t, cols = read_series(tmp_path / "phi_x10.txt")
    assert t[-1] == pytest.approx(30.0) and cols.shape == (1, len(t))
    assert (tmp_path / "dtphi_x5.txt").exists()
    snap = read_snapshots(tmp_path / "snapshots.bin")
    assert len(snap.times) == 4
    assert run(*args) == 2
    assert run(*args, "--overwrite") == 0


def test_bad_background_combination(capsys, tmp_path):
    assert run("normalize", "--background", "custom") == 2
    assert "coefficient" in capsys.readouterr().err


def test_custom_background_from_files(tmp_path):
    r = np.geomspace(0.01, 1e5, 400)
    np.savetxt(tmp_path / "V.txt", np.column_stack([r, 2.0 / (r * r + 1.0) ** 1.5]))
    assert run("zero", "--background", "custom", "--coeff", f"V_lr={tmp_path / 'V.txt'}",
               "--source", "bump:5:2", "--out", tmp_path / "z") == 0
    assert (tmp_path / "z" / "zero_expansion.txt").exists()


def test_compare_exit_codes(tmp_path, capsys):
    t = np.linspace(0, 10, 201)
    write_series(tmp_path / "a.txt", t, [np.sin(t)])
    write_series(tmp_path / "b.txt", t, [1.001 * np.sin(t)])
    write_series(tmp_path / "c.txt", t, [1.1 * np.sin(t)])
    assert run("compare", tmp_path / "a.txt", tmp_path / "b.txt") == 0
    assert run("compare", tmp_path / "a.txt", tmp_path / "c.txt") == 1
    assert run("compare", tmp_path / "a.txt", tmp_path / "c.txt", "--tol", 0.2) == 0
    assert "l2_rel" in capsys.readouterr().out


def test_fit_exit_codes(tmp_path, capsys):
    t = np.linspace(1, 3000, 6000)
    write_series(tmp_path / "s.txt", t, [5.0 * t ** -3.0])
    assert run("fit", tmp_path / "s.txt", "--window", "200:2000") == 0
    assert "p = 3.0000" in capsys.readouterr().out
    assert run("fit", tmp_path / "s.txt", "--window", "200:2000", "--expect", 3) == 0
    assert run("fit", tmp_path / "s.txt", "--window", "200:2000", "--expect", 4) == 1
    assert run("fit", tmp_path / "s.txt", "--window", "200:1000") == 2


def test_resolve_and_sweep(tmp_path):
    assert run("resolve", "--background", "minkowski", "--ell", 1, "--tau-re", 0.5,
               "--source", "bump:10:3", "--out", tmp_path) == 0
    assert (tmp_path / "profile_tau0.5+0i.txt").exists()
    assert (tmp_path / "radiation_tau0.5+0i.txt").exists()
    assert run("resolve-sweep", "--background", "minkowski", "--tau-log", "0.01:2:4",
               "--h", 0.05, "--x-max", 60, "--out", tmp_path) == 0
    rows = np.loadtxt(tmp_path / "bounds.txt", ndmin=2)
    assert rows.shape == (4, 4) and np.all(rows[:, 3] == 0)


def test_lowfreq(tmp_path, capsys):
    assert run("lowfreq", "--background", "minkowski", "--out", tmp_path) == 0
    assert "no tail" in capsys.readouterr().out


def test_campaign_commands(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[campaign]\nstages = ["normalize"]\n')
    assert run("campaign", cfg, "--out", tmp_path / "r") == 0
    assert (tmp_path / "r" / "manifest.json").exists()
    assert run("campaign", cfg, "--out", tmp_path / "r") == 2
    assert run("campaign", "--rerun", tmp_path / "r" / "manifest.json",
               "--out", tmp_path / "r2") == 0
    assert "reproduced" in capsys.readouterr().out
    assert run("campaign") == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[evolve]\nh = 'x'\n")
    assert run("campaign", bad, "--out", tmp_path / "r3") == 2


def test_campaign_stage_failure_exits_one(tmp_path):
    cfg = tmp_path / "f.toml"
    cfg.write_text('[campaign]\nstages = ["evolve", "fit"]\n[background]\nkind = "minkowski"\n'
                   '[evolve]\nx_max = 100.0\nt_final = 60.0\n[fit]\nwindow = [10.0, 50.0]\n')
    assert run("campaign", cfg, "--out", tmp_path / "r") == 1
    assert (tmp_path / "r" / "manifest.json").exists()


def test_synthesize_matches_evolve(tmp_path):
    common = ["--background", "minkowski", "--observers", "10", "--out"]
    assert run("evolve", "--tfinal", 30, "--h", 0.05, *common, tmp_path / "e") == 0
    assert run("synthesize", "--tmax", 30, "--x-max", 60, *common, tmp_path / "s") == 0
    assert run("compare", tmp_path / "e" / "phi_x10.txt", tmp_path / "s" / "phi_x10.txt",
               "--tol", 1e-3) == 0


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "localdecay", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.startswith("localdecay ")
