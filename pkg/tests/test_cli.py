import hashlib
import subprocess
import sys

import pytest

from ftlwave.cli import COMMANDS, main
from ftlwave.io import read_csv

PAIRS = "0.4:0.6 0.3:0.7 0.2:0.8 0.1:0.9 0.01:0.99"


def run(tmp_path, command, *sets, out="out"):
    argv = [command, "--out", str(tmp_path / out)]
    for s in sets:
        argv += ["--set", s]
    return main(argv)


def manifest_files(out):
    lines = (out / "manifest.txt").read_text().splitlines()
    k = lines.index("[files]")
    return dict(reversed(line.split("  ")) for line in lines[k + 1 :] if line)


def check_manifest(out):
    listed = manifest_files(out)
    on_disk = {p.name for p in out.iterdir()} - {"manifest.txt"}
    assert set(listed) == on_disk
    for name, digest in listed.items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    return listed


def test_missing_right_state_is_a_config_error(tmp_path, capsys):
    assert run(tmp_path, "rates") == 2
    assert capsys.readouterr().err == "config: rho_plus required\n"


def test_unknown_subcommand(tmp_path, capsys):
    assert run(tmp_path, "launch") == 2
    err = capsys.readouterr().err
    assert err == "usage: unknown subcommand launch\n"


@pytest.mark.parametrize(
    "setting",
    ["model.ell=-1", "model.colour=red", "problem.rho_plus=abc", "run.window=3 1", "broken", "model.law=cubic"],
)
def test_bad_settings_exit_two_with_one_line(tmp_path, capsys, setting):
    assert run(tmp_path, "compare-macro", "problem.rho_plus=0.7", setting) == 2
    err = capsys.readouterr().err
    assert err.startswith("config: ") and err.count("\n") == 1


def test_numerical_failure_exits_one(tmp_path, capsys):
    assert run(tmp_path, "profile-solve", "problem.rho_plus=0.7", "solver.h=0.1") == 1
    err = capsys.readouterr().err
    assert err.startswith("numerical: DomainError: ") and err.count("\n") == 1


def test_argparse_errors_are_one_line(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    assert capsys.readouterr().err.count("\n") == 1


def test_rates(tmp_path, capsys):
    assert run(tmp_path, "rates", "problem.rho_plus=0.7") == 0
    out = tmp_path / "out"
    header, rows = read_csv(out / "rates.csv")
    assert "lambda_plus" in header
    row = dict(zip(header, rows[0]))
    assert row["lambda_plus"] == pytest.approx(2.8357033445244837, rel=1e-12)
    assert row["rho_minus"] == pytest.approx(0.3)
    check_manifest(out)
    assert "lambda_plus = 2.835703344524483" in capsys.readouterr().out


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[model]\nell = 0.5\n\n[problem]\nrho_plus = 0.8\n")
    assert main(["rates", "--config", str(cfg), "--set", "problem.rho_plus=0.7", "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "manifest.txt").read_text()
    assert "model.ell = 0.5" in text and "problem.rho_plus = 0.7" in text
    assert "problem.rho_plus = 0.8" not in text


def test_unreadable_config(tmp_path, capsys):
    assert main(["rates", "--config", str(tmp_path / "missing.ini")]) == 2
    assert capsys.readouterr().err.startswith("config: cannot read")


def test_manifest_sections(tmp_path):
    run(tmp_path, "rates", "problem.rho_plus=0.7")
    text = (tmp_path / "out" / "manifest.txt").read_text()
    assert text.startswith("ftlwave 0.1.0\ncommand = rates\n")
    for section in ("[config]", "[defaults]", "[results]", "[files]"):
        assert section in text
    assert "solver.plateau_tol = 1e-9" in text


@pytest.mark.parametrize(
    "command,sets,files",
    [
        ("profile-solve", ["problem.rho_plus=0.7"], {"profile.csv"}),
        ("bvp", ["problem.rho_plus=0.7"], {"bvp_sequence.csv", "profile.csv", "bvp_members.csv", "bvp_overlay.svg"}),
        ("simulate", ["problem.rho_plus=0.7", "run.n_periods=1"], {"cars.csv"}),
        ("periodicity", ["problem.rho_plus=0.7", "run.n_periods=1"], {"periods.csv"}),
        ("stability", ["problem.rho_plus=0.7", "run.stability_periods=1"], {"envelopes.csv"}),
        ("compare-macro", ["problem.rho_plus=0.7", "macro.ells=0.5 0.25"], {"compare.csv", "compare_sweep.csv"}),
        (
            "moving-frame",
            ["run.sigma=0.2", "problem.rho_minus=0.2", "problem.rho_plus=0.6", "run.n_periods=1"],
            {"profile.csv", "trace.csv"},
        ),
    ],
)
def test_subcommand_artifacts(tmp_path, command, sets, files):
    assert run(tmp_path, command, *sets) == 0
    assert set(check_manifest(tmp_path / "out")) == files


def test_left_state_alone_is_enough(tmp_path):
    assert run(tmp_path, "bvp", "problem.rho_minus=0.3") == 0
    header, rows = read_csv(tmp_path / "out" / "profile.csv")
    assert rows[-1][1] == pytest.approx(0.7, abs=1e-6)


def test_simulate_uniform(tmp_path):
    assert run(tmp_path, "simulate", "problem.rho_plus=0.7", "run.initial=uniform", "run.rho=0.4", "run.n_periods=1") == 0
    header, rows = read_csv(tmp_path / "out" / "cars.csv")
    assert header == ["t", "i", "z", "rho"]
    first = [r for r in rows if r[0] == 0.0 and r[1] < 199]
    assert all(r[3] == pytest.approx(0.4) for r in first)


def test_pairs_batch(tmp_path):
    assert run(tmp_path, "bvp", "model.ell=0.1", f"problem.pairs={PAIRS}") == 0
    out = tmp_path / "out"
    assert set(check_manifest(out)) == {"bvp_family.csv", "family_profiles.csv", "family_overlay.svg"}
    header, rows = read_csv(out / "bvp_family.csv")
    col = {name: [r[k] for r in rows] for k, name in enumerate(header)}
    assert len(rows) == 5
    assert all(c == 1.0 for c in col["converged"])
    # rows run from the largest common flux to the smallest; the predicted slope rises
    assert col["f_bar"] == sorted(col["f_bar"], reverse=True)
    assert col["slope_root"] == sorted(col["slope_root"])


def test_figures_after_runs(tmp_path):
    run(tmp_path, "bvp", "problem.rho_plus=0.7")
    run(tmp_path, "stability", "problem.rho_plus=0.7", "run.stability_periods=1")
    assert run(tmp_path, "figures") == 0
    out = tmp_path / "out"
    for name in ("profile.svg", "bvp_sequence.svg", "bvp_overlay.svg", "envelopes.svg"):
        assert (out / name).read_text().startswith("<svg")
    assert "profile.svg" in manifest_files(out)


def test_figures_without_csv(tmp_path, capsys):
    assert run(tmp_path, "figures") == 2
    assert capsys.readouterr().err.startswith("config: no known CSV files")


@pytest.mark.parametrize(
    "command,sets",
    [
        ("bvp", ["problem.rho_plus=0.7"]),
        ("stability", ["problem.rho_plus=0.7", "run.stability_periods=1", "run.seed=5"]),
        ("simulate", ["problem.rho_plus=0.7", "run.n_periods=1"]),
    ],
)
def test_identical_configs_give_identical_bytes(tmp_path, command, sets):
    assert run(tmp_path, command, *sets, out="a") == 0
    assert run(tmp_path, command, *sets, out="b") == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert manifest_files(a) == manifest_files(b)
    assert (a / "manifest.txt").read_bytes() == (b / "manifest.txt").read_bytes()


def test_every_subcommand_is_listed_in_help():
    proc = subprocess.run([sys.executable, "-m", "ftlwave.cli", "--help"], capture_output=True, text=True, check=True)
    for name in COMMANDS:
        assert name in proc.stdout
    assert "anchor_spacing" in proc.stdout
