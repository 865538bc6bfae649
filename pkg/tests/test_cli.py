import json
import subprocess
import sys

import numpy as np
import pytest

from pairsolve.cli import main
from pairsolve.model import LevelSet, Sector, sector_spectrum


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_solve_json(capsys):
    rc, out, _ = run(capsys, "solve", "--preset", "paper8", "--P", "6", "--G", "0.37",
                     "--picture", "hole")
    assert rc == 0
    d = json.loads(out)
    assert len(d["v"]) == 6 and d["residual"] <= 1e-12
    assert "warnings" in d


def test_solve_matches_ed(capsys):
    _, out, _ = run(capsys, "solve", "--preset", "paper6", "--M", "2", "--G", "0.15",
                    "--picture", "particle")
    E = json.loads(out)["energy"]
    ed = sector_spectrum(LevelSet.preset("paper6"), 0.15, Sector(6, 2))
    assert np.min(np.abs(ed - E)) <= 1e-8


@pytest.mark.parametrize("argv", [
    ["solve", "--preset", "paper8", "--P", "6", "--G", "0.3", "--seed", "1,1,2,3"],
    ["solve", "--preset", "paper8", "--G", "0.3"],
    ["meanfield", "--preset", "paper8", "--G", "0.3"],
    ["phase"],
])
def test_usage_errors(capsys, argv):
    rc, _, err = run(capsys, *argv)
    assert rc == 2
    assert json.loads(err)["error"] == "usage"


def test_domain_error_is_json(capsys):
    rc, _, err = run(capsys, "ed", "--epsilon", "0.1,1.5", "--M", "1", "--G", "0.3")
    assert rc == 1
    assert "error" in json.loads(err)


def test_ed_csv(capsys):
    rc, out, _ = run(capsys, "ed", "--preset", "paper6", "--M", "3", "--G", "0.2")
    lines = out.strip().splitlines()
    assert rc == 0 and len(lines) == 1 + 20


@pytest.mark.parametrize("which,rows", [(1, 56), (2, 28)])
def test_table_row_counts(capsys, which, rows):
    rc, out, _ = run(capsys, "table", "--which", str(which), "--format", "csv")
    lines = out.strip().splitlines()
    assert rc == 0 and lines[0] == "energy,roots" and len(lines) == rows + 1


def test_table_text_first_row(capsys):
    _, out, _ = run(capsys, "table", "--which", "1")
    first = out.splitlines()[1]
    assert first.split()[0] == "-7.54299"


def test_verify_dimension_suite(capsys):
    rc, out, _ = run(capsys, "verify", "--suite", "appendixB")
    d = json.loads(out)
    assert rc == 0 and d["pass"] is True and d["suite"] == "appendixB"


def test_phase_point(capsys):
    _, out, _ = run(capsys, "phase", "--L", "8", "--M", "2", "--G", "1/2")
    d = json.loads(out)
    assert d["region"] == "V" and d["h0"] == pytest.approx(0.25)


def test_phase_grid(capsys):
    _, out, _ = run(capsys, "phase", "--grid", "--ng", "3", "--nx", "2")
    assert len(out.strip().splitlines()) == 7


def test_meanfield_cli(capsys):
    _, out, _ = run(capsys, "meanfield", "--preset", "paper8", "--M", "4", "--G", "1/4")
    d = json.loads(out)
    assert d["overlap_with_exact"] == pytest.approx(1, abs=1e-8)


def test_duality_cli(capsys):
    rc, out, _ = run(capsys, "duality", "--preset", "paper6", "--M", "3", "--G", "1",
                     "--relation", "mixed")
    d = json.loads(out)
    assert rc == 0 and d["target_sector"]["P"] == 4


def test_inversion_cli(capsys):
    _, out, _ = run(capsys, "inversion", "--preset", "inv4", "--P", "3", "--G", "0.4")
    d = json.loads(out)
    assert d["max_residual"] <= 1e-10 and d["max_energy_deviation"] <= 1e-8


def test_spectrum_json_deterministic(capsys, tmp_path):
    argv = ["spectrum", "--preset", "paper6", "--P", "4", "--G", "0.37"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    out = tmp_path / "s.json"
    run(capsys, *argv, "--out", str(out))
    assert json.loads(out.read_text()) == json.loads(a)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "pairsolve", "phase", "--g-inv", "1", "--x", "0.75"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["region"] == "VI"
