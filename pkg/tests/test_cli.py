import csv
import json
import subprocess
import sys

import pytest

from bohmorder.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_trajectory_command(tmp_path):
    out = tmp_path / "traj"
    assert main(["trajectory", "--kind", "harmonic3", "--x0", "1", "--y0", "1", "--tend", "2",
                 "--dt", "1e-3", "--sample-dt", "0.5", "--out", str(out), "--plot"]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "x", "y"] and len(rows) == 6
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "trajectory"
    assert "trajectory.svg" in man["outputs"]
    assert (out / "trajectory.svg").read_text().lstrip().startswith("<?xml")


def test_model_file_with_override(tmp_path):
    f = tmp_path / "m.txt"
    f.write_text("kind=harmonic3\na=0.5\nb=0\n")
    out = tmp_path / "o"
    assert main(["trajectory", "--model", str(f), "--b", "0.25", "--x0", "0.3", "--y0", "0.2",
                 "--tend", "1", "--dt", "1e-3", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert "a=0.5" in man["model"] and "b=0.25" in man["model"]


def test_inner_series_command(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["series", "--kind", "harmonic3", "--a", "0.7", "--b", "0", "--x0", "0", "--y0", "0",
                 "--expansion", "inner", "--order", "20", "--tend", "6.3", "--out", str(out)]) == 0
    assert "convergent" in capsys.readouterr().out
    lines = (out / "series_x.txt").read_text().splitlines()
    assert lines[0] == "order,power_t,kind,n1,n2,n3,coeff"
    assert json.loads((out / "manifest.json").read_text())["verdict"] == "convergent"


def test_lyapunov_command(tmp_path):
    out = tmp_path / "l"
    assert main(["lyapunov", "--kind", "harmonic3", "--x0", "1", "--y0", "1", "--tend", "20",
                 "--dt", "1e-3", "--out", str(out), "--plot"]) == 0
    assert read_csv(out / "lyapunov.csv")[0] == ["t", "x", "y", "chi"]
    assert (out / "lyapunov.svg").exists()


def test_relax_command_with_snapshot(tmp_path):
    out = tmp_path / "r"
    assert main(["relax", "--kind", "harmonic3", "--mode", "box", "--n", "25", "--center", "1.4", "1.4",
                 "--tend", "2", "--sample-every", "1", "--halfplane", "x>0", "--snapshots", "2",
                 "--out", str(out), "--plot"]) == 0
    rows = read_csv(out / "metrics.csv")
    assert rows[0] == ["t", "D", "H_s", "D_bar"] and len(rows) == 4
    assert read_csv(out / "snapshot_t2.csv")[0] == ["t", "particle_id", "x", "y"]
    assert read_csv(out / "grid_t2.csv")[0] == ["x", "y", "P_s", "psi2"]
    assert (out / "metrics.svg").exists() and (out / "grid_t2.svg").exists()


def test_section_command(tmp_path):
    out = tmp_path / "sec"
    assert main(["section", "--centers=-0.6,-0.6", "--n-side", "2", "--periods", "3",
                 "--out", str(out)]) == 0
    rows = read_csv(out / "section.csv")
    assert rows[0] == ["traj_id", "k", "x", "y"] and len(rows) == 1 + 4 * 4


def test_hh_spectrum_command(tmp_path):
    out = tmp_path / "hh"
    assert main(["hh-spectrum", "--K", "60", "--states", "5", "--out", str(out)]) == 0
    rows = read_csv(out / "spectrum.csv")
    assert rows[0] == ["index", "n", "m", "E"] and rows[1][1:3] == ["0", "0"]
    assert (out / "spectrum_cache.npz").exists()


def test_recurrence_and_node_events(tmp_path):
    out = tmp_path / "rec"
    assert main(["recurrence", "--kind", "harmonic3", "--a", "0.5", "--b", "0.5", "--mode", "box",
                 "--n", "4", "--max-order", "3", "--out", str(out)]) == 0
    assert read_csv(out / "recurrence.csv")[0] == ["n", "q", "p", "T", "distance", "bound"]
    out = tmp_path / "ne"
    assert main(["node-events", "--kind", "harmonic3", "--x0", "-1", "--y0", "-1", "--tend", "10",
                 "--dt", "1e-3", "--out", str(out)]) == 0
    assert read_csv(out / "node_events.csv")[0] == ["t", "u", "v"]


def test_nodal_lines_command(tmp_path):
    out = tmp_path / "nl"
    assert main(["nodal-lines", "--kind", "harmonic3", "--tmin", "2.2", "--tmax", "2.9", "--nt", "2",
                 "--resolution", "80", "--out", str(out)]) == 0
    assert len(read_csv(out / "nodal_lines.csv")) == 3


@pytest.mark.parametrize("argv", [
    ["trajectory", "--x0", "1"],
    ["trajectory", "--x0", "1", "--y0", "1", "--dt", "0"],
    ["trajectory", "--kind", "wispuj", "--c", "0.5", "--x0", "1", "--y0", "1"],
    ["series", "--kind", "wispuj", "--x0", "1", "--y0", "1"],
    ["relax", "--mode", "box", "--n", "10"],
    ["nosuchcommand"],
])
def test_configuration_errors_exit_1(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path / "x")] if argv[0] != "nosuchcommand" else argv) == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_model_file_exits_1(tmp_path):
    assert main(["trajectory", "--model", str(tmp_path / "none.txt"), "--x0", "1", "--y0", "1",
                 "--out", str(tmp_path)]) == 1


def test_numerical_failure_exits_2(tmp_path, capsys):
    # the harmonic5 state vanishes at the origin at t = 0
    code = main(["trajectory", "--kind", "harmonic5", "--x0", "0", "--y0", "0", "--tend", "1",
                 "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "numerical failure in" in err and "NodeSingularity" in err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bohmorder.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()


@pytest.mark.slow
def test_seeded_born_run_is_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["relax", "--kind", "harmonic3", "--mode", "born", "--seed", "7", "--tend", "1000",
                     "--out", str(out)]) == 0
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]
