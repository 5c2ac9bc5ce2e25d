import json
import subprocess
import sys

import pytest

from chiralxy.cli import main, parse_region, InputError
from chiralxy.files import load_field, save_field
from chiralxy.lattice import triangle_set_in
from chiralxy.regions import square
from chiralxy.spin import GroundStateKind, ground_state


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def ground_file(tmp_path):
    sites = triangle_set_in(square((0, 1), 3.0), 1 / 16).sites()
    path = tmp_path / "ground_pos.txt"
    save_field(ground_state(GroundStateKind.POS, 1 / 16, map(tuple, sites.tolist())), path)
    return path


def test_verify_report(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0
    assert "min_opposite_pair=1.66666667" in out
    assert out.strip().endswith("status=ok")


def test_energy_of_ground_state_is_zero(ground_file, capsys):
    code, out, _ = run(["energy", "--field", str(ground_file), "--region", "square:0,1:1"], capsys)
    assert code == 0 and out.strip() == "0.0"


def test_solve_cell_twice_identical(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"cell{k}.txt"
        code, out, _ = run(["--seed", "7", "--threads", "1", "solve-cell", "--nu", "1.5707963", "--eps", "0.125",
                            "--restarts", "2", "--hops", "4", "--out", str(path)], capsys)
        assert code == 0
        outs.append((out.replace(str(path), ""), path.read_bytes()))
    assert outs[0] == outs[1]


def test_solve_cell_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nu_angle_rad": 1.5707963, "rho": 1.0, "eps": 0.125,
                               "solver": {"restarts": 2, "basin_hops": 2}}))
    code, out, _ = run(["solve-cell", "--config", str(cfg), "--out", str(tmp_path / "f.txt")], capsys)
    assert code == 0 and "min_energy=" in out


def test_field_round_trip(tmp_path, ground_file):
    u = load_field(ground_file)
    save_field(u, tmp_path / "copy.txt")
    v = load_field(tmp_path / "copy.txt")
    assert u.eps == v.eps and dict(u.angles) == dict(v.angles)


def test_chirality_and_dump(ground_file, tmp_path, capsys):
    code, out, _ = run(["chirality", "--field", str(ground_file), "--region", "square:0,0:0.5",
                        "--out", str(tmp_path / "grid.txt"), "--svg", str(tmp_path / "c.svg")], capsys)
    assert code == 0
    assert "positive_fraction=1.0" in out
    assert (tmp_path / "c.svg").read_text().startswith("<svg")
    code, out, _ = run(["dump-lattice", "--region", "square:0,0:0.25", "--eps", "0.125"], capsys)
    assert code == 0 and all(len(line.split()) == 7 for line in out.strip().splitlines())


def test_profile_and_sweep(tmp_path, capsys):
    code, out, _ = run(["profile", "--nu", "1.5707963", "--eps", "0.125", "--restarts", "1", "--hops", "1",
                        "--out", str(tmp_path / "p.csv")], capsys)
    assert code == 0
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "signed_distance,mean_chirality,triangles"
    code, out, _ = run(["sweep", "--angles", "2", "--eps-list", "0.125", "--restarts", "1", "--hops", "1",
                        "--out", str(tmp_path / "s.csv")], capsys)
    assert code == 0
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header.startswith("theta_rad,eps,min_energy,phi_estimate")


def test_pave_writes_decomposition(tmp_path, capsys):
    iface = tmp_path / "iface.json"
    iface.write_text(json.dumps({"vertices": [[-1, 0], [1, 0]], "normal_signs": [1], "domain": [-1, 1, -0.5, 0.5]}))
    dec = tmp_path / "dec.csv"
    code, out, _ = run(["pave", "--interface", str(iface), "--rho", "0.5", "--eps", "0.0625", "--restarts", "1",
                        "--hops", "1", "--out", str(tmp_path / "paved.txt"), "--decomposition", str(dec)], capsys)
    assert code == 0
    lines = dec.read_text().splitlines()
    assert lines[0] == "segment,cube_index,energy" and lines[-1].startswith("leftover,")


@pytest.mark.parametrize("argv", [
    ["energy", "--field", "/nonexistent/file.txt", "--region", "square:0,1:1"],
    ["solve-cell", "--nu", "0.3"],
    ["solve-cell", "--nu", "0.3", "--eps", "0.4"],
    ["dump-lattice", "--region", "circle:0,0:1", "--eps", "0.1"],
    ["--threads", "0", "verify"],
])
def test_input_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and err.startswith("error:")


def test_enforce_reports_infeasible_strip(tmp_path, capsys):
    sites = triangle_set_in(square((0, 1), 1.1), 1 / 32).sites()
    path = tmp_path / "f.txt"
    save_field(ground_state(GroundStateKind.POS, 1 / 32, map(tuple, sites.tolist())), path)
    code, _, err = run(["enforce", "--field", str(path), "--nu", "1.5707963", "--delta", "0.1"], capsys)
    assert code == 2 and "no admissible strip" in err


def test_parse_region():
    r = parse_region("rect:0,0:2,1:0")
    assert r.contains_points([[0.4, 0.9]]).all()  # nu = (1, 0): length runs along y
    with pytest.raises(InputError):
        parse_region("square:0:1")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "chiralxy", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve-cell" in res.stdout
