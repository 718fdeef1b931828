"""Command line interface tests, driving main() in process."""

import glob
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from logmink.cli import main, normalize_config, parse_config_text, write_atomic
from logmink.convex import convex_hull_3d, measure_from_csv, polytope_to_obj
from logmink.errors import InvalidParameter
from logmink.grid import field_from_csv


def cube_obj_text(half=(1.0, 1.0, 1.0)):
    corners = np.array([[sx, sy, sz] for sx in (-1, 1)
                        for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return polytope_to_obj(convex_hull_3d(corners * np.asarray(half)))


# ---------------------------------------------------------------------------
# config plumbing


def test_config_text_roundtrip():
    cfg = {"grid_L": "12", "f": "const:2.0", "tol": "1e-8"}
    text = normalize_config(cfg)
    assert parse_config_text(text) == cfg
    # canonical form is idempotent
    assert normalize_config(parse_config_text(text)) == text


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidParameter):
        parse_config_text("volume=8\n")
    with pytest.raises(InvalidParameter):
        parse_config_text("grid_L 12\n")
    with pytest.raises(InvalidParameter):
        normalize_config({"nonsense": "1"})


def test_config_comments_and_blanks():
    text = "# a comment\n\ngrid_L=8\n  f = const:1.0  \n"
    cfg = parse_config_text(text)
    assert cfg == {"grid_L": "8", "f": "const:1.0"}


def test_write_atomic(tmp_path):
    target = tmp_path / "deep" / "file.txt"
    write_atomic(str(target), "payload")
    assert target.read_text() == "payload"
    write_atomic(str(target), "replaced")
    assert target.read_text() == "replaced"
    assert glob.glob(str(tmp_path / "deep" / "*.tmp")) == []


# ---------------------------------------------------------------------------
# solve and flow commands


def test_solve_constant(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["solve", "--f", "const:8.0", "--out", out]) == 0
    capsys.readouterr()
    field = field_from_csv((tmp_path / "solution.csv").read_text())
    assert field.grid.L == 16
    assert_allclose(field.values, 2.0, atol=1e-8)
    report = (tmp_path / "report.csv").read_text().splitlines()
    assert report[0] == "iter,residual_sup,min_h,min_eig_W,step_size"


def test_solve_harmonics_with_obj(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["solve", "--f", "harmonics:[(1, 0, 0.1)]", "--out", out,
                 "--write-obj"])
    assert code == 0
    capsys.readouterr()
    field = field_from_csv((tmp_path / "solution.csv").read_text())
    expected = 1.0 + 0.1 * field.grid.nodes[:, 2]
    assert np.max(np.abs(field.values - expected)) < 1e-7
    assert (tmp_path / "body.obj").exists()


def test_solve_respects_grid_option(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["solve", "--f", "const:1.0", "--grid-L", "8",
                 "--out", out]) == 0
    capsys.readouterr()
    text = (tmp_path / "solution.csv").read_text()
    assert text.splitlines()[0] == "# grid_L=8"


def test_solve_random_density(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["solve", "--f", "random:3,0.05,2.0", "--out", out,
                 "--tol", "1e-8"]) == 0
    capsys.readouterr()
    assert (tmp_path / "solution.csv").exists()


def test_flow_writes_trace_and_snapshots(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["flow", "--f", "const:1.0", "--h0", "const:2.0",
                 "--no-renormalize", "--t-final", "0.01",
                 "--snapshot-every", "3", "--out", out])
    assert code == 0
    capsys.readouterr()
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "t,volume,residual_sup,min_h"
    assert len(trace) > 5
    snaps = sorted(os.path.basename(p)
                   for p in glob.glob(str(tmp_path / "body_*.obj")))
    assert snaps and snaps[0] == "body_000003.obj"
    assert (tmp_path / "solution.csv").exists()


def test_flow_stationary_run(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["flow", "--f", "const:8.0", "--out", out]) == 0
    capsys.readouterr()
    field = field_from_csv((tmp_path / "solution.csv").read_text())
    assert_allclose(field.values, 2.0, atol=1e-7)


# ---------------------------------------------------------------------------
# polytope commands


def test_measure_cube(tmp_path, capsys):
    obj = tmp_path / "cube.obj"
    obj.write_text(cube_obj_text())
    out = str(tmp_path)
    assert main(["measure", "--obj", str(obj), "--measure", "both",
                 "--out", out]) == 0
    capsys.readouterr()
    cone = measure_from_csv((tmp_path / "cone_measure.csv").read_text())
    assert cone.n_atoms == 6
    assert_allclose(cone.weights, 4.0 / 3.0, atol=1e-12)
    surface = measure_from_csv((tmp_path / "surface_measure.csv").read_text())
    assert abs(surface.total() - 24.0) < 1e-12


def test_measure_surface_only(tmp_path, capsys):
    obj = tmp_path / "cube.obj"
    obj.write_text(cube_obj_text())
    out = str(tmp_path)
    assert main(["measure", "--obj", str(obj), "--measure", "surface",
                 "--out", out]) == 0
    capsys.readouterr()
    assert (tmp_path / "surface_measure.csv").exists()
    assert not (tmp_path / "cone_measure.csv").exists()


def test_john_box(tmp_path, capsys):
    obj = tmp_path / "box.obj"
    obj.write_text(cube_obj_text(half=(1.0, 2.0, 3.0)))
    out = str(tmp_path)
    assert main(["john", "--obj", str(obj), "--out", out]) == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("radii:")
    lines = (tmp_path / "ellipsoid.csv").read_text().splitlines()
    assert lines[0] == "quantity,x,y,z"
    rows = {line.split(",")[0]: [float(x) for x in line.split(",")[1:]]
            for line in lines[1:]}
    assert_allclose(rows["radii"],
                    np.sqrt(3.0) * np.array([1.0, 2.0, 3.0]), rtol=1e-5)
    assert_allclose(rows["center"], 0.0, atol=1e-6)


def test_diag_box(tmp_path, capsys):
    obj = tmp_path / "box.obj"
    obj.write_text(cube_obj_text(half=(1.0, 1.0, 4.0)))
    out = str(tmp_path)
    assert main(["diag", "--obj", str(obj), "--out", out]) == 0
    capsys.readouterr()
    lines = (tmp_path / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "ratio_32,ratio_21,axis_dist_ratio,plane_dist_ratio"
    vals = [float(x) for x in lines[1].split(",")]
    assert abs(vals[0] - 4.0) < 1e-3
    assert abs(vals[1] - 1.0) < 1e-3


# ---------------------------------------------------------------------------
# experiment command


def test_experiment_deterministic(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["experiment", "--kind", "bound", "--count", "1", "--seed", "3"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    capsys.readouterr()
    text_a = (out_a / "report.csv").read_text()
    text_b = (out_b / "report.csv").read_text()
    assert text_a == text_b
    assert text_a.startswith("# spec: kind=bound count=1 seed=3 ")


def test_experiment_custom_inits(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["experiment", "--kind", "uniqueness", "--count", "1",
                 "--inits", "const:0.8,const:1.2", "--out", out])
    assert code == 0
    capsys.readouterr()
    text = (tmp_path / "report.csv").read_text()
    assert "inits=const:0.8|const:1.2" in text.splitlines()[0]


# ---------------------------------------------------------------------------
# configuration file and failure modes


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid_L=8\nf=const:1.0\n")
    out_a = tmp_path / "a"
    assert main(["solve", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert (out_a / "solution.csv").read_text().splitlines()[0] == "# grid_L=8"
    # explicit flags win over the file
    out_b = tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--grid-L", "12",
                 "--out", str(out_b)]) == 0
    capsys.readouterr()
    assert (out_b / "solution.csv").read_text().splitlines()[0] == "# grid_L=12"


def test_no_command_exits_2(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["solve", "--bogus", "1"])
    assert err.value.code == 2
    capsys.readouterr()


def test_missing_density_exits_2(tmp_path, capsys):
    assert main(["solve", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("volume=8\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_obj_exits_1(tmp_path, capsys):
    missing = str(tmp_path / "nope.obj")
    assert main(["measure", "--obj", missing, "--out", str(tmp_path)]) == 1
    assert "io error" in capsys.readouterr().err


def test_origin_outside_body_exits_1(tmp_path, capsys):
    corners = np.array([[sx, sy, sz] for sx in (-1, 1)
                        for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    shifted = convex_hull_3d(corners + np.array([5.0, 0.0, 0.0]))
    obj = tmp_path / "shifted.obj"
    obj.write_text(polytope_to_obj(shifted))
    code = main(["measure", "--obj", str(obj), "--measure", "cone",
                 "--out", str(tmp_path)])
    assert code == 1
    assert "OriginNotContained" in capsys.readouterr().err


def test_no_tmp_files_left_behind(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["solve", "--f", "const:1.0", "--out", out]) == 0
    capsys.readouterr()
    assert glob.glob(str(tmp_path / "*.tmp")) == []
