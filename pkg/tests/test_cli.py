import csv
import math

import numpy as np
import pytest

from multirate_poro.cli import (
    OUTPUT_ENV,
    STUDY_HEADER,
    TIMING_HEADER,
    TRAJECTORY_HEADER,
    NonFiniteOutput,
    _fmt,
    config_from_dict,
    main,
    parse_config,
)
from multirate_poro.errors import ConfigError
from multirate_poro.mesh import build_unit_square_mesh
from multirate_poro.vtk import read_vtk

VERIFY = """
case = "verification_neumann"
n = 4
dt = 1e-3
m = 1
T = 0.02
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text + f'\noutput_dir = "{(tmp_path / "out").as_posix()}"\n', encoding="utf-8")
    return path


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(autouse=True)
def _no_env_override(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


def test_config_defaults_and_modes():
    cfg = config_from_dict({"case": "test1", "n": [8, 16], "dt": 1e-4, "T": 1e-3})
    assert cfg.mode == "study" and cfg.m == [1] and cfg.theta == 0
    assert config_from_dict({"case": "test1", "n": 8, "dt": 1e-4, "T": 1e-3, "m": [1, 5]}).mode == "timing"


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"n": 4, "dt": 1e-3, "T": 0.01}, "case"),
        ({"case": "nope", "n": 4, "dt": 1e-3, "T": 0.01}, "case"),
        ({"case": "test1", "n": 0, "dt": 1e-3, "T": 0.01}, "n"),
        ({"case": "test1", "n": 4, "dt": -1.0, "T": 0.01}, "dt"),
        ({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.0105, "m": 2}, "T"),
        ({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.01, "theta": 3}, "theta"),
        ({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.01, "bogus": 1}, "bogus"),
        ({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.01, "params": {"nu": 0.7}}, "params"),
        ({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.01, "params": {"zeta": 1}}, "params.zeta"),
        ({"case": "test1", "n": 4, "dt": "fast", "T": 0.01}, "dt"),
        ({"case": "test3", "n": 4, "dt": 1e-3, "T": 0.01, "case_options": {"foo": 1}}, "case_options"),
    ],
)
def test_config_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.key == key


def test_c0_zero_mentions_kappa3():
    with pytest.raises(ConfigError, match="kappa_3"):
        config_from_dict({"case": "test1", "n": 4, "dt": 1e-3, "T": 0.01, "params": {"c0": 0.0}})


def test_parse_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("case = [", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_nonfinite_values_refused():
    with pytest.raises(NonFiniteOutput):
        _fmt(float("nan"))
    assert _fmt("NA") == "NA" and _fmt(3) == "3"


def test_run_writes_trajectory(tmp_path):
    cfg = _write(tmp_path, VERIFY)
    assert main(["run", "--config", str(cfg)]) == 0
    rows = _read(tmp_path / "out" / "trajectory.csv")
    assert rows[0] == TRAJECTORY_HEADER
    assert len(rows) == 22
    values = np.array(rows[1:], dtype=float)
    assert np.all(np.isfinite(values))
    assert values[-1, TRAJECTORY_HEADER.index("conservation_residual")] <= 1e-10
    assert values[:, TRAJECTORY_HEADER.index("energy_residual")].max() <= 1e-8


def test_single_window_run(tmp_path):
    cfg = _write(tmp_path, VERIFY.replace("T = 0.02", "T = 0.001"))
    assert main(["run", "--config", str(cfg)]) == 0
    assert len(_read(tmp_path / "out" / "trajectory.csv")) == 3


def test_dirichlet_case_marks_identities_not_applicable(tmp_path):
    cfg = _write(tmp_path, 'case = "test3"\nn = 2\ndt = 1e-3\nT = 2e-3\n')
    assert main(["run", "--config", str(cfg)]) == 0
    rows = _read(tmp_path / "out" / "trajectory.csv")
    assert all(r[-1] == "NA" and r[-2] == "NA" for r in rows[1:])


def test_vtk_output_round_trips(tmp_path):
    cfg = _write(tmp_path, VERIFY.replace("T = 0.02", "T = 0.003") + "emit_vtk = true\n")
    assert main(["run", "--config", str(cfg)]) == 0
    files = sorted((tmp_path / "out").glob("state_*.vtk"))
    assert len(files) == 4
    assert files[0].read_text().startswith("# vtk DataFile Version 3.0\n")
    points, tris, scalars, vectors = read_vtk(files[-1])
    mesh = build_unit_square_mesh(4)
    assert np.allclose(points, mesh.vertices) and np.array_equal(tris, mesh.triangles)
    assert set(scalars) == {"p"} and set(vectors) == {"u"}
    assert vectors["u"].shape == (mesh.n_vertices, 2)


def test_runs_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, VERIFY.replace("T = 0.02", "T = 0.005"))
    main(["run", "--config", str(cfg)])
    first = (tmp_path / "out" / "trajectory.csv").read_bytes()
    main(["run", "--config", str(cfg)])
    assert (tmp_path / "out" / "trajectory.csv").read_bytes() == first


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    cfg = _write(tmp_path, VERIFY.replace("T = 0.02", "T = 0.002"))
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "elsewhere"))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "elsewhere" / "trajectory.csv").exists()
    assert not (tmp_path / "out").exists()


def test_study_with_repeated_mesh_marks_rate_undefined(tmp_path):
    cfg = _write(tmp_path, 'case = "test1"\nn = [2, 2]\ndt = 1e-4\nT = 2e-4\n')
    assert main(["study", "--config", str(cfg)]) == 0
    rows = _read(tmp_path / "out" / "convergence.csv")
    assert rows[0] == STUDY_HEADER
    assert rows[1][2] == "NA" and rows[2][2] == "undefined"


def test_bench_writes_timing(tmp_path):
    cfg = _write(tmp_path, 'case = "test1"\nn = 2\ndt = 1e-4\nT = 1e-3\nm = [1, 5]\nrepeats = 1\n')
    assert main(["bench", "--config", str(cfg)]) == 0
    rows = _read(tmp_path / "out" / "timing.csv")
    assert rows[0] == TIMING_HEADER
    assert rows[1][0] == "1" and float(rows[1][2]) == 1.0
    detail = _read(tmp_path / "out" / "timing_detail.csv")
    assert detail[2][2] == str(math.ceil(10 / 5))


def test_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
    study = _write(tmp_path, 'case = "test1"\nn = [2, 4]\ndt = 1e-4\nT = 2e-4\n', "study.toml")
    assert main(["run", "--config", str(study)]) == 2
    assert main(["bench", "--config", str(study)]) == 2
    blocked = tmp_path / "file"
    blocked.write_text("", encoding="utf-8")
    cfg = tmp_path / "io.toml"
    cfg.write_text(VERIFY + f'\noutput_dir = "{(blocked / "sub").as_posix()}"\n', encoding="utf-8")
    assert main(["run", "--config", str(cfg)]) == 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(tmp_path):
    # the lagged pressure boundary treatment diverges on this case
    cfg = _write(tmp_path, 'case = "test1"\nn = 4\ndt = 1e-4\nT = 1e-2\nimplicit_pressure_bc = false\n')
    assert main(["run", "--config", str(cfg)]) == 3
