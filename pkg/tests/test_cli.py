import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from elastofds.cli import main
from elastofds.experiments import (ExperimentConfig, fitted_exponent, format_value,
                                   max_adjacent_jump)
from elastofds.geometry import BoundaryCurve, build_mesh
from elastofds.medium import ParameterError


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestHelpers:
    def test_fitted_exponent(self):
        N = np.array([100, 200, 400, 800])
        assert abs(fitted_exponent(N, 3e-6 * N ** 1.5) - 1.5) < 1e-12

    def test_max_adjacent_jump(self):
        assert max_adjacent_jump([1.0, 1.5, 1.2]) == pytest.approx(0.5)

    def test_float_format_round_trips(self):
        x = 0.1 + 1e-17
        assert float(format_value(x)) == x
        assert format_value(True) == "true"

    def test_bad_config(self):
        with pytest.raises(ParameterError):
            ExperimentConfig("nope")
        with pytest.raises(ParameterError):
            ExperimentConfig("error_table", n_elements=400, levels=5)


class TestCommands:
    def test_error_table(self, tmp_path, capsys):
        out = tmp_path / "et.csv"
        code = main(["error_table", "--n-elements", "400", "--levels", "2",
                     "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["N", "L", "ell0", "epsilon", "relative_error", "fds_time",
                          "conv_time", "top_dimension"]
        assert len(rows) == 2
        for r in rows:
            assert float(r[header.index("relative_error")]) <= 100 * float(r[3])
        echo = json.loads(out.with_suffix(".json").read_text())
        assert echo["config"]["n_elements"] == 400
        assert echo["config"]["experiment"] == "error_table"

    def test_multi_rhs(self, tmp_path):
        out = tmp_path / "m.csv"
        assert main(["multi_rhs", "--n-elements", "400", "--levels", "2", "--rhs-count", "3",
                     "--epsilon", "1e-10", "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["rhs_index", "angle_deg", "time", "fresh_difference"]
        assert [float(r[1]) for r in rows] == [0.0, 120.0, 240.0]
        assert max(float(r[3]) for r in rows) <= 1e-12
        summary = json.loads(out.with_suffix(".json").read_text())["summary"]
        assert summary["speedup"] > 1

    def test_intensity_sweep(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["intensity_sweep", "--n-elements", "400", "--omega", "1.0",
                     "--omega-max", "1.1", "--omega-step", "0.05", "--solver", "conv",
                     "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert [float(r[0]) for r in rows] == [1.0, 1.05, 1.1]
        assert all(float(r[header.index("intensity")]) >= 0 for r in rows)

    def test_mesh_file(self, tmp_path):
        mesh = build_mesh(BoundaryCurve(), 400)
        path = tmp_path / "star.txt"
        lines = ["400"] + [f"{x:.17e} {y:.17e}" for x, y in mesh.nodes]
        path.write_text("\n".join(lines) + "\n")
        out = tmp_path / "nf.csv"
        assert main(["null_field", "--n-elements", "400", "--solver", "conv",
                     "--mesh-file", str(path), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert float(rows[0][header.index("residual")]) < 1e-5

    def test_parameter_error_exit_code(self, tmp_path, capsys):
        code = main(["error_table", "--n-elements", "401", "--levels", "2",
                     "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "divisible" in capsys.readouterr().err

    def test_bad_omega_range(self, tmp_path):
        assert main(["intensity_sweep", "--omega", "2", "--omega-max", "1",
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "elastofds.cli", "--help"],
                             capture_output=True, text=True)
        assert res.returncode == 0
        assert "null_field" in res.stdout
