import json
import subprocess
import sys

import numpy as np
import pytest

from cwlm import cli
from cwlm.errors import IncompatibleGrids, ParseError, ValidationFailed
from cwlm.tables import DistributionTable


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def gaussian_table(mean, var, engine="test", n=2001, extent=9.0):
    ax = np.linspace(-extent + mean, extent + mean, n)
    vals = np.exp(-0.5 * (ax - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)
    return DistributionTable(axes=(ax,), values=vals, meta={"engine": engine, "t": 1.0, "seed": 0})


class TestLoadSetup:
    def test_bundled_fixture_loads(self):
        with pytest.warns(UserWarning):
            setup, rho0, report = cli.load_setup(cli.fixture_path("qubit_sz"))
        assert setup.dim == 2
        assert report.overall
        assert np.trace(rho0) == pytest.approx(1.0)

    def test_non_hermitian_hamiltonian_rejected(self, tmp_path):
        doc = {
            "hamiltonian": [[0, 1], [0, 0]],
            "measured_ops": [[[1, 0], [0, -1]]],
            "noise": {"S_det": [[1.0]], "S_op": [[1.0]], "a_cross": [[0.5]]},
        }
        with pytest.raises(ValidationFailed, match="hamiltonian_hermiticity"):
            cli.load_setup(write_json(tmp_path / "bad.json", doc))

    def test_coupling_violation_rejected(self, tmp_path):
        doc = {
            "hamiltonian": [[0, 0], [0, 0]],
            "measured_ops": [[[1, 0], [0, -1]]],
            "noise": {"S_det": [[1.0]], "S_op": [[1.0]], "a_cross": [[2.0]]},
        }
        with pytest.raises(ValidationFailed, match="detector_operator_coupling"):
            cli.load_setup(write_json(tmp_path / "bad.json", doc))

    def test_parse_error_names_field(self, tmp_path):
        doc = {
            "hamiltonian": [[0, 0], [0, 0, 0]],
            "measured_ops": [],
            "noise": {"S_det": [[1.0]]},
        }
        with pytest.raises(ParseError, match="hamiltonian"):
            cli.load_setup(write_json(tmp_path / "bad.json", doc))

    def test_complex_entries(self, tmp_path):
        doc = {
            "hamiltonian": [[0, [0, -0.5]], [[0, 0.5], 0]],
            "measured_ops": [[[1, 0], [0, -1]]],
            "noise": {"S_det": [[1.0]], "S_op": [[1.0]], "a_cross": [[0.5]]},
        }
        setup, _, report = cli.load_setup(write_json(tmp_path / "ok.json", doc))
        assert report.overall
        assert setup.hamiltonian[0, 1] == -0.5j


class TestRun:
    def test_validate_exit_codes(self, capsys):
        assert cli.main(["validate", "--config", cli.fixture_path("qubit_sz")]) == 0
        out = capsys.readouterr().out
        assert "VALID" in out
        assert cli.main(["validate", "--config", cli.fixture_path("saturated_minimum")]) == 2
        out = capsys.readouterr().out
        assert "minimum_decoherence" in out

    def test_fcs_emits_csv(self, tmp_path, capsys):
        out = tmp_path / "fcs.csv"
        code = cli.main(
            [
                "fcs",
                "--config",
                cli.fixture_path("qubit_sz"),
                "--t",
                "1.0",
                "--s-max",
                "8",
                "--s-points",
                "161",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        table = cli.read_distribution_csv(str(out))
        assert table.meta["engine"] == "fcs"
        assert abs(table.total_mass() - 1.0) < 1e-2

    def test_cfl_violation_exit_code(self, tmp_path, capsys):
        code = cli.main(
            [
                "diffusion",
                "--config",
                cli.fixture_path("qubit_sz"),
                "--t",
                "1.0",
                "--dt",
                "0.5",
                "--s-max",
                "8",
            ]
        )
        assert code == 3
        assert "CFL" in capsys.readouterr().err

    def test_trajectories_with_samples(self, tmp_path):
        out = tmp_path / "hist.csv"
        samples = tmp_path / "samples.csv"
        code = cli.main(
            [
                "trajectories",
                "--config",
                cli.fixture_path("qubit_sz"),
                "--t",
                "0.5",
                "--n",
                "500",
                "--seed",
                "3",
                "--s-max",
                "6",
                "--s-points",
                "61",
                "--out",
                str(out),
                "--samples",
                str(samples),
            ]
        )
        assert code == 0
        data = np.loadtxt(str(samples), delimiter=",", comments="#")
        assert data.shape == (500,)
        table = cli.read_distribution_csv(str(out))
        assert table.meta["engine"] == "trajectories"

    def test_analytic_engine(self, tmp_path):
        out = tmp_path / "analytic.csv"
        code = cli.main(
            [
                "analytic",
                "--config",
                cli.fixture_path("qubit_sz"),
                "--t",
                "2.0",
                "--s-max",
                "12",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        table = cli.read_distribution_csv(str(out))
        assert abs(table.total_mass() - 1.0) < 1e-3

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "fcs",
            "--config",
            cli.fixture_path("qubit_sz"),
            "--t",
            "0.5",
            "--s-max",
            "6",
            "--s-points",
            "81",
            "--seed",
            "9",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_console_entry(self):
        proc = subprocess.run(
            [sys.executable, "-m", "cwlm.cli", "validate", "--config", cli.fixture_path("qubit_sz")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "VALID" in proc.stdout


class TestCompare:
    def test_self_distance_zero(self, tmp_path):
        path = str(tmp_path / "g.csv")
        cli.write_distribution_csv(gaussian_table(0.0, 1.0), path)
        metrics = cli.compare(path, path)
        assert metrics["l1"] == 0.0
        assert metrics["ks"] == 0.0

    def test_round_trip_lossless(self, tmp_path):
        table = gaussian_table(0.3, 1.7)
        path = str(tmp_path / "g.csv")
        cli.write_distribution_csv(table, path)
        back = cli.read_distribution_csv(path)
        assert np.array_equal(back.axes[0], table.axes[0])
        assert np.array_equal(back.values, table.values)

    def test_shifted_gaussians_ks(self, tmp_path):
        from scipy.stats import norm

        a = str(tmp_path / "a.csv")
        b = str(tmp_path / "b.csv")
        cli.write_distribution_csv(gaussian_table(0.0, 1.0, n=4001, extent=10), a)
        cli.write_distribution_csv(gaussian_table(1.0, 1.0, n=4001, extent=10), b)
        metrics = cli.compare(a, b)
        expected = 2.0 * norm.cdf(0.5) - 1.0  # max CDF gap of unit normals one apart
        assert metrics["ks"] == pytest.approx(expected, abs=1e-3)
        assert metrics["mean_b"][0] - metrics["mean_a"][0] == pytest.approx(1.0, abs=1e-6)

    def test_empty_overlap(self, tmp_path):
        a = str(tmp_path / "a.csv")
        b = str(tmp_path / "b.csv")
        cli.write_distribution_csv(gaussian_table(-30.0, 1.0, extent=5), a)
        cli.write_distribution_csv(gaussian_table(30.0, 1.0, extent=5), b)
        with pytest.raises(IncompatibleGrids):
            cli.compare(a, b)

    def test_compare_subcommand(self, tmp_path, capsys):
        path = str(tmp_path / "g.csv")
        cli.write_distribution_csv(gaussian_table(0.0, 1.0), path)
        assert cli.main(["compare", path, path]) == 0
        assert "L1 distance" in capsys.readouterr().out
