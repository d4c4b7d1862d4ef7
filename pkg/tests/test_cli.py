import json

import numpy as np
import pytest

from bippt.cli import main
from bippt.errors import NumericalError
from bippt.solver import TRACE_COLUMNS
from bippt.states import check_density, make_state, read_state_text


class TestGenState:
    def test_ghz3(self, tmp_path, capsys):
        out = tmp_path / "ghz3.txt"
        assert main(["gen-state", "--kind", "ghz3", "--noise", "1.0",
                     "--out", str(out)]) == 0
        state = read_state_text(out)
        assert state.d == 8
        report = check_density(state)
        assert report.valid_state

    def test_w3_rank_one(self, tmp_path):
        out = tmp_path / "w3.txt"
        assert main(["gen-state", "--kind", "w3", "--noise", "0",
                     "--out", str(out)]) == 0
        state = read_state_text(out)
        eigs = np.linalg.eigvalsh(state.data)
        assert np.sum(eigs > 1e-12) == 1

    def test_mghz5(self, tmp_path):
        out = tmp_path / "mghz5.txt"
        assert main(["gen-state", "--kind", "mghz5", "--coeffs", "1,1,5",
                     "--noise", "5", "--out", str(out)]) == 0
        state = read_state_text(out)
        assert state.d == 243
        assert abs(state.trace() - 1.0) <= 1e-12

    def test_unknown_kind_exit_2(self, tmp_path, capsys):
        rc = main(["gen-state", "--kind", "bogus", "--out", str(tmp_path / "x.txt")])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestSolveCommand:
    def test_json_schema(self, tmp_path):
        out = tmp_path / "result.json"
        trace = tmp_path / "trace.csv"
        rc = main([
            "solve", "--kind", "ghz3", "--noise", "2.0", "--xi", "20",
            "--trials", "2", "--max-iter", "600", "--out", str(out),
            "--trace", str(trace),
        ])
        assert rc == 0
        payload = json.loads(out.read_text())
        for key in ("f", "violation_pz", "iterations", "termination", "weights",
                    "per_trial", "stationarity", "params_mode", "feasible_f"):
            assert key in payload
        assert payload["params_mode"] == "strict"
        assert len(payload["per_trial"]) == 2
        assert len(payload["stationarity"]) == 5
        assert len(payload["weights"]) == 3
        header = trace.read_text().split("\n", 1)[0]
        assert header == TRACE_COLUMNS

    def test_solve_from_file_matches_memory(self, tmp_path):
        state_path = tmp_path / "state.txt"
        main(["gen-state", "--kind", "ghz3", "--noise", "1.5", "--out", str(state_path)])
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        common = ["--xi", "15", "--trials", "1", "--max-iter", "400"]
        assert main(["solve", "--input", str(state_path), *common,
                     "--out", str(out_a)]) == 0
        assert main(["solve", "--kind", "ghz3", "--noise", "1.5", *common,
                     "--out", str(out_b)]) == 0
        a = json.loads(out_a.read_text())
        b = json.loads(out_b.read_text())
        assert a == b  # bit-for-bit round trip through the text format

    def test_maximally_mixed_small_objective(self, tmp_path):
        # I/d is bi-PPT for every bipartition
        state_path = tmp_path / "mixed.txt"
        from bippt.states import DensityMatrix, SubsystemDims, write_state_text

        write_state_text(
            state_path, DensityMatrix(np.eye(8) / 8, SubsystemDims((2, 2, 2)))
        )
        # direct check: all partial transposes of I/d are PSD
        from bippt.states import enumerate_bipartitions, partial_transpose_array

        for b in enumerate_bipartitions(3):
            eigs = np.linalg.eigvalsh(
                partial_transpose_array(np.eye(8) / 8, (2, 2, 2), b.left)
            )
            assert eigs[0] >= 0
        out = tmp_path / "mixed.json"
        rc = main(["solve", "--input", str(state_path), "--xi", "50",
                   "--trials", "1", "--max-iter", "20000", "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["f"] <= 1e-9

    def test_missing_state_exit_2(self, tmp_path, capsys):
        rc = main(["solve", "--input", str(tmp_path / "absent.txt"), "--xi", "10"])
        assert rc == 2

    def test_tightened_mode(self, tmp_path):
        out = tmp_path / "t.json"
        rc = main(["solve", "--kind", "ghz3", "--noise", "2.0", "--xi", "20",
                   "--mode", "tightened", "--trials", "1", "--max-iter", "300",
                   "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["params_mode"] == "tightened"

    def test_invalid_param_combo_exit_2(self, capsys):
        rc = main(["solve", "--kind", "ghz3", "--noise", "2.0", "--xi", "20",
                   "--eta", "10", "--trials", "1"])
        assert rc == 2

    def test_numerical_failure_exit_3(self, monkeypatch, tmp_path):
        import bippt.cli as cli_mod

        def boom(*args, **kwargs):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli_mod, "run_trials", boom)
        rc = main(["solve", "--kind", "ghz3", "--noise", "2.0", "--xi", "20",
                   "--trials", "1", "--out", str(tmp_path / "x.json")])
        assert rc == 3


class TestSweeps:
    def test_sweep_xi_single_point_matches_solve(self, tmp_path):
        csv_out = tmp_path / "sweep.csv"
        rc = main([
            "sweep-xi", "--kind", "ghz3", "--noise", "2.0",
            "--xi-from", "20", "--xi-to", "20", "--xi-step", "50",
            "--trials", "1", "--max-iter", "500", "--out", str(csv_out),
        ])
        assert rc == 0
        import csv as csv_mod

        rows = list(csv_mod.DictReader(csv_out.read_text().splitlines()))
        assert len(rows) == 1
        json_out = tmp_path / "ref.json"
        main(["solve", "--kind", "ghz3", "--noise", "2.0", "--xi", "20",
              "--trials", "1", "--max-iter", "500", "--out", str(json_out)])
        ref = json.loads(json_out.read_text())
        assert float(rows[0]["f"]) == ref["f"]
        assert float(rows[0]["violation"]) == ref["violation_pz"]
        assert set(rows[0].keys()) == {"xi", "f", "violation", "constraint_flags"}

    def test_sweep_xi_bad_range_exit_2(self, tmp_path):
        rc = main(["sweep-xi", "--kind", "ghz3", "--noise", "1.0",
                   "--xi-from", "30", "--xi-to", "20", "--trials", "1"])
        assert rc == 2

    def test_sweep_noise(self, tmp_path):
        csv_out = tmp_path / "noise.csv"
        rc = main([
            "sweep-noise", "--kind", "ghz3", "--noise-values", "1.5,2.5",
            "--xi", "20", "--trials", "1", "--max-iter", "400",
            "--out", str(csv_out),
        ])
        assert rc == 0
        import csv as csv_mod

        rows = list(csv_mod.DictReader(csv_out.read_text().splitlines()))
        assert [float(r["l"]) for r in rows] == [1.5, 2.5]
        assert set(rows[0].keys()) == {"l", "f", "violation"}

    def test_sweep_noise_single_value(self, tmp_path):
        csv_out = tmp_path / "one.csv"
        rc = main(["sweep-noise", "--kind", "w3", "--noise-values", "3.0",
                   "--xi", "25", "--trials", "1", "--max-iter", "300",
                   "--out", str(csv_out)])
        assert rc == 0
        rows = csv_out.read_text().strip().split("\n")
        assert len(rows) == 2
