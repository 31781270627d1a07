import csv
import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

import rpm3.master as master_mod
from rpm3.cli import CSV_COLUMNS, main
from rpm3.lagrange import ResultShare
from rpm3.matgf import MatrixFq
from rpm3.scenario import bundled_names

SCENARIOS = ["example1", "example2_fast45", "example2_straggle45", "lemma1_z1", "lemma1_z2", "hetero12"]


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


class TestRun:
    def test_single_polynomial_summary(self, tmp_path, capsys):
        assert main(["run", "example1", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "h interpolated from 3 responses" in out
        assert "C = A B verified" in out
        assert "1/3 = 0.333333" in out
        metrics = json.loads((tmp_path / "example1_seed1.json").read_text())
        assert metrics["N"] == 3 and metrics["decoded_ok"]

    @pytest.mark.parametrize("name,rho", [("example2_fast45", "2/5"), ("example2_straggle45", "1/3")])
    def test_bundled_rates(self, tmp_path, capsys, name, rho):
        assert main(["run", name, "--out", str(tmp_path)]) == 0
        assert f"rho          {rho} = " in capsys.readouterr().out
        (row,) = read_rows(tmp_path / f"{name}_seed2.csv")
        assert Fraction(row["rho"]).limit_denominator(100) == Fraction(rho)

    def test_csv_columns(self, tmp_path):
        main(["run", "hetero12", "--out", str(tmp_path), "--seed", "5"])
        with open(tmp_path / "hetero12_seed5.csv") as fh:
            header = fh.readline().strip().split(",")
        assert header == CSV_COLUMNS == ["scenario", "seed", "n", "z", "m", "k", "c", "N", "epsilon", "rho",
                                         "rho_lemma1", "rho_I", "sim_time"]

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_byte_identical(self, tmp_path, name):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", name, "--out", str(a), "--trace"]) == 0
        assert main(["run", name, "--out", str(b), "--trace"]) == 0
        files = sorted(p.name for p in a.iterdir())
        assert len(files) == 3
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_bad_config(self, tmp_path, capsys):
        bad = write(tmp_path, "bad.json", {"z": 1, "m": 1, "k": 1, "n": 2})
        assert main(["run", bad, "--out", str(tmp_path)]) == 2
        assert "configuration error" in capsys.readouterr().err
        assert main(["run", "no_such_scenario", "--out", str(tmp_path)]) == 2
        junk = tmp_path / "junk.json"
        junk.write_text("{not json")
        assert main(["run", str(junk), "--out", str(tmp_path)]) == 2
        unknown = write(tmp_path, "u.json", {"z": 1, "m": 1, "k": 1, "n": 5, "colour": "red"})
        assert main(["run", unknown, "--out", str(tmp_path)]) == 2

    def test_corruption_exit_code(self, tmp_path, monkeypatch):
        honest = master_mod.compute

        def faulty(task):
            r = honest(task)
            return ResultShare(r.worker, r.t, r.u, r.x, r.H + MatrixFq(np.ones(r.H.shape, dtype=np.int64), r.H.q))

        monkeypatch.setattr(master_mod, "compute", faulty)
        assert main(["run", "example1", "--out", str(tmp_path)]) == 3

    def test_matrix_files(self, tmp_path):
        (tmp_path / "a.txt").write_text("2 2 257\n1 2\n3 4\n")
        (tmp_path / "b.txt").write_text("2 1 257\n5\n6\n")
        cfg = write(tmp_path, "m.json", {"name": "files", "q": 257, "z": 1, "m": 2, "k": 1, "r": 2, "s": 2, "l": 1,
                                         "n": 5, "matrices": {"A": "a.txt", "B": "b.txt"}})
        assert main(["run", cfg, "--out", str(tmp_path)]) == 0


class TestSweep:
    def test_gamma_rows_match_prediction(self, tmp_path):
        assert main(["sweep", "sweep_gamma", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "sweep_gamma.csv")
        assert len(rows) == 9
        for row in rows:
            assert row["rho"] == row["rho_lemma1"]
            assert row["epsilon"] == "0.0"
        assert sorted({int(r["N"]) for r in rows}) == [14, 24, 34]

    def test_rate_falls_with_z(self, tmp_path):
        assert main(["sweep", "sweep_z", "--out", str(tmp_path), "--seeds", "1"]) == 0
        rows = read_rows(tmp_path / "sweep_z.csv")
        assert [int(r["z"]) for r in rows] == [1, 2, 3]
        rho = [float(r["rho"]) for r in rows]
        assert rho[0] > rho[1] > rho[2]

    def test_single_point_matches_run(self, tmp_path):
        cfg = write(tmp_path, "one.json", {"name": "example2_fast45", "base": "example2_fast45", "seeds": 1,
                                           "first_seed": 2})
        assert main(["sweep", cfg, "--out", str(tmp_path / "s")]) == 0
        assert main(["run", "example2_fast45", "--out", str(tmp_path / "r")]) == 0
        assert (tmp_path / "s" / "example2_fast45.csv").read_text() == (tmp_path / "r" / "example2_fast45_seed2.csv").read_text()

    def test_grid_cap(self, tmp_path):
        cfg = write(tmp_path, "big.json", {"base": {"z": 1, "m": 1, "k": 1, "n": 5}, "grid": {"m": [1, 2], "seed": [1, 2, 3]},
                                           "seeds": 10, "max_points": 50})
        assert main(["sweep", cfg, "--out", str(tmp_path)]) == 2

    def test_dotted_grid_keys(self, tmp_path):
        base = {"z": 1, "m": 2, "k": 1, "r": 4, "s": 2, "l": 2,
                "workers": [{"count": 3, "model": "fixed", "latency": 1.0}, {"count": 2, "model": "fixed", "latency": 1.5}]}
        cfg = write(tmp_path, "g.json", {"name": "g", "base": base, "grid": {"workers.1.latency": [1.5, 10.0]}})
        assert main(["sweep", cfg, "--out", str(tmp_path)]) == 0
        assert [len(read_rows(tmp_path / "g.csv"))] == [2]


class TestAudit:
    @pytest.mark.parametrize("name", ["audit_z1", "audit_z2"])
    def test_passes(self, tmp_path, name):
        assert main(["audit", name, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / f"{name}.json").read_text())
        assert report["passed"] and report["uniformity"]["max_tv"]["exact"] == "0/1"
        assert report["recovery"]["checked"] > 0 and not report["recovery"]["failures"]

    def test_leak_flag(self, tmp_path, capsys):
        assert main(["audit", "audit_z1", "--leak", "--out", str(tmp_path)]) == 4
        assert "PRIVACY VIOLATION" in capsys.readouterr().err


def test_bundled_configs_present():
    assert set(SCENARIOS + ["sweep_gamma", "sweep_z", "audit_z1", "audit_z2"]) <= set(bundled_names())


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rpm3", "run", "example1", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "responses N  3" in proc.stdout
