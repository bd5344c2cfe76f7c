import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import jsonschema

from jordanflow.cli import main
from jordanflow.report import dumps_canonical, load_schema
from systems import random_sl, x4, x5


def write_matrix(path, mat):
    doc = {"n": len(mat), "rows": [[float(x) for x in row] for row in mat]}
    path.write_text(json.dumps(doc))
    return path


def run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "jordanflow.cli", *args],
        capture_output=True,
        text=True,
    )
    return proc


@pytest.fixture
def x4_file(tmp_path):
    return write_matrix(tmp_path / "x4.json", x4(1, 2))


@pytest.fixture
def x5_file(tmp_path):
    return write_matrix(tmp_path / "x5.json", x5(1.0))


class TestDecompose:
    def test_x4_closed_form_factors(self, x4_file, tmp_path):
        out = tmp_path / "out.json"
        code = main(["decompose", str(x4_file), "-o", str(out)])
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["factors"]["E"] == [[0, -2, 0], [2, 0, 0], [0, 0, 0]]
        assert rep["factors"]["H"] == [[-1, 0, 0], [0, -1, 0], [0, 0, 2]]
        assert np.allclose(rep["factors"]["N"], 0)
        assert max(rep["residuals"].values()) < 1e-9
        jsonschema.validate(rep, load_schema("decompose"))

    def test_identity_discrete_trivial_factors(self, tmp_path):
        f = write_matrix(tmp_path / "id.json", np.eye(3))
        out = tmp_path / "out.json"
        assert main(["decompose", str(f), "--time", "discrete", "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        for key in ("e", "h", "u"):
            assert np.allclose(rep["factors"][key], np.eye(3))

    def test_random_sl_self_check(self, tmp_path):
        rng = np.random.default_rng(5)
        f = write_matrix(tmp_path / "g.json", random_sl(3, rng))
        out = tmp_path / "out.json"
        assert main(["decompose", str(f), "--time", "discrete", "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert max(rep["residuals"].values()) < 1e-9
        assert not rep["warnings"]

    def test_parse_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["decompose", str(bad)]) == 2
        bad2 = tmp_path / "bad2.json"
        bad2.write_text('{"n": 3, "rows": [[1, 2], [3, 4]]}')
        assert main(["decompose", str(bad2)]) == 2
        bad3 = tmp_path / "bad3.json"
        bad3.write_text('{"n": 2, "rows": [["1", 2], [3, 4]]}')
        assert main(["decompose", str(bad3)]) == 2

    def test_trace_violation_exit_2(self, tmp_path):
        f = write_matrix(tmp_path / "id.json", np.eye(3))
        assert main(["decompose", str(f), "--time", "continuous"]) == 2

    def test_ill_conditioned_exit_3(self, tmp_path):
        m = np.array([[1.0, 1e8, 0], [0, 1.0 + 1e-6, 0], [0, 0, 1.0]])
        f = write_matrix(tmp_path / "ill.json", m)
        assert main(["decompose", str(f), "--time", "discrete"]) == 3

    def test_determinism_byte_identical(self, x4_file, tmp_path):
        o1, o2 = tmp_path / "a.json", tmp_path / "b.json"
        main(["decompose", str(x4_file), "-o", str(o1)])
        main(["decompose", str(x4_file), "-o", str(o2)])
        assert o1.read_bytes() == o2.read_bytes()

    def test_report_roundtrip_identity(self, x4_file, tmp_path):
        out = tmp_path / "out.json"
        main(["decompose", str(x4_file), "-o", str(out)])
        text = out.read_text()
        reparsed = json.loads(text)
        assert dumps_canonical(reparsed) + "\n" == text


class TestAnalyze:
    def test_x5_projective(self, x5_file, tmp_path):
        out = tmp_path / "out.json"
        code = main(["analyze", str(x5_file), "--flag", "1", "-o", str(out)])
        assert code == 0
        rep = json.loads(out.read_text())
        assert len(rep["components"]) == 2
        cls = rep["classification"]
        assert not cls["structurally_stable"] and not cls["conformal"]
        jsonschema.validate(rep, load_schema("analyze"))

    def test_regular_full_flag_stable(self, tmp_path):
        f = write_matrix(tmp_path / "reg.json", np.diag([3.0, 1.0, -4.0]))
        out = tmp_path / "out.json"
        assert main(["analyze", str(f), "--flag", "1,2", "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["classification"]["structurally_stable"]
        assert len(rep["components"]) == 6
        assert all(c["dim"] == 0 for c in rep["components"])

    def test_simulation_cross_check(self, x4_file, tmp_path):
        out = tmp_path / "out.json"
        code = main(
            ["analyze", str(x4_file), "--flag", "1", "--simulate", "25", "-o", str(out)]
        )
        assert code == 0
        rep = json.loads(out.read_text())
        sim = rep["simulation"]
        assert sim["forward_matches"] == 25 and sim["reverse_matches"] == 25
        assert sim["worst_defect"] < 1e-6

    def test_full_space_flag_exit_2(self, x4_file):
        assert main(["analyze", str(x4_file), "--flag", "1,2,3"]) == 2

    def test_contradiction_exit_4(self, x4_file, monkeypatch):
        import jordanflow.cli as climod

        def broken(flag, comps, filt):
            return 0, 1.0  # defect never below sim_tol

        monkeypatch.setattr(climod, "nearest_component", broken)
        code = main(["analyze", str(x4_file), "--flag", "1", "--simulate", "2"])
        assert code == 4

    def test_classify_flag_file(self, x4_file, tmp_path):
        flag_doc = {"dims": [1], "basis": [[0.0], [0.0], [1.0]]}
        ff = tmp_path / "flag.json"
        ff.write_text(json.dumps(flag_doc))
        out = tmp_path / "out.json"
        code = main(
            ["analyze", str(x4_file), "--flag", "1", "--classify-flag", str(ff), "-o", str(out)]
        )
        assert code == 0
        rep = json.loads(out.read_text())
        fc = rep["flag_classification"]
        att = rep["classification"]["attractor_index"]
        assert fc["cell_index"] == att
        assert fc["recurrent"] and not fc["reorthonormalized"]
        jsonschema.validate(rep, load_schema("analyze"))

    def test_classify_flag_reorthonormalized_warning(self, x4_file, tmp_path):
        flag_doc = {"dims": [1], "basis": [[1.0], [1.0], [0.5]]}
        ff = tmp_path / "flag.json"
        ff.write_text(json.dumps(flag_doc))
        out = tmp_path / "out.json"
        code = main(
            ["analyze", str(x4_file), "--flag", "1", "--classify-flag", str(ff), "-o", str(out)]
        )
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["flag_classification"]["reorthonormalized"]
        assert any("re-orthonormalized" in w for w in rep["warnings"])

    def test_classify_flag_dims_mismatch_exit_2(self, x4_file, tmp_path):
        flag_doc = {"dims": [2], "basis": [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]}
        ff = tmp_path / "flag.json"
        ff.write_text(json.dumps(flag_doc))
        assert (
            main(["analyze", str(x4_file), "--flag", "1", "--classify-flag", str(ff)])
            == 2
        )

    def test_trajectory_csv(self, x4_file, tmp_path):
        out = tmp_path / "out.json"
        traj = tmp_path / "traj.csv"
        code = main(
            [
                "analyze",
                str(x4_file),
                "--flag",
                "1",
                "--trajectory-out",
                str(traj),
                "-o",
                str(out),
            ]
        )
        assert code == 0
        with open(traj) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "x1", "x2", "x3", "dist_to_predicted"]
        dists = [float(r[-1]) for r in rows[1:]]
        assert dists[-1] < 1e-6
        for r in rows[1:]:
            vec = np.array([float(x) for x in r[1:4]])
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


class TestChainOracle:
    def test_unipotent_all_marked(self, tmp_path):
        f = write_matrix(tmp_path / "u.json", np.array([[1.0, 1], [0, 1]]))
        out = tmp_path / "out.json"
        code = main(
            [
                "chain-oracle",
                str(f),
                "--time",
                "discrete",
                "--resolution",
                "400",
                "--eps",
                "0.05",
                "-o",
                str(out),
            ]
        )
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["marked_count"] >= 0.99 * 400
        assert rep["agreement"] >= 0.99
        jsonschema.validate(rep, load_schema("chain_oracle"))

    def test_dimension_too_large_exit_5(self, tmp_path):
        f = write_matrix(tmp_path / "big.json", np.diag([2.0, 1.0, 1.0, 0.5]))
        assert main(["chain-oracle", str(f), "--time", "discrete"]) == 5

    def test_resolution_too_large_exit_5(self, tmp_path):
        f = write_matrix(tmp_path / "u.json", np.array([[1.0, 1], [0, 1]]))
        assert (
            main(
                [
                    "chain-oracle",
                    str(f),
                    "--time",
                    "discrete",
                    "--resolution",
                    "1000000",
                ]
            )
            == 5
        )


class TestFloquetCmd:
    def write_periodic(self, path, doc):
        path.write_text(json.dumps(doc))
        return path

    def test_constant_coefficients(self, tmp_path):
        doc = {
            "T": 1.0,
            "A0": [[float(x) for x in r] for r in x4(1, 2)],
            "harmonics": [],
        }
        f = self.write_periodic(tmp_path / "c.json", doc)
        out = tmp_path / "out.json"
        code = main(["floquet", str(f), "--steps", "512", "-o", str(out)])
        assert code == 0
        rep = json.loads(out.read_text())
        assert rep["m"] == 1
        assert np.allclose(rep["generator"], x4(1, 2), atol=1e-7)
        assert rep["residuals"]["reconstruction"] < 1e-6
        jsonschema.validate(rep, load_schema("floquet"))

    def test_scalar_modulated_closed_form(self, tmp_path):
        x0 = [[float(x) for x in r] for r in x4(1, 2)]
        half = [[0.5 * float(x) for x in r] for r in x4(1, 2)]
        zero = [[0.0] * 3 for _ in range(3)]
        doc = {"T": 1.0, "A0": x0, "harmonics": [{"k": 1, "A": half, "B": zero}]}
        f = self.write_periodic(tmp_path / "s.json", doc)
        out = tmp_path / "out.json"
        assert main(["floquet", str(f), "--flag", "1", "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        # int_0^1 (1 + 0.5 cos(2 pi s)) ds = 1, so X = A0
        assert np.allclose(rep["generator"], x4(1, 2), atol=1e-7)
        assert len(rep["components"]) == 2

    def test_rotation_by_pi_monodromy(self, tmp_path):
        angle = float(np.pi)
        a0 = [[0.0, -angle, 0.0], [angle, 0.0, 0.0], [0.0, 0.0, 0.0]]
        doc = {"T": 1.0, "A0": a0, "harmonics": []}
        f = self.write_periodic(tmp_path / "rot.json", doc)
        out = tmp_path / "out.json"
        assert main(["floquet", str(f), "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["m"] == 2

    def test_no_real_log_exit_6(self, tmp_path, monkeypatch):
        import jordanflow.cli as climod
        from jordanflow import NoRealLog as NRL

        def refuse(fund, pol=None):
            raise NRL("forced")

        monkeypatch.setattr(climod, "floquet_data", refuse)
        doc = {"T": 1.0, "A0": [[0.0, 1.0], [0.0, 0.0]], "harmonics": []}
        f = self.write_periodic(tmp_path / "n.json", doc)
        assert main(["floquet", str(f)]) == 6

    def test_bad_periodic_input_exit_2(self, tmp_path):
        f = self.write_periodic(tmp_path / "bad.json", {"T": -1.0, "A0": [[0.0]]})
        assert main(["floquet", str(f)]) == 2


class TestEntryPoint:
    def test_subprocess_runs(self, tmp_path):
        f = write_matrix(tmp_path / "x4.json", x4(1, 2))
        proc = run_cli(["decompose", str(f)])
        assert proc.returncode == 0
        rep = json.loads(proc.stdout)
        assert rep["schema"] == "jf-schema-1/decompose"
