import csv
import json

import numpy as np
import pytest

from proxatlas.cli import main, parse_box
from proxatlas.catalog import parse_operator_id


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    return json.loads(out)


def without_timestamp(text):
    return "\n".join(line for line in text.splitlines() if '"timestamp"' not in line)


class TestCatalog:
    def test_table(self, capsys):
        code, out, _ = run(capsys, "catalog")
        assert code == 0
        for name in ("soft", "hard", "scaled_soft", "quantizer", "group_lasso", "group_ew", "wglasso", "pew"):
            assert name in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "catalog", "--json")
        assert code == 0 and isinstance(report(out), list)

    def test_single_id(self, capsys):
        code, out, _ = run(capsys, "catalog", "--id", "wglasso", "--json")
        entries = report(out)
        assert code == 0 and [e["id"] for e in entries] == ["wglasso"]


class TestCheck:
    def test_wglasso_refuted(self, capsys):
        code, out, _ = run(capsys, "check", "--op", "wglasso:n=3:window=1:λ=1", "--box", "-3:3",
                           "--samples", "200", "--seed", "7")
        rep = report(out)
        assert code == 1 and rep["verdict"] == "not_prox" and rep["witness"] is not None
        assert rep["seed"] == 7 and rep["schema"] == 1

    def test_group_lasso_convex(self, capsys):
        code, out, _ = run(capsys, "check", "--op", "group_lasso:groups=1,1,2,2:λ=1", "--box", "-3:3")
        rep = report(out)
        assert code == 0 and rep["penalty_class"] == "convex"

    def test_scaled_soft_shift(self, capsys):
        code, out, _ = run(capsys, "check", "--op", "scaled_soft:C=2")
        rep = report(out)
        assert code == 0 and rep["penalty_class"] == "weakly_convex_shift"
        assert rep["shift_coefficient"] == pytest.approx(0.5, abs=1e-9)

    def test_bad_spec_is_usage_error(self, capsys):
        code, _, err = run(capsys, "check", "--op", "soft:λ=oops")
        assert code == 64 and "error" in err

    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["check", "--op", "soft", "--bogus"])
        assert exc.value.code == 64

    def test_bad_box(self, capsys):
        code, _, _ = run(capsys, "check", "--op", "soft", "--box", "1:2:3")
        assert code == 64

    def test_spec_file(self, capsys, tmp_path):
        path = tmp_path / "pew.json"
        path.write_text(json.dumps({"operator": "pew", "lambda": 1.0, "neighborhoods": {
            "n": 3, "weights": [[1, 1, 0], [1, 1, 1], [0, 1, 1]]}}))
        code, out, _ = run(capsys, "check", "--op", str(path), "--box", "-3:3")
        assert code == 1

    def test_bad_spec_file(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"operator": "pew"}))
        code, _, _ = run(capsys, "check", "--op", str(path))
        assert code == 64

    def test_out_file_matches_stdout(self, capsys, tmp_path):
        dest = tmp_path / "sub" / "report.json"
        code, out, _ = run(capsys, "check", "--op", "soft", "--out", str(dest))
        assert code == 0 and dest.read_text() == out

    def test_deterministic_modulo_timestamp(self, capsys, monkeypatch):
        argv = ["check", "--op", "group_ew:groups=1,1,2,2:λ=1", "--box", "-3:3", "--samples", "60", "--seed", "3"]
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        monkeypatch.setenv("PROXATLAS_THREADS", "4")
        _, threaded, _ = run(capsys, *argv)
        assert '"timestamp"' in first
        assert without_timestamp(first) == without_timestamp(second) == without_timestamp(threaded)

    def test_floats_round_trip(self, capsys):
        _, out, _ = run(capsys, "check", "--op", "scaled_soft:C=2")
        assert '"shift_coefficient": 0.5' in out


class TestReconstruct:
    def test_hard_potential_column(self, capsys, tmp_path):
        dest = tmp_path / "hard.csv"
        code, out, _ = run(capsys, "reconstruct", "--op", "hard:λ=2", "--box", "-5:5", "--grid", "1001",
                           "--csv", str(dest))
        assert code == 0 and report(out)["csv"] == str(dest)
        rows = list(csv.DictReader(dest.open()))
        assert len(rows) == 1001
        y = np.array([float(r["y0"]) for r in rows])
        psi = np.array([float(r["psi"]) for r in rows])
        assert np.max(np.abs(psi - np.maximum(y ** 2 / 2 - 2, 0))) < 1e-6

    def test_identity_zero_penalty(self, capsys):
        code, out, _ = run(capsys, "reconstruct", "--op", "identity")
        rep = report(out)
        phi = [row[rep["columns"].index("phi")] for row in rep["data"]]
        assert code == 0 and max(abs(v) for v in phi) < 1e-12

    def test_scaled_soft_penalty_column(self, capsys):
        code, out, _ = run(capsys, "reconstruct", "--op", "scaled_soft:C=2", "--grid", "401")
        rep = report(out)
        x = np.array([row[rep["columns"].index("x0")] for row in rep["data"]])
        phi = np.array([row[rep["columns"].index("phi")] for row in rep["data"]])
        assert code == 0 and np.max(np.abs(phi - (np.abs(x) - x ** 2 / 4))) < 1e-6

    def test_refuses_non_prox(self, capsys):
        code, _, err = run(capsys, "reconstruct", "--op", "wglasso:n=3:window=1:λ=1", "--box", "-3:3")
        assert code == 1 and "--force" in err

    def test_force(self, capsys):
        code, out, _ = run(capsys, "reconstruct", "--op", "wglasso:n=3:window=1:λ=1", "--box", "-3:3",
                           "--samples", "5", "--force")
        assert code == 0 and report(out)["check_verdict"] == "not_prox"


class TestWitness:
    def test_pew_witness(self, capsys):
        code, out, _ = run(capsys, "witness", "--op", "pew:n=3:window=1:λ=1")
        wit = report(out)["witness"]
        assert code == 1 and abs(wit["asym"]) > 0

    def test_disjoint_blocks_partition(self, capsys):
        code, out, _ = run(capsys, "witness", "--op", "wglasso:n=4:blocks=2")
        rep = report(out)
        assert code == 0 and rep["witness"] is None
        assert sorted(map(sorted, rep["partition"]["groups"])) == [[0, 1], [2, 3]]

    def test_non_social_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "witness", "--op", "soft")
        assert code == 64


class TestOracle:
    def test_hard_ties(self, capsys):
        code, out, _ = run(capsys, "oracle", "--op", "hard:λ=2", "--grid", "10001", "--samples", "100")
        rep = report(out)
        assert code == 0 and rep["max_deviation_steps"] <= 1.0
        at_two = [t["set"] for t in rep["ties"] if t["y"] == [2.0]]
        assert at_two == [[[0.0], [2.0]]]

    def test_identity(self, capsys):
        code, out, _ = run(capsys, "oracle", "--op", "identity", "--grid", "2001")
        assert code == 0 and report(out)["max_deviation_steps"] <= 0.5

    def test_scaled_soft(self, capsys):
        code, out, _ = run(capsys, "oracle", "--op", "scaled_soft:C=2", "--grid", "2001")
        assert code == 0 and report(out)["max_deviation_steps"] <= 1.0

    def test_high_dimension_unsupported(self, capsys):
        code, _, _ = run(capsys, "oracle", "--op", "soft:n=3")
        assert code == 3


class TestBregmanCheck:
    def test_left_entropy_identity(self, capsys):
        code, out, _ = run(capsys, "bregman-check", "--op", "identity:n=2", "--gen", "neg_entropy",
                           "--box", "0.1:5")
        assert code == 0 and report(out)["field"] == "grad_h(f(y))"

    def test_linear_rotation_matrix(self, capsys):
        code, _, _ = run(capsys, "bregman-check", "--op", "identity:n=2", "--form", "linear",
                         "--matrix", "0,1;-1,0", "--box", "-3:3")
        assert code == 1

    def test_linear_shape_error(self, capsys):
        code, _, _ = run(capsys, "bregman-check", "--op", "identity:n=2", "--form", "linear",
                         "--matrix", "1,0,0;0,1,0;0,0,1", "--box", "-3:3")
        assert code == 3

    def test_linear_needs_matrix(self, capsys):
        code, _, _ = run(capsys, "bregman-check", "--op", "identity:n=2", "--form", "linear")
        assert code == 64


def test_parse_box_per_coordinate():
    box = parse_box("-1:1,0:2", parse_operator_id("identity:n=2"))
    assert list(box.lower) == [-1.0, 0.0] and list(box.upper) == [1.0, 2.0]
