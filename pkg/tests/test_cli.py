import shutil
import subprocess
import sys

import numpy as np
import pytest

from cdbs.circuit import BALANCED, CircuitBuilder
from cdbs.cli import choose_backend, main
from cdbs.klm import compile_depth4
from cdbs.textio import dump_circuit, parse_graph, parse_metadata

from factories import DATA_DIR, random_optical


@pytest.fixture
def data(tmp_path):
    for p in DATA_DIR.iterdir():
        shutil.copy(p, tmp_path / p.name)
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(out):
    lines = out.splitlines()
    assert lines[0].startswith("report ") and lines[-1] == "end"
    return dict(ln.split(" ", 1) for ln in lines[1:-1])


class TestCompile:
    # one edge means one nonempty CZ round, so naive8 is prep + 2 + basis
    @pytest.mark.parametrize("pipeline, expected", [("depth4", 4), ("naive8", 4)])
    def test_two_vertex(self, capsys, data, pipeline, expected):
        code, out, _ = run(capsys, "compile", data / "two_vertex.graph", "--pipeline", pipeline, "--format", "text")
        assert code == 0
        rep = report(out)
        assert rep["depth"] == str(expected)
        meta = parse_metadata((data / f"two_vertex.{pipeline}.circuit.meta").read_text())
        assert meta["depth"] == expected
        assert (data / f"two_vertex.{pipeline}.circuit").read_text() == (DATA_DIR / f"two_vertex.{pipeline}.circuit").read_text()

    def test_brickwork_depths(self, capsys, data):
        for pipeline, expected in (("naive8", "8"), ("depth4", "4")):
            code, out, _ = run(capsys, "compile", data / "brick_2x3.graph", "--pipeline", pipeline, "--format", "text")
            assert code == 0 and report(out)["depth"] == expected

    def test_output_path(self, capsys, data, tmp_path):
        target = tmp_path / "out.circuit"
        assert run(capsys, "compile", data / "path3.graph", "-o", target)[0] == 0
        assert target.exists() and (tmp_path / "out.circuit.meta").exists()

    def test_malformed(self, capsys, tmp_path):
        bad = tmp_path / "bad.graph"
        bad.write_text("graph 1\nvertices two\nend\n")
        code, _, err = run(capsys, "compile", bad)
        assert code == 2 and "vertices" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "compile", tmp_path / "nope.graph")[0] == 2

    def test_bad_arguments(self, capsys):
        assert run(capsys, "compile")[0] == 2
        assert run(capsys, "sample", "x.circuit", "--shots", "-1")[0] == 2
        assert run(capsys, "sample", "x.circuit", "--cap", "0")[0] == 2


class TestSample:
    def test_fast_path_logged(self, capsys, data):
        code, out, err = run(capsys, "sample", data / "hom.circuit", "--shots", 200, "--seed", 3)
        assert code == 0 and "fast path" in err
        body = [ln for ln in out.splitlines() if not ln.startswith("#")]
        assert len(body) == 200 and set(body) <= {"2 0", "0 2"}
        assert "# backend shallow" in out

    def test_deep_circuit_uses_fock(self, capsys, data):
        code, out, err = run(capsys, "sample", data / "two_vertex.depth4.circuit", "--shots", 50)
        assert code == 0 and "exact backend" in err and "# depth 4" in out
        assert "# success_probability" in out

    def test_postselected_samples(self, capsys, data):
        code, out, _ = run(capsys, "sample", data / "two_vertex.depth4.circuit", "--shots", 4000, "--seed", 1, "-q")
        assert code == 0
        lines = out.splitlines()
        success = float(next(ln for ln in lines if ln.startswith("# success_probability")).split()[-1])
        # logical success 1/2, one CZ at 2/27, both rails teleported at 1/4 each
        assert success == pytest.approx(0.5 * 2 / 27 / 16, rel=1e-9)
        body = [ln for ln in lines if not ln.startswith("#")]
        frac = body.count("1 0") / len(body)
        assert frac == pytest.approx((1 + np.cos(np.pi / 4)) / 2, abs=0.03)

    def test_zero_shots(self, capsys, data):
        code, out, _ = run(capsys, "sample", data / "hom.circuit", "--shots", 0)
        assert code == 0 and all(ln.startswith("#") for ln in out.splitlines())

    def test_cap_exceeded(self, capsys, data):
        code, _, err = run(capsys, "sample", data / "two_vertex.depth4.circuit", "--cap", 1)
        assert code == 3 and "size" in err

    def test_force_backend(self, capsys, data):
        code, out, err = run(capsys, "sample", data / "hom.circuit", "--force-backend", "fock", "--shots", 10)
        assert code == 0 and "# backend fock" in out

    def test_deterministic(self, capsys, data):
        a = run(capsys, "sample", data / "phases.circuit", "--seed", 9, "-q")
        b = run(capsys, "sample", data / "phases.circuit", "--seed", 9, "-q")
        assert a == b and a[0] == 0


class TestVerify:
    @pytest.mark.parametrize("graph", ["two_vertex.graph", "path3.graph"])
    def test_pass(self, capsys, data, graph):
        code, out, _ = run(capsys, "verify", data / graph, "--format", "text")
        rep = report(out)
        assert code == 0 and rep["verdict"] == "PASS"
        assert float(rep["max_tvd"]) < 1e-9

    def test_corrupted_circuit_fails(self, capsys, data):
        text = (data / "two_vertex.depth4.circuit").read_text().replace("postselect 0=1", "postselect 0=0")
        bad = data / "corrupt.circuit"
        bad.write_text(text)
        code, out, _ = run(capsys, "verify", data / "two_vertex.graph", "--circuit", bad, "--format", "text")
        rep = report(out)
        assert code == 4 and rep["verdict"] == "FAIL"
        assert {"outcome.0", "outcome.1"} <= set(rep)
        assert "depth4=" in rep["outcome.0"] and "qubit=" in rep["outcome.0"]

    def test_skip_over_cap(self, capsys, data):
        code, out, _ = run(capsys, "verify", data / "two_vertex.graph", "--cap", 1, "--format", "text")
        rep = report(out)
        assert code == 3 and rep["verdict"] == "SKIP"
        assert "skip.naive8" in rep and "skip.depth4" in rep


class TestAnalyze:
    def test_identity(self, capsys, tmp_path):
        p = tmp_path / "id.circuit"
        p.write_text(dump_circuit(CircuitBuilder(4, [1, 0, 1, 0]).build()))
        code, out, _ = run(capsys, "analyze", p, "--format", "text")
        rep = report(out)
        assert code == 0 and rep["sparsity"] == "1" and rep["depth"] == "0"

    def test_depth4_artifact(self, capsys, data):
        code, out, _ = run(capsys, "analyze", data / "two_vertex.depth4.circuit", "--format", "text")
        rep = report(out)
        assert rep["depth"] == "4" and int(rep["sparsity"]) <= 16
        assert rep["sparsity_within_bound"] == "yes"
        assert rep["gates_per_layer"] == "4 2 2 3"

    def test_random_depth2(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        for i in range(10):
            p = tmp_path / f"r{i}.circuit"
            p.write_text(dump_circuit(random_optical(rng, 8, 2, 2)))
            rep = report(run(capsys, "analyze", p, "--format", "text")[1])
            assert int(rep["sparsity"]) <= 4

    def test_plain_table(self, capsys, data):
        code, out, _ = run(capsys, "analyze", data / "hom.circuit")
        assert code == 0 and out.splitlines()[0].split() == ["modes", "2"]


def test_routing_rule():
    hom = CircuitBuilder(2, [1, 1]).gate(0, 0, 1, BALANCED).build()
    assert choose_backend(hom) == "shallow"
    art = compile_depth4(parse_graph((DATA_DIR / "two_vertex.graph").read_text()))
    assert choose_backend(art.circuit) == "fock"
    assert choose_backend(CircuitBuilder(2, [2, 0]).build()) == "fock"
    assert choose_backend(art.circuit, "shallow") == "shallow"


def test_module_entry_point(data):
    r = subprocess.run(
        [sys.executable, "-m", "cdbs", "analyze", str(data / "hom.circuit"), "--format", "text"],
        capture_output=True, text=True, check=False,
    )
    assert r.returncode == 0 and r.stdout.startswith("report analyze")
