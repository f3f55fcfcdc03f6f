import json
import subprocess
import sys

import pytest

from varnoether import corpus
from varnoether.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestDerive:
    def test_oscillator(self, capsys):
        code, out, _ = run(capsys, "derive", "oscillator")
        assert code == 0
        assert "gamma: d(q)*d(eps(q)) - omega^2*q*eps(q)" in out.splitlines()
        assert "  q: d(d(eps(q))) + omega^2*eps(q)" in out

    def test_from_file(self, capsys, tmp_path):
        p = tmp_path / "osc.ndl"
        p.write_text(corpus.read("oscillator"))
        code, out, _ = run(capsys, "derive", "--system", str(p), "--format", "structured")
        doc = json.loads(out)
        assert code == 0 and set(doc) == {"system", "gamma", "euler_lagrange", "variational", "mass_matrix"}
        assert doc["mass_matrix"] == [["1"]]

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "derive", str(tmp_path / "nope.ndl"))
        assert code == 2 and "cannot open" in err

    def test_degenerate(self, capsys, tmp_path):
        p = tmp_path / "deg.ndl"
        p.write_text("system deg\ncoords q\nlagrangian q\n")
        code, _, err = run(capsys, "derive", str(p))
        assert code == 3 and "singular mass matrix" in err

    def test_parse_error_has_position(self, capsys, tmp_path):
        p = tmp_path / "bad.ndl"
        p.write_text("system s\ncoords q\nlagrangian d(p)^2\n")
        code, _, err = run(capsys, "derive", str(p))
        assert code == 2 and ":3:" in err and "unknown coordinate p" in err

    def test_out_file(self, capsys, tmp_path):
        out = tmp_path / "d.txt"
        code, stdout, _ = run(capsys, "derive", "pendulum", "--out", str(out))
        assert code == 0 and stdout == ""
        assert "gamma:" in out.read_text()


class TestCheck:
    def test_symmetry(self, capsys):
        code, out, _ = run(capsys, "check", "oscillator", "--generator", "time_translation")
        assert code == 0 and "verdict: SymbolicZero" in out

    def test_non_symmetry(self, capsys):
        code, out, _ = run(capsys, "check", "oscillator", "--generator", "eps_scaling", "--format", "structured")
        rep = json.loads(out)["generators"]["eps_scaling"]
        assert code == 1 and rep["verdict"] == "NonZero" and "witness" in rep

    def test_unknown_generator(self, capsys):
        code, _, err = run(capsys, "check", "oscillator", "--generator", "nope")
        assert code == 2 and "unknown generator" in err


class TestCharge:
    def test_example2(self, capsys):
        code, out, _ = run(capsys, "charge", "example2", "--generator", "translate_q1", "--format", "structured")
        doc = json.loads(out)["charges"]["translate_q1"]
        assert code == 0
        assert doc["classical"] == "m12*d(q2) + m11*d(q1)"
        assert doc["extended"] == "m12*d(eps(q2)) + m11*d(eps(q1)) + m12*d(q2) + m11*d(q1)"

    def test_oscillator_energies(self, capsys):
        code, out, _ = run(capsys, "charge", "oscillator", "--generator", "time_translation")
        assert code == 0
        assert "classical: -(1/2)*d(q)^2 - (1/2)*omega^2*q^2" in out
        assert "extended: -d(q)*d(eps(q)) - omega^2*q*eps(q)" in out

    def test_not_a_symmetry(self, capsys):
        code, out, _ = run(capsys, "charge", "oscillator", "--generator", "eps_scaling")
        assert code == 1 and "not a symmetry" in out

    def test_force(self, capsys):
        code, out, _ = run(capsys, "charge", "oscillator", "--generator", "eps_scaling", "--force", "--format", "structured")
        entry = json.loads(out)["charges"]["eps_scaling"]["extended"]
        assert code == 0 and entry["tag"] == "unverified"


class TestSimulate:
    def test_oscillator_defaults(self, capsys):
        code, out, _ = run(capsys, "simulate", "oscillator", "--format", "structured")
        doc = json.loads(out)
        assert code == 0 and doc["steps"] == 100000
        assert all(d["relative_drift"] < 1e-8 for d in doc["drift"].values())

    def test_tight_tolerance_fails(self, capsys):
        # measured drift of the classical energy is ~1.7e-14 at the defaults
        code, _, _ = run(capsys, "simulate", "oscillator", "--tol", "1e-16", "--t-end", "10")
        assert code == 1

    def test_blowup(self, capsys, tmp_path):
        p = tmp_path / "blow.ndl"
        p.write_text("system blow\ncoords q\nlagrangian (1/2)*d(q)^2 + (1/2)*q^4\n")
        (tmp_path / "blow.json").write_text('{"t0": 0, "q": [1, 1]}')
        code, _, err = run(capsys, "simulate", str(p))
        assert code == 4 and "at step" in err

    def test_csv(self, capsys, tmp_path):
        out = tmp_path / "fp.csv"
        code, _, err = run(capsys, "simulate", "free_particle", "--t-end", "1", "--format", "csv", "--out", str(out), "--generator", "translation")
        lines = out.read_text().splitlines()
        assert code == 0 and "drift:" in err
        assert lines[0] == "t,q_x,v_x,eps_x,w_x,translation.classical,translation.extended"
        assert len(lines) == 1002

    def test_explicit_init(self, capsys, tmp_path):
        init = tmp_path / "i.json"
        init.write_text('{"t0": 0, "q": [0.2]}')
        code, out, _ = run(capsys, "simulate", "pendulum", "--init", str(init), "--t-end", "1", "--format", "structured")
        assert code == 0 and json.loads(out)["steps"] == 1000

    def test_bad_init(self, capsys, tmp_path):
        init = tmp_path / "i.json"
        init.write_text('{"t0": 0, "p": [0.2]}')
        code, _, err = run(capsys, "simulate", "pendulum", "--init", str(init))
        assert code == 2 and "unknown coordinate p" in err

    def test_grid_mismatch(self, capsys):
        code, _, err = run(capsys, "simulate", "oscillator", "--t-end", "1", "--dt", "0.3")
        assert code == 2 and "does not divide" in err

    def test_byte_deterministic(self, capsys):
        a = run(capsys, "simulate", "central", "--t-end", "2")
        b = run(capsys, "simulate", "central", "--t-end", "2")
        assert a == b


class TestUsage:
    def test_no_system(self, capsys):
        assert run(capsys, "derive")[0] == 2

    def test_unknown_command(self, capsys):
        assert run(capsys, "frobnicate")[0] == 2

    def test_csv_only_for_simulate(self, capsys):
        assert run(capsys, "derive", "oscillator", "--format", "csv")[0] == 2

    def test_unknown_property(self, capsys):
        assert run(capsys, "verify", "--only", "nope")[0] == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "varnoether", "derive", "pendulum"], capture_output=True, text=True)
        assert proc.returncode == 0 and "gamma:" in proc.stdout


class TestVerify:
    def test_pendulum_oracle(self, capsys):
        code, out, _ = run(capsys, "verify", "--system", "pendulum", "--only", "oracle")
        lines = out.splitlines()
        assert code == 0
        assert sum("E(" in line for line in lines) == 2
        assert all(line.startswith("PASS pendulum oracle") for line in lines[:-1])

    @pytest.mark.parametrize("prop", ["conservation", "dual_derivation", "negative_control"])
    def test_seed_stable_verdicts(self, capsys, prop):
        a = json.loads(run(capsys, "verify", "--only", prop, "--format", "structured")[1])
        b = json.loads(run(capsys, "verify", "--only", prop, "--format", "structured", "--seed", "7")[1])
        assert [(r["system"], r["passed"]) for r in a["results"]] == [(r["system"], r["passed"]) for r in b["results"]]
