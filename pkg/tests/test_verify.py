import json
import time

import pytest

from varnoether.cli import main
from varnoether.verify import PROPERTIES, SuiteConfig, is_linear, load_corpus, run_suite


def test_default_verify_passes_quickly(capsys):
    start = time.perf_counter()
    code = main(["verify", "--format", "structured"])
    elapsed = time.perf_counter() - start
    doc = json.loads(capsys.readouterr().out)
    failed = [r for r in doc["results"] if not r["passed"]]
    assert code == 0 and not failed
    assert {r["property"] for r in doc["results"]} == set(PROPERTIES)
    assert {r["system"] for r in doc["results"]} == {"free_particle", "oscillator", "pendulum", "example2", "central"}
    assert elapsed < 60.0


def test_linearity_classification(bundled):
    assert is_linear(bundled["oscillator"].system)
    assert is_linear(bundled["free_particle"].system)
    assert not is_linear(bundled["pendulum"].system)
    assert not is_linear(bundled["central"].system)


def test_unknown_property():
    with pytest.raises(KeyError):
        run_suite(load_corpus(["oscillator"]), ["nope"])


def test_results_in_canonical_order():
    systems = load_corpus(["pendulum", "oscillator"])
    res = run_suite(systems, ["el_recovery", "mass_symmetry"], SuiteConfig())
    assert [(r.system, r.prop) for r in res] == [
        ("pendulum", "el_recovery"),
        ("pendulum", "mass_symmetry"),
        ("oscillator", "el_recovery"),
        ("oscillator", "mass_symmetry"),
    ]
