import io
import json

import jsonschema
import pytest

from conftest import CORPUS
from instsm.cli import run

SCHEMAS = CORPUS.parent / "docs" / "schemas"
DIAG = CORPUS / "diagnostics"
REFINE = ["--concrete", "corpus/system.sm", "--theta", "corpus/theta.map", "--sigma", "corpus/sigma.map"]


@pytest.fixture(autouse=True)
def _in_repo(monkeypatch):
    monkeypatch.chdir(CORPUS.parent)


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def validate(report, name):
    schema = json.loads((SCHEMAS / f"{name}.json").read_text())
    jsonschema.validate(report, schema)


def test_check_ok():
    code, out, _ = cli("check", "corpus/system.sm")
    assert code == 0
    validate(json.loads(out), "check")


@pytest.mark.parametrize("name", sorted(p.name for p in DIAG.glob("*.sm")))
def test_diagnostics_exit_2(name):
    path = f"corpus/diagnostics/{name}"
    code, out, err = cli("check", path)
    assert code == 2
    report = json.loads(out)
    validate(report, "diagnostics")
    assert [d["code"] for d in report["diagnostics"]] == [name.split("_", 1)[0]]
    # human-readable form on stderr
    assert err.startswith(f"{path}:")


def test_simulate_atm_example():
    code, out, _ = cli("simulate", "corpus/atm.sm", "--machine", "atm", "--seed", "0", "--steps", "8",
                       "--stimuli", "card(1),PIN(7)")
    assert code == 0
    report = json.loads(out)
    validate(report, "simulate")
    assert report["final"]["state"] == "Verifying"
    emitted = [e for entry in report["log"] for e in entry.get("emit", [])]
    assert "bank.verify(1,7)" in emitted


def test_simulate_bad_stimulus():
    code, _, err = cli("simulate", "corpus/atm.sm", "--machine", "atm", "--stimuli", "nosuch(1)")
    assert code == 2 and err


def test_refine_corpus():
    code, out, _ = cli("refine", "--abstract", "corpus/psm.sm", *REFINE)
    assert code == 0
    report = json.loads(out)
    validate(report, "refine")
    assert report["result"] == "refines (bounded)"


def test_refine_mutant():
    code, out, _ = cli("refine", "--abstract", "corpus/psm_mutant.sm", *REFINE, "--format", "text")
    assert code == 1
    assert "counterexample" in out


def test_psm():
    code, out, _ = cli("psm", "corpus/system.sm", "--map", "corpus/psm.sm", "--protocol", "psm",
                       "--machine", "system")
    assert code == 0
    validate(json.loads(out), "psm")


@pytest.mark.parametrize("argv, schema", [
    (["dump", "corpus/atm.sm", "--depth", "4", "--pool", "2"], "dump"),
    (["product", "corpus/system.sm", "atm", "bank", "--depth", "4", "--pool", "2"], "product"),
    (["det", "corpus/system.sm", "--depth", "4", "--pool", "2"], "det"),
    (["det", "corpus/atm.sm", "--mode", "syntactic"], "det"),
    (["amalgamate", "corpus/system.sm", "ATM", "BANK"], "amalgamate"),
])
def test_reports_match_schema(argv, schema):
    code, out, _ = cli(*argv)
    assert code in (0, 1)
    validate(json.loads(out), schema)


def test_byte_identical_and_out_file(tmp_path):
    argv = ["simulate", "corpus/system.sm", "--machine", "system", "--steps", "20", "--stimuli", "card(2),PIN(0)"]
    first = cli(*argv)[1]
    assert cli(*argv)[1] == first
    target = tmp_path / "sim.json"
    assert cli(*argv, "--out", str(target))[0] == 0
    assert target.read_text() == first


def test_seed_is_recorded():
    argv = ["simulate", "corpus/system.sm", "--machine", "system", "--steps", "30", "--stimuli",
            "card(2),PIN(0),PIN(1)"]
    for seed in range(3):
        assert json.loads(cli(*argv, "--seed", str(seed))[1])["seed"] == seed


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("INSTSM_CAP", "5")
    code, _, err = cli("dump", "corpus/system.sm")
    assert code == 2
    assert "cap is 5" in err


def test_missing_file():
    code, _, err = cli("check", "corpus/nope.sm")
    assert code == 2 and err
