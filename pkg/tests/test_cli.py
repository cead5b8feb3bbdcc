import io
import json

import pytest

from pippi.cli import main

from conftest import corpus, scenario_file


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_check_clean():
    code, out, _ = run("check", corpus("witness.bspl"))
    assert code == 0 and out == ""


def test_check_semantic_error():
    code, out, _ = run("check", corpus("proposal.bspl"), corpus("court_wedding.bspl"), corpus("witness.bspl"))
    assert code == 1
    assert "ERROR proposal.bspl:7:3 E-DEAD-DEPENDENCY" in out


def test_check_syntax_error(tmp_path):
    bad = tmp_path / "bad.bspl"
    bad.write_text("P(in A")
    code, out, _ = run("check", str(bad))
    assert code == 2 and "E-SYNTAX" in out


def test_check_json():
    code, out, _ = run("check", corpus("court_wedding.bspl"), corpus("witness.bspl"), "--format", "json")
    assert code == 0
    assert {d["code"] for d in json.loads(out)} == {"W-SHARED-STEM", "W-UNDECLARED"}


def test_check_missing_file_is_usage_error():
    assert run("check", "/no/such.bspl")[0] == 64


def test_parse_json():
    code, out, _ = run("parse", corpus("witness.bspl"), "--format", "json")
    assert code == 0 and json.loads(out)["declarations"][0]["name"]["local"] == "Witness"


def test_meta():
    code, out, err = run("meta", "CourtWedding", corpus("court_wedding.bspl"), corpus("witness.bspl"),
                         "--initiator", "R")
    assert code == 0
    assert "r2 -> out r3: InviteW" in out
    assert "WARNING" in err


def test_meta_override_and_cycle():
    code, out, _ = run("meta", "CourtWedding", "--initiator", "R", "--override", "W=R")
    assert code == 0 and "r0 -> out r3: InviteW" in out
    code, _, err = run("meta", "CourtWedding", "--initiator", "R", "--override", "J=W", "--override", "W=J")
    assert code == 1 and "cycle" in err


def test_meta_unreachable(tmp_path):
    f = tmp_path / "p.bspl"
    f.write_text("P(in A, B, C: role, in key id, out x) {\n  A -> B: M[in id, out x]\n}\n")
    code, _, err = run("meta", "P", str(f), "--initiator", "A")
    assert code == 1 and "cannot be reached" in err


def test_run_scenario():
    code, out, err = run("run", "witness", "--seed", "2")
    assert code == 0 and " SENT Witness/RequestApproval " in out


def test_run_step_limit():
    assert run("run", "wedding", "--step-limit", "2")[0] == 3


def test_run_unknown():
    assert run("run", "no-such-scenario")[0] == 64


def test_encode_decode():
    code, out, _ = run("encode", "BankTransfer/Transfer", "u", "100", "Creditor")
    assert code == 0
    assert out.strip() == '["BankTransfer/Transfer","","",["u"],["u",100,"Creditor"]]'
    code, out, _ = run("decode", out.strip(), "--spec", scenario_file("payment.bspl"))
    assert code == 0
    assert json.loads(out)["payload"] == {"ID": "u", "amount": 100, "C": "Creditor"}


def test_codec_errors():
    assert run("encode", "Transfer", "ID=u")[0] == 1
    assert run("encode", "Nope/Nothing")[0] == 1
    assert run("decode", "[1,")[0] == 1


def test_bad_arguments():
    assert run("frobnicate")[0] == 64
    assert run()[0] == 64
