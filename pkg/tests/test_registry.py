import json

import pytest

from pippi.registry import Registry, UnknownContact, first_candidate

from conftest import scenario_file


def test_contacts_file_shape():
    reg = Registry.load(scenario_file("preconfigured_contacts.json"))
    assert reg.candidates("Seller") == ["http://storeA.com/agent", "http://storeB.com/agent"]
    assert reg.candidates("Bank") == ["http://bank.com/agent"]
    assert len(reg) == 3


def test_from_contacts_accepts_single_address():
    reg = Registry.from_contacts({"Judge": "judge"})
    assert "judge" in reg
    assert first_candidate(reg, "Judge") == "judge"
    assert first_candidate(None, "Judge") is None


def test_protocol_role_matching():
    reg = Registry()
    reg.observe_introduction("a", "Tutoring", "Tutor")
    reg.observe_introduction("b", "Tutoring")
    assert reg.candidates("Tutoring", "Tutor") == ["a", "b"]
    assert reg.candidates("Tutoring", "Student") == ["b"]
    assert reg.candidates("Tutoring", exclude=("b",)) == ["a"]


def test_history_ranks_candidates():
    reg = Registry.from_contacts({"Seller": ["s1", "s2"]})
    reg.record_outcome("s2", "Purchase", "S", "k1", "COMPLETE")
    assert reg.candidates("Seller") == ["s2", "s1"]
    with pytest.raises(UnknownContact):
        reg.record_outcome("nobody", "Purchase", "S", "k", "COMPLETE")


def test_snapshot_is_json():
    reg = Registry()
    reg.observe_introduction("a", "P", "R").observe_introduction("a", "P")
    snap = reg.snapshot()
    assert json.loads(json.dumps(snap)) == snap
    assert snap["a"]["capabilities"] == [["P", None], ["P", "R"]]
