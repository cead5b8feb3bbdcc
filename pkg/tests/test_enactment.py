import pytest

from pippi import codec
from pippi.enactment import (Adapter, AdapterConfig, ConstraintViolation, DoubleBind, EnactmentStore,
                             IntegrityViolation, NotEnabled, is_complete, query)
from pippi.lang import parse
from pippi.model import LateBindingError, resolve

from conftest import corpus, library, resolved, scenario_file
from oracles import (purchase_fuzz, witness_mismatches, witness_permutations_identical)

C1 = {"cID": "c1"}


def judge_and_witness(w):
    judge = Adapter(AdapterConfig("judge", [w], seed=1))
    witness = Adapter(AdapterConfig("witness", [w], seed=1))
    for k, v in (("cID", "c1"), ("J", "judge"), ("W", "witness")):
        judge.store.bind(k, C1, v)
    return judge, witness


def test_request_approval_enabled(witness):
    judge, _ = judge_and_witness(witness)
    names = [e.schema.name for e in judge.enabled(C1)]
    assert names == ["RequestApproval"]
    assert judge.enabled({}) == []


def test_witness_round(witness):
    judge, w = judge_and_witness(witness)
    (ra,) = judge.emit("RequestApproval", C1, {"req": "r"})
    assert ra.recipient == "witness"
    out = w.receive(ra.to_bytes())
    assert out.status == "integrated"
    assert w.store.value("req", C1) == "r"
    assert w.store.value("J", C1) == "judge"  # learned from the envelope
    assert w.store.value("W", C1) == "witness"
    assert sorted(e.schema.name for e in w.enabled(C1)) == ["Approve", "Object"]
    (ap,) = w.emit("Approve", C1, {"sig": "s"})
    assert judge.receive(ap.to_bytes()).status == "integrated"
    assert is_complete(judge.store, witness, C1)
    assert judge.receive(ap.to_bytes()).status == "duplicate"


def test_double_bind_refused(witness):
    judge, _ = judge_and_witness(witness)
    judge.emit("RequestApproval", C1, {"req": "r"})
    with pytest.raises(DoubleBind):
        judge.emit("RequestApproval", C1, {"req": "again"})


def test_not_enabled(witness):
    _, w = judge_and_witness(witness)
    with pytest.raises(NotEnabled):
        w.emit("Approve", C1, {"sig": "s"})


def test_integrity_violation_rejected(witness):
    judge, w = judge_and_witness(witness)
    (ra,) = judge.emit("RequestApproval", C1, {"req": "r"})
    w.receive(ra.to_bytes())
    forged = codec.WireMessage(ra.schema_id, ra.sender, ra.recipient, ra.keys, ("c1", "other")).to_bytes()
    out = w.receive(forged)
    assert out.status == "rejected"
    assert isinstance(out.error, IntegrityViolation)
    assert w.store.value("req", C1) == "r"


def test_unknown_schema_quarantined_then_malformed_rejected(witness):
    _, w = judge_and_witness(witness)
    out = w.receive(b'["Other/M","x","witness",[1],[1]]')
    assert out.status == "quarantined"
    assert w.receive(b"not json").status == "rejected"


def test_store_closure_and_query():
    s = EnactmentStore()
    s.bind("item", {"oID": 1}, "teapot")
    s.bind("package", {"dID": 7}, "box")
    s.associate(("oID", 1), ("dID", 7))
    assert s.closure({"dID": 7}) == {"dID": 7, "oID": 1}
    assert s.value("item", {"dID": 7}) == "teapot"
    assert query(s, "package", {"oID": 1}) == [({"dID": 7}, "box")]
    assert s.conflicts("item", {"dID": 7}, "kettle") == "teapot"
    assert not s.bind("item", {"oID": 1}, "kettle")
    assert s.value("item", {"oID": 1}) == "teapot"


def test_set_parameters_accumulate():
    s = EnactmentStore()
    s.bind("agents", {"ID": 1}, ["a"], is_set=True)
    s.bind("agents", {"ID": 1}, ["b", "a"], is_set=True)
    assert s.value("agents", {"ID": 1}) == ("a", "b")


def test_invertible_tracking_joins_contexts():
    paths = (corpus("invertible.bspl"), corpus("order_delivery.bspl"))
    inv = resolved("Invertible", *paths)
    lib = library(*paths)
    b = Adapter(AdapterConfig("buyer", [inv], library=lib))
    s = Adapter(AdapterConfig("seller", [inv], library=lib))
    ctx = {"oID": "o1"}
    for k, v in (("oID", "o1"), ("B", "buyer"), ("S", "seller")):
        b.store.bind(k, ctx, v)
    (order,) = b.emit("PlaceOrder", ctx, {"item": "teapot", "price": 5})
    s.receive(order.to_bytes())
    (track,) = s.emit("TrackingInfo", ctx)
    b.receive(track.to_bytes())
    dID = track.payload[1]
    assert b.store.closure({"dID": dID})["oID"] == "o1"
    assert b.store.value("item", {"dID": dID}) == "teapot"


def test_local_keys_count_within_scope():
    support = resolved("Support", corpus("support.bspl"))
    a = Adapter(AdapterConfig("a", [support]))
    assert a.new_key("brID", {"ID": "t1"}) == 1
    assert a.new_key("brID", {"ID": "t1"}) == 2
    assert a.new_key("brID", {"ID": "t2"}) == 1
    g1, g2 = a.new_key("ID", {}), a.new_key("ID", {})
    assert g1 != g2 and len(g1) == 32


def test_global_keys_deterministic_per_seed(witness):
    k1 = Adapter(AdapterConfig("x", [witness], seed=3)).new_key("cID", {})
    k2 = Adapter(AdapterConfig("x", [witness], seed=3)).new_key("cID", {})
    k3 = Adapter(AdapterConfig("y", [witness], seed=3)).new_key("cID", {})
    assert k1 == k2 != k3


def test_relation_constraint():
    (r,) = resolve(parse('P(out A, B: role, out key id, out x, out y) {\n'
                         '  out A -> out B: M[out id, out x, out y: int<"10"]\n}'))
    a = Adapter(AdapterConfig("a", [r]))
    with pytest.raises(ConstraintViolation):
        a.emit("M", {}, {"x": 1, "y": "20", "B": "b"})
    assert a.emit("M", {}, {"x": 1, "y": "05", "B": "b"})


def test_late_binding_arity_checked():
    lib = library(scenario_file("proposal_errata.bspl"), corpus("court_wedding.bspl"), corpus("witness.bspl"))
    from pippi.model import resolve_decl
    prop = resolve_decl(lib.get("Proposal"), lib)
    a = Adapter(AdapterConfig("alice", [prop], library=lib))
    with pytest.raises(LateBindingError):
        a.emit("Propose", {}, {"ceremony": "Witness", "R": "alice", "E": "bob", "r1": "bob"})
    assert a.emit("Propose", {}, {"ceremony": "CourtWedding", "R": "alice", "E": "bob", "r1": "bob"})


def test_oracle_agreement():
    assert witness_mismatches() == []


def test_fuzz_small():
    s = purchase_fuzz(runs=60, seed=1)
    assert s["double_bound"] == [] and s["unexplained"] == []
    assert s["violations"] > 0


def test_witness_permutations():
    same, results = witness_permutations_identical()
    assert same and len(results) == 6
