import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pippi import codec
from pippi.model import MessageSchema, SchemaParam

from conftest import resolved, scenario_file

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def golden(name):
    with open(os.path.join(GOLDEN, name), "rb") as f:
        return f.read()


def bare():
    return resolved("BankTransfer", scenario_file("payment.bspl")).schema("BankTransfer/Transfer")


def composed():
    return resolved("PaidPurchase", scenario_file("payment.bspl")).schema("BankTransfer/Transfer")


def test_bare_transfer_golden():
    assert codec.encode(bare(), {"ID": "u", "amount": 100, "C": "Creditor"}) == golden("transfer_bare.bin")


def test_composed_transfer_golden():
    t = composed()
    assert t.names == ["pID", "payment", "S"]
    assert codec.encode(t, {"pID": "u", "payment": 50, "S": "Seller"}) == golden("transfer_composed.bin")
    assert codec.encode(t, {"pID": "u", "payment": 50, "S": "Seller"}, "buyer", "http://bank.com/agent") \
        == golden("transfer_addressed.bin")


def test_composed_equals_bare_for_equal_values():
    a = codec.encode(bare(), {"ID": "u", "amount": 50, "C": "Seller"})
    b = codec.encode(composed(), {"pID": "u", "payment": 50, "S": "Seller"})
    assert a == b


def test_decode_uses_receiver_names():
    data = golden("transfer_composed.bin")
    schema, named = codec.decode(codec.schema_table([bare()]), data)
    assert named == {"ID": "u", "amount": 50, "C": "Seller"}


def test_errors():
    t = bare()
    table = codec.schema_table([t])
    with pytest.raises(codec.MissingParameter):
        codec.encode(t, {"ID": "u", "amount": 1})
    with pytest.raises(codec.UnknownParameter):
        codec.encode(t, {"ID": "u", "amount": 1, "C": "c", "zz": 1})
    with pytest.raises(codec.UnknownSchema):
        codec.decode(table, b'["Nope/X","","",[],[]]')
    with pytest.raises(codec.ArityMismatch):
        codec.decode(table, b'["BankTransfer/Transfer","","",["u"],["u",1]]')
    for bad in (b"", b"[1,2", b'{"a":1}', b'["a","b","c",[],{}]', b"\xff\xfe"):
        with pytest.raises(codec.MalformedEncoding):
            codec.decode(table, bad)


def test_opt_defaults_to_null():
    s = MessageSchema("P/M", "M", "P", "A", False, (("B", False),),
                      (SchemaParam("id", "id", "in", True), SchemaParam("x", "x", "opt")))
    assert codec.encode(s, {"id": 1}) == b'["P/M","","",[1],[1,null]]'


scalars = st.one_of(st.none(), st.booleans(), st.integers(-10**12, 10**12),
                    st.floats(allow_nan=False, allow_infinity=False), st.text(max_size=12))
values = st.one_of(scalars, st.lists(scalars, max_size=4))
names = st.lists(st.sampled_from(["ID", "amount", "C", "pID", "x", "y", "item", "vowR"]), min_size=1, max_size=6,
                 unique=True)


@st.composite
def typed_messages(draw):
    params = draw(names)
    keys = draw(st.lists(st.booleans(), min_size=len(params), max_size=len(params)))
    payload = tuple(SchemaParam(n, n, "out", k) for n, k in zip(params, keys))
    schema = MessageSchema("P/M", "M", "P", "A", False, (("B", False),), payload)
    named = {n: draw(values) for n in params}
    return schema, named, draw(st.text(max_size=8)), draw(st.text(max_size=8))


def _norm(v):
    return tuple(_norm(x) for x in v) if isinstance(v, (list, tuple)) else v


@settings(max_examples=1000, deadline=None)
@given(typed_messages())
def test_decode_encode_identity(case):
    schema, named, sender, recipient = case
    data = codec.encode(schema, named, sender, recipient)
    got_schema, got = codec.decode({schema.id: schema}, data)
    assert got_schema is schema
    assert {k: _norm(v) for k, v in got.items()} == {k: _norm(v) for k, v in named.items()}
    msg = codec.WireMessage.from_bytes(data)
    assert (msg.sender, msg.recipient) == (sender, recipient)
    assert msg.to_bytes() == data
