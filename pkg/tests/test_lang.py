import glob
import os
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pippi.lang import (AmbiguousAlias, Or, ParseError, QualifiedName,
                        UnknownPrefix, aliases, expand_names, parse,
                        print_spec, to_json)

from conftest import CORPUS, SCENARIOS, corpus, read

ALL_FILES = sorted(glob.glob(os.path.join(CORPUS, "*.bspl")) + glob.glob(os.path.join(SCENARIOS, "*.bspl")))


@pytest.mark.parametrize("path", ALL_FILES, ids=os.path.basename)
def test_round_trip_is_fixpoint(path):
    spec = parse(read(path))
    text = print_spec(spec)
    assert parse(text) == spec
    assert print_spec(parse(text)) == text


def test_witness_shape():
    spec = parse(read(corpus("witness.bspl")))
    (w,) = spec.declarations
    assert str(w.name) == "Witness"
    roles = [p for p in w.public.leaves() if p.type_name == "role"]
    assert [p.ident for p in roles] == ["J", "W"]
    key = [p for p in w.public.leaves() if p.is_key]
    assert [p.ident for p in key] == ["cID"]
    assert any(isinstance(c, Or) for c in w.public.clauses)
    assert [p.ident for p in w.privates] == ["req"]
    assert [str(m.name) for m in w.messages()] == ["RequestApproval", "Approve", "Object"]


def test_information_hiding_reference_arguments():
    spec = parse(read(corpus("information_hiding.bspl")))
    assert len(spec.declarations) == 2
    purchase = spec.get("Purchase")
    (ref,) = purchase.references()
    assert str(ref.target) == "OpaqueOffer"
    assert len(list(ref.arguments.leaves())) == 5


def test_abbreviations_register_aliases():
    spec = parse(read(corpus("court_wedding.bspl")))
    table = aliases(spec.declarations[0])
    assert table["J"] == "Judge"
    assert table["W"] == "Witness"
    codes = [w.code for w in spec.warnings]
    assert "W-SHARED-STEM" in codes


def test_group_shares_adornment():
    (d,) = parse("P(in A, B: role, in key id, out x, y) { A -> B: M[in id, out x, out y] }").declarations
    x, y = [p for p in d.public.leaves() if p.ident in ("x", "y")]
    assert x.adornment == y.adornment == "out"
    assert [p.type_name for p in d.public.leaves()][:2] == ["role", "role"]


def test_missing_comma_warns():
    spec = parse(read(corpus("invertible.bspl")))
    assert [w.code for w in spec.warnings] == ["W-MISSING-COMMA"]


def test_prefix_expansion():
    spec = parse("ex: http://example.org/\nex:P(in A, B: role, in key id) {\n  A -> B: M[in id]\n}\n")
    assert spec.preamble == (("ex", "http://example.org/"),)
    assert str(expand_names(spec).declarations[0].name) == "http://example.org/P"


def test_unknown_prefix():
    spec = parse("P(in A, B: role, in key id) { Q(A, B, id) }")
    (d,) = spec.declarations
    (ref,) = d.references()
    ref = replace(ref, target=QualifiedName("Q", prefix="zz"))
    spec = replace(spec, declarations=(replace(d, body=(ref,)),))
    with pytest.raises(UnknownPrefix):
        expand_names(spec)


def test_ambiguous_alias():
    (d,) = parse("P(in (A)lice, (A)nne: role, in key id) { A -> A: M[in id] }").declarations
    with pytest.raises(AmbiguousAlias):
        aliases(d)


@pytest.mark.parametrize("text", ["", "P(", "P(in A: role) { A -> : M[] }", "P(in A, B: role) { A -> B M[in x] }"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.line >= 1 and info.value.column >= 1


def test_json_dump_is_stable():
    spec = parse(read(corpus("witness.bspl")))
    assert to_json(spec) == to_json(parse(print_spec(spec)))


names = st.sampled_from(["a", "b", "c", "d", "e", "f"])


@st.composite
def protocols(draw):
    params = draw(st.lists(names, min_size=1, max_size=4, unique=True))
    ads = [draw(st.sampled_from(["in", "out", "nil", "any", "opt"])) for _ in params]
    public = ", ".join(f"{a} {p}" for a, p in zip(ads, params))
    n = draw(st.integers(1, 3))
    msgs = []
    for i in range(n):
        sub = draw(st.lists(st.sampled_from(params), min_size=1, unique=True))
        items = ", ".join(f"{draw(st.sampled_from(['in', 'out', 'nil']))} {p}" for p in sub)
        msgs.append(f"  A -> B: M{i}[in id, {items}]")
    return f"P(in A, B: role, in key id, {public}) {{\n" + "\n".join(msgs) + "\n}\n"


@settings(max_examples=200, deadline=None)
@given(protocols())
def test_random_round_trip(text):
    spec = parse(text)
    assert parse(print_spec(spec)) == spec
