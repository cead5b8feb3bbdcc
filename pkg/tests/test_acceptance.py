"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run alone with ``python tests/test_acceptance.py`` or through pytest.
"""

import io
import os
import random
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pippi import codec  # noqa: E402
from pippi.cli import main as cli  # noqa: E402
from pippi.harness import Scenario, builtin, run_scenario  # noqa: E402
from pippi.lang import parse, print_spec  # noqa: E402
from pippi.metagen import contact_graph, generate, ranks  # noqa: E402
from pippi.model import MessageSchema, SchemaParam  # noqa: E402

from conftest import corpus, read, resolved, scenario_file  # noqa: E402
from oracles import (bank_independence, first_sent, purchase_fuzz, witness_mismatches,  # noqa: E402
                     witness_permutations_identical, wedding_seeds)
from test_metagen import carried_roles, random_cases, skeleton  # noqa: E402

LISTINGS = {
    1: ["witness.bspl"],
    2: ["court_wedding.bspl"],
    3: ["proposal.bspl"],
    4: ["generated.bspl"],
    5: ["self_contained_wedding.bspl"],
    6: ["information_hiding.bspl"],
    7: ["invertible.bspl", "noninvertible.bspl"],
    8: ["support.bspl"],
    9: ["flexible_interface.bspl"],
    13: ["central_registry.bspl"],
    14: ["peer_discovery.bspl"],
}

# files each listing needs alongside it to resolve
COMPANIONS = {
    "court_wedding.bspl": ["witness.bspl"],
    "proposal.bspl": ["court_wedding.bspl", "witness.bspl"],
    "self_contained_wedding.bspl": ["witness.bspl"],
    "invertible.bspl": ["order_delivery.bspl"],
    "noninvertible.bspl": ["order_delivery_scoped.bspl"],
}


def check(name):
    out, err = io.StringIO(), io.StringIO()
    paths = [corpus(name)] + [corpus(c) for c in COMPANIONS.get(name, [])]
    return cli(["check"] + paths, out, err), out.getvalue()


def criterion_1():
    start = time.perf_counter()
    bad = []
    for files in LISTINGS.values():
        for f in files:
            spec = parse(read(corpus(f)))
            text = print_spec(spec)
            if parse(text) != spec or print_spec(parse(text)) != text:
                bad.append(f)
    elapsed = time.perf_counter() - start
    n = sum(len(v) for v in LISTINGS.values())
    return not bad and elapsed < 1.0, f"{n} files, {elapsed * 1000:.0f} ms, non-fixpoints {bad}"


def criterion_2():
    problems = []
    code, out = check("proposal.bspl")
    if code != 1 or not any("E-DEAD-DEPENDENCY" in l and "accept " in l for l in out.splitlines()):
        problems.append(f"proposal exit {code}")
    code, out = check("self_contained_wedding.bspl")
    if code != 1 or "mID" not in out:
        problems.append(f"self-contained exit {code}")
    clean = [f for n in (1, 2, 6, 7, 8, 9, 13, 14) for f in LISTINGS[n]]
    for f in clean:
        code, out = check(f)
        if code != 0:
            errs = [l.split(" ", 3)[2] for l in out.splitlines() if l.startswith("ERROR")]
            problems.append(f"{f} exit {code} {errs}")
    return not problems, "; ".join(problems) or "errata flagged, others clean"


def criterion_3():
    cw = resolved("CourtWedding", corpus("court_wedding.bspl"), corpus("witness.bspl"))
    r = ranks(contact_graph(cw), "R")
    meta = generate(cw, "R")
    (listing,) = parse(read(corpus("generated.bspl"))).declarations
    same = skeleton(meta) == skeleton(listing) and carried_roles(meta) == carried_roles(listing)
    counts = [(len(generate(p, i).messages()), len(roles) - 1) for p, roles, i in random_cases(50)]
    minimal = all(a == b for a, b in counts)
    ok = r == {"R": 0, "J": 1, "E": 1, "W": 2} and len(meta.messages()) == 3 and same and minimal
    return ok, f"ranks {r}, skeleton match {same}, minimal on {len(counts)} random protocols {minimal}"


def criterion_4():
    mismatches = witness_mismatches()
    return not mismatches, f"32 subsets, {len(mismatches)} mismatches {mismatches[:2]}"


def criterion_5():
    s = purchase_fuzz(1000)
    ok = not s["double_bound"] and not s["unexplained"] and s["violations"] > 0
    return ok, (f"{s['runs']} runs, {s['injected']} injected, {s['violations']} integrity violations, "
                f"{len(s['unexplained'])} unexplained, {len(s['double_bound'])} double-bound")


def criterion_6():
    same, results = witness_permutations_identical()
    reports = wedding_seeds(range(1, 21))
    failed = [seed for seed, r in reports.items() if not r.passed]
    return same and not failed, f"{len(results)} permutations identical {same}, wedding failed seeds {failed}"


def criterion_7():
    composed, bare, report = bank_independence()
    bank = report.network.agents["http://bank.com/agent"]
    only_bare = [p.name for p in bank.config.protocols] == ["BankTransfer"]
    same_bytes = composed.history == bare.history
    same_store = composed.equal_state(bare)
    ok = report.passed and only_bare and same_bytes and same_store
    return ok, (f"scenario passed {report.passed}, bank knows {[p.name for p in bank.config.protocols]}, "
                f"bytes identical {same_bytes}, stores equal {same_store}")


def criterion_8():
    bad = []
    for seed, r in wedding_seeds(range(1, 11)).items():
        invite = next((int(l.split(" ")[0]) for l in r.trace
                       if " SENT Proposal/Invite " in l and '","witness",' in l), None)
        ceremony = next((int(l.split(" ")[0]) for l in r.trace if " SENT CourtWedding/" in l), None)
        evow = first_sent(r, "EVow")
        if None in (invite, ceremony, evow) or not (invite > ceremony and invite > evow):
            bad.append((seed, invite, ceremony, evow))
    return not bad, f"witness invited after the first ceremony message on 10 seeds; violations {bad}"


def criterion_9():
    results = {}
    for name in ("paid_purchase", "central_registry", "peer_sharing"):
        r = run_scenario(Scenario.load(builtin(name)))
        results[name] = (r.passed and r.steps <= 10_000, r.steps)
    peer = run_scenario(Scenario.load(builtin("peer_sharing")))
    state = peer.network.policies["alice"].state
    two_hops = state.get("found") == "carol" and len(state.get("asked", [])) == 2
    ok = all(p for p, _ in results.values()) and two_hops
    return ok, f"{results}, peer found {state.get('found')} after asking {state.get('asked')}"


def criterion_10():
    golden_dir = os.path.join(os.path.dirname(__file__), "golden")
    bare = resolved("BankTransfer", scenario_file("payment.bspl")).schema("BankTransfer/Transfer")
    composed = resolved("PaidPurchase", scenario_file("payment.bspl")).schema("BankTransfer/Transfer")
    cases = [
        ("transfer_bare.bin", codec.encode(bare, {"ID": "u", "amount": 100, "C": "Creditor"})),
        ("transfer_composed.bin", codec.encode(composed, {"pID": "u", "payment": 50, "S": "Seller"})),
        ("transfer_addressed.bin", codec.encode(composed, {"pID": "u", "payment": 50, "S": "Seller"},
                                                "buyer", "http://bank.com/agent")),
    ]
    golden_ok = all(_read_bytes(os.path.join(golden_dir, f)) == data for f, data in cases)
    rng = random.Random(10)
    failures = 0
    for i in range(1000):
        names = rng.sample(["ID", "amount", "C", "pID", "x", "y", "item", "vowR", "sig"], rng.randint(1, 6))
        schema = MessageSchema("P/M", "M", "P", "A", False, (("B", False),),
                               tuple(SchemaParam(n, n, "out", rng.random() < 0.3) for n in names))
        named = {n: _random_value(rng) for n in names}
        data = codec.encode(schema, named, f"s{i}", f"r{i}")
        _, got = codec.decode({schema.id: schema}, data)
        if {k: _norm(v) for k, v in got.items()} != {k: _norm(v) for k, v in named.items()}:
            failures += 1
    return golden_ok and failures == 0, f"golden match {golden_ok}, 1000 round trips, {failures} failures"


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def _random_value(rng):
    kind = rng.randrange(6)
    if kind == 0:
        return None
    if kind == 1:
        return rng.randint(-10**9, 10**9)
    if kind == 2:
        return rng.uniform(-1e6, 1e6)
    if kind == 3:
        return "".join(rng.choice("abcé文\"\\ \n") for _ in range(rng.randint(0, 8)))
    if kind == 4:
        return rng.random() < 0.5
    return [_random_value(rng) for _ in range(rng.randint(0, 3))]


def _norm(v):
    return tuple(_norm(x) for x in v) if isinstance(v, (list, tuple)) else v


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def report_line(n, fn):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} ({elapsed:.2f} s)"


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, capsys):
    ok, line = report_line(n, CRITERIA[n - 1])
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    start = time.perf_counter()
    results = [report_line(n, fn) for n, fn in enumerate(CRITERIA, 1)]
    for _, line in results:
        print(line)
    print(f"{sum(ok for ok, _ in results)}/10 criteria pass in {time.perf_counter() - start:.1f} s")
    sys.exit(0 if all(ok for ok, _ in results) else 1)
