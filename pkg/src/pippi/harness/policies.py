"""Agent decision logic for simulated runs.

A rule table names a message to send, an optional condition, and how to
fill the parameters the message binds. Anything a table cannot express
is written as a named policy function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..enactment import Adapter, EnactmentError, Enablement
from ..registry import first_candidate


class PolicyError(Exception):
    pass


@dataclass
class Rule:
    send: str
    when: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    once: bool = True

    @classmethod
    def from_data(cls, data: dict) -> "Rule":
        unknown = set(data) - {"send", "when", "values", "once"}
        if unknown:
            raise PolicyError(f"unknown rule fields {sorted(unknown)}")
        return cls(data["send"], dict(data.get("when") or {}), dict(data.get("values") or {}),
                   bool(data.get("once", True)))


class Policy:
    """Called once per tick; returns the number of messages emitted."""

    state: dict

    def tick(self, adapter: Adapter) -> int:
        raise NotImplementedError


def _matches(rule, e: Enablement) -> bool:
    return rule.send in (e.schema.id, e.schema.name)


class Evaluator:
    def __init__(self, adapter: Adapter, ctx: dict, values: Optional[dict] = None, exclude=()):
        self.adapter = adapter
        self.ctx = ctx
        self.values = values if values is not None else {}
        # never offer an agent to the agents the message goes to
        self.exclude = set(exclude) | {adapter.address}

    def lookup(self, name):
        if name in self.values:
            return self.values[name]
        return self.adapter.store.value(name, self.ctx)

    def __call__(self, expr, param=None):
        a = self.adapter
        if isinstance(expr, list):
            return [self(x, param) for x in expr]
        if not isinstance(expr, str) or not expr.startswith("$"):
            return expr
        head, _, arg = expr[1:].partition(":")
        if head == "self":
            return a.address
        if head == "new":
            n = a.counters.get(("$new", param), 0) + 1
            a.counters[("$new", param)] = n
            return f"{param or 'v'}-{a.address}-{n}"
        if head == "value":
            return self.lookup(arg)
        if head == "contact":
            label = self(arg) if arg.startswith("$") else arg
            return first_candidate(a.config.contacts, label, None, exclude={a.address})
        if head == "candidates":
            label = self(arg) if arg.startswith("$") else arg
            reg = a.config.contacts
            return reg.candidates(label, None, self.exclude) if reg is not None else []
        raise PolicyError(f"unknown value expression {expr}")

    def condition(self, when: dict) -> bool:
        for kind, arg in when.items():
            if kind == "bound":
                if any(self.lookup(n) is None for n in _names(arg)):
                    return False
            elif kind == "unbound":
                if any(self.lookup(n) is not None for n in _names(arg)):
                    return False
            elif kind == "in":
                for name, allowed in arg.items():
                    if self.lookup(name) not in [self(x) for x in allowed]:
                        return False
            elif kind == "not_in":
                for name, banned in arg.items():
                    if self.lookup(name) in [self(x) for x in banned]:
                        return False
            elif kind == "min_candidates":
                label = self(arg["label"])
                reg = self.adapter.config.contacts
                found = reg.candidates(label, None, self.exclude) if reg else []
                if len(found) < int(arg.get("count", 1)):
                    return False
            else:
                raise PolicyError(f"unknown condition {kind}")
        return True


def _names(arg):
    return [arg] if isinstance(arg, str) else list(arg)


class RulePolicy(Policy):
    def __init__(self, rules):
        self.rules = [r if isinstance(r, Rule) else Rule.from_data(r) for r in rules]
        self.fired = set()
        self.state = {}

    def tick(self, adapter: Adapter) -> int:
        for ctx in adapter.contexts():
            for e in adapter.enabled(ctx):
                for i, rule in enumerate(self.rules):
                    if not _matches(rule, e):
                        continue
                    mark = (i, frozenset(e.context.items()))
                    if rule.once and mark in self.fired:
                        continue
                    if self.fire(adapter, rule, e):
                        self.fired.add(mark)
                        return 1
        return 0

    def fire(self, adapter, rule, e) -> bool:
        recipients = {adapter.store.value(r, e.context) for r, _ in e.schema.recipients}
        ev = Evaluator(adapter, e.context, exclude=recipients - {None})
        if not ev.condition(rule.when):
            return False
        values = {}
        ev.values = values
        for name, expr in rule.values.items():
            values[name] = ev(expr, name)
        key_names = {p.name for p in adapter.table.key_params(e.schema)}
        for name in e.outs:
            if name in values or name in key_names or name == e.schema.sender:
                continue
            values[name] = ev("$new", name)
        if any(v is None for v in values.values()):
            return False
        wanted = set(e.outs) | {p.name for p in e.schema.payload if p.adornment == "opt"}
        values = {k: v for k, v in values.items() if k in wanted or k in key_names}
        try:
            adapter.emit(e.schema, e.context, values)
        except EnactmentError:
            return False
        return True


class PeerSharing(Policy):
    """Query known peers, then the peers they introduce, until one offers the wanted protocol.

    A peer that supports the protocols it is asked about answers with
    itself; otherwise it answers with the peers it knows.
    """

    def __init__(self, wants=None, supports=(), label="peer", schema="Query", answer="Introduce"):
        self.wants = wants
        self.supports = set(supports)
        self.label = label
        self.query = schema
        self.answer = answer
        self.asked: list = []
        self.pending = None
        self.state = {"found": None, "asked": self.asked}

    def tick(self, adapter: Adapter) -> int:
        sent = self._answer(adapter)
        if sent:
            return sent
        if not self.wants or self.state["found"]:
            return 0
        if self.pending is not None:
            ctx, peer = self.pending
            got = adapter.store.value("neighbors", ctx)
            if got is None:
                return 0
            self.pending = None
            if peer in got:
                self.state["found"] = peer
                adapter.config.contacts.entry(peer).attributes["offers"] = self.wants
                return 0
            for n in got:
                if n != adapter.address:
                    adapter.config.contacts.observe_introduction(n, self.label)
        reg = adapter.config.contacts
        for peer in reg.candidates(self.label, None, {adapter.address}):
            if peer in self.asked:
                continue
            msgs = adapter.emit(self.query, {}, {"P2": peer, "protocols": [self.wants]})
            key = adapter.table.key_params(adapter.table.find(self.query))[0].name
            self.pending = ({key: msgs[0].keys[0]}, peer)
            self.asked.append(peer)
            return 1
        return 0

    def _answer(self, adapter):
        for ctx in adapter.contexts()[1:]:
            for e in adapter.enabled(ctx):
                if e.schema.name != self.answer:
                    continue
                asked = set(e.ins.get("protocols") or ())
                if asked and asked <= self.supports:
                    neighbors = [adapter.address]
                else:
                    asker = adapter.store.value("P1", e.context)
                    neighbors = [p for p in adapter.config.contacts.candidates(self.label, None, {adapter.address})
                                 if p != asker]
                adapter.emit(e.schema, e.context, {"neighbors": neighbors})
                return 1
        return 0


NAMED: dict[str, Callable[..., Policy]] = {
    "rules": lambda rules=(), **_: RulePolicy(rules),
    "peer_sharing": PeerSharing,
}


def make_policy(data) -> Policy:
    if data is None:
        return RulePolicy([])
    if isinstance(data, list):
        return RulePolicy(data)
    data = dict(data)
    name = data.pop("name", "rules")
    if name not in NAMED:
        raise PolicyError(f"unknown policy {name}")
    return NAMED[name](**data)
