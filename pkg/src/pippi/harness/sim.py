"""Deterministic asynchronous message delivery between simulated agents."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..codec import CodecError, WireMessage
from ..enactment import Adapter, EnactmentStore, is_complete
from .policies import Policy, RulePolicy


class CorruptTrace(Exception):
    pass


@dataclass
class Event:
    seq: int
    agent: str
    kind: str  # SENT, RECV, QUAR, COMPLETE
    schema: str
    keys: dict
    wire: Optional[bytes]

    def line(self) -> str:
        keys = json.dumps(self.keys, sort_keys=True, separators=(",", ":"))
        wire = self.wire.decode("utf-8") if self.wire is not None else "-"
        return f"{self.seq} {self.agent} {self.kind} {self.schema} {keys} {wire}"

    @classmethod
    def parse(cls, line: str) -> "Event":
        try:
            seq, agent, kind, schema, rest = line.rstrip("\n").split(" ", 4)
            keys, end = json.JSONDecoder().raw_decode(rest)
            wire = rest[end:].strip()
        except ValueError as e:
            raise CorruptTrace(f"unreadable trace line: {line!r}") from e
        if kind not in ("SENT", "RECV", "QUAR", "COMPLETE"):
            raise CorruptTrace(f"unknown event kind {kind}")
        return cls(int(seq), agent, kind, schema, keys, None if wire == "-" else wire.encode("utf-8"))


@dataclass
class Tracked:
    """A protocol whose completion is reported for an agent."""

    agent: str
    resolved: object


class SimNetwork:
    def __init__(self, seed=0, reorder=True, max_delay=8):
        self.rng = random.Random(seed)
        self.reorder = reorder
        self.max_delay = max_delay
        self.agents: dict = {}
        self.policies: dict = {}
        self.inflight: list = []  # (sent step, order, recipient, bytes)
        self.events: list = []
        self.steps = 0
        self.tracked: list = []
        self.completed: set = set()
        self._order = 0

    def add(self, adapter: Adapter, policy: Optional[Policy] = None):
        self.agents[adapter.address] = adapter
        self.policies[adapter.address] = policy or RulePolicy([])
        adapter.listeners.append(self._listener(adapter))

    def track(self, agent, resolved):
        self.tracked.append(Tracked(agent, resolved))

    def _listener(self, adapter) -> Callable:
        def on_event(kind, schema_id, raw, keyctx):
            self._log(adapter.address, kind, schema_id, keyctx, raw)
            if kind == "SENT":
                recipient = WireMessage.from_bytes(raw).recipient
                self.inflight.append((self.steps, self._order, recipient, raw))
                self._order += 1
        return on_event

    def _log(self, agent, kind, schema, keys, raw):
        self.events.append(Event(len(self.events), agent, kind, schema, _plain_keys(keys), raw))

    def send_external(self, raw: bytes):
        """Inject a message as if some agent had sent it."""
        recipient = WireMessage.from_bytes(raw).recipient
        self.inflight.append((self.steps, self._order, recipient, raw))
        self._order += 1

    def _pick(self):
        if not self.inflight:
            return None
        if not self.reorder:
            return min(range(len(self.inflight)), key=lambda i: self.inflight[i][1])
        overdue = [i for i, m in enumerate(self.inflight) if self.steps - m[0] >= self.max_delay]
        if overdue:
            return min(overdue, key=lambda i: self.inflight[i][1])
        return self.rng.randrange(len(self.inflight))

    def deliver(self) -> bool:
        i = self._pick()
        if i is None:
            return False
        _, _, recipient, raw = self.inflight.pop(i)
        agent = self.agents.get(recipient)
        if agent is not None:
            agent.receive(raw)
        return True

    def step(self) -> list:
        """Deliver one message, then let every agent act once."""
        start = len(self.events)
        self.deliver()
        for addr, adapter in self.agents.items():
            self.policies[addr].tick(adapter)
        self._completions()
        self.steps += 1
        return self.events[start:]

    def _completions(self):
        for t in self.tracked:
            adapter = self.agents[t.agent]
            for ctx in _contexts(adapter.store, t.resolved):
                mark = (t.agent, t.resolved.name, frozenset(ctx.items()))
                if mark in self.completed:
                    continue
                if is_complete(adapter.store, t.resolved, ctx):
                    self.completed.add(mark)
                    self._log(t.agent, "COMPLETE", t.resolved.name, ctx, None)

    def complete(self, agent, protocol) -> bool:
        return any(a == agent and p == protocol for a, p, _ in self.completed)

    def quiescent(self) -> bool:
        return not self.inflight

    def trace(self) -> list:
        return [e.line() for e in self.events]


def _plain_keys(keys):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted((keys or {}).items())}


def _contexts(store: EnactmentStore, resolved):
    """Contexts that fix every global key of resolved."""
    keys = resolved.key_model.global_keys
    if not keys:
        return []
    seen = []
    for _, kt in store.bindings:
        c = store.closure(dict(kt))
        if all(k in c for k in keys):
            ctx = {k: c[k] for k in keys}
            if ctx not in seen:
                seen.append(ctx)
    return seen


def replay(lines, make_adapter: Callable[[str], Adapter]) -> dict:
    """Rebuild agent stores from a trace.

    Every received message must match bytes some agent sent earlier, and
    every sent message must have been enabled for its sender at that point.
    """
    events = [Event.parse(l) if isinstance(l, str) else l for l in lines if str(l).strip()]
    adapters: dict = {}
    sent: dict = {}

    def get(addr):
        if addr not in adapters:
            adapters[addr] = make_adapter(addr)
        return adapters[addr]

    i = 0
    while i < len(events):
        e = events[i]
        if e.kind == "SENT":
            group = [e]
            while (i + 1 < len(events) and events[i + 1].kind == "SENT"
                   and events[i + 1].agent == e.agent and _same_message(events[i + 1].wire, e.wire)):
                i += 1
                group.append(events[i])
            adapter = get(e.agent)
            try:
                msgs = [WireMessage.from_bytes(g.wire) for g in group]
                adapter.apply_sent(msgs)
            except (CodecError, Exception) as err:
                raise CorruptTrace(f"line {e.seq}: {err}") from err
            for g in group:
                sent[g.wire] = sent.get(g.wire, 0) + 1
        elif e.kind in ("RECV", "QUAR"):
            if e.wire is None:
                raise CorruptTrace(f"line {e.seq}: no message")
            adapter = get(e.agent)
            if e.wire in adapter.received or e.wire in adapter.quarantine:
                # retried from quarantine
                adapter.received.discard(e.wire)
            elif not sent.get(e.wire):
                raise CorruptTrace(f"line {e.seq}: {e.agent} received a message nobody sent")
            else:
                sent[e.wire] -= 1
            if e.wire in adapter.quarantine:
                adapter.quarantine.remove(e.wire)
            if e.kind == "RECV":
                out = adapter._integrate(e.wire)
                if out.status != "integrated":
                    raise CorruptTrace(f"line {e.seq}: message does not integrate ({out.error})")
            else:
                adapter._integrate(e.wire)
        i += 1
    return {a: ad.store for a, ad in adapters.items()}


def _same_message(a: bytes, b: bytes) -> bool:
    try:
        x, y = WireMessage.from_bytes(a), WireMessage.from_bytes(b)
    except CodecError:
        return False
    return (x.schema_id, x.sender, x.keys, x.payload) == (y.schema_id, y.sender, y.keys, y.payload)
