"""The protocol adapter: local state, emission and reception for one agent.

Bindings are stored under the key values of the message that produced
them. A parameter counts as known in a context when some binding's keys
are a subset of that context, after following recorded key associations.
"""

from __future__ import annotations

import random
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import codec
from .codec import UnknownSchema, WireMessage
from .model import (
    ArityMismatch,
    LateBindingError,
    Library,
    MessageSchema,
    ResolvedProtocol,
    extend,
    invertible_pairs,
)


class EnactmentError(Exception):
    pass


class NotEnabled(EnactmentError):
    def __init__(self, schema, reason):
        self.schema = schema
        self.reason = reason
        super().__init__(f"{schema} is not enabled: {reason}")


class DoubleBind(NotEnabled):
    def __init__(self, schema, param):
        self.param = param
        super().__init__(schema, f"{param} is already bound")


class ConstraintViolation(EnactmentError):
    def __init__(self, param, constraint):
        self.param = param
        self.constraint = constraint
        super().__init__(f"{param} violates {constraint}")


class IntegrityViolation(EnactmentError):
    def __init__(self, param, old, new):
        self.param = param
        self.old = old
        self.new = new
        super().__init__(f"{param} is bound to {old!r}, message carries {new!r}")


# -- store ------------------------------------------------------------------


def _subset(keys, ctx: dict) -> bool:
    for k, v in keys:
        if ctx.get(k) != v:
            return False
    return True


def _consistent(keys, ctx: dict) -> bool:
    if not keys or not ctx:
        return True
    shared = False
    for k, v in keys:
        if k in ctx:
            if ctx[k] != v:
                return False
            shared = True
    return shared


@dataclass
class EnactmentStore:
    # (parameter, frozenset of (key, value)) -> value; set parameters hold a tuple
    bindings: dict = field(default_factory=dict)
    # append-only (direction, wire bytes)
    history: list = field(default_factory=list)
    # frozenset({(k1, v1), (k2, v2)})
    associations: set = field(default_factory=set)
    # parameter -> [(keys, binding key)], rebuilt when bindings change behind our back
    _index: dict = field(default_factory=dict, repr=False, compare=False)
    _indexed: int = field(default=0, repr=False, compare=False)

    def _by_param(self, param) -> list:
        if self._indexed != len(self.bindings):
            self._index = {}
            for k in self.bindings:
                self._index.setdefault(k[0], []).append(k)
            self._indexed = len(self.bindings)
        return self._index.get(param, ())

    def closure(self, ctx: dict) -> dict:
        out = dict(ctx)
        changed = True
        while changed:
            changed = False
            for pair in self.associations:
                a, b = tuple(pair)
                for x, y in ((a, b), (b, a)):
                    if out.get(x[0]) == x[1] and y[0] not in out:
                        out[y[0]] = y[1]
                        changed = True
        return out

    def known(self, param, ctx: dict, closed=False) -> list:
        """Values of param bound under keys contained in ctx."""
        c = ctx if closed else self.closure(ctx)
        return [self.bindings[k] for k in self._by_param(param) if _subset(k[1], c)]

    def value(self, param, ctx: dict, closed=False):
        vals = self.known(param, ctx, closed)
        return vals[0] if vals else None

    def is_bound(self, param, ctx: dict, closed=False) -> bool:
        return bool(self.known(param, ctx, closed))

    def conflicts(self, param, ctx: dict, value) -> Optional[object]:
        c = self.closure(ctx)
        for k in self._by_param(param):
            keys, v = k[1], self.bindings[k]
            if v == value:
                continue
            if _subset(keys, c) or _subset(ctx.items(), self.closure(dict(keys))):
                return v
        return None

    def bind(self, param, ctx: dict, value, is_set=False) -> bool:
        k = (param, frozenset(ctx.items()))
        if k in self.bindings and not is_set:
            return False
        if k not in self.bindings and self._indexed == len(self.bindings):
            self._index.setdefault(param, []).append(k)
            self._indexed += 1
        if is_set:
            old = self.bindings.get(k, ())
            items = value if isinstance(value, (list, tuple)) else (value,)
            new = old + tuple(x for x in items if x not in old)
            self.bindings[k] = new
            return new != old
        self.bindings[k] = value
        return True

    def associate(self, a, b):
        self.associations.add(frozenset((a, b)))

    def equal_state(self, other: "EnactmentStore", history=True) -> bool:
        same = self.bindings == other.bindings and self.associations == other.associations
        if history:
            same = same and self.history == other.history
        return same


def query(store: EnactmentStore, param, partial: dict) -> list:
    """All (key tuple, value) bindings of param that agree with partial."""
    c = store.closure(partial)
    out = []
    for (p, keys), v in store.bindings.items():
        if p == param and _consistent(keys, c):
            out.append((dict(sorted(keys)), v))
    out.sort(key=lambda kv: sorted(kv[0].items()))
    return out


def is_complete(store: EnactmentStore, resolved: ResolvedProtocol, ctx: dict) -> bool:
    c = store.closure(ctx)

    def bound(name):
        return any(p == name and _consistent(keys, c) for p, keys in store.bindings)

    return resolved.completion.evaluate(bound)


# -- adapter -------------------------------------------------------------------


@dataclass
class AdapterConfig:
    address: str
    protocols: list  # ResolvedProtocol views this agent enacts
    plays: set = field(default_factory=set)
    handlers: dict = field(default_factory=dict)
    contacts: Optional[object] = None
    library: Optional[Library] = None
    seed: int = 0


@dataclass
class Enablement:
    schema: MessageSchema
    context: dict  # key values fixed by the store
    ins: dict  # in parameters and their values
    outs: list  # parameters the emission binds
    reason: Optional[str] = None
    blocking: Optional[str] = None

    @property
    def ok(self):
        return self.reason is None


@dataclass
class Outcome:
    status: str  # integrated, duplicate, quarantined, rejected
    schema: Optional[MessageSchema] = None
    error: Optional[Exception] = None
    named: Optional[dict] = None
    context: Optional[dict] = None


class SchemaTable:
    """Every schema an agent can send or receive, with the key vocabulary."""

    def __init__(self, protocols, library: Optional[Library] = None):
        self.schemas: dict = {}
        self.global_keys: list = []
        self.local_keys: list = []
        self.sets: set = set()
        self.protocol_params: set = set()
        self.late: dict = {}  # protocol parameter -> [(LateRef, ResolvedProtocol)]
        self._key_params: dict = {}
        for r in protocols:
            for s in r.schemas:
                self.schemas.setdefault(s.id, s)
            self._keys(r.key_info)
            self.sets |= r.sets
            self.protocol_params |= r.protocol_params
            for ref in r.late_refs:
                self.late.setdefault(ref.param, []).append((ref, r))
        # every protocol a late reference could name contributes guarded schemas,
        # so the key vocabulary does not depend on arrival order
        if library is not None:
            for refs in self.late.values():
                for ref, r in refs:
                    for name, decl in library.decls.items():
                        if decl.is_message or len(list(decl.public.leaves())) != len(ref.arguments):
                            continue
                        schemas, f = extend(r, ref, decl, library)
                        for s in schemas:
                            self.schemas.setdefault(s.id, s)
                        self._keys(f.key_info)
                        self.sets |= f.sets
        for s in self.schemas.values():
            for p in s.payload:
                if p.key and p.name not in self.global_keys + self.local_keys:
                    (self.local_keys if p.local_key else self.global_keys).append(p.name)
        self.invertible = invertible_pairs(self.schemas.values(), self.global_keys)

    def _keys(self, key_info):
        for name, local in key_info.items():
            target = self.local_keys if local else self.global_keys
            if name not in target:
                target.append(name)

    @property
    def keys(self):
        return self.global_keys + self.local_keys

    def get(self, schema_id):
        return self.schemas.get(schema_id)

    def find(self, name) -> MessageSchema:
        s = self.schemas.get(name)
        if s is not None:
            return s
        matches = [s for s in self.schemas.values() if s.name == name]
        if len(matches) == 1:
            return matches[0]
        raise UnknownSchema(name)

    def key_params(self, schema):
        cached = self._key_params.get(schema.id)
        if cached is None or cached[0] is not schema:
            cached = (schema, [p for p in schema.payload if p.key or p.name in self.keys])
            self._key_params[schema.id] = cached
        return cached[1]


class Adapter:
    def __init__(self, config: AdapterConfig, store: Optional[EnactmentStore] = None):
        self.config = config
        self.address = config.address
        self.table = SchemaTable(config.protocols, config.library)
        self.store = store if store is not None else EnactmentStore()
        self.rng = random.Random(f"{config.seed}:{config.address}")
        self.counters: dict = {}
        self.quarantine: list = []
        self.rejected: list = []
        self.received: set = set()
        self.listeners: list = []

    # -- helpers

    def _closure_for(self, ctx):
        return self.store.closure(ctx or {})

    def _guard_ok(self, schema, closed):
        if schema.guard is None:
            return True
        param, value = schema.guard
        return value in self.store.known(param, closed, closed=True)

    def _plays(self, schema, role):
        plays = self.config.plays
        if role in plays or (schema.protocol, role) in plays:
            return True
        return any((r.name, role) in plays for r in self.config.protocols)

    def contexts(self) -> list:
        """Distinct key contexts present in the store, plus the empty one."""
        seen = []
        for _, keys in self.store.bindings:
            d = dict(keys)
            if d and d not in seen:
                seen.append(d)
        seen.sort(key=lambda d: sorted(d.items()))
        return [{}] + seen

    # -- enablement

    def check(self, schema: MessageSchema, ctx: Optional[dict] = None) -> Enablement:
        ctx = ctx or {}
        closed = self._closure_for(ctx)
        keys = self.table.key_params(schema)
        fixed = {p.name: closed[p.name] for p in keys if p.name in closed}
        result = Enablement(schema, fixed, {}, [])

        def fail(reason, blocking=None):
            result.reason = reason
            result.blocking = blocking
            return result

        if ctx and not fixed:
            return fail("no key of the schema is in the context")
        if not self._guard_ok(schema, closed):
            return fail(f"{schema.guard[0]} is not {schema.guard[1]}")
        mctx = self.store.closure(fixed)
        for p in schema.payload:
            bound = self.store.known(p.name, mctx, closed=True)
            if p.name in fixed and p.adornment in ("in", "any", "opt"):
                result.ins[p.name] = fixed[p.name]
                continue
            if p.adornment == "in":
                if not bound:
                    return fail(f"in parameter {p.name} is not bound", p.name)
                result.ins[p.name] = bound[0]
            elif p.adornment == "out":
                if bound or p.name in fixed:
                    return fail(f"out parameter {p.name} is already bound", p.name)
                result.outs.append(p.name)
            elif p.adornment == "nil":
                if bound:
                    return fail(f"nil parameter {p.name} is bound", p.name)
            elif p.adornment == "any":
                if bound:
                    result.ins[p.name] = bound[0]
                else:
                    result.outs.append(p.name)
            elif p.adornment == "opt" and bound:
                result.ins[p.name] = bound[0]
        sender = self.store.known(schema.sender, mctx, closed=True)
        if sender:
            if sender[0] != self.address:
                return fail(f"sender role {schema.sender} is bound to {sender[0]}", schema.sender)
        elif not schema.sender_out:
            return fail(f"sender role {schema.sender} is not bound", schema.sender)
        for role, out in schema.recipients:
            bound = self.store.known(role, mctx, closed=True)
            if out and bound:
                return fail(f"out role {role} is already bound", role)
            if not out and not bound and role not in result.outs:
                return fail(f"recipient role {role} is not bound", role)
            if out and role not in result.outs:
                result.outs.append(role)
        return result

    def enabled(self, ctx: Optional[dict] = None) -> list:
        out = []
        for s in self.table.schemas.values():
            e = self.check(s, ctx)
            if e.ok and (ctx or self._initiating(s, e)):
                out.append(e)
        return out

    def _initiating(self, schema, e):
        return all(p.name in e.outs for p in self.table.key_params(schema))

    # -- emission

    def new_key(self, name, scope: dict):
        if name in self.table.local_keys:
            sc = (name, tuple(sorted((k, v) for k, v in scope.items() if k in self.table.global_keys)))
            n = self.counters.get(sc, 0) + 1
            self.counters[sc] = n
            return n
        return uuid.UUID(int=self.rng.getrandbits(128), version=4).hex

    def emit(self, schema, ctx: Optional[dict] = None, values: Optional[dict] = None,
             recipients: Optional[dict] = None) -> list:
        """Bind the open parameters of schema and return one message per recipient."""
        if isinstance(schema, str):
            schema = self.table.find(schema)
        values = dict(values or {})
        values.update(recipients or {})
        e = self.check(schema, ctx)
        if not e.ok:
            if e.reason and "already bound" in e.reason:
                raise DoubleBind(schema.id, e.blocking)
            raise NotEnabled(schema.id, e.reason)
        keyctx = dict(e.context)
        full = dict(e.ins)
        key_names = {p.name for p in self.table.key_params(schema)}
        for p in schema.payload:
            if p.name in key_names and p.name in e.outs:
                v = values.pop(p.name, None)
                keyctx[p.name] = v if v is not None else self.new_key(p.name, keyctx)
                full[p.name] = keyctx[p.name]
        for name in e.outs:
            if name in full:
                continue
            if name == schema.sender:
                full[name] = self.address
                continue
            if name not in values:
                raise NotEnabled(schema.id, f"no value for out parameter {name}")
            full[name] = values.pop(name)
        for p in schema.payload:
            if p.adornment == "opt" and p.name in values and p.name not in full:
                full[p.name] = values.pop(p.name)
        if values:
            raise NotEnabled(schema.id, f"{', '.join(sorted(values))} cannot be bound by this message")
        if schema.sender_out and schema.sender not in full:
            full[schema.sender] = self.address
        self._check_relations(schema, full, keyctx)
        for p in schema.payload:
            if p.type_name == "protocol" and p.name in full:
                self._late_check(p.name, full[p.name])

        addresses = []
        for role, _ in schema.recipients:
            addr = full.get(role)
            if addr is None:
                addr = self.store.value(role, keyctx)
            addresses.append((role, addr))
        named = {p.name: full.get(p.name) for p in schema.payload}
        msgs = [codec.build(schema, named, self.address, addr) for _, addr in addresses]

        self._commit(schema, full, keyctx, addresses, msgs)
        return msgs

    def _commit(self, schema, full, keyctx, addresses, msgs):
        for p in schema.payload:
            if full.get(p.name) is not None:
                self.store.bind(p.name, keyctx, full[p.name], p.name in self.table.sets or p.is_set)
        self.store.bind(schema.sender, keyctx, self.address)
        for role, addr in addresses:
            self.store.bind(role, keyctx, addr)
        self._associate(keyctx)
        for m in msgs:
            self._record("SENT", m.to_bytes(), schema.id, keyctx)

    def apply_sent(self, msgs):
        """Re-apply an emission recorded in a trace, checking it was enabled."""
        schema, named = codec.decode_message(self.table, msgs[0])
        if msgs[0].sender != self.address:
            raise NotEnabled(schema.id, f"sent by {msgs[0].sender}, not {self.address}")
        keyctx = {p.name: named[p.name] for p in self.table.key_params(schema)}
        ctx = {k: v for k, v in keyctx.items() if self.store.is_bound(k, {k: v})}
        e = self.check(schema, ctx)
        if not e.ok:
            raise NotEnabled(schema.id, e.reason)
        for name, value in e.ins.items():
            if named.get(name, value) != value:
                raise NotEnabled(schema.id, f"{name} is {value!r}, message carries {named[name]!r}")
        if len(msgs) != len(schema.recipients):
            raise NotEnabled(schema.id, "recipient count differs from the schema")
        addresses = [(role, m.recipient) for (role, _), m in zip(schema.recipients, msgs)]
        self._commit(schema, named, keyctx, addresses, msgs)

    def _record(self, kind, raw, schema_id, keyctx):
        self.store.history.append((kind, raw))
        for f in self.listeners:
            f(kind, schema_id, raw, keyctx)

    def _check_relations(self, schema, full, keyctx):
        for p in schema.payload:
            for op, target, literal in p.relations:
                if p.name not in full:
                    continue
                value = full[p.name]
                if literal:
                    other = target
                elif target in full:
                    other = full[target]
                else:
                    other = self.store.value(target, keyctx)
                if other is None or not _relation(op, value, other):
                    raise ConstraintViolation(p.name, f"{op}{target}")

    def _late_check(self, param, value):
        if param not in self.table.late:
            return
        lib = self.config.library
        decl = lib.get(value) if lib else None
        if decl is None:
            raise LateBindingError(f"{param} names unknown protocol {value}")
        for ref, _ in self.table.late[param]:
            n = len(list(decl.public.leaves()))
            if n != len(ref.arguments):
                raise LateBindingError(str(ArityMismatch(n, len(ref.arguments), value)))

    def _associate(self, keyctx):
        for pair in self.table.invertible:
            a, b = sorted(pair)
            if a in keyctx and b in keyctx:
                self.store.associate((a, keyctx[a]), (b, keyctx[b]))

    # -- reception

    def receive(self, data) -> Outcome:
        raw = data.to_bytes() if isinstance(data, WireMessage) else bytes(data)
        if raw in self.received:
            return Outcome("duplicate")
        outcome = self._integrate(raw)
        if outcome.status == "integrated":
            self._drain()
        return outcome

    def _integrate(self, raw, retry=False) -> Outcome:
        try:
            msg = WireMessage.from_bytes(raw)
            schema, named = codec.decode_message(self.table, msg)
        except UnknownSchema as e:
            if not retry:
                self.quarantine.append(raw)
                self._record("QUAR", raw, e.schema_id, {})
            return Outcome("quarantined", error=e)
        except codec.CodecError as e:
            self.rejected.append((raw, e))
            self.received.add(raw)
            self._record("QUAR", raw, "-", {})
            return Outcome("rejected", error=e)
        keyctx = {p.name: named[p.name] for p in self.table.key_params(schema)}
        updates = [(p.name, named[p.name], p.name in self.table.sets or p.is_set)
                   for p in schema.payload if named[p.name] is not None]
        updates.append((schema.sender, msg.sender, False))
        # bind our own recipient role when the envelope makes it unambiguous
        current = {r: self.store.value(r, keyctx) for r, _ in schema.recipients}
        if self.address not in current.values():
            unbound = [r for r, v in current.items() if v is None]
            if len(unbound) == 1:
                updates.append((unbound[0], self.address, False))
        try:
            for name, value, is_set in updates:
                if is_set:
                    continue
                old = self.store.conflicts(name, keyctx, value)
                if old is not None:
                    raise IntegrityViolation(name, old, value)
            for p in schema.payload:
                if p.type_name == "protocol" and named[p.name] is not None:
                    self._late_check(p.name, named[p.name])
        except (IntegrityViolation, LateBindingError) as e:
            self.rejected.append((raw, e))
            self.received.add(raw)
            if retry:
                self.quarantine.remove(raw)
            self._record("QUAR", raw, schema.id, keyctx)
            return Outcome("rejected", schema, e, named, keyctx)
        for name, value, is_set in updates:
            self.store.bind(name, keyctx, value, is_set)
        self._associate(keyctx)
        self.received.add(raw)
        if retry:
            self.quarantine.remove(raw)
        if self.config.contacts is not None:
            self._introductions(schema, named, msg)
        self._record("RECV", raw, schema.id, keyctx)
        handler = self.config.handlers.get(schema.id) or self.config.handlers.get(schema.name)
        if handler is not None:
            handler(self, schema, named, msg)
        return Outcome("integrated", schema, None, named, keyctx)

    def _introductions(self, schema, named, msg):
        """Remember agents this message tells us about.

        Role values in the payload are introduced for any protocols the
        message names; without role values, the sender introduces itself.
        """
        reg = self.config.contacts
        reg.observe_introduction(msg.sender, schema.protocol, schema.sender)
        protocols = [v for p in schema.payload if p.type_name == "protocol"
                     for v in _elements(named[p.name])]
        agents = [a for p in schema.payload if p.type_name == "role"
                  for a in _elements(named[p.name]) if isinstance(a, str) and a != self.address]
        for addr in agents:
            for proto in protocols:
                reg.observe_introduction(addr, proto, None)
            if not protocols:
                for p in schema.payload:
                    if p.type_name == "role" and addr in _elements(named[p.name]):
                        reg.observe_introduction(addr, schema.protocol, p.name)
        if not any(p.type_name == "role" for p in schema.payload):
            for proto in protocols:
                reg.observe_introduction(msg.sender, proto, None)

    def _drain(self):
        progress = True
        while progress and self.quarantine:
            progress = False
            for raw in list(self.quarantine):
                if self._integrate(raw, retry=True).status == "integrated":
                    progress = True

    # -- queries

    def is_complete(self, resolved: ResolvedProtocol, ctx: dict) -> bool:
        return is_complete(self.store, resolved, ctx)

    def query(self, param, partial: dict) -> list:
        return query(self.store, param, partial)


def _elements(v):
    if v is None:
        return []
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _relation(op, value, other) -> bool:
    try:
        if op == "=":
            return value == other
        if op == "<":
            return value < other
        if op == ">":
            return value > other
        if op == "∈":
            return value in (other if isinstance(other, (list, tuple)) else (other,))
        if op == "⊆":
            a = value if isinstance(value, (list, tuple)) else (value,)
            b = other if isinstance(other, (list, tuple)) else (other,)
            return set(a) <= set(b)
    except TypeError:
        return False
    return False


def enabled(adapter: Adapter, ctx: Optional[dict] = None) -> list:
    return adapter.enabled(ctx)


def emit(adapter: Adapter, schema, ctx=None, values=None, recipients=None) -> list:
    return adapter.emit(schema, ctx, values, recipients)


def receive(adapter: Adapter, data) -> Outcome:
    return adapter.receive(data)


Handler = Callable[[Adapter, MessageSchema, dict, WireMessage], None]
