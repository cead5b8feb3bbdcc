"""Generate a metaprotocol that binds the roles of a target protocol.

Roles are invited one at a time, nearest to the initiator first. Each
invitation comes from a role that already contacts the invitee in the
target protocol and names every role its sender knows about.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .lang import parse
from .lang.ast import ProtocolDecl
from .model import ResolvedProtocol


class MetagenError(Exception):
    pass


class UnreachableRole(MetagenError):
    def __init__(self, role):
        self.role = role
        super().__init__(f"role {role} cannot be reached from the initiator")


class CyclicInvitation(MetagenError):
    def __init__(self, roles):
        self.roles = tuple(roles)
        super().__init__(f"invitations form a cycle through {', '.join(self.roles)}")


@dataclass
class ContactGraph:
    nodes: list
    edges: set = field(default_factory=set)

    def successors(self, role):
        return sorted(b for a, b in self.edges if a == role)

    def neighbours(self, role):
        return sorted({b for a, b in self.edges if a == role} | {a for a, b in self.edges if b == role})


def contact_graph(resolved: ResolvedProtocol) -> ContactGraph:
    nodes = [p.ident for p in resolved.decl.public.leaves() if p.type_name == "role"]
    edges = set()
    for s in resolved.schemas:
        for r in [s.sender] + [r for r, _ in s.recipients]:
            if r not in nodes:
                nodes.append(r)
        for r, _ in s.recipients:
            edges.add((s.sender, r))
    return ContactGraph(nodes, edges)


def _bfs(start, step):
    dist = {start: 0}
    queue = deque([start])
    while queue:
        a = queue.popleft()
        for b in step(a):
            if b not in dist:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def ranks(graph: ContactGraph, initiator, warnings: Optional[list] = None) -> dict:
    """Shortest directed distance from the initiator.

    Roles with no directed path fall back to their undirected distance,
    which is reported through warnings. Roles not connected at all raise
    UnreachableRole.
    """
    if initiator not in graph.nodes:
        raise UnreachableRole(initiator)
    dist = _bfs(initiator, graph.successors)
    missing = [r for r in graph.nodes if r not in dist]
    if missing:
        loose = _bfs(initiator, graph.neighbours)
        for r in missing:
            if r not in loose:
                raise UnreachableRole(r)
            dist[r] = loose[r]
            if warnings is not None:
                warnings.append(f"no directed path to {r}; using undirected distance {loose[r]}")
    return {r: dist[r] for r in sorted(dist, key=lambda r: (dist[r], r))}


def initiators(resolved: ResolvedProtocol) -> list:
    """Senders of schemas that can start an enactment."""
    external = {p.ident for p in resolved.decl.public.leaves() if p.adornment == "in"}
    out = []
    for s in resolved.schemas:
        keys = [p for p in s.payload if p.key]
        if keys and all(p.adornment in ("out", "any") or p.name in external for p in keys):
            if s.sender not in out:
                out.append(s.sender)
    return out


@dataclass
class _Plan:
    name: str
    initiator: str
    order: list  # invitees in invitation order
    inviter: dict  # invitee -> inviter
    meta_key: str
    target_keys: list


def _message_name(role):
    return "Invite" + role[:1].upper() + role[1:]


def _render(plan: _Plan) -> str:
    roles = [plan.initiator] + plan.order
    slot = {r: f"r{i}" for i, r in enumerate(roles)}
    known = {plan.initiator: [plan.initiator]}  # roles each participant can name
    lines = []
    for i, invitee in enumerate(plan.order):
        inviter = plan.inviter[invitee]
        first = i == 0
        carried = [r for r in known.get(inviter, []) if r != invitee]
        items = []
        for k in [plan.meta_key] + plan.target_keys:
            items.append(("out " if first else "in ") + k)
        for r in carried:
            if first:
                items.append(f"out {r}: role={slot[r]}")
            else:
                items.append(f"in {r}")
        items.append(f"out {invitee}: role={slot[invitee]}")
        sender = ("out " if first else "") + slot[inviter]
        lines.append(f"  {sender} -> out {slot[invitee]}: {_message_name(invitee)}[{', '.join(items)}]")
        known[invitee] = list(carried)
        # the inviter now also knows whoever it invited
        known[inviter] = known[inviter] + [invitee]
    header = (
        f"{plan.name}(out {', '.join(slot[r] for r in roles)}: role,\n"
        f"  out {', '.join(roles)}: role,\n"
        f"  out key {plan.meta_key}"
        + "".join(f", out {k}" for k in plan.target_keys)
        + ") {"
    )
    return header + "\n" + "\n".join(lines) + "\n}\n"


def _decl(text) -> ProtocolDecl:
    return parse(text).declarations[0]


def generate(resolved: ResolvedProtocol, initiator, name: Optional[str] = None,
             warnings: Optional[list] = None) -> ProtocolDecl:
    graph = contact_graph(resolved)
    rank = ranks(graph, initiator, warnings)
    if warnings is not None:
        starts = initiators(resolved)
        if initiator not in starts:
            warnings.append(f"{initiator} does not send an initiating message")
    order = sorted((r for r in rank if r != initiator), key=lambda r: (rank[r], r))
    if not order:
        raise MetagenError("a protocol with one role needs no invitations")
    position = {r: i for i, r in enumerate([initiator] + order)}
    inviter = {}
    for r in order:
        senders = [a for a, b in graph.edges if b == r and position[a] < position[r]]
        if not senders:
            senders = [a for a in graph.neighbours(r) if position[a] < position[r]] or [initiator]
        inviter[r] = min(senders, key=lambda a: (rank[a], a))
    keys = list(resolved.key_model.global_keys) or [k for k, _ in resolved.key_model.local_keys]
    meta_key = "mID"
    while meta_key in keys or meta_key in rank:
        meta_key += "_"
    plan = _Plan(name or f"{resolved.name}Meta", initiator, order, inviter, meta_key, keys)
    return _decl(_render(plan))


def _plan_of(meta: ProtocolDecl) -> _Plan:
    messages = meta.messages()
    if not messages:
        raise MetagenError(f"{meta.name} has no invitations")
    slot_role = {}
    for m in messages:
        for p in m.public.leaves():
            for c in p.constraints:
                if c.kind == "relation" and c.op == "=" and not c.literal:
                    slot_role[str(c.target)] = p.ident
    initiator = slot_role[messages[0].sender.ident]
    order, inviter = [], {}
    for m in messages:
        invitee = slot_role[m.recipients[0].ident]
        order.append(invitee)
        inviter[invitee] = slot_role[m.sender.ident]
    first = messages[0].public.leaves()
    outs = [p.ident for p in first if p.type_name != "role"]
    key = next((p.ident for p in meta.public.leaves() if p.is_key), outs[0])
    return _Plan(str(meta.name), initiator, order, inviter, key, [k for k in outs if k != key])


def customize(meta: ProtocolDecl, overrides) -> ProtocolDecl:
    """Rewire who invites whom, keeping the original order where possible."""
    plan = _plan_of(meta)
    roles = [plan.initiator] + plan.order
    for invitee, inviter in overrides:
        if invitee not in plan.inviter or inviter not in roles:
            raise MetagenError(f"cannot have {inviter} invite {invitee}")
        plan.inviter[invitee] = inviter
    # order invitations so every inviter is bound first
    placed = [plan.initiator]
    pending = list(plan.order)
    while pending:
        ready = [r for r in pending if plan.inviter[r] in placed]
        if not ready:
            raise CyclicInvitation(pending)
        placed.append(ready[0])
        pending.remove(ready[0])
    plan.order = placed[1:]
    if not overrides:
        return meta
    return _decl(_render(plan))
