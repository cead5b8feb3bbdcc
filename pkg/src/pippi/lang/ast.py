"""Syntax tree for protocol specifications.

Source spans never take part in equality, so two trees parsed from
differently formatted text compare equal when they say the same thing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

ADORNMENTS = ("in", "nil", "out", "any", "opt")
QUALIFIERS = ("key", "local", "set")
RELATIONS = ("⊆", "∈", "=", "<", ">")


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class QualifiedName:
    local: str
    prefix: Optional[str] = None

    def __str__(self):
        if self.prefix is None:
            return self.local
        return f"{self.prefix}:{self.local}"


@dataclass(frozen=True)
class Constraint:
    kind: str  # "type" or "relation"
    type_name: Optional[str] = None
    op: Optional[str] = None
    target: Union[str, int, float, None] = None
    # True when target came from a quoted string literal
    literal: bool = False


@dataclass(frozen=True)
class Parameter:
    name: QualifiedName
    adornment: Optional[str] = None
    qualifiers: frozenset = frozenset()
    constraints: tuple = ()
    abbreviation: Optional[str] = None
    span: Optional[Span] = field(default=None, compare=False)

    @property
    def ident(self) -> str:
        """Name used inside protocol bodies: the abbreviation when given."""
        return self.abbreviation or str(self.name)

    @property
    def is_key(self) -> bool:
        return "key" in self.qualifiers

    @property
    def is_local(self) -> bool:
        return "local" in self.qualifiers

    @property
    def is_set(self) -> bool:
        return "set" in self.qualifiers

    @property
    def type_name(self) -> Optional[str]:
        for c in self.constraints:
            if c.kind == "type":
                return c.type_name
        return None


@dataclass(frozen=True)
class Or:
    alternatives: tuple  # of ParamExpr


Clause = Union[Parameter, Or]


@dataclass(frozen=True)
class ParamExpr:
    clauses: tuple = ()

    def leaves(self) -> Iterator[Parameter]:
        """Parameters in source order, descending into disjunctions."""
        for clause in self.clauses:
            if isinstance(clause, Or):
                for alt in clause.alternatives:
                    yield from alt.leaves()
            else:
                yield clause

    def names(self) -> list:
        return [p.ident for p in self.leaves()]


@dataclass(frozen=True)
class RoleRef:
    name: QualifiedName
    adornment: Optional[str] = None

    @property
    def ident(self) -> str:
        return str(self.name)


@dataclass(frozen=True)
class Reference:
    target: QualifiedName
    arguments: ParamExpr
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class ProtocolDecl:
    name: QualifiedName
    public: ParamExpr
    privates: tuple = ()
    body: tuple = ()  # Reference or message ProtocolDecl
    is_message: bool = False
    sender: Optional[RoleRef] = None
    recipients: tuple = ()
    span: Optional[Span] = field(default=None, compare=False)

    def parameters(self) -> list:
        return list(self.public.leaves()) + list(self.privates)

    def lookup(self, name: str) -> Optional[Parameter]:
        """Find a declared parameter by abbreviation or full name."""
        for p in self.parameters():
            if p.ident == name or str(p.name) == name:
                return p
        return None

    def messages(self) -> list:
        return [b for b in self.body if isinstance(b, ProtocolDecl)]

    def references(self) -> list:
        return [b for b in self.body if isinstance(b, Reference)]


@dataclass(frozen=True)
class ParseWarning:
    code: str
    message: str
    span: Optional[Span] = None


@dataclass(frozen=True)
class Specification:
    preamble: tuple = ()  # (name, value) pairs
    declarations: tuple = ()
    warnings: tuple = field(default=(), compare=False)
    source: Optional[str] = field(default=None, compare=False)

    def get(self, name: str) -> Optional[ProtocolDecl]:
        for d in self.declarations:
            if str(d.name) == name or d.name.local == name:
                return d
        return None

    def protocols(self) -> list:
        return [d for d in self.declarations if not d.is_message]


# -- machine readable dump ------------------------------------------------


def _name(q: QualifiedName) -> dict:
    return {"prefix": q.prefix, "local": q.local}


def _constraint(c: Constraint) -> dict:
    if c.kind == "type":
        return {"kind": "type", "type": c.type_name}
    return {"kind": "relation", "op": c.op, "target": c.target}


def _param(p: Parameter) -> dict:
    return {
        "name": _name(p.name),
        "abbreviation": p.abbreviation,
        "adornment": p.adornment,
        "qualifiers": sorted(p.qualifiers, key=QUALIFIERS.index),
        "constraints": [_constraint(c) for c in p.constraints],
    }


def _expr(e: ParamExpr) -> dict:
    clauses = []
    for c in e.clauses:
        if isinstance(c, Or):
            clauses.append({"Or": [_expr(a) for a in c.alternatives]})
        else:
            clauses.append({"Param": _param(c)})
    return {"clauses": clauses}


def _decl(d: ProtocolDecl) -> dict:
    out = {
        "name": _name(d.name),
        "public": _expr(d.public),
        "privates": [_param(p) for p in d.privates],
        "body": [],
        "is_message": d.is_message,
    }
    for item in d.body:
        if isinstance(item, Reference):
            out["body"].append({"target": _name(item.target), "arguments": _expr(item.arguments)})
        else:
            out["body"].append(_decl(item))
    if d.is_message:
        out["sender"] = {"name": _name(d.sender.name), "adornment": d.sender.adornment}
        out["recipients"] = [
            {"name": _name(r.name), "adornment": r.adornment} for r in d.recipients
        ]
    return out


def to_json(spec: Specification) -> dict:
    return {
        "preamble": [[k, v] for k, v in spec.preamble],
        "declarations": [_decl(d) for d in spec.declarations],
    }
