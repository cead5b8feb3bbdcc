"""Semantic resolution of parsed protocols.

Compositions are flattened into message schemas whose parameters are
renamed to the identities of the enclosing protocol. Parameters a
constituent keeps to itself get a dotted name (``Witness.req``) so they
never collide with the composition's own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .lang.ast import Or, ParamExpr, ProtocolDecl, Reference, Span, Specification
from .lang.names import aliases

ERROR = "ERROR"
WARNING = "WARNING"


@dataclass(frozen=True)
class Diagnostic:
    level: str
    code: str
    message: str
    file: str = "-"
    span: Optional[Span] = None

    def __str__(self):
        where = f"{self.span.line}:{self.span.column}" if self.span else "0:0"
        return f"{self.level} {self.file}:{where} {self.code} {self.message}"


class ResolutionError(Exception):
    pass


class UnknownReference(ResolutionError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown reference {name}")


class ArityMismatch(ResolutionError):
    def __init__(self, expected, got, target=None):
        self.expected = expected
        self.got = got
        super().__init__(f"{target or 'reference'} takes {expected} parameters, got {got}")


class LocalKeyWithoutScope(ResolutionError):
    pass


# -- completion formulas ----------------------------------------------------


@dataclass(frozen=True)
class Bound:
    name: str

    def evaluate(self, is_bound) -> bool:
        return bool(is_bound(self.name))

    def names(self):
        return {self.name}


@dataclass(frozen=True)
class And:
    terms: tuple

    def evaluate(self, is_bound) -> bool:
        return all(t.evaluate(is_bound) for t in self.terms)

    def names(self):
        return set().union(*(t.names() for t in self.terms)) if self.terms else set()


@dataclass(frozen=True)
class AnyOf:
    terms: tuple

    def evaluate(self, is_bound) -> bool:
        return any(t.evaluate(is_bound) for t in self.terms)

    def names(self):
        return set().union(*(t.names() for t in self.terms)) if self.terms else set()


def _formula(expr: ParamExpr, rename=lambda n: n):
    terms = []
    for clause in expr.clauses:
        if isinstance(clause, Or):
            alts = [_formula(a, rename) for a in clause.alternatives]
            terms.append(AnyOf(tuple(a for a in alts if a is not None)))
        elif clause.adornment != "opt":
            terms.append(Bound(rename(clause.ident)))
    if len(terms) == 1:
        return terms[0]
    return And(tuple(terms))


def completion_formula(decl: ProtocolDecl):
    """The condition over public parameters under which an enactment is complete."""
    return _formula(decl.public)


# -- key model --------------------------------------------------------------


@dataclass
class KeyModel:
    global_keys: list = field(default_factory=list)
    # (local key, scope) where scope lists the enclosing global keys
    local_keys: list = field(default_factory=list)
    # schema id -> [(local key, scope)] for local keys bound by that schema
    hierarchy: dict = field(default_factory=dict)
    invertible: set = field(default_factory=set)
    diagnostics: list = field(default_factory=list)

    @property
    def keys(self):
        return list(self.global_keys) + [k for k, _ in self.local_keys]


def invertible_pairs(schemas, global_keys) -> set:
    """Pairs of global keys bound together by some schema, one in and one out."""
    pairs = set()
    gk = set(global_keys)
    for s in schemas:
        present = [p for p in s.payload if p.name in gk]
        ins = [p.name for p in present if p.adornment in ("in", "any")]
        outs = [p.name for p in present if p.adornment in ("out", "any")]
        for a in ins:
            for b in outs:
                if a != b:
                    pairs.add(frozenset((a, b)))
    return pairs


def _build_key_model(global_keys, local_keys, schemas, decl_name="", span=None):
    model = KeyModel(global_keys=list(global_keys))
    if not global_keys and not local_keys:
        model.diagnostics.append(
            Diagnostic(WARNING, "W-NO-KEY", f"{decl_name} declares no key", span=span)
        )
    if local_keys and not global_keys:
        raise LocalKeyWithoutScope(f"{decl_name}: local keys {', '.join(local_keys)} have no global key")
    model.local_keys = [(k, tuple(global_keys)) for k in local_keys]
    for s in schemas:
        names = [p.name for p in s.payload]
        scope = [k for k in global_keys if k in names]
        scope += [p.name for p in s.payload if p.name in local_keys and p.adornment == "in"]
        levels = []
        for p in s.payload:
            if p.name in local_keys and p.adornment != "in":
                levels.append((p.name, tuple(scope)))
                scope = scope + [p.name]
        if levels:
            model.hierarchy[s.id] = levels
    model.invertible = invertible_pairs(schemas, global_keys)
    return model


def key_model(decl: ProtocolDecl):
    """Keys declared by decl alone, without looking into its references."""
    global_keys = [p.ident for p in decl.parameters() if p.is_key and not p.is_local]
    local_keys = [p.ident for p in decl.parameters() if p.is_key and p.is_local]
    schemas = [_schema_from_message(m, decl, {}, "") for m in decl.messages()]
    return _build_key_model(global_keys, local_keys, schemas, str(decl.name), decl.span)


# -- schemas ------------------------------------------------------------------


@dataclass(frozen=True)
class SchemaParam:
    name: str  # identity in the composition
    local: str  # name in the declaring protocol
    adornment: str
    key: bool = False
    local_key: bool = False
    is_set: bool = False
    type_name: Optional[str] = None
    relations: tuple = ()  # (op, target, literal)


@dataclass(frozen=True)
class MessageSchema:
    id: str
    name: str
    protocol: str
    sender: str
    sender_out: bool
    recipients: tuple  # (role, is_out)
    payload: tuple
    # (parameter, value) a late-bound extension is conditional on
    guard: Optional[tuple] = None
    span: Optional[Span] = field(default=None, compare=False)

    @property
    def names(self):
        return [p.name for p in self.payload]

    @property
    def keys(self):
        return [p.name for p in self.payload if p.key]

    def param(self, name) -> Optional[SchemaParam]:
        for p in self.payload:
            if p.name == name:
                return p
        return None

    @property
    def roles(self):
        return [self.sender] + [r for r, _ in self.recipients]


def _schema_from_message(m: ProtocolDecl, decl: ProtocolDecl, env: dict, path: str, rename=None):
    if rename is None:
        alias = aliases(decl)

        def rename(name):
            name = _canonical(decl, name, alias)
            return env.get(name, name)

    payload = []
    for p in m.public.leaves():
        declared = decl.lookup(p.ident)
        relations = tuple(
            (c.op, c.target if c.literal else rename(str(c.target)), c.literal)
            for c in p.constraints
            if c.kind == "relation"
        )
        type_name = p.type_name or (declared.type_name if declared else None)
        payload.append(
            SchemaParam(
                name=rename(p.ident),
                local=p.ident,
                adornment=p.adornment or "in",
                key=bool(declared and declared.is_key),
                local_key=bool(declared and declared.is_key and declared.is_local),
                is_set=bool(declared and declared.is_set) or p.is_set,
                type_name=type_name,
                relations=relations,
            )
        )
    return MessageSchema(
        id=f"{decl.name}/{m.name}",
        name=str(m.name),
        protocol=str(decl.name),
        sender=rename(m.sender.ident),
        sender_out=m.sender.adornment == "out",
        recipients=tuple((rename(r.ident), r.adornment == "out") for r in m.recipients),
        payload=tuple(payload),
        span=m.span,
    )


def _canonical(decl: ProtocolDecl, name: str, alias: dict) -> str:
    """Body text may use a full name or its abbreviation; use the latter."""
    for p in decl.parameters():
        if str(p.name) == name and p.abbreviation:
            return p.abbreviation
    return name


# -- resolution ---------------------------------------------------------------


@dataclass
class LateRef:
    """A reference through a protocol-typed parameter, bound during enactment."""

    param: str
    arguments: list  # (composite name, adornment or None)
    path: str
    span: Optional[Span] = None


@dataclass
class ResolvedProtocol:
    decl: ProtocolDecl
    schemas: list
    identity: dict  # (constituent path, constituent parameter) -> composite name
    key_model: KeyModel
    completion: object
    late_refs: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    roles: set = field(default_factory=set)
    sets: set = field(default_factory=set)
    protocol_params: set = field(default_factory=set)
    # composite names that are keys at some level, and whether local
    key_info: dict = field(default_factory=dict)
    file: str = "-"

    @property
    def name(self):
        return str(self.decl.name)

    def schema(self, ident) -> Optional[MessageSchema]:
        for s in self.schemas:
            if s.id == ident or s.name == ident:
                return s
        return None


class _Flattener:
    def __init__(self, library, file="-"):
        self.library = library
        self.file = file
        self.schemas = []
        self.identity = {}
        self.late = []
        self.diags = []
        self.roles = set()
        self.sets = set()
        self.protocol_params = set()
        self.key_info = {}
        self.produced = set()
        self.stack = []

    def diag(self, level, code, message, span=None):
        self.diags.append(Diagnostic(level, code, message, self.file, span))

    def run(self, decl: ProtocolDecl, env: dict, path: str):
        name = str(decl.name)
        if name in self.stack:
            self.diag(ERROR, "E-RECURSIVE", f"{name} references itself", decl.span)
            return
        self.stack.append(name)
        alias = aliases(decl)
        declared = {p.ident for p in decl.parameters()}
        reported = set()
        here = [decl.span]

        def rename(n):
            n = _canonical(decl, n, alias)
            if n not in env:
                env[n] = n if not path else f"{path}.{n}"
                if n not in declared and n not in reported:
                    reported.add(n)
                    self.diag(WARNING, "W-UNDECLARED", f"{n} is not declared in {name}", here[0])
            return env[n]

        for p in decl.parameters():
            c = rename(p.ident)
            self.identity[(path or name, p.ident)] = c
            if p.is_key:
                self.key_info[c] = self.key_info.get(c, False) or p.is_local
            if p.type_name == "role":
                self.roles.add(c)
            if p.is_set:
                self.sets.add(c)
            if p.type_name == "protocol":
                self.protocol_params.add(c)

        for item in decl.body:
            here[0] = item.span
            if isinstance(item, Reference):
                self.reference(decl, item, rename, path)
            else:
                s = _schema_from_message(item, decl, env, path, rename)
                self.schemas.append(s)
                self.roles.update(s.roles)
                for p in s.payload:
                    if p.adornment in ("out", "any"):
                        self.produced.add(p.name)
                    if p.type_name == "role":
                        self.roles.add(p.name)
                    if p.is_set:
                        self.sets.add(p.name)
                    if p.type_name == "protocol":
                        self.protocol_params.add(p.name)
                for r, out in ((s.sender, s.sender_out), *s.recipients):
                    if out:
                        self.produced.add(r)
        self.stack.pop()

    def reference(self, decl, ref: Reference, rename, path):
        target_name = str(ref.target)
        target = self.library.get(target_name)
        args = list(ref.arguments.leaves())
        if target is None:
            local = _canonical(decl, target_name, aliases(decl))
            param = decl.lookup(local)
            if param is not None and param.type_name == "protocol":
                mapped = [(rename(a.ident), a.adornment) for a in args]
                for n, ad in mapped:
                    if ad in ("out", "any"):
                        self.produced.add(n)
                self.late.append(LateRef(rename(local), mapped, path, ref.span))
                return
            self.diag(ERROR, "E-UNKNOWN-REFERENCE", f"{target_name} is not a known protocol", ref.span)
            return
        leaves = list(target.public.leaves())
        if len(args) > len(leaves):
            self.diag(
                ERROR, "E-ARITY",
                f"{target_name} takes {len(leaves)} parameters, got {len(args)}", ref.span,
            )
            return
        pairs = _match_arguments(args, leaves)
        child_env = {}
        for leaf, arg in pairs:
            if arg is None:
                if decl.lookup(leaf.ident) is not None:
                    child_env[leaf.ident] = rename(leaf.ident)
                    how = f"bound by name to {decl.name}'s {leaf.ident}"
                else:
                    how = "kept private to the reference"
                self.diag(
                    WARNING, "W-IMPLICIT-ARGUMENT",
                    f"{target_name} parameter {leaf.ident} has no argument; {how}", ref.span,
                )
                continue
            composite = rename(arg.ident)
            child_env[leaf.ident] = composite
            if arg.adornment and {arg.adornment, leaf.adornment} == {"in", "out"}:
                self.diag(
                    ERROR, "E-ADORNMENT-CONFLICT",
                    f"{arg.ident} is {arg.adornment} at the reference but "
                    f"{leaf.adornment} in {target_name}", ref.span,
                )
        sub = f"{path}.{target_name}" if path else target_name
        self.run(target, child_env, sub)


def _match_arguments(args, leaves):
    """Pair constituent parameters with reference arguments.

    Equal counts match by position. With fewer arguments, same-named
    arguments match first and the rest fill the remaining parameters in
    order; parameters left over get no argument.
    """
    if len(args) == len(leaves):
        return list(zip(leaves, args))
    matched = {}
    used = set()
    arg_names = {a.ident: i for i, a in enumerate(args)}
    for j, leaf in enumerate(leaves):
        i = arg_names.get(leaf.ident)
        if i is not None and i not in used:
            matched[j] = args[i]
            used.add(i)
    rest = [a for i, a in enumerate(args) if i not in used]
    for j in range(len(leaves)):
        if j not in matched and rest:
            matched[j] = rest.pop(0)
    return [(leaf, matched.get(j)) for j, leaf in enumerate(leaves)]


class Library:
    """Declarations visible to references, by name."""

    def __init__(self, *specs):
        self.decls = {}
        self.files = {}
        for spec in specs:
            self.add(spec)

    def add(self, spec: Specification, file="-"):
        for d in spec.declarations:
            self.decls.setdefault(str(d.name), d)
            self.files.setdefault(str(d.name), file)

    def get(self, name) -> Optional[ProtocolDecl]:
        return self.decls.get(name)

    def __contains__(self, name):
        return name in self.decls


def resolve_decl(decl: ProtocolDecl, library: Library, file="-") -> ResolvedProtocol:
    f = _Flattener(library, file)
    if decl.is_message:
        # a message declared on its own is a single-schema protocol
        wrapper = ProtocolDecl(decl.name, decl.public, body=(decl,), span=decl.span)
        f.run(wrapper, {p.ident: p.ident for p in decl.public.leaves()}, "")
        decl_for_keys = wrapper
    else:
        f.run(decl, {}, "")
        decl_for_keys = decl
    global_keys = [n for n, local in f.key_info.items() if not local]
    local_keys = [n for n, local in f.key_info.items() if local]
    try:
        km = _build_key_model(global_keys, local_keys, f.schemas, str(decl.name), decl.span)
    except LocalKeyWithoutScope as e:
        km = KeyModel(global_keys=[], local_keys=[(k, ()) for k in local_keys])
        f.diag(ERROR, "E-LOCAL-KEY-SCOPE", str(e), decl.span)
    if decl.is_message:
        km.diagnostics = []
    for d in km.diagnostics:
        f.diags.append(Diagnostic(d.level, d.code, d.message, file, d.span))
    return ResolvedProtocol(
        decl=decl_for_keys if decl.is_message else decl,
        schemas=f.schemas,
        identity=f.identity,
        key_model=km,
        completion=completion_formula(decl),
        late_refs=f.late,
        diagnostics=f.diags,
        roles=f.roles,
        sets=f.sets,
        protocol_params=f.protocol_params,
        key_info=f.key_info,
        file=file,
    )


def resolve(spec: Specification, library: Optional[Library] = None, file="-") -> list:
    """Resolve every declaration in spec against spec itself plus library."""
    lib = Library()
    lib.add(spec, file)
    if library is not None:
        for name, d in library.decls.items():
            lib.decls.setdefault(name, d)
    return [resolve_decl(d, lib, file) for d in spec.declarations]


# -- late binding ---------------------------------------------------------


class LateBindingError(ResolutionError):
    pass


def extend(resolved: ResolvedProtocol, ref: LateRef, target: ProtocolDecl, library: Library):
    """Schemas contributed when ref's protocol parameter is bound to target.

    Each schema is guarded by the binding so it only applies to enactments
    that chose this protocol.
    """
    leaves = list(target.public.leaves())
    if len(leaves) != len(ref.arguments):
        raise ArityMismatch(len(leaves), len(ref.arguments), str(target.name))
    f = _Flattener(library, resolved.file)
    env = {leaf.ident: name for leaf, (name, _) in zip(leaves, ref.arguments)}
    prefix = f"{ref.path}.{target.name}" if ref.path else str(target.name)
    f.run(target, env, prefix)
    guard = (ref.param, str(target.name))
    schemas = [_guarded(s, guard) for s in f.schemas]
    return schemas, f


def _guarded(s: MessageSchema, guard) -> MessageSchema:
    return MessageSchema(
        id=s.id, name=s.name, protocol=s.protocol, sender=s.sender, sender_out=s.sender_out,
        recipients=s.recipients, payload=s.payload, guard=guard, span=s.span,
    )


# -- static checks ------------------------------------------------------------


def check_static(resolved: ResolvedProtocol) -> list:
    """Structural diagnostics for a resolved protocol."""
    diags = list(resolved.diagnostics)
    file = resolved.file
    decl = resolved.decl

    def add(level, code, message, span=None):
        diags.append(Diagnostic(level, code, message, file, span))

    external = set()
    for p in decl.public.leaves():
        if p.adornment in ("in", "any"):
            external.add(p.ident)
    producers = set()
    for s in resolved.schemas:
        for p in s.payload:
            if p.adornment in ("out", "any"):
                producers.add(p.name)
        for r, out in ((s.sender, s.sender_out), *s.recipients):
            if out:
                producers.add(r)
    for ref in resolved.late_refs:
        producers.update(n for n, ad in ref.arguments if ad in ("out", "any"))
    available = producers | external

    reported = set()
    for s in resolved.schemas:
        needed = [p.name for p in s.payload if p.adornment == "in"]
        needed += [r for r, out in ((s.sender, s.sender_out), *s.recipients) if not out]
        for n in needed:
            if n not in available and (s.id, n) not in reported:
                reported.add((s.id, n))
                add(ERROR, "E-DEAD-DEPENDENCY",
                    f"{s.name} needs {n} but nothing binds it", s.span)

    seen = {}
    for s in resolved.schemas:
        for p in s.payload:
            if p.adornment != "out" or p.key:
                continue
            ctx = (p.name, tuple(sorted(s.keys)), s.guard)
            if ctx in seen and seen[ctx] != s.id:
                add(WARNING, "W-DOUBLE-BIND",
                    f"{p.name} is bound by both {seen[ctx]} and {s.id} in the same key context",
                    s.span)
            seen.setdefault(ctx, s.id)

    if not resolved.completion.evaluate(lambda n: n in available):
        add(WARNING, "W-UNSATISFIABLE", f"completion of {decl.name} can never hold", decl.span)

    for s in resolved.schemas:
        locals_ = [p.name for p in s.payload if p.local_key]
        globals_ = [p.name for p in s.payload if p.key and not p.local_key]
        if locals_ and not globals_:
            add(ERROR, "E-LOCAL-KEY-SCOPE",
                f"{s.name} uses local key {locals_[0]} without a global key", s.span)

    public = {p.ident for p in decl.public.leaves()}
    for p in decl.privates:
        if p.ident in public:
            add(WARNING, "W-SHADOW", f"private {p.ident} repeats a public parameter", p.span)
    return diags


def has_errors(diags) -> bool:
    return any(d.level == ERROR for d in diags)
