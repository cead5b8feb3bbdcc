from dataclasses import replace

from .ast import Or, ParamExpr, Parameter, ProtocolDecl, QualifiedName, Reference, RoleRef, Specification
from .parser import IRI_SCHEMES


class UnknownPrefix(Exception):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown prefix in {name}")


class AmbiguousAlias(Exception):
    def __init__(self, alias, names):
        self.alias = alias
        self.names = tuple(names)
        super().__init__(f"abbreviation {alias} stands for {' and '.join(self.names)}")


def aliases(decl: ProtocolDecl) -> dict:
    """Map each abbreviation declared by decl to its full name."""
    table = {}
    for p in decl.parameters():
        if not p.abbreviation:
            continue
        full = str(p.name)
        if table.get(p.abbreviation, full) != full:
            raise AmbiguousAlias(p.abbreviation, [table[p.abbreviation], full])
        table[p.abbreviation] = full
    return table


def expand_names(spec: Specification) -> Specification:
    """Rewrite prefixed names to their expanded form and validate aliases."""
    prefixes = dict(spec.preamble)

    def qn(name: QualifiedName) -> QualifiedName:
        if name.prefix is None:
            return name
        if name.prefix in prefixes:
            return QualifiedName(prefixes[name.prefix] + name.local)
        if name.prefix in IRI_SCHEMES:
            return QualifiedName(str(name))
        raise UnknownPrefix(str(name))

    def param(p: Parameter) -> Parameter:
        return replace(p, name=qn(p.name))

    def expr(e: ParamExpr) -> ParamExpr:
        clauses = []
        for c in e.clauses:
            if isinstance(c, Or):
                clauses.append(Or(tuple(expr(a) for a in c.alternatives)))
            else:
                clauses.append(param(c))
        return ParamExpr(tuple(clauses))

    def decl(d: ProtocolDecl) -> ProtocolDecl:
        body = []
        for item in d.body:
            if isinstance(item, Reference):
                body.append(replace(item, target=qn(item.target), arguments=expr(item.arguments)))
            else:
                body.append(decl(item))
        out = replace(
            d,
            name=qn(d.name),
            public=expr(d.public),
            privates=tuple(param(p) for p in d.privates),
            body=tuple(body),
        )
        if d.is_message:
            out = replace(
                out,
                sender=RoleRef(qn(d.sender.name), d.sender.adornment),
                recipients=tuple(RoleRef(qn(r.name), r.adornment) for r in d.recipients),
            )
        else:
            aliases(out)
        return out

    return replace(spec, declarations=tuple(decl(d) for d in spec.declarations))
