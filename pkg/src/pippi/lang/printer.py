"""Canonical text output.

Every parameter is printed with its own adornment, qualifiers and
constraints, so nothing depends on the group shorthand except where a
bare reference argument has to be kept out of a neighbour's group; a
line break does that.
"""

from .ast import QUALIFIERS, Or, ParamExpr, Parameter, ProtocolDecl, Reference, Specification

INDENT = "  "


def _literal(value):
    if isinstance(value, str):
        return '"' + value + '"'
    return repr(value)


def _constraints(p: Parameter) -> str:
    parts = []
    cs = list(p.constraints)
    i = 0
    while i < len(cs):
        c = cs[i]
        if c.kind == "type":
            text = c.type_name
            # keep "role=r0" together when a relation directly follows its type
            if i + 1 < len(cs) and cs[i + 1].kind == "relation":
                r = cs[i + 1]
                text += r.op + (_literal(r.target) if r.literal else str(r.target))
                i += 1
            parts.append(text)
        else:
            parts.append(c.op + (_literal(c.target) if c.literal else str(c.target)))
        i += 1
    return "; ".join(parts)


def _name(p: Parameter) -> str:
    full = str(p.name)
    if not p.abbreviation:
        return full
    at = full.find(p.abbreviation)
    return full[:at] + "(" + p.abbreviation + ")" + full[at + len(p.abbreviation):]


def _param(p: Parameter, bare_adornment=False) -> str:
    words = []
    if p.adornment and not bare_adornment:
        words.append(p.adornment)
    words.extend(q for q in QUALIFIERS if q in p.qualifiers)
    words.append(_name(p))
    text = " ".join(words)
    if p.constraints:
        text += ": " + _constraints(p)
    return text


def _joins_group(prev: Parameter, cur: Parameter, bare: bool) -> bool:
    """Would re-parsing put cur into prev's shorthand group and change it?"""
    cur_explicit = (cur.adornment is not None and not bare) or bool(cur.qualifiers)
    if cur_explicit or prev.constraints:
        return False
    prev_marked = (prev.adornment is not None and not bare) or bool(prev.qualifiers)
    return prev_marked or bool(cur.constraints)


class _Writer:
    def __init__(self, bare=False, indent=""):
        self.bare = bare
        self.indent = indent
        self.prev = None
        self.broke = False

    def param(self, p):
        text = _param(p, self.bare)
        if self.prev is not None and _joins_group(self.prev, p, self.bare):
            text = "\n" + self.indent + text
            self.broke = True
        self.prev = p
        return text

    def expr(self, e: ParamExpr) -> str:
        return ", ".join(self.clause(c) for c in e.clauses)

    def clause(self, c) -> str:
        if isinstance(c, Or):
            alts = []
            for alt in c.alternatives:
                text = self.expr(alt)
                if len(alt.clauses) > 1 or isinstance(alt.clauses[0], Or):
                    text = "(" + text + ")"
                alts.append(text)
            return " or ".join(alts)
        return self.param(c)


def _role(r) -> str:
    return (r.adornment + " " if r.adornment else "") + str(r.name)


def print_message(m: ProtocolDecl) -> str:
    recipients = ", ".join(_role(r) for r in m.recipients)
    payload = _Writer(indent=INDENT * 2).expr(m.public)
    return f"{_role(m.sender)} -> {recipients}: {m.name}[{payload}]"


def print_declaration(d: ProtocolDecl) -> str:
    if d.is_message:
        return print_message(d)
    lines = [f"{d.name}({_Writer(indent=INDENT).expr(d.public)}) {{"]
    if d.privates:
        w = _Writer(bare=True, indent=INDENT * 2)
        text = ", ".join(w.param(p) for p in d.privates)
        if w.broke:
            text = "(" + text + ")"
        lines.append(f"{INDENT}private {text}")
    for item in d.body:
        if isinstance(item, Reference):
            args = _Writer(indent=INDENT * 2).expr(item.arguments)
            lines.append(f"{INDENT}{item.target}({args})")
        else:
            lines.append(INDENT + print_message(item))
    lines.append("}")
    return "\n".join(lines)


def print_spec(spec: Specification) -> str:
    chunks = []
    if spec.preamble:
        chunks.append("\n".join(f"{k}: {v}" for k, v in spec.preamble))
    chunks.extend(print_declaration(d) for d in spec.declarations)
    return "\n\n".join(chunks).replace(", \n", ",\n") + "\n"
