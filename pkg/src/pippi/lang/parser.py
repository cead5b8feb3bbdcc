"""Recursive-descent parser for protocol specifications.

Parameter lists follow the shorthand of the language: an adornment,
qualifiers and constraints written once are shared by the names that
follow on the same line, up to the next name that carries its own
adornment or qualifier, or up to the end of the constraint list.
"""

from __future__ import annotations

from .ast import (
    ADORNMENTS,
    QUALIFIERS,
    Constraint,
    Or,
    ParamExpr,
    Parameter,
    ParseWarning,
    ProtocolDecl,
    QualifiedName,
    Reference,
    RoleRef,
    Span,
    Specification,
)
from .lexer import tokenize

IRI_SCHEMES = frozenset({"http", "https", "urn"})
KEYWORDS = frozenset(ADORNMENTS) | frozenset(QUALIFIERS) | {"or", "private"}


class ParseError(Exception):
    def __init__(self, line, column, expected, got=None, message=None):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        self.got = got
        if message is None:
            message = "expected " + " or ".join(sorted(self.expected))
            if got is not None:
                message += f", got {got!r}"
        self.message = message
        super().__init__(f"{line}:{column}: {message}")


class _Raw:
    """A parameter while its group shorthand is still being resolved."""

    def __init__(self, name, abbreviation, adornment, qualifiers, constraints, token):
        self.name = name
        self.abbreviation = abbreviation
        self.adornment = adornment
        self.qualifiers = qualifiers
        self.constraints = constraints
        self.token = token
        self.explicit = adornment is not None or bool(qualifiers)

    def freeze(self):
        return Parameter(
            name=self.name,
            adornment=self.adornment,
            qualifiers=frozenset(self.qualifiers),
            constraints=tuple(self.constraints),
            abbreviation=self.abbreviation,
            span=Span(self.token.line, self.token.column),
        )


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.prefixes = set()
        self.warnings = []
        self._raw = None

    # -- token helpers ------------------------------------------------

    @property
    def tok(self):
        return self.tokens[self.pos]

    def peek(self, k=1):
        i = min(self.pos + k, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self):
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def fail(self, expected, message=None):
        t = self.tok
        got = "end of input" if t.kind == "EOF" else t.value
        raise ParseError(t.line, t.column, expected, got, message)

    def expect(self, kind, label=None):
        if self.tok.kind != kind:
            self.fail({label or kind})
        return self.advance()

    def at_word(self, *words):
        return self.tok.kind == "NAME" and self.tok.value in words

    def warn(self, code, message, token):
        self.warnings.append(ParseWarning(code, message, Span(token.line, token.column)))

    # -- top level ----------------------------------------------------

    def parse(self) -> Specification:
        preamble = []
        while self._at_preamble_entry():
            preamble.append(self._preamble_entry())
        decls = []
        while self.tok.kind != "EOF":
            decls.append(self._declaration())
        if not decls:
            self.fail({"protocol declaration"})
        return Specification(
            preamble=tuple(preamble),
            declarations=tuple(decls),
            warnings=tuple(self.warnings),
            source=self.text,
        )

    def _at_preamble_entry(self):
        t, colon, after = self.tok, self.peek(1), self.peek(2)
        return (
            t.kind == "NAME"
            and t.value not in KEYWORDS
            and colon.kind == "COLON"
            and not colon.spaced
            and (after.spaced or after.kind == "EOF")
        )

    def _preamble_entry(self):
        name_tok = self.advance()
        colon = self.advance()
        line_end = self.text.find("\n", colon.end)
        if line_end < 0:
            line_end = len(self.text)
        raw = self.text[colon.end:line_end]
        # a comment starts at "//" that opens the value or follows whitespace
        for i in range(len(raw) - 1):
            if raw.startswith("//", i) and (i == 0 or raw[i - 1].isspace()):
                raw = raw[:i]
                break
        value = raw.strip()
        if not value:
            self.fail({"preamble value"})
        while self.tok.kind != "EOF" and self.tok.line == name_tok.line:
            self.advance()
        self.prefixes.add(name_tok.value)
        return (name_tok.value, value)

    def _declaration(self):
        if self._at_message_start():
            return self._message()
        start = self.tok
        name = self._qname()
        if self.tok.kind != "LPAREN":
            self.fail({"(", "->"})
        self.advance()
        public = self._expression("RPAREN", site="decl")
        self.expect("RPAREN", ")")
        self.expect("LBRACE", "{")
        privates = ()
        if self.at_word("private"):
            self.advance()
            privates = self._privates()
        body = []
        while self.tok.kind != "RBRACE":
            if self.tok.kind == "EOF":
                self.fail({"reference", "}"})
            body.append(self._reference())
        if not body:
            self.fail({"reference"}, "a protocol needs at least one reference or message")
        self.advance()
        return ProtocolDecl(
            name=name,
            public=public,
            privates=privates,
            body=tuple(body),
            span=Span(start.line, start.column),
        )

    def _at_message_start(self):
        t = self.tok
        if t.kind != "NAME":
            return False
        if t.value in ADORNMENTS and self.peek(1).kind == "NAME":
            return True
        # the sender may carry a namespace prefix
        if self.peek(1).kind == "COLON" and self.peek(3).kind == "ARROW":
            return True
        return self.peek(1).kind == "ARROW"

    def _reference(self):
        if self._at_message_start():
            return self._message()
        start = self.tok
        if start.kind != "NAME":
            self.fail({"reference", "message", "}"})
        target = self._qname()
        if self.tok.kind != "LPAREN":
            self.fail({"(", "->"})
        self.advance()
        args = self._expression("RPAREN", site="ref")
        self.expect("RPAREN", ")")
        return Reference(target=target, arguments=args, span=Span(start.line, start.column))

    def _role(self):
        adornment = None
        if self.tok.kind == "NAME" and self.tok.value in ADORNMENTS:
            adornment = self.advance().value
        if self.tok.kind != "NAME" or self.tok.value in KEYWORDS:
            self.fail({"role name"})
        return RoleRef(self._qname(), adornment)

    def _message(self):
        start = self.tok
        sender = self._role()
        self.expect("ARROW", "->")
        recipients = [self._role()]
        while self.tok.kind == "COMMA":
            self.advance()
            recipients.append(self._role())
        self.expect("COLON", ":")
        name = self._qname()
        self.expect("LBRACK", "[")
        if self.tok.kind == "RBRACK":
            payload = ParamExpr(())
        else:
            payload = self._expression("RBRACK", site="decl")
        self.expect("RBRACK", "]")
        return ProtocolDecl(
            name=name,
            public=payload,
            is_message=True,
            sender=sender,
            recipients=tuple(recipients),
            span=Span(start.line, start.column),
        )

    def _privates(self):
        if self.tok.kind == "LPAREN" and not self._at_abbreviation_lead():
            self.advance()
            expr = self._expression("RPAREN", site="private")
            self.expect("RPAREN", ")")
        else:
            expr = self._expression(None, site="private")
        for clause in expr.clauses:
            if isinstance(clause, Or):
                t = self.tok
                raise ParseError(t.line, t.column, {"parameter"}, "or",
                                 "private parameters cannot be disjunctions")
        return tuple(expr.clauses)

    # -- names ----------------------------------------------------------

    def _qname(self):
        t = self.tok
        if t.kind != "NAME":
            self.fail({"name"})
        self.advance()
        colon, nxt = self.tok, self.peek(1)
        if (
            colon.kind == "COLON"
            and not colon.spaced
            and nxt.kind == "NAME"
            and not nxt.spaced
            and (t.value in self.prefixes or t.value in IRI_SCHEMES)
        ):
            self.advance()
            self.advance()
            return QualifiedName(nxt.value, prefix=t.value)
        return QualifiedName(t.value)

    def _at_abbreviation_lead(self):
        a, b, c, d = self.tok, self.peek(1), self.peek(2), self.peek(3)
        return (
            a.kind == "LPAREN"
            and b.kind == "NAME" and not b.spaced
            and c.kind == "RPAREN" and not c.spaced
            and d.kind == "NAME" and not d.spaced
        )

    def _param_name(self):
        """A name with an optional parenthesized abbreviation anywhere in it."""
        first = self.tok
        if self._at_abbreviation_lead():
            self.advance()
            abbr = self.advance().value
            self.advance()
            rest = self.advance().value
            return QualifiedName(abbr + rest), abbr, first
        if first.kind != "NAME" or first.value in KEYWORDS:
            self.fail({"parameter name"})
        name = self._qname()
        a, b, c = self.tok, self.peek(1), self.peek(2)
        if (
            name.prefix is None
            and a.kind == "LPAREN" and not a.spaced
            and b.kind == "NAME" and not b.spaced
            and c.kind == "RPAREN" and not c.spaced
        ):
            self.advance()
            abbr = self.advance().value
            self.advance()
            local = name.local + abbr
            if self.tok.kind == "NAME" and not self.tok.spaced:
                local += self.advance().value
            else:
                self._stems.setdefault(name.local, []).append((abbr, first))
            return QualifiedName(local), abbr, first
        return name, None, first

    # -- parameter expressions -----------------------------------------

    def _expression(self, closer, site):
        outer = self._raw
        self._raw = []
        self._stems = {}
        expr = self._conjunction(closer, nested=closer is not None)
        self._resolve_groups(self._raw, site)
        for stem, uses in self._stems.items():
            if len(uses) > 1:
                abbrs = ", ".join(a for a, _ in uses)
                self.warn(
                    "W-SHARED-STEM",
                    f"abbreviations {abbrs} are appended to the same stem {stem!r}; "
                    f"names read as {', '.join(stem + a for a, _ in uses)}",
                    uses[0][1],
                )
        frozen = self._freeze(expr)
        self._raw = outer
        return frozen

    def _conjunction(self, closer, nested):
        clauses = [self._disjunction(closer)]
        while True:
            t = self.tok
            if t.kind == "COMMA":
                self.advance()
                clauses.append(self._disjunction(closer))
            elif nested and t.newline and self._at_clause_start():
                self.warn("W-MISSING-COMMA", "clauses on separate lines without a comma", t)
                clauses.append(self._disjunction(closer))
            else:
                break
        flat = []
        for c in clauses:
            # a parenthesized group outside a disjunction is only grouping
            if isinstance(c, list):
                flat.extend(c)
            else:
                flat.append(c)
        return flat

    def _at_clause_start(self):
        t = self.tok
        if t.kind == "LPAREN":
            return True
        return t.kind == "NAME" and t.value not in ("or", "private")

    def _disjunction(self, closer):
        alts = [self._atom(closer)]
        while self.at_word("or"):
            self.advance()
            alts.append(self._atom(closer))
        if len(alts) == 1:
            return alts[0]
        return Or(tuple(a if isinstance(a, list) else [a] for a in alts))

    def _atom(self, closer):
        if self.tok.kind == "LPAREN" and not self._at_abbreviation_lead():
            self.advance()
            inner = self._conjunction("RPAREN", nested=True)
            self.expect("RPAREN", ")")
            return inner
        return self._parameter()

    def _parameter(self):
        adornment = None
        qualifiers = []
        t = self.tok
        if t.kind == "NAME" and t.value in ADORNMENTS and self._word_follows():
            adornment = self.advance().value
        while self.tok.kind == "NAME" and self.tok.value in QUALIFIERS and self._word_follows():
            q = self.advance().value
            if q not in qualifiers:
                qualifiers.append(q)
        if self.tok.kind == "NAME" and self.tok.value in ADORNMENTS and adornment is None \
                and qualifiers and self._word_follows():
            # qualifiers written before the adornment
            adornment = self.advance().value
        name, abbr, first = self._param_name()
        constraints = []
        if self.tok.kind == "COLON":
            self.advance()
            constraints.append(self._constraint())
            while self.tok.kind == "SEMI":
                self.advance()
                constraints.append(self._constraint())
            types = [c for c in constraints if c.kind == "type"]
            if len(types) > 1:
                raise ParseError(first.line, first.column, {"single type"}, None,
                                 "a parameter takes at most one type constraint")
        raw = _Raw(name, abbr, adornment, qualifiers, constraints, first)
        self._raw.append(raw)
        return raw

    def _word_follows(self):
        nxt = self.peek(1)
        return nxt.kind == "NAME" or (nxt.kind == "LPAREN" and self.peek(2).kind == "NAME")

    def _constraint(self):
        if self.tok.kind == "OP":
            op = self.advance().value
            target, literal = self._constraint_target()
            return Constraint("relation", op=op, target=target, literal=literal)
        if self.tok.kind != "NAME":
            self.fail({"type", "relation"})
        type_name = str(self._qname())
        if self.tok.kind == "OP" and not self.tok.spaced:
            op = self.advance().value
            target, literal = self._constraint_target()
            # a type followed by a relation is two constraints sharing one slot
            return _TypedRelation(type_name, Constraint("relation", op=op, target=target, literal=literal))
        return Constraint("type", type_name=type_name)

    def _constraint_target(self):
        t = self.tok
        if t.kind == "STRING":
            self.advance()
            return t.value, True
        if t.kind == "NUMBER":
            self.advance()
            return (float(t.value) if "." in t.value else int(t.value)), True
        if t.kind == "NAME":
            return str(self._qname()), False
        self.fail({"name", "value"})

    # -- group shorthand ------------------------------------------------

    def _resolve_groups(self, raws, site):
        groups = []
        for p in raws:
            if (
                not groups
                or p.explicit
                or p.token.line != groups[-1][-1].token.line
                or groups[-1][-1].constraints
            ):
                groups.append([p])
            else:
                groups[-1].append(p)
        for group in groups:
            leader, last = group[0], group[-1]
            for p in group[1:]:
                p.adornment = leader.adornment
                p.qualifiers = list(leader.qualifiers)
            for p in group[:-1]:
                p.constraints = list(last.constraints)
        for p in raws:
            p.constraints = _expand_typed(p.constraints)
            if p.adornment is None and site == "decl":
                p.adornment = "in"

    def _freeze(self, items):
        clauses = []
        for item in items:
            if isinstance(item, Or):
                clauses.append(Or(tuple(self._freeze(a) for a in item.alternatives)))
            else:
                clauses.append(item.freeze())
        return ParamExpr(tuple(clauses))


class _TypedRelation:
    """Placeholder for "role=r0": a type constraint plus a relation."""

    kind = "typed"

    def __init__(self, type_name, relation):
        self.type_name = type_name
        self.relation = relation


def _expand_typed(constraints):
    out = []
    for c in constraints:
        if isinstance(c, _TypedRelation):
            out.append(Constraint("type", type_name=c.type_name))
            out.append(c.relation)
        else:
            out.append(c)
    return out


def parse(text: str) -> Specification:
    """Parse protocol source text into a Specification."""
    return Parser(text).parse()
