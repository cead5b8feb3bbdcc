"""Protocol language front end: parsing, printing and name expansion."""

from .ast import (
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
    to_json,
)
from .names import AmbiguousAlias, UnknownPrefix, aliases, expand_names
from .parser import ParseError, parse
from .printer import print_declaration, print_spec

__all__ = [
    "AmbiguousAlias",
    "Constraint",
    "Or",
    "ParamExpr",
    "Parameter",
    "ParseError",
    "ParseWarning",
    "ProtocolDecl",
    "QualifiedName",
    "Reference",
    "RoleRef",
    "Span",
    "Specification",
    "UnknownPrefix",
    "aliases",
    "expand_names",
    "parse",
    "print_declaration",
    "print_spec",
    "to_json",
]
