import re
from dataclasses import dataclass

PUNCT = {
    "(": "LPAREN",
    ")": "RPAREN",
    "[": "LBRACK",
    "]": "RBRACK",
    "{": "LBRACE",
    "}": "RBRACE",
    ":": "COLON",
    ";": "SEMI",
    ",": "COMMA",
}
OPERATORS = ("⊆", "∈", "=", "<", ">")

# characters that can never appear in a name
DISALLOWED = set("()[]{}:;,") | set(OPERATORS) | {'"'}

_NUMBER = re.compile(r"[+-]?\d+(\.\d+)?$")


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int
    offset: int
    end: int
    # whitespace (or a comment) separates this token from the previous one
    spaced: bool
    # a line break separates this token from the previous one
    newline: bool

    def __repr__(self):
        return f"<{self.kind} {self.value!r} {self.line}:{self.column}>"


def tokenize(text: str) -> list:
    """Split source text into tokens.

    Characters that fit no token become ERROR tokens; the parser decides
    whether they matter (preamble values are read raw and may contain
    anything).
    """
    tokens = []
    i = 0
    line = 1
    line_start = 0
    spaced = True
    newline = True
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            line_start = i + 1
            i += 1
            spaced = newline = True
            continue
        if c.isspace():
            i += 1
            spaced = True
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            spaced = True
            continue

        start = i
        col = i - line_start + 1
        if text.startswith("->", i):
            kind, i = "ARROW", i + 2
        elif c in ("→", "↦"):
            kind, i = "ARROW", i + 1
        elif c in PUNCT:
            kind, i = PUNCT[c], i + 1
        elif c in OPERATORS:
            kind, i = "OP", i + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j < n and text[j] == '"':
                kind, i = "STRING", j + 1
            else:
                kind, i = "ERROR", j
        else:
            j = i
            while j < n:
                ch = text[j]
                if ch.isspace() or ch in DISALLOWED or text.startswith("->", j):
                    break
                if text.startswith("//", j) or ch in ("→", "↦"):
                    break
                j += 1
            kind, i = "NAME", j
        value = text[start:i]
        if kind == "NAME" and _NUMBER.match(value):
            kind = "NUMBER"
        if kind == "STRING":
            value = value[1:-1]
        tokens.append(Token(kind, value, line, col, start, i, spaced, newline))
        spaced = newline = False

    tokens.append(Token("EOF", "", line, i - line_start + 1, n, n, True, True))
    return tokens
