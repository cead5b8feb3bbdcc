"""Positional wire encoding.

A message travels as ``[schema_id, sender, recipient, [keys], [payload]]``
in compact JSON. Parameter names stay with the schema, so two agents that
call the same position by different names still agree on the bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional


class CodecError(Exception):
    pass


class MissingParameter(CodecError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing parameter {name}")


class UnknownParameter(CodecError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown parameter {name}")


class UnknownSchema(CodecError):
    def __init__(self, schema_id):
        self.schema_id = schema_id
        super().__init__(f"unknown schema {schema_id}")


class ArityMismatch(CodecError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected} payload values, got {got}")


class MalformedEncoding(CodecError):
    pass


@dataclass(frozen=True)
class WireMessage:
    schema_id: str
    sender: str
    recipient: str
    keys: tuple
    payload: tuple

    def to_bytes(self) -> bytes:
        body = [self.schema_id, self.sender, self.recipient, list(self.keys), [_plain(v) for v in self.payload]]
        return json.dumps(body, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "WireMessage":
        try:
            body = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
        except (UnicodeDecodeError, ValueError) as e:
            raise MalformedEncoding(str(e)) from None
        if not (isinstance(body, list) and len(body) == 5):
            raise MalformedEncoding("expected a five element array")
        schema_id, sender, recipient, keys, payload = body
        if not all(isinstance(x, str) for x in (schema_id, sender, recipient)):
            raise MalformedEncoding("schema id and addresses must be strings")
        if not isinstance(keys, list) or not isinstance(payload, list):
            raise MalformedEncoding("keys and payload must be arrays")
        return cls(schema_id, sender, recipient, tuple(_frozen(k) for k in keys), tuple(_frozen(v) for v in payload))


def _plain(v):
    if isinstance(v, (tuple, list, frozenset, set)):
        return [_plain(x) for x in v]
    return v


def _frozen(v):
    if isinstance(v, list):
        return tuple(_frozen(x) for x in v)
    return v


def _check_value(name, v):
    if v is None or isinstance(v, (str, int, float, bool)):
        return
    if isinstance(v, (list, tuple)):
        for x in v:
            _check_value(name, x)
        return
    raise CodecError(f"{name}: unsupported value {v!r}")


def build(schema, named: dict, sender="", recipient="") -> WireMessage:
    """Order named values by the schema's payload positions."""
    names = [p.name for p in schema.payload]
    for k in named:
        if k not in names:
            raise UnknownParameter(k)
    payload = []
    for p, n in zip(schema.payload, names):
        if n in named:
            _check_value(n, named[n])
            payload.append(_frozen(named[n]) if isinstance(named[n], list) else named[n])
        elif p.adornment == "opt":
            payload.append(None)
        else:
            raise MissingParameter(n)
    keys = tuple(v for p, v in zip(schema.payload, payload) if p.key)
    return WireMessage(schema.id, sender, recipient, keys, tuple(payload))


def encode(schema, named: dict, sender="", recipient="") -> bytes:
    return build(schema, named, sender, recipient).to_bytes()


def lookup(table, schema_id):
    if hasattr(table, "get"):
        schema = table.get(schema_id)
    else:
        schema = next((s for s in table if s.id == schema_id), None)
    if schema is None:
        raise UnknownSchema(schema_id)
    return schema


def decode_message(table, msg: WireMessage):
    schema = lookup(table, msg.schema_id)
    if len(msg.payload) != len(schema.payload):
        raise ArityMismatch(len(schema.payload), len(msg.payload))
    expected_keys = sum(1 for p in schema.payload if p.key)
    if len(msg.keys) != expected_keys:
        raise MalformedEncoding(f"expected {expected_keys} key values, got {len(msg.keys)}")
    named = {p.name: v for p, v in zip(schema.payload, msg.payload)}
    return schema, named


def decode(table, data: bytes):
    """Return (schema, named payload) using the receiver's own names."""
    return decode_message(table, WireMessage.from_bytes(data))


def schema_table(schemas) -> dict:
    table: dict[str, Any] = {}
    for s in schemas:
        table.setdefault(s.id, s)
    return table


def value_from_text(text: str) -> Optional[Any]:
    """Parse a command-line value: JSON if it parses, else a bare string."""
    try:
        return json.loads(text)
    except ValueError:
        return text
