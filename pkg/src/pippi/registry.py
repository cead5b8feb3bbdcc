"""Cross-enactment memory of other agents: the MAS adapter."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


class UnknownContact(Exception):
    def __init__(self, address):
        self.address = address
        super().__init__(f"unknown contact {address}")


@dataclass
class ContactEntry:
    address: str
    # (protocol, role); role None means a free-form label
    capabilities: set = field(default_factory=set)
    played: list = field(default_factory=list)  # (protocol, role, key, outcome)
    attributes: dict = field(default_factory=dict)

    def matches(self, protocol, role) -> bool:
        for p, r in self.capabilities:
            if p == protocol and (role is None or r in (None, role)):
                return True
            if r is None and p == role:
                return True
        return False

    def successes(self) -> int:
        return sum(1 for *_, outcome in self.played if outcome == "COMPLETE")


class Registry:
    def __init__(self):
        self.entries: dict = {}

    def __contains__(self, address):
        return address in self.entries

    def __len__(self):
        return len(self.entries)

    def entry(self, address) -> ContactEntry:
        try:
            return self.entries[address]
        except KeyError:
            raise UnknownContact(address) from None

    def observe_introduction(self, address, protocol, role=None) -> "Registry":
        e = self.entries.setdefault(address, ContactEntry(address))
        e.capabilities.add((protocol, role))
        return self

    def candidates(self, protocol, role=None, exclude=()) -> list:
        found = [
            e for e in self.entries.values()
            if e.address not in exclude and e.matches(protocol, role)
        ]
        found.sort(key=lambda e: (-e.successes(), e.address))
        return [e.address for e in found]

    def record_outcome(self, address, protocol, role, key, outcome) -> "Registry":
        self.entry(address).played.append((protocol, role, key, outcome))
        return self

    def snapshot(self) -> dict:
        return {
            a: {
                "capabilities": sorted(([p, r] for p, r in e.capabilities), key=lambda c: (c[0], c[1] or "")),
                "played": [list(x) for x in e.played],
                "attributes": dict(e.attributes),
            }
            for a, e in sorted(self.entries.items())
        }

    @classmethod
    def from_contacts(cls, data) -> "Registry":
        """Load the {label: [address, ...]} contacts shape."""
        reg = cls()
        for label, addresses in data.items():
            if isinstance(addresses, str):
                addresses = [addresses]
            for a in addresses:
                reg.observe_introduction(a, label)
        return reg

    @classmethod
    def load(cls, path) -> "Registry":
        with open(path, encoding="utf-8") as f:
            return cls.from_contacts(json.load(f))


def first_candidate(registry: Optional[Registry], protocol, role=None, exclude=()) -> Optional[str]:
    if registry is None:
        return None
    found = registry.candidates(protocol, role, exclude)
    return found[0] if found else None
