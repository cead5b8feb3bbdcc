"""Scenario files: which agents run which protocols, and what must hold after.

A scenario is YAML::

    name: witness
    specs: [corpus:witness.bspl]
    seed: 7
    agents:
      - address: judge
        protocols: [Witness]
        bindings: [{context: {cID: c1}, values: {cID: c1, J: judge, W: witness}}]
        rules: [{send: RequestApproval}]
    track: [{agent: judge, protocol: Witness}]
    until: complete
    assert:
      - complete: {agent: judge, protocol: Witness}

Spec paths are relative to the scenario file; ``corpus:`` and
``scenarios:`` prefixes name files shipped with the package.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from ..enactment import Adapter, AdapterConfig
from ..lang import expand_names, parse
from ..model import Library, resolve_decl
from ..registry import Registry
from .policies import make_policy
from .sim import SimNetwork

DEFAULT_STEP_LIMIT = 10_000


class ScenarioError(Exception):
    pass


class StepLimitExceeded(Exception):
    def __init__(self, report):
        self.report = report
        super().__init__(f"{report.name}: step limit {report.steps} reached")


@dataclass
class Report:
    name: str
    seed: int
    status: str  # complete, quiescent, step-limit
    steps: int
    trace: list
    stores: dict
    assertions: list  # (description, passed, detail)
    network: Optional[SimNetwork] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.status != "step-limit" and all(ok for _, ok, _ in self.assertions)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "status": self.status,
            "steps": self.steps,
            "passed": self.passed,
            "assertions": [{"check": d, "passed": ok, "detail": det} for d, ok, det in self.assertions],
            "trace": self.trace,
        }


def resolve_path(path: str, base: str) -> str:
    for prefix, package in (("corpus:", "pippi.corpus"), ("scenarios:", "pippi.scenarios")):
        if path.startswith(prefix):
            return str(resources.files(package).joinpath(path[len(prefix):]))
    return path if os.path.isabs(path) else os.path.join(base, path)


def builtin(name: str) -> str:
    """Path of a scenario shipped with the package."""
    if not name.endswith(".yaml"):
        name += ".yaml"
    return str(resources.files("pippi.scenarios").joinpath(name))


@dataclass
class Scenario:
    name: str
    library: Library
    agents: list
    track: list
    until: object
    assertions: list
    seed: int = 0
    reorder: bool = True
    max_delay: int = 8
    step_limit: int = DEFAULT_STEP_LIMIT
    base: str = "."

    @classmethod
    def load(cls, path) -> "Scenario":
        if not os.path.exists(path):
            raise FileNotFoundError(path)
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
        return cls.from_data(data, os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_data(cls, data: dict, base=".") -> "Scenario":
        lib = Library()
        for p in data.get("specs", []):
            full = resolve_path(p, base)
            with open(full, encoding="utf-8") as f:
                lib.add(expand_names(parse(f.read())), os.path.basename(full))
        return cls(
            name=data.get("name", "scenario"),
            library=lib,
            agents=list(data.get("agents", [])),
            track=list(data.get("track", [])),
            until=data.get("until", "quiescence"),
            assertions=list(data.get("assert", [])),
            seed=int(data.get("seed", 0)),
            reorder=bool(data.get("reorder", True)),
            max_delay=int(data.get("max_delay", 8)),
            step_limit=int(data.get("step_limit", DEFAULT_STEP_LIMIT)),
            base=base,
        )

    def resolved(self, name):
        decl = self.library.get(name)
        if decl is None:
            raise ScenarioError(f"{self.name}: no protocol {name}")
        return resolve_decl(decl, self.library, self.library.files.get(name, "-"))

    def contacts(self, spec) -> Optional[Registry]:
        if spec is None:
            return None
        if isinstance(spec, str):
            return Registry.load(resolve_path(spec, self.base))
        return Registry.from_contacts(spec)

    def adapter(self, a: dict, seed: int) -> Adapter:
        contacts = self.contacts(a.get("contacts"))
        if contacts is None and a.get("registry", True):
            contacts = Registry()
        for cap in a.get("capabilities", []):
            contacts.observe_introduction(*cap)
        config = AdapterConfig(
            address=a["address"],
            protocols=[self.resolved(p) for p in a.get("protocols", [])],
            plays=set(a.get("plays", [])),
            contacts=contacts,
            library=self.library,
            seed=seed,
        )
        adapter = Adapter(config)
        for b in a.get("bindings", []):
            ctx = dict(b.get("context", {}))
            for k, v in b.get("values", {}).items():
                adapter.store.bind(k, ctx, v)
        return adapter

    def network(self, seed: Optional[int] = None, reorder: Optional[bool] = None) -> SimNetwork:
        seed = self.seed if seed is None else seed
        net = SimNetwork(seed, self.reorder if reorder is None else reorder, self.max_delay)
        for a in self.agents:
            policy = a.get("policy")
            if policy is None:
                policy = a.get("rules", [])
            net.add(self.adapter(a, seed), make_policy(policy))
        for t in self.track:
            net.track(t["agent"], self.resolved(t["protocol"]))
        return net


def _done(s: Scenario, net: SimNetwork) -> bool:
    until = s.until
    if until == "quiescence":
        return False
    if until == "complete":
        return all(net.complete(t["agent"], t["protocol"]) for t in s.track)
    if isinstance(until, dict) and "complete" in until:
        return all(net.complete(t["agent"], t["protocol"]) for t in until["complete"])
    if isinstance(until, dict) and "policy" in until:
        c = until["policy"]
        return net.policies[c["agent"]].state.get(c["key"]) is not None
    raise ScenarioError(f"unknown termination {until!r}")


def run_scenario(s: Scenario, seed: Optional[int] = None, step_limit: Optional[int] = None,
                 reorder: Optional[bool] = None) -> Report:
    seed = s.seed if seed is None else seed
    limit = s.step_limit if step_limit is None else step_limit
    net = s.network(seed, reorder)
    status = "step-limit"
    idle = 0
    while net.steps < limit:
        before = len(net.events)
        net.step()
        if _done(s, net):
            status = "complete"
            break
        idle = idle + 1 if len(net.events) == before and net.quiescent() else 0
        if idle >= 2:
            status = "quiescent"
            break
    report = Report(s.name, seed, status, net.steps, net.trace(),
                    {a: ad.store for a, ad in net.agents.items()}, [], net)
    report.assertions = [check(s, net, a) for a in s.assertions]
    if status == "quiescent" and s.until != "quiescence":
        report.assertions.append(("termination", False, "quiescent before the termination condition held"))
    return report


def _first(net, kind, schema, agent=None):
    for i, e in enumerate(net.events):
        if e.kind == kind and schema in (e.schema, e.schema.split("/")[-1]) and agent in (None, e.agent):
            return i
    return None


def check(s: Scenario, net: SimNetwork, a: dict):
    """Evaluate one assertion; returns (description, passed, detail)."""
    (kind, arg), = a.items()
    desc = f"{kind} {json.dumps(arg, sort_keys=True)}"
    if kind == "complete":
        ok = net.complete(arg["agent"], arg["protocol"])
        return desc, ok, "" if ok else "never completed"
    if kind == "bound" or kind == "unbound":
        store = net.agents[arg["agent"]].store
        vals = [v for (p, _), v in store.bindings.items() if p == arg["param"]]
        if kind == "unbound":
            return desc, not vals, f"values {vals}"
        ok = bool(vals) and ("value" not in arg or arg["value"] in vals)
        return desc, ok, f"values {vals}"
    if kind == "sent" or kind == "not_sent":
        i = _first(net, "SENT", arg if isinstance(arg, str) else arg["schema"])
        ok = (i is not None) == (kind == "sent")
        return desc, ok, f"first index {i}"
    if kind == "before":
        first, second = arg
        i, j = _first(net, "SENT", first), _first(net, "SENT", second)
        ok = i is not None and j is not None and i < j
        return desc, ok, f"{first} at {i}, {second} at {j}"
    if kind == "no_quarantine":
        bad = [e.line() for e in net.events if e.kind == "QUAR"]
        return desc, not bad, "; ".join(bad[:3])
    if kind == "knows":
        reg = net.agents[arg["agent"]].config.contacts
        want = arg["contacts"] if isinstance(arg["contacts"], list) else [arg["contacts"]]
        have = reg.candidates(arg["protocol"], arg.get("role")) if reg else []
        missing = [x for x in want if x not in have]
        return desc, not missing, f"candidates {have}"
    if kind == "registry_size":
        reg = net.agents[arg["agent"]].config.contacts
        have = reg.candidates(arg["protocol"], arg.get("role"))
        ok = len(have) == len(set(have)) == arg["count"]
        return desc, ok, f"candidates {have}"
    if kind == "policy":
        got = net.policies[arg["agent"]].state.get(arg["key"])
        return desc, got == arg["equals"], f"{arg['key']} = {got!r}"
    raise ScenarioError(f"unknown assertion {kind}")
