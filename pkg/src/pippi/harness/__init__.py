"""Simulated agents, scenarios and trace replay."""

from .policies import PeerSharing, Policy, Rule, RulePolicy, make_policy
from .scenario import Report, Scenario, ScenarioError, StepLimitExceeded, builtin, run_scenario
from .sim import CorruptTrace, Event, SimNetwork, replay

__all__ = [
    "CorruptTrace",
    "Event",
    "PeerSharing",
    "Policy",
    "Report",
    "Rule",
    "RulePolicy",
    "Scenario",
    "ScenarioError",
    "SimNetwork",
    "StepLimitExceeded",
    "builtin",
    "make_policy",
    "replay",
    "run_scenario",
]
