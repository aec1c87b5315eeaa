"""Deterministic discrete-event simulation of the mobility testbed."""

from .events import Simulator
from .links import Link, serialization_us
from .topology import Network, TopologyConfig, TunnelConfig, Mode, build_topology
from .metrics import MetricsTrace, ComparisonSummary, compare_runs, write_csv
from .runner import (
    MoveClient,
    StartBulkTransfer,
    StartEcho,
    Stop,
    ScenarioEvent,
    ScenarioError,
    run_scenario,
    run_pmip_baseline,
    sdn_switchover_budget_us,
    pmip_switchover_budget_us,
)

__all__ = [
    "Simulator",
    "Link",
    "serialization_us",
    "Network",
    "TopologyConfig",
    "TunnelConfig",
    "Mode",
    "build_topology",
    "MetricsTrace",
    "ComparisonSummary",
    "compare_runs",
    "write_csv",
    "MoveClient",
    "StartBulkTransfer",
    "StartEcho",
    "Stop",
    "ScenarioEvent",
    "ScenarioError",
    "run_scenario",
    "run_pmip_baseline",
    "sdn_switchover_budget_us",
    "pmip_switchover_budget_us",
]
