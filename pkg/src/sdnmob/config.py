"""Scenario files.

Line-oriented INI-style text with four sections: ``[topology]``, ``[zones]``,
``[events]`` and an optional ``[tunnel]``. Every diagnostic carries a
``file:line`` location. Durations are written in seconds and converted to
the integer-microsecond time base on load.

    [topology]
    link_bandwidth_bps = 10000000
    link_delay_s = 0.001

    [zones]
    zone1 = range=10.1.0.0/24 dhcp_latency_s=0.1 tap_filter=all

    [events]
    echo = start_echo at=0 interval_s=0.05 payload_len=100
    move = move_client at=10 zone=zone2
    stop = stop at=30

    [tunnel]
    encap_overhead_bytes = 40
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from ipaddress import IPv4Network
from typing import Dict, List, Optional, Tuple

from .sim.runner import (
    MoveClient,
    ScenarioError,
    ScenarioEvent,
    StartBulkTransfer,
    StartEcho,
    Stop,
    validate_events,
)
from .sim.topology import ConfigurationError, TopologyConfig, TunnelConfig
from .tap_server import TapFilter, ZoneConfig
from .units import usec

SECTIONS = ("topology", "zones", "events", "tunnel")

_TOPOLOGY_KEYS = {
    "link_bandwidth_bps", "link_delay_s", "control_delay_s",
    "vpip_pool", "seed", "idle_timeout_s", "keepalive_interval_s",
}
_ZONE_KEYS = {"range", "dhcp_latency_s", "tap_filter"}
_TUNNEL_KEYS = {"encap_overhead_bytes", "binding_update_delay_s"}
_EVENT_KINDS = ("start_echo", "start_bulk", "move_client", "stop")

MODES = ("sdn", "pmip", "both")


class ConfigError(ValueError):
    def __init__(self, source: str, line: int, message: str):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}")


@dataclass
class RunConfig:
    topology: TopologyConfig
    events: List[ScenarioEvent]
    mode: str
    tunnel: Optional[TunnelConfig]
    output_dir: str

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode in ("pmip", "both") and self.tunnel is None:
            raise ValueError(f"mode {self.mode!r} needs a [tunnel] section")


@dataclass
class _Entry:
    line: int
    value: str


def _parse_sections(text: str, source: str) -> Dict[str, "OrderedEntries"]:
    sections: Dict[str, List[Tuple[str, _Entry]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigError(source, lineno, f"unknown section [{name}]")
            if name in sections:
                raise ConfigError(source, lineno, f"duplicate section [{name}]")
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ConfigError(source, lineno, f"content before any section: {line!r}")
        if "=" not in line:
            raise ConfigError(source, lineno, f"expected 'key = value': {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(source, lineno, "empty key")
        if any(k == key for k, _ in sections[current]):
            raise ConfigError(source, lineno, f"duplicate key {key!r} in [{current}]")
        sections[current].append((key, _Entry(lineno, value)))
    if "topology" not in sections:
        raise ConfigError(source, 0, "missing [topology] section")
    if "zones" not in sections:
        raise ConfigError(source, 0, "missing [zones] section")
    if "events" not in sections:
        raise ConfigError(source, 0, "missing [events] section")
    return sections


def _attrs(value: str, allowed: set, source: str, line: int) -> Dict[str, str]:
    """Parse 'k=v k=v ...' attribute lists used by zone and event values."""
    out: Dict[str, str] = {}
    for token in value.split():
        if "=" not in token:
            raise ConfigError(source, line, f"expected key=value token, got {token!r}")
        k, _, v = token.partition("=")
        if k not in allowed:
            raise ConfigError(source, line, f"unknown attribute {k!r}")
        if k in out:
            raise ConfigError(source, line, f"duplicate attribute {k!r}")
        out[k] = v
    return out


def _convert(source: str, line: int, caster, value: str, what: str):
    try:
        return caster(value)
    except (ValueError, TypeError):
        raise ConfigError(source, line, f"bad {what}: {value!r}") from None


def parse_scenario(text: str, source: str = "<config>") -> Tuple[
        TopologyConfig, List[ScenarioEvent], Optional[TunnelConfig]]:
    sections = _parse_sections(text, source)

    topo_kwargs: Dict[str, object] = {}
    topo_line = 0
    for key, entry in sections["topology"]:
        topo_line = entry.line
        if key not in _TOPOLOGY_KEYS:
            raise ConfigError(source, entry.line, f"unknown key {key!r} in [topology]")
        if key == "link_bandwidth_bps":
            topo_kwargs[key] = _convert(source, entry.line, int, entry.value, "bit rate")
        elif key == "seed":
            topo_kwargs[key] = _convert(source, entry.line, int, entry.value, "seed")
        elif key == "vpip_pool":
            topo_kwargs[key] = _convert(
                source, entry.line, IPv4Network, entry.value, "address range")
        else:  # *_s duration keys
            sec = _convert(source, entry.line, float, entry.value, "duration")
            topo_kwargs[key[: -len("_s")] + "_us"] = usec(sec)

    zones: List[ZoneConfig] = []
    for zone_id, entry in sections["zones"]:
        attrs = _attrs(entry.value, _ZONE_KEYS, source, entry.line)
        if "range" not in attrs:
            raise ConfigError(source, entry.line, f"zone {zone_id!r} needs range=")
        rng = _convert(source, entry.line, IPv4Network, attrs["range"], "address range")
        latency = usec(_convert(source, entry.line, float,
                                attrs.get("dhcp_latency_s", "0.1"), "duration"))
        filter_name = attrs.get("tap_filter", "all")
        try:
            tap_filter = TapFilter(filter_name)
        except ValueError:
            raise ConfigError(source, entry.line,
                              f"tap_filter must be one of "
                              f"{[f.value for f in TapFilter]}, got {filter_name!r}")
        zones.append(ZoneConfig(zone_id, rng, latency, tap_filter))

    try:
        topology = TopologyConfig(zones=tuple(zones), **topo_kwargs)
    except ConfigurationError as exc:
        raise ConfigError(source, topo_line, str(exc)) from None

    events: List[ScenarioEvent] = []
    event_lines: List[int] = []
    for label, entry in sections["events"]:
        events.append(_parse_event(entry.value, source, entry.line, topology))
        event_lines.append(entry.line)
    try:
        validate_events(topology, events)
    except ScenarioError as exc:
        line = event_lines[0] if event_lines else 0
        raise ConfigError(source, line, str(exc)) from None

    tunnel: Optional[TunnelConfig] = None
    if "tunnel" in sections:
        t_kwargs: Dict[str, object] = {}
        for key, entry in sections["tunnel"]:
            if key not in _TUNNEL_KEYS:
                raise ConfigError(source, entry.line, f"unknown key {key!r} in [tunnel]")
            if key == "encap_overhead_bytes":
                t_kwargs[key] = _convert(source, entry.line, int, entry.value, "byte count")
            else:
                sec = _convert(source, entry.line, float, entry.value, "duration")
                t_kwargs["binding_update_delay_us"] = usec(sec)
        tunnel = TunnelConfig(**t_kwargs)

    return topology, events, tunnel


def _parse_event(value: str, source: str, line: int,
                 topology: TopologyConfig) -> ScenarioEvent:
    tokens = value.split()
    if not tokens:
        raise ConfigError(source, line, "empty event")
    kind = tokens[0]
    if kind not in _EVENT_KINDS:
        raise ConfigError(source, line,
                          f"unknown event kind {kind!r}; expected one of {_EVENT_KINDS}")
    keys = {
        "start_echo": {"at", "interval_s", "payload_len"},
        "start_bulk": {"at", "total_bytes", "payload_len"},
        "move_client": {"at", "zone"},
        "stop": {"at"},
    }[kind]
    attrs = _attrs(" ".join(tokens[1:]), keys, source, line)
    if "at" not in attrs:
        raise ConfigError(source, line, f"event {kind!r} needs at=<seconds>")
    at = usec(_convert(source, line, float, attrs["at"], "time"))
    if kind == "start_echo":
        for needed in ("interval_s", "payload_len"):
            if needed not in attrs:
                raise ConfigError(source, line, f"start_echo needs {needed}=")
        return StartEcho(
            at,
            usec(_convert(source, line, float, attrs["interval_s"], "duration")),
            _convert(source, line, int, attrs["payload_len"], "byte count"),
        )
    if kind == "start_bulk":
        for needed in ("total_bytes", "payload_len"):
            if needed not in attrs:
                raise ConfigError(source, line, f"start_bulk needs {needed}=")
        return StartBulkTransfer(
            at,
            _convert(source, line, int, attrs["total_bytes"], "byte count"),
            _convert(source, line, int, attrs["payload_len"], "byte count"),
        )
    if kind == "move_client":
        if "zone" not in attrs:
            raise ConfigError(source, line, "move_client needs zone=")
        zone_id = attrs["zone"]
        if not any(z.zone_id == zone_id for z in topology.zones):
            raise ConfigError(source, line, f"unknown zone {zone_id!r}")
        return MoveClient(at, zone_id)
    return Stop(at)


def load_config(path: str, mode: str = "both", output_dir: str = "out",
                seed_override: Optional[int] = None) -> RunConfig:
    """Load and fully validate a scenario file into a runnable config."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    topology, events, tunnel = parse_scenario(text, source=path)
    if seed_override is not None:
        topology = TopologyConfig(
            zones=topology.zones,
            link_bandwidth_bps=topology.link_bandwidth_bps,
            link_delay_us=topology.link_delay_us,
            control_delay_us=topology.control_delay_us,
            vpip_pool=topology.vpip_pool,
            seed=seed_override,
            idle_timeout_us=topology.idle_timeout_us,
            keepalive_interval_us=topology.keepalive_interval_us,
        )
    if mode in ("pmip", "both") and tunnel is None:
        raise ConfigError(path, 0, f"mode {mode!r} needs a [tunnel] section")
    return RunConfig(topology, events, mode, tunnel, output_dir)


def dump_config(config: RunConfig) -> str:
    """Serialize back to the file format; reloading yields an equal config."""
    t = config.topology
    lines = [
        "[topology]",
        f"link_bandwidth_bps = {t.link_bandwidth_bps}",
        f"link_delay_s = {t.link_delay_us / 1e6:.6f}",
        f"control_delay_s = {t.control_delay_us / 1e6:.6f}",
        f"vpip_pool = {t.vpip_pool}",
        f"seed = {t.seed}",
        f"idle_timeout_s = {t.idle_timeout_us / 1e6:.6f}",
        f"keepalive_interval_s = {t.keepalive_interval_us / 1e6:.6f}",
        "",
        "[zones]",
    ]
    for z in t.zones:
        lines.append(
            f"{z.zone_id} = range={z.dhcp_range} "
            f"dhcp_latency_s={z.dhcp_latency / 1e6:.6f} "
            f"tap_filter={z.tap_filter.value}"
        )
    lines += ["", "[events]"]
    for i, e in enumerate(config.events):
        lines.append(f"e{i} = {_dump_event(e)}")
    if config.tunnel is not None:
        lines += ["", "[tunnel]",
                  f"encap_overhead_bytes = {config.tunnel.encap_overhead_bytes}"]
        bud = config.tunnel.binding_update_delay_us
        if bud is not None:
            lines.append(f"binding_update_delay_s = {bud / 1e6:.6f}")
    return "\n".join(lines) + "\n"


def _dump_event(e: ScenarioEvent) -> str:
    at = f"at={e.at_us / 1e6:.6f}"
    if isinstance(e, StartEcho):
        return f"start_echo {at} interval_s={e.interval_us / 1e6:.6f} payload_len={e.payload_len}"
    if isinstance(e, StartBulkTransfer):
        return f"start_bulk {at} total_bytes={e.total_bytes} payload_len={e.payload_len}"
    if isinstance(e, MoveClient):
        return f"move_client {at} zone={e.zone_id}"
    return f"stop {at}"


def bundled_scenario_path(name: str) -> Optional[str]:
    """Resolve a bundled scenario name (with or without .ini) to a path."""
    base = os.path.join(os.path.dirname(__file__), "scenarios")
    for candidate in (name, name + ".ini"):
        path = os.path.join(base, candidate)
        if os.path.isfile(path):
            return path
    return None
