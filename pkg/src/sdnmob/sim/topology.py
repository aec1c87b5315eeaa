"""Simulated testbed: one SDN core router, one distribution router and tap
server per zone, one mobile client, one external server.

The same topology runs in two modes. In SDN mode the core translates the
client's zone-local address to its stable virtual address according to the
flow table, fed by tap-server discovery. In the tunneling baseline the core
acts as the mobility anchor: the client keeps one home address, packets on
the distribution-core segment carry encapsulation overhead, and handoffs
redirect the tunnel only after a binding update completes.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Callable, Dict, List, Optional, Tuple

from ..addressing import AddressPool, Uid, check_disjoint
from ..controller import (
    ControlAction,
    EvictClient,
    HostReport,
    InstallFlows,
    MobilityController,
    RefreshFlows,
    DEFAULT_IDLE_TIMEOUT_US,
    LIVENESS_WINDOW_FACTOR,
)
from ..flow_engine import FlowMatch, Forwarded, SdnSwitch
from ..packet import Packet, PacketKind
from ..tap_server import (
    DEFAULT_UPDATE_INTERVAL_US,
    TapServer,
    ZoneConfig,
)
from ..units import US_PER_S
from .events import Simulator
from .links import Link
from .metrics import HandoffRecord, MetricsTrace, MstTransition
from .transport import TransportSide

EXT_PORT = "ext"
EXPIRY_TICK_US = 1 * US_PER_S
BROADCAST = IPv4Address("255.255.255.255")
ALL_ROUTERS = IPv4Address("224.0.0.2")

CLIENT_UID = Uid("aa:bb:cc:00:00:01")
SERVER_UID = Uid("aa:bb:cc:00:00:fe")
SERVER_ADDR = IPv4Address("203.0.113.10")


class ConfigurationError(ValueError):
    pass


class Mode(enum.Enum):
    SDN = "sdn"
    PMIP = "pmip"


@dataclass(frozen=True)
class TopologyConfig:
    zones: Tuple[ZoneConfig, ...]
    link_bandwidth_bps: int = 10_000_000
    link_delay_us: int = 1_000
    control_delay_us: int = 5_000
    vpip_pool: IPv4Network = IPv4Network("198.51.100.0/24")
    seed: int = 42
    idle_timeout_us: int = DEFAULT_IDLE_TIMEOUT_US
    keepalive_interval_us: int = DEFAULT_UPDATE_INTERVAL_US

    def __post_init__(self) -> None:
        if not self.zones:
            raise ConfigurationError("at least one zone is required")
        ids = [z.zone_id for z in self.zones]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate zone ids: {ids}")
        if self.link_bandwidth_bps <= 0:
            raise ConfigurationError("link bandwidth must be positive")
        if self.link_delay_us < 0 or self.control_delay_us < 0:
            raise ConfigurationError("delays must be non-negative")
        if any(z.dhcp_latency < 0 for z in self.zones):
            raise ConfigurationError("dhcp latency must be non-negative")
        overlap = check_disjoint([z.dhcp_range for z in self.zones] + [self.vpip_pool])
        if overlap is not None:
            raise ConfigurationError(
                f"address ranges overlap: {overlap[0]} and {overlap[1]}"
            )

    def zone(self, zone_id: str) -> ZoneConfig:
        for z in self.zones:
            if z.zone_id == zone_id:
                return z
        raise ConfigurationError(f"unknown zone: {zone_id!r}")


@dataclass(frozen=True)
class TunnelConfig:
    encap_overhead_bytes: int = 40
    binding_update_delay_us: Optional[int] = None  # default: 2x control delay

    def __post_init__(self) -> None:
        if self.encap_overhead_bytes < 0:
            raise ConfigurationError("encapsulation overhead cannot be negative")

    def resolved_binding_delay(self, control_delay_us: int) -> int:
        if self.binding_update_delay_us is not None:
            return self.binding_update_delay_us
        return 2 * control_delay_us


class ClientHost:
    """The mobile client: one attachment at a time, address from the current
    zone (or a stable home address in tunnel mode)."""

    def __init__(self, net: "Network", uid: Uid):
        self.net = net
        self.sim = net.sim
        self.uid = uid
        self.addr: Optional[IPv4Address] = None
        self.home_addr: Optional[IPv4Address] = None
        self.current_zone: Optional[str] = None
        self.conns: Dict[int, TransportSide] = {}
        self.in_dhcp = False

    def peer_addr(self, conn_id: int) -> IPv4Address:
        return self.net.server.addr

    def transmit(self, pkt: Packet) -> None:
        self.net.count("transmissions")
        link = self.net.access_up.get(self.current_zone)
        if link is None:
            self.net.count("link_drops")
            return
        link.send(pkt)

    def handle(self, pkt: Packet, now: int) -> None:
        if self.addr is None or pkt.dst_ip != self.addr:
            self.net.count("host_drops")
            return
        side = self.conns.get(pkt.conn_id)
        if side is None:
            self.net.count("host_drops")
            return
        self.net.count("accepted")
        if pkt.kind is PacketKind.DATA:
            self.net.note_delivery(now)
            side.receive_data(pkt)
        elif pkt.kind is PacketKind.ACK:
            side.receive_ack(pkt)


class ServerConn:
    def __init__(self, side: TransportSide, established_src: IPv4Address):
        self.side = side
        self.established_src = established_src


class ServerHost:
    """External correspondent: echoes or sinks client data, and resets a
    connection whose established source address suddenly changes."""

    def __init__(self, net: "Network", uid: Uid, addr: IPv4Address):
        self.net = net
        self.sim = net.sim
        self.uid = uid
        self.addr = addr
        self.conns: Dict[int, ServerConn] = {}

    def peer_addr(self, conn_id: int) -> IPv4Address:
        return self.conns[conn_id].established_src

    def transmit(self, pkt: Packet) -> None:
        self.net.count("transmissions")
        self.net.ext_in.send(pkt)

    def handle(self, pkt: Packet, now: int) -> None:
        if pkt.dst_ip != self.addr:
            self.net.count("host_drops")
            return
        self.net.count("accepted")
        if pkt.kind is PacketKind.DATA:
            self.net.observed_sources.add(str(pkt.src_ip))
            self.net.note_server_data(pkt, now)
            conn = self.conns.get(pkt.conn_id)
            if conn is None:
                conn = self._establish(pkt.conn_id, pkt.src_ip)
            elif conn.established_src != pkt.src_ip:
                self.net.resets += 1
                conn.established_src = pkt.src_ip
            conn.side.receive_data(pkt)
        elif pkt.kind is PacketKind.ACK:
            conn = self.conns.get(pkt.conn_id)
            if conn is not None:
                conn.side.receive_ack(pkt)

    def _establish(self, conn_id: int, src: IPv4Address) -> ServerConn:
        def on_deliver(now: int, payload_len: int) -> None:
            self.net.note_goodput(now, payload_len)
            if conn_id in self.net.echo_conn_ids:
                conn.side.submit(payload_len)

        side = TransportSide(
            self, conn_id, role="server",
            on_rtt_sample=lambda t, r: self.net.rtt_server.append((t, r)),
            on_deliver=on_deliver,
        )
        conn = ServerConn(side, src)
        self.conns[conn_id] = conn
        return conn


class DistRouter:
    """Zone gateway: plain routing between its access segment and the core.
    DHCP and router-solicitation traffic terminates here."""

    def __init__(self, net: "Network", zone: ZoneConfig):
        self.net = net
        self.zone = zone

    def handle_from_access(self, pkt: Packet, now: int) -> None:
        if pkt.kind in (PacketKind.DHCP_DISCOVER, PacketKind.ROUTER_SOLICITATION):
            self.net.count("consumed")
            return
        if pkt.dst_ip in self.zone.dhcp_range:
            self.net.access_down[self.zone.zone_id].send(pkt)
        else:
            self.net.trunk_up[self.zone.zone_id].send(pkt)

    def handle_from_core(self, pkt: Packet, now: int) -> None:
        # In tunnel mode the gateway acts as the client's access gateway:
        # decapsulated traffic for the attached client's home address goes to
        # the access segment even though the address is zone-foreign.
        tunneled_local = (
            self.net.mode is Mode.PMIP
            and pkt.dst_ip == self.net.client.home_addr
        )
        if pkt.dst_ip in self.zone.dhcp_range or tunneled_local:
            self.net.access_down[self.zone.zone_id].send(pkt)
        else:
            self.net.count("unrouted_drops")


class Network:
    """All simulation state for one run. Build one network per run."""

    def __init__(self, cfg: TopologyConfig, mode: Mode = Mode.SDN,
                 tunnel: Optional[TunnelConfig] = None):
        if mode is Mode.PMIP and tunnel is None:
            raise ConfigurationError("tunnel parameters are required in pmip mode")
        self.cfg = cfg
        self.mode = mode
        self.tunnel = tunnel
        self.sim = Simulator()
        self.rng = random.Random(cfg.seed)

        # metric state
        self.rtt_client: List[Tuple[int, int]] = []
        self.rtt_server: List[Tuple[int, int]] = []
        self.deliveries: List[Tuple[int, int]] = []
        self.handoffs: List[HandoffRecord] = []
        self.mst_transitions: List[MstTransition] = []
        self.flow_events: List[Tuple[int, str]] = []
        self.observed_sources: set = set()
        self.resets = 0
        self.counters: Dict[str, int] = {}
        self.last_delivery_us = 0

        # liveness accounting for quiescence detection
        self.in_flight = 0
        self.control_outstanding = 0
        self.dhcp_pending = 0
        self.scenario_events_remaining = 0
        self.echo_active = False
        self.traffic_stopped = False
        self.consumed = False
        self.echo_conn_ids: set = set()
        self._next_conn_id = 0
        self._pending_mst_capture: Optional[Tuple[int, Dict[str, tuple]]] = None

        self.dhcp_pools: Dict[str, AddressPool] = {
            z.zone_id: AddressPool(z.dhcp_range) for z in cfg.zones
        }

        self.server = ServerHost(self, SERVER_UID, SERVER_ADDR)
        self.client = ClientHost(self, CLIENT_UID)
        self.dists = {z.zone_id: DistRouter(self, z) for z in cfg.zones}
        self.taps = {
            z.zone_id: TapServer(z, update_interval=cfg.keepalive_interval_us)
            for z in cfg.zones
        }

        self._build_links()

        self.controller: Optional[MobilityController] = None
        self.switch: Optional[SdnSwitch] = None
        self.bound_zone: Optional[str] = None
        if mode is Mode.SDN:
            self.controller = MobilityController(
                cfg.vpip_pool,
                self.rng,
                port_for_ip=self._port_for_ip,
                external_port=EXT_PORT,
                idle_timeout=cfg.idle_timeout_us,
            )
            self.switch = SdnSwitch(
                local_ranges=[z.dhcp_range for z in cfg.zones],
                route_port=self._port_for_ip,
                default_port=EXT_PORT,
                buffer_timeout=1 * US_PER_S,
            )

        self._schedule_ticks()

    # -- wiring --------------------------------------------------------------

    def _build_links(self) -> None:
        cfg = self.cfg
        bw, d = cfg.link_bandwidth_bps, cfg.link_delay_us
        trunk_overhead = (
            self.tunnel.encap_overhead_bytes
            if self.mode is Mode.PMIP and self.tunnel else 0
        )
        self.access_up: Dict[str, Link] = {}
        self.access_down: Dict[str, Link] = {}
        self.trunk_up: Dict[str, Link] = {}
        self.trunk_down: Dict[str, Link] = {}
        for z in cfg.zones:
            zid = z.zone_id
            self.access_up[zid] = Link(
                self.sim, f"access-up:{zid}", bw, d,
                deliver=self._make_access_up_deliver(zid),
                on_drop=self._on_drop, tracker=self,
            )
            self.access_down[zid] = Link(
                self.sim, f"access-down:{zid}", bw, d,
                deliver=self._make_access_down_deliver(zid),
                on_drop=self._on_drop, tracker=self,
            )
            self.trunk_up[zid] = Link(
                self.sim, f"trunk-up:{zid}", bw, d,
                deliver=lambda pkt, now: self._core_handle(pkt, now),
                on_drop=self._on_drop, tracker=self,
                overhead_bytes=trunk_overhead,
            )
            self.trunk_down[zid] = Link(
                self.sim, f"trunk-down:{zid}", bw, d,
                deliver=self._make_trunk_down_deliver(zid),
                on_drop=self._on_drop, tracker=self,
                overhead_bytes=trunk_overhead,
            )
            # the client starts detached everywhere
            self.access_up[zid].set_up(False)
            self.access_down[zid].set_up(False)
        self.ext_out = Link(
            self.sim, "ext-out", bw, d,
            deliver=lambda pkt, now: self.server.handle(pkt, now),
            on_drop=self._on_drop, tracker=self,
        )
        self.ext_in = Link(
            self.sim, "ext-in", bw, d,
            deliver=lambda pkt, now: self._core_handle(pkt, now),
            on_drop=self._on_drop, tracker=self,
        )

    def _make_access_up_deliver(self, zid: str) -> Callable[[Packet, int], None]:
        def deliver(pkt: Packet, now: int) -> None:
            self._tap_observe(zid, pkt, now)
            self.dists[zid].handle_from_access(pkt, now)
        return deliver

    def _make_access_down_deliver(self, zid: str) -> Callable[[Packet, int], None]:
        def deliver(pkt: Packet, now: int) -> None:
            self._tap_observe(zid, pkt, now)
            self.client.handle(pkt, now)
        return deliver

    def _make_trunk_down_deliver(self, zid: str) -> Callable[[Packet, int], None]:
        return lambda pkt, now: self.dists[zid].handle_from_core(pkt, now)

    def _port_for_ip(self, addr: IPv4Address) -> str:
        for z in self.cfg.zones:
            if addr in z.dhcp_range:
                return f"zone:{z.zone_id}"
        return EXT_PORT

    # -- counters / trackers ---------------------------------------------------

    def count(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def hop_start(self) -> None:
        self.in_flight += 1

    def hop_end(self) -> None:
        self.in_flight -= 1

    def _on_drop(self, pkt: Packet, reason: str) -> None:
        self.count("link_drops")

    def note_goodput(self, now: int, payload_len: int) -> None:
        self.deliveries.append((now, payload_len * 8))
        self.last_delivery_us = max(self.last_delivery_us, now)

    def note_delivery(self, now: int) -> None:
        self.last_delivery_us = max(self.last_delivery_us, now)

    def note_server_data(self, pkt: Packet, now: int) -> None:
        self.last_delivery_us = max(self.last_delivery_us, now)
        if self.handoffs:
            h = self.handoffs[-1]
            if h.first_delivery_us is None and pkt.sent_at > h.detach_us:
                h.first_delivery_us = now

    # -- tap / control plane ----------------------------------------------------

    def _tap_observe(self, zid: str, pkt: Packet, now: int) -> None:
        report = self.taps[zid].observe_packet(pkt, now)
        if report is not None:
            # The control channel carries the ASCII wire form; parsing on
            # delivery keeps the format honest on every message.
            wire = report.serialize()
            self._control_send(
                lambda: self._deliver_report(HostReport.parse(wire)))

    def _control_send(self, fn: Callable[[], None]) -> None:
        self.control_outstanding += 1

        def run() -> None:
            self.control_outstanding -= 1
            fn()

        self.sim.schedule(self.cfg.control_delay_us, run)

    def _deliver_report(self, report: HostReport) -> None:
        if self.controller is None:
            return
        capture = self._pending_mst_capture
        actions = self.controller.handle_host_report(report, self.sim.now)
        if capture is not None and report.uid == self.client.uid:
            record = self.controller.mst.lookup(self.client.uid)
            before_rip = capture[1].get(self.client.uid.text, (None,))[0]
            if record is not None and str(record.real_ip) != before_rip:
                self.mst_transitions.append(
                    MstTransition(capture[0], capture[1], self.controller.mst.snapshot())
                )
                self._pending_mst_capture = None
        self._dispatch_actions(actions)

    def _dispatch_actions(self, actions: List[ControlAction]) -> None:
        for action in actions:
            if isinstance(action, InstallFlows):
                self._control_send(lambda a=action: self._apply_install(a))
            elif isinstance(action, RefreshFlows):
                self._control_send(lambda a=action: self._apply_refresh(a))
            elif isinstance(action, EvictClient):
                self.flow_events.append((self.sim.now, f"evict {action.uid}"))

    def _apply_install(self, action: InstallFlows) -> None:
        now = self.sim.now
        self.switch.install(action.snat, now)
        self.switch.install(action.dnat, now)
        self.flow_events.append(
            (now, f"install snat {action.snat.match.src_ip}")
        )
        self.flow_events.append(
            (now, f"install dnat {action.dnat.match.dst_ip}")
        )
        for decision in self.switch.drain(now):
            self._core_send(decision.packet, decision.out_port)

    def _apply_refresh(self, action: RefreshFlows) -> None:
        record = self.controller.mst.lookup(action.uid)
        if record is None:
            return
        now = self.sim.now
        self.switch.table.touch(FlowMatch(src_ip=record.real_ip),
                                self.controller.nat_priority, now)
        self.switch.table.touch(FlowMatch(dst_ip=record.virtual_ip),
                                self.controller.nat_priority, now)

    # -- core router -------------------------------------------------------------

    def _core_handle(self, pkt: Packet, now: int) -> None:
        if self.mode is Mode.PMIP:
            self._lma_route(pkt)
            return
        decision = self.switch.process_packet(pkt, now)
        if isinstance(decision, Forwarded):
            self._core_send(decision.packet, decision.out_port)
        else:
            self._control_send(lambda: self._controller_packet_in(pkt))

    def _controller_packet_in(self, pkt: Packet) -> None:
        actions = self.controller.handle_packet_in(pkt, self.sim.now)
        self._dispatch_actions(actions)

    def _core_send(self, pkt: Packet, port: str) -> None:
        if port == EXT_PORT:
            self.ext_out.send(pkt)
        elif port.startswith("zone:"):
            self.trunk_down[port.split(":", 1)[1]].send(pkt)
        else:
            self.count("unrouted_drops")

    def _lma_route(self, pkt: Packet) -> None:
        if self.client.home_addr is not None and pkt.dst_ip == self.client.home_addr:
            if self.bound_zone is None:
                self.count("unrouted_drops")
                return
            self.trunk_down[self.bound_zone].send(pkt)
            return
        port = self._port_for_ip(pkt.dst_ip)
        self._core_send(pkt, port)

    # -- client attachment / mobility ---------------------------------------------

    def dhcp_assign(self, zone_id: str) -> IPv4Address:
        """Draw a fresh lease from the zone's range (seed-deterministic).

        Leases persist for the run, so revisiting a zone yields a different
        address; translation keeps the session alive regardless.
        """
        return self.dhcp_pools[zone_id].allocate(self.rng)

    def attach_client(self, zone_id: str) -> None:
        self.cfg.zone(zone_id)  # raises on unknown zone
        self.client.current_zone = zone_id
        self.access_up[zone_id].set_up(True)
        self.access_down[zone_id].set_up(True)
        self.dhcp_pending += 1
        self.client.in_dhcp = True
        if self.mode is Mode.PMIP:
            # Binding registration precedes address (re)confirmation.
            bud = self.tunnel.resolved_binding_delay(self.cfg.control_delay_us)
            self._control_bind(zone_id, bud)
            self.sim.schedule(bud, lambda: self._start_dhcp(zone_id))
        else:
            self._start_dhcp(zone_id)

    def _start_dhcp(self, zone_id: str) -> None:
        zone = self.cfg.zone(zone_id)
        discover = Packet(
            src_ip=IPv4Address("0.0.0.0"), dst_ip=BROADCAST,
            src_mac=self.client.uid, payload_len=0, seq=0,
            sent_at=self.sim.now, kind=PacketKind.DHCP_DISCOVER,
        )
        self.client.transmit(discover)
        self.sim.schedule(zone.dhcp_latency, lambda: self._complete_dhcp(zone_id))

    def _control_bind(self, zone_id: str, bud: int) -> None:
        self.control_outstanding += 1

        def run() -> None:
            self.control_outstanding -= 1
            self.bound_zone = zone_id

        self.sim.schedule_at(self.sim.now + bud, run)

    def _complete_dhcp(self, zone_id: str) -> None:
        self.dhcp_pending -= 1
        self.client.in_dhcp = False
        if self.mode is Mode.PMIP:
            if self.client.home_addr is None:
                self.client.home_addr = self.dhcp_assign(zone_id)
            self.client.addr = self.client.home_addr
        else:
            self.client.addr = self.dhcp_assign(zone_id)
        solicit = Packet(
            src_ip=self.client.addr, dst_ip=ALL_ROUTERS,
            src_mac=self.client.uid, payload_len=0, seq=0,
            sent_at=self.sim.now, kind=PacketKind.ROUTER_SOLICITATION,
        )
        self.client.transmit(solicit)
        for side in self.client.conns.values():
            side.flush_all()

    def detach_client(self) -> None:
        zone_id = self.client.current_zone
        if zone_id is not None:
            self.access_up[zone_id].set_up(False)
            self.access_down[zone_id].set_up(False)
        self.client.addr = None
        self.client.current_zone = None

    # -- traffic -------------------------------------------------------------------

    def new_client_conn(self, echo: bool) -> Tuple[int, TransportSide]:
        conn_id = self._next_conn_id
        self._next_conn_id += 1
        if echo:
            self.echo_conn_ids.add(conn_id)
        side = TransportSide(
            self.client, conn_id, role="client",
            on_rtt_sample=lambda t, r: self.rtt_client.append((t, r)),
        )
        self.client.conns[conn_id] = side
        return conn_id, side

    # -- ticks / quiescence ----------------------------------------------------------

    def _schedule_ticks(self) -> None:
        if self.mode is Mode.SDN:
            self.sim.schedule_at(EXPIRY_TICK_US, self._expiry_tick)
            for zid in self.taps:
                self.sim.schedule_at(self.cfg.keepalive_interval_us,
                                     lambda z=zid: self._keepalive_tick(z))

    def _expiry_tick(self) -> None:
        now = self.sim.now
        for rule in self.switch.expire_flows(now):
            kind = "snat" if rule.match.src_ip is not None else "dnat"
            key = rule.match.src_ip if kind == "snat" else rule.match.dst_ip
            self.flow_events.append((now, f"expired {kind} {key}"))
        window = int(LIVENESS_WINDOW_FACTOR * self.cfg.keepalive_interval_us)
        self._dispatch_actions(self.controller.evict_stale(now, window))
        if not self.finished():
            self.sim.schedule(EXPIRY_TICK_US, self._expiry_tick)

    def _keepalive_tick(self, zone_id: str) -> None:
        for report in self.taps[zone_id].tick(self.sim.now):
            wire = report.serialize()
            self._control_send(
                lambda w=wire: self._deliver_report(HostReport.parse(w)))
        if not self.finished():
            self.sim.schedule(self.cfg.keepalive_interval_us,
                              lambda: self._keepalive_tick(zone_id))

    def is_idle(self) -> bool:
        if self.echo_active or self.in_flight or self.control_outstanding \
                or self.dhcp_pending:
            return False
        sides = list(self.client.conns.values()) + [
            c.side for c in self.server.conns.values()
        ]
        return all(s.drained() for s in sides)

    def finished(self) -> bool:
        return self.scenario_events_remaining == 0 and self.is_idle()

    # -- trace -------------------------------------------------------------------------

    def finalize(self, events_fingerprint: Tuple[str, ...],
                 expected_switchover_us: Optional[int]) -> MetricsTrace:
        losses = 0
        for conn_id, client_side in self.client.conns.items():
            server_conn = self.server.conns.get(conn_id)
            server_delivered = server_conn.side.delivered_segments if server_conn else 0
            server_submitted = server_conn.side.submitted if server_conn else 0
            losses += client_side.submitted - server_delivered
            losses += server_submitted - client_side.delivered_segments
        retransmissions = sum(
            s.retransmissions for s in self.client.conns.values()
        ) + sum(c.side.retransmissions for c in self.server.conns.values())
        self.count("retransmissions", retransmissions)
        if self.switch is not None:
            self.count("buffer_residue", len(self.switch.pending))
            self.count("buffer_drops", self.switch.buffer_drops)
        trace = MetricsTrace(
            mode=self.mode.value,
            seed=self.cfg.seed,
            events_fingerprint=events_fingerprint,
            rtt_client=self.rtt_client,
            rtt_server=self.rtt_server,
            deliveries=self.deliveries,
            handoffs=self.handoffs,
            expected_switchover_us=expected_switchover_us,
            losses=losses,
            resets=self.resets,
            server_observed_sources=set(self.observed_sources),
            counters=dict(self.counters),
            flow_events=list(self.flow_events),
            mst_transitions=list(self.mst_transitions),
            end_of_traffic_us=self.last_delivery_us,
        )
        return trace


def build_topology(cfg: TopologyConfig, mode: Mode = Mode.SDN,
                   tunnel: Optional[TunnelConfig] = None) -> Network:
    """Materialize the three-tier network for one run."""
    return Network(cfg, mode=mode, tunnel=tunnel)
