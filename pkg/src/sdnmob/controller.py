"""Central mobility control logic.

Host reports from tap servers drive a table of (uid, real IP, virtual
permanent IP) triplets. New clients get a random virtual address from the
configured pool and a pair of proactive translation flows; a client that
shows up with a new real address keeps its virtual address and gets flows
for the new one, and old flows are simply left to idle out.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Callable, Dict, List, Optional, Set, Union

from .addressing import AddressError, PoolExhausted, Uid
from .flow_engine import FlowRule, NAT_PRIORITY, dnat_rule, snat_rule
from .units import US_PER_S

# Flows installed on the core router carry this idle limit unless the
# scenario overrides it.
DEFAULT_IDLE_TIMEOUT_US = 30 * US_PER_S

# A record is evicted after this many keepalive intervals of silence.
LIVENESS_WINDOW_FACTOR = 2.5


class ReportRejected(AddressError):
    """Host report failed address validation."""


class WireFormatError(ValueError):
    """Malformed host-report wire string."""


@dataclass(frozen=True)
class HostReport:
    """The discovery message a tap server sends: ``<uid>#<real-ip>``."""

    uid: Uid
    real_ip: IPv4Address

    WIRE_SEPARATOR = "#"

    def serialize(self) -> str:
        return f"{self.uid.text}#{self.real_ip}\n"

    @classmethod
    def parse(cls, wire: str) -> "HostReport":
        body = wire
        if body.endswith("\n"):
            body = body[:-1]
        if "\n" in body or "\r" in body:
            raise WireFormatError(f"embedded newline in report: {wire!r}")
        if body.count(cls.WIRE_SEPARATOR) != 1:
            raise WireFormatError(f"report needs exactly one '#': {wire!r}")
        uid_text, ip_text = body.split(cls.WIRE_SEPARATOR)
        try:
            uid = Uid(uid_text)
        except AddressError as exc:
            raise WireFormatError(str(exc)) from None
        try:
            addr = IPv4Address(ip_text)
        except ValueError:
            raise WireFormatError(f"not a dotted quad: {ip_text!r}") from None
        return cls(uid, addr)


@dataclass
class MobilityRecord:
    uid: Uid
    real_ip: IPv4Address
    virtual_ip: IPv4Address
    last_seen: int


class MobilityServiceTable:
    """uid-keyed mobility records plus the set of allocated virtual IPs."""

    def __init__(self) -> None:
        self.records: Dict[Uid, MobilityRecord] = {}
        self.used_vpips: Set[IPv4Address] = set()

    def __len__(self) -> int:
        return len(self.records)

    def lookup(self, uid: Uid) -> Optional[MobilityRecord]:
        return self.records.get(uid)

    def lookup_by_mac(self, mac: Uid) -> Optional[MobilityRecord]:
        # uid is MAC-style, so the packet-in repair path keys on it directly
        return self.records.get(mac)

    def add(self, record: MobilityRecord) -> None:
        self.records[record.uid] = record
        self.used_vpips.add(record.virtual_ip)

    def remove(self, uid: Uid) -> Optional[MobilityRecord]:
        record = self.records.pop(uid, None)
        if record is not None:
            self.used_vpips.discard(record.virtual_ip)
        return record

    def snapshot(self) -> Dict[str, tuple]:
        """Value snapshot for before/after comparisons in tests and traces."""
        return {
            uid.text: (str(r.real_ip), str(r.virtual_ip), r.last_seen)
            for uid, r in self.records.items()
        }

    def check_invariants(self) -> None:
        vpips = [r.virtual_ip for r in self.records.values()]
        assert len(set(vpips)) == len(vpips), "virtual addresses must be distinct"
        assert set(vpips) == self.used_vpips, "used set out of sync with records"
        rips = [r.real_ip for r in self.records.values()]
        assert len(set(rips)) == len(rips), "real->virtual map must be a bijection"


def allocate_vpip(pool: IPv4Network, used: Set[IPv4Address],
                  rng: random.Random) -> IPv4Address:
    """Uniform draw over the free addresses of ``pool``.

    The free list is materialized in address order, so a fixed seed and call
    history always yield the same address. Drawing from the free set makes
    collisions impossible; no retry loop exists.
    """
    free = [a for a in pool.hosts() if a not in used]
    if not free:
        raise PoolExhausted(f"virtual address pool {pool} exhausted")
    return free[rng.randrange(len(free))]


@dataclass(frozen=True)
class InstallFlows:
    uid: Uid
    snat: FlowRule
    dnat: FlowRule


@dataclass(frozen=True)
class RefreshFlows:
    uid: Uid


@dataclass(frozen=True)
class EvictClient:
    uid: Uid


ControlAction = Union[InstallFlows, RefreshFlows, EvictClient]


class MobilityController:
    """Serialized event handler for host reports, packet-ins and timer ticks.

    ``port_for_ip`` resolves which core-router port reaches a given client
    address (the controller's topology knowledge); ``external_port`` is where
    translated traffic leaves toward the provider network.
    """

    def __init__(
        self,
        vpip_pool: IPv4Network,
        rng: random.Random,
        port_for_ip: Callable[[IPv4Address], str],
        external_port: str = "ext",
        idle_timeout: int = DEFAULT_IDLE_TIMEOUT_US,
        nat_priority: int = NAT_PRIORITY,
    ) -> None:
        self.mst = MobilityServiceTable()
        self.vpip_pool = vpip_pool
        self.rng = rng
        self.port_for_ip = port_for_ip
        self.external_port = external_port
        self.idle_timeout = idle_timeout
        self.nat_priority = nat_priority

    # -- report handling ---------------------------------------------------

    def handle_host_report(self, report: HostReport, now: int) -> List[ControlAction]:
        self._validate_real_ip(report.real_ip)
        actions: List[ControlAction] = []
        # DHCP reuse: a report proves the reported address's previous holder
        # is gone; drop that record so real->virtual stays a bijection.
        holder = self._holder_of(report.real_ip)
        if holder is not None and holder.uid != report.uid:
            self.mst.remove(holder.uid)
            actions.append(EvictClient(holder.uid))
        record = self.mst.lookup(report.uid)
        if record is None:
            vpip = allocate_vpip(self.vpip_pool, self.mst.used_vpips, self.rng)
            record = MobilityRecord(report.uid, report.real_ip, vpip, now)
            self.mst.add(record)
            actions.append(self._install_action(record))
            return actions
        record.last_seen = now
        if record.real_ip != report.real_ip:
            # Zone change: only the real address moves; the virtual address
            # is the session anchor and must not change. Flows for the old
            # address are left to idle out.
            record.real_ip = report.real_ip
            actions.append(self._install_action(record))
            return actions
        actions.append(RefreshFlows(record.uid))
        return actions

    def _holder_of(self, real_ip: IPv4Address) -> Optional[MobilityRecord]:
        for record in self.mst.records.values():
            if record.real_ip == real_ip:
                return record
        return None

    def _validate_real_ip(self, addr: IPv4Address) -> None:
        if addr.is_unspecified or addr.is_multicast or addr == IPv4Address("255.255.255.255"):
            raise ReportRejected(f"not a unicast client address: {addr}")
        if addr in self.vpip_pool:
            raise ReportRejected(
                f"client address {addr} collides with the virtual pool {self.vpip_pool}"
            )

    def _install_action(self, record: MobilityRecord) -> InstallFlows:
        snat = snat_rule(
            record.real_ip, record.virtual_ip, self.external_port,
            self.idle_timeout, self.nat_priority,
        )
        dnat = dnat_rule(
            record.virtual_ip, record.real_ip, self.port_for_ip(record.real_ip),
            self.idle_timeout, self.nat_priority,
        )
        return InstallFlows(record.uid, snat, dnat)

    # -- liveness ----------------------------------------------------------

    def evict_stale(self, now: int, liveness_window: int) -> List[ControlAction]:
        """Drop records silent for longer than the liveness window and
        return their virtual addresses to the pool.

        No flow deletion is issued: data-plane entries for a departed client
        idle out on their own.
        """
        stale = [
            uid for uid, rec in self.mst.records.items()
            if now - rec.last_seen > liveness_window
        ]
        actions: List[ControlAction] = []
        for uid in stale:
            self.mst.remove(uid)
            actions.append(EvictClient(uid))
        return actions

    # -- misc --------------------------------------------------------------

    def lookup(self, uid: Uid) -> Optional[MobilityRecord]:
        return self.mst.lookup(uid)

    def handle_packet_in(self, pkt, now: int) -> List[ControlAction]:
        """Repair path for escalated packets.

        A known client (by source MAC) gets its flows re-emitted from the
        current record. Unknown sources produce no action: discovery is the
        tap servers' job, and the packet stays buffered at the switch until
        a report lands or the buffer times out.
        """
        record = self.mst.lookup_by_mac(pkt.src_mac)
        if record is None:
            return []
        record.last_seen = max(record.last_seen, now)
        return [self._install_action(record)]
