"""Per-zone passive host discovery.

A tap server sees a copy of every packet crossing the access/distribution
boundary of its zone. It validates source addresses against the zone's DHCP
range (spoof guard), learns (uid, real IP) bindings into a time buffer, and
periodically re-reports live clients to the controller so their state and
flows stay fresh. Observation is side-effect-free on the data plane.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Dict, List, Optional

from .addressing import Uid
from .controller import HostReport
from .packet import Packet, PacketKind
from .units import US_PER_MS, US_PER_S

UNSPECIFIED = IPv4Address("0.0.0.0")

# Re-reporting cadence; five simulated minutes unless the scenario overrides.
DEFAULT_UPDATE_INTERVAL_US = 300 * US_PER_S

# A buffer entry with no traffic for this many update intervals is dropped
# instead of being re-reported.
STALENESS_FACTOR = 2


class TapFilter(enum.Enum):
    ALL_PACKETS = "all"
    DHCP_AND_RS_ONLY = "dhcp_rs_only"


_DISCOVERY_KINDS = frozenset({
    PacketKind.DHCP_DISCOVER,
    PacketKind.DHCP_OFFER,
    PacketKind.ROUTER_SOLICITATION,
})


@dataclass(frozen=True)
class ZoneConfig:
    zone_id: str
    dhcp_range: IPv4Network
    dhcp_latency: int = 100 * US_PER_MS  # microseconds
    tap_filter: TapFilter = TapFilter.ALL_PACKETS


@dataclass
class TimeBufferEntry:
    real_ip: IPv4Address
    uid: Uid
    last_seen_ms: int


class TapServer:
    """HostDiscovery state machine for one zone."""

    def __init__(
        self,
        zone: ZoneConfig,
        update_interval: int = DEFAULT_UPDATE_INTERVAL_US,
    ) -> None:
        self.zone = zone
        self.update_interval = update_interval
        self.buffer: Dict[IPv4Address, TimeBufferEntry] = {}
        self.last_emit: int = 0
        self.rejected_spoofed = 0
        self.ignored_unaddressed = 0

    def observe_packet(self, pkt: Packet, now: int) -> Optional[HostReport]:
        """Inspect one tapped packet copy; maybe produce a discovery report.

        Packets still inside a DHCP exchange (source 0.0.0.0) are skipped,
        sources outside the zone's range are rejected without touching the
        buffer, and already-known bindings only refresh their timestamp.
        """
        if self.zone.tap_filter is TapFilter.DHCP_AND_RS_ONLY:
            if pkt.kind not in _DISCOVERY_KINDS:
                return None
        if pkt.src_ip == UNSPECIFIED:
            self.ignored_unaddressed += 1
            return None
        if pkt.src_ip not in self.zone.dhcp_range:
            self.rejected_spoofed += 1
            return None
        now_ms = now // US_PER_MS
        entry = self.buffer.get(pkt.src_ip)
        if entry is not None and entry.uid == pkt.src_mac:
            entry.last_seen_ms = max(entry.last_seen_ms, now_ms)
            return None
        # New address, or the address changed hands (DHCP reuse): report.
        self.buffer[pkt.src_ip] = TimeBufferEntry(pkt.src_ip, pkt.src_mac, now_ms)
        return HostReport(pkt.src_mac, pkt.src_ip)

    def tick(self, now: int) -> List[HostReport]:
        """Keepalive pass: at each interval boundary, re-report every live
        binding and drop the ones that went quiet."""
        if now - self.last_emit < self.update_interval:
            return []
        self.last_emit = now
        horizon_ms = (STALENESS_FACTOR * self.update_interval) // US_PER_MS
        now_ms = now // US_PER_MS
        stale = [ip for ip, e in self.buffer.items()
                 if now_ms - e.last_seen_ms > horizon_ms]
        for ip in stale:
            del self.buffer[ip]
        return [HostReport(e.uid, e.real_ip) for e in self.buffer.values()]
