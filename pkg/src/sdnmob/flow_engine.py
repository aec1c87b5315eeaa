"""Flow table and packet pipeline of the SDN-aware core router.

The table holds prioritized rules that match on exact source/destination
addresses, rewrite headers (source NAT outbound, destination NAT inbound)
and pick an output port. Unmatched packets from local clients are escalated
to the controller and buffered until a matching rule arrives; everything
else falls through to the default route rule, which never expires.
"""

from __future__ import annotations

import bisect
import enum
from collections import deque
from dataclasses import dataclass, replace
from ipaddress import IPv4Address, IPv4Network
from typing import Callable, Deque, List, Optional, Sequence, Tuple, Union

from .packet import Packet, PacketKind

# Priority constants: the default route/L2 rule sits at 0, NAT translations
# strictly above it. Tests rely on the exact values.
DEFAULT_PRIORITY = 0
NAT_PRIORITY = 100

# Packet classes the default rule escalates to the controller when the
# source is an unknown local address. DHCP and router solicitations are
# handled at the distribution layer and never escalate.
ESCALATED_KINDS = frozenset(
    {PacketKind.DATA, PacketKind.ACK, PacketKind.KEEPALIVE}
)

PACKET_IN_BUFFER_CAPACITY = 64


class FlowEngineError(Exception):
    pass


class MalformedActions(FlowEngineError):
    """Action list violates structure (controller bug, not a data-plane event)."""


class InstallRejected(FlowEngineError):
    """Rule violates table constraints (e.g. NAT rule at default priority)."""


@dataclass(frozen=True)
class FlowMatch:
    """Exact-match keys; an absent field is a wildcard.

    The all-wildcard match is reserved for the table's default rule and is
    rejected by ``FlowTable.install``.
    """

    src_ip: Optional[IPv4Address] = None
    dst_ip: Optional[IPv4Address] = None

    def matches(self, pkt: Packet) -> bool:
        if self.src_ip is not None and pkt.src_ip != self.src_ip:
            return False
        if self.dst_ip is not None and pkt.dst_ip != self.dst_ip:
            return False
        return True

    @property
    def is_wildcard(self) -> bool:
        return self.src_ip is None and self.dst_ip is None


class ActionKind(enum.Enum):
    REWRITE_SRC = "rewrite_src"
    REWRITE_DST = "rewrite_dst"
    FORWARD = "forward"


@dataclass(frozen=True)
class FlowAction:
    kind: ActionKind
    new_addr: Optional[IPv4Address] = None
    out_port: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is ActionKind.FORWARD:
            if self.out_port is None:
                raise MalformedActions("forward action needs an output port")
        elif self.new_addr is None:
            raise MalformedActions(f"{self.kind.value} action needs an address")


def rewrite_src(addr: IPv4Address) -> FlowAction:
    return FlowAction(ActionKind.REWRITE_SRC, new_addr=addr)


def rewrite_dst(addr: IPv4Address) -> FlowAction:
    return FlowAction(ActionKind.REWRITE_DST, new_addr=addr)


def forward(port: str) -> FlowAction:
    return FlowAction(ActionKind.FORWARD, out_port=port)


@dataclass
class FlowRule:
    match: FlowMatch
    actions: Tuple[FlowAction, ...]
    priority: int
    idle_timeout: Optional[int]  # microseconds; None = never expires
    last_hit: int = 0
    install_seq: int = 0

    def __post_init__(self) -> None:
        self.actions = tuple(self.actions)
        if self.priority < 0:
            raise InstallRejected("priority must be non-negative")
        forwards = [a for a in self.actions if a.kind is ActionKind.FORWARD]
        if len(forwards) != 1 or self.actions[-1].kind is not ActionKind.FORWARD:
            raise MalformedActions("action list must end with exactly one forward")


def apply_actions(rule: FlowRule, pkt: Packet) -> Tuple[Packet, str]:
    """Apply the rule's rewrites in order; returns the rewritten copy and port.

    Payload length, sequence number and send timestamp are never touched.
    """
    out = pkt
    out_port: Optional[str] = None
    for action in rule.actions:
        if action.kind is ActionKind.REWRITE_SRC:
            out = out.with_src(action.new_addr)
        elif action.kind is ActionKind.REWRITE_DST:
            out = out.with_dst(action.new_addr)
        else:
            out_port = action.out_port
    if out_port is None:
        raise MalformedActions("rule has no forward action")
    return out, out_port


def snat_rule(real_ip: IPv4Address, virtual_ip: IPv4Address, out_port: str,
              idle_timeout: Optional[int], priority: int = NAT_PRIORITY) -> FlowRule:
    """Outbound translation: packets sourced at the client's real address
    leave with the virtual permanent address."""
    return FlowRule(
        match=FlowMatch(src_ip=real_ip),
        actions=(rewrite_src(virtual_ip), forward(out_port)),
        priority=priority,
        idle_timeout=idle_timeout,
    )


def dnat_rule(virtual_ip: IPv4Address, real_ip: IPv4Address, out_port: str,
              idle_timeout: Optional[int], priority: int = NAT_PRIORITY) -> FlowRule:
    """Inbound translation: packets addressed to the virtual permanent
    address are restored to the client's current real address."""
    return FlowRule(
        match=FlowMatch(dst_ip=virtual_ip),
        actions=(rewrite_dst(real_ip), forward(out_port)),
        priority=priority,
        idle_timeout=idle_timeout,
    )


def _sort_key(rule: FlowRule) -> Tuple[int, int]:
    return (-rule.priority, rule.install_seq)


class FlowTable:
    """Prioritized flow table with idle expiry and replace-on-reinstall.

    Rules are kept sorted by (priority desc, install_seq asc), so the first
    hit of a linear scan is the winner and equal-priority ties resolve to
    the earliest install, never to iteration order.
    """

    def __init__(self) -> None:
        self._rules: List[FlowRule] = []
        self._next_seq = 1
        self._default: Optional[FlowRule] = None

    def __len__(self) -> int:
        return len(self._rules)

    @property
    def rules(self) -> Sequence[FlowRule]:
        return tuple(self._rules)

    @property
    def default_rule(self) -> Optional[FlowRule]:
        return self._default

    def install_default(self, out_port: str, now: int = 0) -> FlowRule:
        """Install the all-wildcard route rule at the reserved priority."""
        rule = FlowRule(
            match=FlowMatch(),
            actions=(forward(out_port),),
            priority=DEFAULT_PRIORITY,
            idle_timeout=None,
            last_hit=now,
        )
        if self._default is not None:
            self._rules.remove(self._default)
        rule.install_seq = self._next_seq
        self._next_seq += 1
        bisect.insort(self._rules, rule, key=_sort_key)
        self._default = rule
        return rule

    def install(self, rule: FlowRule, now: int) -> FlowRule:
        """Insert a copy of ``rule`` with a fresh install_seq.

        A rule with the same (match, priority) is replaced, not duplicated.
        NAT-style rules must sit strictly above the default priority.
        """
        if rule.match.is_wildcard:
            raise InstallRejected("all-wildcard match is reserved for the default rule")
        if rule.priority <= DEFAULT_PRIORITY:
            raise InstallRejected(
                f"translation rules need priority > {DEFAULT_PRIORITY}, got {rule.priority}"
            )
        existing = self.find(rule.match, rule.priority)
        if existing is not None:
            self._rules.remove(existing)
        installed = replace(
            rule,
            actions=rule.actions,
            install_seq=self._next_seq,
            last_hit=now,
        )
        self._next_seq += 1
        bisect.insort(self._rules, installed, key=_sort_key)
        return installed

    def find(self, match: FlowMatch, priority: int) -> Optional[FlowRule]:
        for rule in self._rules:
            if rule.match == match and rule.priority == priority:
                return rule
        return None

    def touch(self, match: FlowMatch, priority: int, now: int) -> bool:
        """Re-arm a rule's idle timer; used by controller-driven refreshes."""
        rule = self.find(match, priority)
        if rule is None:
            return False
        rule.last_hit = max(rule.last_hit, now)
        return True

    def match_packet(self, pkt: Packet, now: int) -> Optional[FlowRule]:
        """Highest-priority match, earliest install on ties; hits update
        the rule's idle timer."""
        for rule in self._rules:
            if rule.match.matches(pkt):
                rule.last_hit = now
                return rule
        return None

    def expire(self, now: int) -> List[FlowRule]:
        """Drop every rule idle longer than its timeout. The default rule
        is exempt by construction (no timeout)."""
        removed = [
            r for r in self._rules
            if r.idle_timeout is not None and now - r.last_hit > r.idle_timeout
        ]
        for rule in removed:
            self._rules.remove(rule)
        return removed


@dataclass(frozen=True)
class Forwarded:
    packet: Packet
    out_port: str


@dataclass(frozen=True)
class PacketIn:
    packet: Packet


ForwardDecision = Union[Forwarded, PacketIn]


@dataclass
class BufferedPacket:
    packet: Packet
    deadline: int


class SdnSwitch:
    """Data-plane state of the core router: flow table, default routing and
    the packet-in buffer.

    ``route_port`` maps a destination address to the port the default rule
    forwards on (the plain routing table the device had before SDN).
    """

    def __init__(
        self,
        local_ranges: Sequence[IPv4Network],
        route_port: Callable[[IPv4Address], str],
        default_port: str,
        now: int = 0,
        buffer_capacity: int = PACKET_IN_BUFFER_CAPACITY,
        buffer_timeout: Optional[int] = None,
    ) -> None:
        self.table = FlowTable()
        self.table.install_default(default_port, now)
        self.local_ranges = tuple(local_ranges)
        self.route_port = route_port
        self.buffer_capacity = buffer_capacity
        self.buffer_timeout = buffer_timeout
        self.pending: Deque[BufferedPacket] = deque()
        self.buffer_drops = 0

    def _is_local(self, addr: IPv4Address) -> bool:
        return any(addr in net for net in self.local_ranges)

    def process_packet(self, pkt: Packet, now: int) -> ForwardDecision:
        """Classify one packet.

        Translation rules are applied when they match; otherwise a packet
        from an unknown local source (for an escalated packet class) is
        buffered and raised to the controller, and everything else takes
        the default route.
        """
        rule = self.table.match_packet(pkt, now)
        if rule is not None and rule.priority > DEFAULT_PRIORITY:
            out, port = apply_actions(rule, pkt)
            return Forwarded(out, port)
        if pkt.kind in ESCALATED_KINDS and self._is_local(pkt.src_ip):
            self._buffer(pkt, now)
            return PacketIn(pkt)
        return Forwarded(pkt, self.route_port(pkt.dst_ip))

    def _buffer(self, pkt: Packet, now: int) -> None:
        deadline = now + self.buffer_timeout if self.buffer_timeout else None
        if len(self.pending) >= self.buffer_capacity:
            self.pending.popleft()
            self.buffer_drops += 1
        self.pending.append(BufferedPacket(pkt, deadline if deadline is not None else -1))

    def install(self, rule: FlowRule, now: int) -> FlowRule:
        return self.table.install(rule, now)

    def drain(self, now: int) -> List[Forwarded]:
        """Re-process buffered packets after a flow install.

        Packets that now match a translation rule are released in arrival
        order; expired ones are dropped; the rest stay buffered without
        re-escalating.
        """
        released: List[Forwarded] = []
        keep: Deque[BufferedPacket] = deque()
        while self.pending:
            entry = self.pending.popleft()
            if entry.deadline >= 0 and now > entry.deadline:
                self.buffer_drops += 1
                continue
            rule = self.table.match_packet(entry.packet, now)
            if rule is not None and rule.priority > DEFAULT_PRIORITY:
                out, port = apply_actions(rule, entry.packet)
                released.append(Forwarded(out, port))
            else:
                keep.append(entry)
        self.pending = keep
        return released

    def expire_flows(self, now: int) -> List[FlowRule]:
        return self.table.expire(now)
