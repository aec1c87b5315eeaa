"""Point-to-point link model.

Each ``Link`` is one direction of a physical link: store-and-forward with
FIFO serialization at the sending end, then fixed propagation delay. A
packet committed to the wire is checked against link state again at its
arrival instant, so taking a link down drops exactly the in-flight packets
that would still be on it.

``overhead_bytes`` models tunnel encapsulation on that segment: the wire
time charged per packet grows, the packet itself is untouched.
"""

from __future__ import annotations

from typing import Callable, Optional

from ..packet import Packet
from ..units import US_PER_S
from .events import Simulator


def serialization_us(wire_bytes: int, bandwidth_bps: int) -> int:
    return wire_bytes * 8 * US_PER_S // bandwidth_bps


class Link:
    def __init__(
        self,
        sim: Simulator,
        name: str,
        bandwidth_bps: int,
        delay_us: int,
        deliver: Callable[[Packet, int], None],
        on_drop: Optional[Callable[[Packet, str], None]] = None,
        overhead_bytes: int = 0,
        tracker=None,
    ) -> None:
        self.sim = sim
        self.name = name
        self.bandwidth_bps = bandwidth_bps
        self.delay_us = delay_us
        self.deliver = deliver
        self.on_drop = on_drop
        self.overhead_bytes = overhead_bytes
        self.tracker = tracker
        self.up = True
        self._busy_until = 0

    def wire_time(self, pkt: Packet) -> int:
        return serialization_us(pkt.wire_bytes + self.overhead_bytes, self.bandwidth_bps)

    def send(self, pkt: Packet) -> bool:
        """Queue a packet for transmission; False if dropped at the sender."""
        now = self.sim.now
        if not self.up:
            self._drop(pkt, "link down at send")
            return False
        start = max(now, self._busy_until)
        self._busy_until = start + self.wire_time(pkt)
        arrival = self._busy_until + self.delay_us
        if self.tracker is not None:
            self.tracker.hop_start()
        self.sim.schedule_at(arrival, lambda: self._arrive(pkt))
        return True

    def _arrive(self, pkt: Packet) -> None:
        if self.tracker is not None:
            self.tracker.hop_end()
        if not self.up:
            self._drop(pkt, "link down at arrival")
            return
        self.deliver(pkt, self.sim.now)

    def _drop(self, pkt: Packet, reason: str) -> None:
        if self.on_drop is not None:
            self.on_drop(pkt, reason)

    def set_up(self, up: bool) -> None:
        self.up = up
