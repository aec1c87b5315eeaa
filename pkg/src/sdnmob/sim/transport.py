"""Simplified reliable transport.

Cumulative acknowledgments, a single retransmission timer per sender set to
four times the smoothed RTT, in-order delivery with an unbounded reassembly
buffer, and a fixed send window that paces bulk transfers against the
bottleneck link. The server side resets a connection when a data packet for
an established connection arrives from a different source address; that is
the failure mode the address translation scheme exists to prevent.

Senders pause while their host has no usable address (mid-handoff) and
retransmit everything outstanding the moment a fresh address lands, which
repairs any loss from the outage in one burst.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Callable, Deque, Optional

from ..packet import Packet, PacketKind
from ..units import US_PER_S

SEND_WINDOW_SEGMENTS = 32
INITIAL_RTO_US = 1 * US_PER_S
MIN_RTO_US = 1_000
RTO_FACTOR = 4
SRTT_ALPHA = 0.125


@dataclass
class SegMeta:
    payload_len: int
    sent_at: int
    retransmitted: bool = False


class TransportSide:
    """One endpoint (client or server role) of a reliable connection.

    The owning host supplies the clock, its current address, the peer
    address and the transmit path; the side keeps sender and receiver state.
    """

    def __init__(
        self,
        host,
        conn_id: int,
        role: str,
        on_rtt_sample: Optional[Callable[[int, int], None]] = None,
        on_deliver: Optional[Callable[[int, int], None]] = None,
        window: int = SEND_WINDOW_SEGMENTS,
    ) -> None:
        self.host = host
        self.conn_id = conn_id
        self.role = role
        self.on_rtt_sample = on_rtt_sample
        self.on_deliver = on_deliver
        self.window = window
        # sender
        self.next_seq = 0
        self.pending: Deque[int] = deque()
        self.unacked: "OrderedDict[int, SegMeta]" = OrderedDict()
        self.srtt: Optional[float] = None
        self._timer_epoch = 0
        self._timer_armed = False
        self.submitted = 0
        self.transmissions = 0
        self.retransmissions = 0
        # receiver
        self.expected = 0
        self.ooo: dict[int, int] = {}
        self.delivered_segments = 0
        self.delivered_bytes = 0
        self.duplicates = 0
        self._ack_seq = 0

    # -- sender --------------------------------------------------------------

    def submit(self, payload_len: int) -> None:
        """Hand one application segment to the transport."""
        self.pending.append(payload_len)
        self.submitted += 1
        self.pump()

    def submit_many(self, payload_len: int, count: int) -> None:
        """Bulk submission (one transfer's worth of equal segments)."""
        self.pending.extend([payload_len] * count)
        self.submitted += count
        self.pump()

    def can_send(self) -> bool:
        return self.host.addr is not None

    def pump(self) -> None:
        while (
            len(self.unacked) < self.window
            and self.pending
            and self.can_send()
        ):
            payload_len = self.pending.popleft()
            seq = self.next_seq
            self.next_seq += 1
            self._transmit_segment(seq, payload_len, retransmit=False)
        if self.unacked and not self._timer_armed and self.can_send():
            self._arm_timer()

    def _transmit_segment(self, seq: int, payload_len: int, retransmit: bool) -> None:
        now = self.host.sim.now
        pkt = Packet(
            src_ip=self.host.addr,
            dst_ip=self.host.peer_addr(self.conn_id),
            src_mac=self.host.uid,
            payload_len=payload_len,
            seq=seq,
            sent_at=now,
            kind=PacketKind.DATA,
            conn_id=self.conn_id,
        )
        if retransmit:
            meta = self.unacked[seq]
            meta.retransmitted = True
            meta.sent_at = now
            self.retransmissions += 1
        else:
            self.unacked[seq] = SegMeta(payload_len, now)
        self.transmissions += 1
        self.host.transmit(pkt)

    def _rto(self) -> int:
        if self.srtt is None:
            return INITIAL_RTO_US
        return max(int(RTO_FACTOR * self.srtt), MIN_RTO_US)

    def _arm_timer(self) -> None:
        self._timer_epoch += 1
        self._timer_armed = True
        epoch = self._timer_epoch
        self.host.sim.schedule(self._rto(), lambda: self._on_timeout(epoch))

    def _disarm_timer(self) -> None:
        self._timer_epoch += 1
        self._timer_armed = False

    def _on_timeout(self, epoch: int) -> None:
        if epoch != self._timer_epoch:
            return
        self._timer_armed = False
        if not self.unacked:
            return
        if not self.can_send():
            # Host is between addresses; flush_all() restarts everything.
            return
        oldest = next(iter(self.unacked))
        self._transmit_segment(oldest, self.unacked[oldest].payload_len, retransmit=True)
        self._arm_timer()

    def receive_ack(self, pkt: Packet) -> None:
        assert pkt.ack is not None
        newly_acked = []
        while self.unacked:
            seq = next(iter(self.unacked))
            if seq >= pkt.ack:
                break
            newly_acked.append((seq, self.unacked.pop(seq)))
        if newly_acked:
            seq, meta = newly_acked[-1]
            if not meta.retransmitted:
                self._sample_rtt(meta)
            self._disarm_timer()
            if self.unacked:
                self._arm_timer()
        self.pump()

    def _sample_rtt(self, meta: SegMeta) -> None:
        sample = self.host.sim.now - meta.sent_at
        if self.srtt is None:
            self.srtt = float(sample)
        else:
            self.srtt = (1 - SRTT_ALPHA) * self.srtt + SRTT_ALPHA * sample
        if self.on_rtt_sample is not None:
            self.on_rtt_sample(meta.sent_at, sample)

    def flush_all(self) -> None:
        """Retransmit everything outstanding; called when a fresh address
        arrives after a handoff. Pending new data follows in the same burst."""
        if not self.can_send():
            return
        for seq in list(self.unacked):
            self._transmit_segment(seq, self.unacked[seq].payload_len, retransmit=True)
        self.pump()
        if self.unacked:
            self._disarm_timer()
            self._arm_timer()

    def drained(self) -> bool:
        return not self.unacked and not self.pending

    # -- receiver ------------------------------------------------------------

    def receive_data(self, pkt: Packet) -> None:
        if pkt.seq == self.expected:
            self._deliver(pkt.seq, pkt.payload_len)
            while self.expected in self.ooo:
                self._deliver(self.expected, self.ooo.pop(self.expected))
        elif pkt.seq > self.expected:
            self.ooo[pkt.seq] = pkt.payload_len
        else:
            self.duplicates += 1
        self._send_ack()

    def _deliver(self, seq: int, payload_len: int) -> None:
        self.expected = seq + 1
        self.delivered_segments += 1
        self.delivered_bytes += payload_len
        if self.on_deliver is not None:
            self.on_deliver(self.host.sim.now, payload_len)

    def _send_ack(self) -> None:
        if self.host.addr is None:
            return
        pkt = Packet(
            src_ip=self.host.addr,
            dst_ip=self.host.peer_addr(self.conn_id),
            src_mac=self.host.uid,
            payload_len=0,
            seq=self._ack_seq,
            sent_at=self.host.sim.now,
            kind=PacketKind.ACK,
            conn_id=self.conn_id,
            ack=self.expected,
        )
        self._ack_seq += 1
        self.transmissions += 1
        self.host.transmit(pkt)
