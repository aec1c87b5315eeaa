"""Client identifiers and IPv4 address pool helpers."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Iterable, Optional, Set

_UID_RE = re.compile(r"^([0-9a-f]{2}:){5}[0-9a-f]{2}$")


class AddressError(ValueError):
    """Malformed identifier or address-space violation."""


@dataclass(frozen=True)
class Uid:
    """Universal client identifier: a 48-bit, MAC-style value.

    Canonical text form is 17 characters of lowercase colon-separated hex,
    e.g. ``aa:bb:cc:00:00:01``; parsing normalizes case and round-trips
    losslessly.
    """

    text: str

    def __post_init__(self) -> None:
        if not _UID_RE.match(self.text):
            raise AddressError(f"not a canonical 48-bit identifier: {self.text!r}")

    @classmethod
    def parse(cls, raw: str) -> "Uid":
        candidate = raw.strip().lower()
        if not _UID_RE.match(candidate):
            raise AddressError(f"cannot parse identifier: {raw!r}")
        return cls(candidate)

    @classmethod
    def from_int(cls, value: int) -> "Uid":
        if not 0 <= value < 1 << 48:
            raise AddressError(f"identifier out of 48-bit range: {value}")
        octets = value.to_bytes(6, "big")
        return cls(":".join(f"{b:02x}" for b in octets))

    def __str__(self) -> str:
        return self.text


class AddressPool:
    """Allocatable slice of an IPv4 network (all host addresses).

    The free list is kept sorted so that a seeded generator draws the same
    address for the same call history on every run.
    """

    def __init__(self, network: IPv4Network):
        self.network = network
        self._hosts = list(network.hosts())
        if not self._hosts:
            raise AddressError(f"network {network} has no allocatable hosts")
        self._used: Set[IPv4Address] = set()

    def __contains__(self, addr: IPv4Address) -> bool:
        return addr in self.network

    @property
    def used(self) -> Set[IPv4Address]:
        return set(self._used)

    def free_count(self) -> int:
        return len(self._hosts) - len(self._used)

    def allocate(self, rng: random.Random) -> IPv4Address:
        """Uniform draw over the sorted free addresses."""
        free = [a for a in self._hosts if a not in self._used]
        if not free:
            raise PoolExhausted(f"no free addresses left in {self.network}")
        addr = free[rng.randrange(len(free))]
        self._used.add(addr)
        return addr

    def release(self, addr: IPv4Address) -> None:
        self._used.discard(addr)


class PoolExhausted(AddressError):
    """Every address in the pool is allocated."""


def ranges_overlap(a: IPv4Network, b: IPv4Network) -> bool:
    return a.overlaps(b)


def check_disjoint(networks: Iterable[IPv4Network]) -> Optional[tuple]:
    """Return the first overlapping pair, or None if all disjoint."""
    nets = list(networks)
    for i, a in enumerate(nets):
        for b in nets[i + 1:]:
            if a.overlaps(b):
                return (a, b)
    return None
