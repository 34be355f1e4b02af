"""Contention-based CSMA/CA baseline under saturated traffic.

Each node runs an independent binary-exponential-backoff cycle with no
RTS/CTS and no ACK: a transmitting node cannot tell whether its packet
collided, and loss is observed at the sink only.

One packet becomes head-of-line per transmission frame period, anchored
to the node's own join time (nodes do not share the learners' slot
grid or frame phase). Per attempt the node draws a backoff of
[0, 2^BE - 1] unit periods past its current anchor, waits, and runs a
clear-channel assessment. Idle: it transmits the whole packet. Busy: it
escalates BE (capped), counts the attempt, and postpones the packet to
the next frame period; a packet that exceeds the backoff limit is
dropped and replaced by a fresh one the following frame.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .timebase import ScenarioConfig
from .channel import NodeId
from .qlearning import Packet


@dataclass(frozen=True)
class CsmaParams:
    min_be: int
    max_be: int
    max_backoffs: int
    unit_backoff_us: int


def csma_defaults() -> CsmaParams:
    """Baseline backoff parameters (shared with ScenarioConfig defaults)."""
    cfg = ScenarioConfig()
    return CsmaParams(
        min_be=cfg.csma_min_be,
        max_be=cfg.csma_max_be,
        max_backoffs=cfg.csma_max_backoffs,
        unit_backoff_us=cfg.csma_unit_backoff_us,
    )


def draw_backoff_us(rng: random.Random, be: int, unit_backoff_us: int) -> int:
    """Uniform backoff in [0, 2^BE - 1] unit periods."""
    return rng.randint(0, (1 << be) - 1) * unit_backoff_us


@dataclass
class CsmaAgent:
    """One saturated CSMA/CA node; timing is driven by the engine."""

    node: NodeId
    cfg: ScenarioConfig
    be: int = 0
    attempts: int = 0
    head_packet: Packet | None = None
    anchor_us: int = 0
    delivered_attempts: int = 0
    dropped_packets: int = 0

    def __post_init__(self) -> None:
        self.be = self.cfg.csma_min_be

    def _load_packet(self) -> None:
        self.head_packet = Packet(self.anchor_us, self.cfg.payload_bytes)

    def _draw_expiry(self, rng: random.Random) -> int:
        return self.anchor_us + draw_backoff_us(
            rng, self.be, self.cfg.csma_unit_backoff_us
        )

    def start_cycle(self, t_us: int, rng: random.Random) -> int:
        """First packet becomes head-of-line at join; returns first CCA time."""
        self.anchor_us = t_us
        self._load_packet()
        return self._draw_expiry(rng)

    def observe_cca(
        self, busy: bool, t_us: int, rng: random.Random
    ) -> tuple[Packet | None, int | None]:
        """Consume one clear-channel assessment.

        Returns (packet, None) when the node should transmit now, or
        (None, next_expiry) when it postponed to the next frame period.
        """
        if not busy:
            packet = self.head_packet
            self.head_packet = None
            return packet, None
        self.be = min(self.be + 1, self.cfg.csma_max_be)
        self.attempts += 1
        self.anchor_us += self.cfg.frame_period_us
        if self.attempts > self.cfg.csma_max_backoffs:
            self.dropped_packets += 1
            self.be = self.cfg.csma_min_be
            self.attempts = 0
            self._load_packet()
        # Otherwise the same packet is retried; its generated_at stands.
        return None, self._draw_expiry(rng)

    def finish_transmission(self, t_us: int, rng: random.Random) -> int:
        """Transmission over (delivered or not, the node cannot tell).

        Resets the per-packet backoff state and queues the next packet at
        the next frame anchor; returns its first CCA time.
        """
        self.be = self.cfg.csma_min_be
        self.attempts = 0
        self.delivered_attempts += 1
        self.anchor_us += self.cfg.frame_period_us
        self._load_packet()
        return self._draw_expiry(rng)
