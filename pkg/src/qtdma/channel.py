"""Ideal all-hear-all broadcast medium with carrier sensing.

Every node hears every other node; collisions are the only loss
mechanism. A transmission occupies the half-open interval
[start, start + duration) and two transmissions collide iff their
intervals overlap. Collision marking is symmetric: overlap ruins both
packets, there is no capture effect.

Same-instant semantics matter here and are deliberate:

* ``sense`` (the slot-based agents' carrier sense) reports Busy for a
  transmission that started at the very tick being sensed. Combined with
  the engine's ordering of same-tick events by node id, this makes the
  contender processed first the only transmitter when two nodes draw an
  identical sense offset: the second contender sees Busy and defers.
* ``cca`` (the CSMA/CA baseline's clear-channel assessment) models a
  carrier sample taken just before the assessment tick, so a
  transmission starting at that same tick is invisible. Two CSMA nodes
  whose backoffs expire on the same tick therefore both transmit and
  collide, which is the classic CSMA vulnerability window.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .timebase import ScenarioConfig, airtime_us

NodeId = int


class Outcome(Enum):
    DELIVERED = "delivered"
    COLLIDED = "collided"


@dataclass
class TransmissionRecord:
    """One attempted airtime interval and its final outcome."""

    sender: NodeId
    start_us: int
    duration_us: int
    payload_bytes: int
    outcome: Outcome = Outcome.DELIVERED

    @property
    def end_us(self) -> int:
        return self.start_us + self.duration_us

    def overlaps(self, other: "TransmissionRecord") -> bool:
        return self.start_us < other.end_us and other.start_us < self.end_us


class HalfDuplexViolation(RuntimeError):
    """A node sensed or re-keyed the channel while its own packet was in flight."""


class BroadcastChannel:
    """Channel state: in-flight transmissions plus the append-only log.

    Owned and mutated solely by the engine's event loop. Records enter
    the log at transmission start (keeping the log ordered by start
    time); their outcome may still flip to COLLIDED while in flight.
    """

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.active: dict[NodeId, TransmissionRecord] = {}
        self.log: list[TransmissionRecord] = []

    def sense(self, t_us: int, observer: NodeId) -> bool:
        """Carrier sense at tick ``t_us``; True means Busy.

        Busy iff any other node's transmission covers t (half-open
        interval, so a packet ending exactly at t has already freed the
        channel, and one starting exactly at t is detected).
        """
        if observer in self.active:
            raise HalfDuplexViolation(
                f"node {observer} sensed the channel while transmitting"
            )
        return any(
            rec.start_us <= t_us < rec.end_us
            for node, rec in self.active.items()
            if node != observer
        )

    def cca(self, t_us: int, observer: NodeId) -> bool:
        """Clear-channel assessment sampled just before ``t_us``; True = Busy.

        A transmission that starts exactly at t is not yet visible to the
        sample, so same-tick backoff expiries proceed to transmit.
        """
        if observer in self.active:
            raise HalfDuplexViolation(
                f"node {observer} ran CCA while transmitting"
            )
        return any(
            rec.start_us < t_us < rec.end_us
            for node, rec in self.active.items()
            if node != observer
        )

    def window_was_busy(
        self, w_start_us: int, w_end_us: int, observer: NodeId
    ) -> bool:
        """Whether any other node's transmission overlapped [w_start, w_end).

        Receivers are on whenever a node is not transmitting, so a node
        knows which parts of the recent past were occupied. Learning
        agents use this with last frame's image of their intended airtime
        window: under saturated, frame-periodic traffic it predicts
        whether the claim would trample a transmission that starts later
        in the frame than their own slot (which an instantaneous carrier
        sample at the slot start can never reveal, because a packet spans
        multiple slot periods).

        Queried windows lie in the recent past, so the scan walks the
        start-ordered log backwards and stops early.
        """
        longest = airtime_us(
            max(self.cfg.training_packet_bytes, self.cfg.payload_bytes),
            self.cfg.data_rate_bps,
        )
        for rec in reversed(self.log):
            if rec.start_us < w_start_us - longest:
                break
            if rec.sender == observer:
                continue
            if rec.start_us < w_end_us and w_start_us < rec.end_us:
                return True
        return False

    def begin_transmission(
        self, sender: NodeId, t_us: int, payload_bytes: int
    ) -> TransmissionRecord:
        """Put a packet on the air; returns its (mutable) record.

        Any overlap with an in-flight transmission marks both records
        collided immediately; later overlaps are handled when the later
        transmission begins.
        """
        if sender in self.active:
            raise HalfDuplexViolation(f"node {sender} is already transmitting")
        rec = TransmissionRecord(
            sender=sender,
            start_us=t_us,
            duration_us=airtime_us(payload_bytes, self.cfg.data_rate_bps),
            payload_bytes=payload_bytes,
        )
        for other in self.active.values():
            if rec.overlaps(other):
                rec.outcome = Outcome.COLLIDED
                other.outcome = Outcome.COLLIDED
        self.active[sender] = rec
        self.log.append(rec)
        return rec

    def end_transmission(self, sender: NodeId) -> TransmissionRecord:
        """Take the sender's packet off the air; its outcome is now final."""
        return self.active.pop(sender)


def sense_jitter_us(rng: random.Random, cfg: ScenarioConfig) -> int:
    """Per-attempt sense offset, uniform over [0, sense_jitter_max_us] ticks."""
    if cfg.sense_jitter_max_us == 0:
        return 0
    return rng.randint(0, cfg.sense_jitter_max_us)


def log_to_csv_rows(log: list[TransmissionRecord]) -> list[str]:
    """Render the channel log in its CSV export format."""
    rows = ["sender,start_us,duration_us,bytes,outcome"]
    for rec in log:
        rows.append(
            f"{rec.sender},{rec.start_us},{rec.duration_us},"
            f"{rec.payload_bytes},{rec.outcome.value}"
        )
    return rows
