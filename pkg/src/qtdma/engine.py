"""Seeded deterministic discrete-event loop.

The engine owns the channel and all agents, drives one iteration per
transmission frame, and produces a self-contained RunResult. Events are
processed in (time, kind, node) order; kinds are numbered so that a
transmission end always precedes any same-tick carrier sense (the
channel frees before anyone looks at it), and frame boundaries follow
joins at the same tick.

Determinism contract: identical (config, seed, mac kind, horizon) yields
an identical RunResult, byte for byte in serialized form. Randomness is
drawn from per-node streams seeded from (master seed, node id), so
adding a node never perturbs the draws of existing nodes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import IntEnum
from heapq import heappush, heappop
from pathlib import Path
from typing import NamedTuple

from .timebase import (
    ScenarioConfig,
    airtime_us,
    slot_start_offset_us,
    validate_config,
)
from .channel import (
    BroadcastChannel,
    NodeId,
    Outcome,
    TransmissionRecord,
    log_to_csv_rows,
    sense_jitter_us,
)
from .qlearning import Packet, QLearningAgent
from .csma import CsmaAgent


class EventKind(IntEnum):
    """Numbered by same-tick processing priority, lowest first."""

    TX_END = 0
    NODE_JOIN = 1
    FRAME_BOUNDARY = 2
    SLOT_WAKE = 3
    SENSE_AND_TRANSMIT = 4
    BACKOFF_EXPIRY = 5


class Event(NamedTuple):
    at_us: int
    kind: EventKind
    node: NodeId


@dataclass
class RunResult:
    """Everything a run produced; enough to recompute every metric."""

    cfg: ScenarioConfig
    mac_kind: str
    horizon: int
    origin_us: int
    end_us: int
    records: list[TransmissionRecord]
    rewards: list[list[tuple[int, int]]]
    convergence: list[int | None]
    final_slots: list[int | None]
    delays: list[tuple[NodeId, int, int]]  # (node, generated_us, delivered_us)
    busy_senses: list[tuple[int, NodeId]]
    n_senses: int
    dropped: list[int]
    qtable_snapshots: list[tuple[int, NodeId, int, int, float]] = field(
        default_factory=list
    )

    @property
    def seed(self) -> int:
        return self.cfg.rng_seed

    def iteration_of(self, t_us: int) -> int:
        """1-based iteration (frame ordinal after the last join) holding t."""
        return (t_us - self.origin_us) // self.cfg.frame_period_us + 1


def node_rng(cfg: ScenarioConfig, node: NodeId) -> random.Random:
    """Independent per-node stream; avoids hash() so replay is stable."""
    return random.Random(cfg.rng_seed * 1_000_003 + node)


def run(
    cfg: ScenarioConfig,
    mac_kind: str = "qlearning",
    horizon: int = 1000,
    qtable_snapshot_every: int = 0,
) -> RunResult:
    """Simulate `horizon` transmission frames after the last node joins."""
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid scenario config: " + "; ".join(violations))
    if horizon < 1:
        raise ValueError(f"horizon must be at least one frame, got {horizon}")
    if mac_kind not in ("qlearning", "csma"):
        raise ValueError(f"unknown mac kind {mac_kind!r}")
    if mac_kind == "qlearning" and cfg.payload_bytes > cfg.training_packet_bytes:
        raise ValueError(
            f"data packets ({cfg.payload_bytes} B) cannot exceed the training "
            f"packet ({cfg.training_packet_bytes} B): a locked slot only "
            "reserves the training packet's airtime"
        )

    channel = BroadcastChannel(cfg)
    rngs = [node_rng(cfg, node) for node in range(cfg.num_nodes)]
    q_agents: list[QLearningAgent] = []
    c_agents: list[CsmaAgent] = []
    if mac_kind == "qlearning":
        q_agents = [QLearningAgent(node, cfg) for node in range(cfg.num_nodes)]
    else:
        c_agents = [CsmaAgent(node, cfg) for node in range(cfg.num_nodes)]

    frame_us = cfg.frame_period_us
    training_air_us = airtime_us(cfg.training_packet_bytes, cfg.data_rate_bps)
    origin_us = (cfg.num_nodes - 1) * cfg.join_spacing_us
    end_us = origin_us + horizon * frame_us

    heap: list[Event] = []
    for node in range(cfg.num_nodes):
        heappush(heap, Event(node * cfg.join_spacing_us, EventKind.NODE_JOIN, node))

    joins_left = cfg.num_nodes
    delays: list[tuple[NodeId, int, int]] = []
    busy_senses: list[tuple[int, NodeId]] = []
    n_senses = 0
    # Packet riding each in-flight transmission, keyed by sender.
    in_flight: dict[NodeId, Packet] = {}
    snapshots: list[tuple[int, NodeId, int, int, float]] = []

    def iteration_of(t_us: int) -> int:
        return (t_us - origin_us) // frame_us + 1

    while heap:
        at, kind, node = heappop(heap)

        if kind == EventKind.TX_END:
            rec = channel.end_transmission(node)
            packet = in_flight.pop(node)
            if rec.outcome is Outcome.DELIVERED:
                delays.append((node, packet.generated_us, at))
            if mac_kind == "csma" and at < end_us:
                agent = c_agents[node]
                expiry = agent.finish_transmission(at, rngs[node])
                heappush(heap, Event(expiry, EventKind.BACKOFF_EXPIRY, node))

        elif kind == EventKind.NODE_JOIN:
            if mac_kind == "qlearning":
                agent = q_agents[node]
                sync = agent.join(at)
                for other in q_agents:
                    if other.joined and other.node != node:
                        other.handle_sync(sync)
            joins_left -= 1
            if joins_left == 0:
                # The newest joiner's broadcast defines the shared frame
                # phase; the first full frame period starts right here.
                if mac_kind == "qlearning":
                    for n in range(cfg.num_nodes):
                        heappush(heap, Event(at, EventKind.FRAME_BOUNDARY, n))
                else:
                    # CSMA nodes contend within the same shared frame
                    # cadence (no slots): one head-of-line packet per
                    # frame period per node.
                    for n in range(cfg.num_nodes):
                        expiry = c_agents[n].start_cycle(at, rngs[n])
                        heappush(heap, Event(expiry, EventKind.BACKOFF_EXPIRY, n))

        elif kind == EventKind.FRAME_BOUNDARY:
            if at >= end_us:
                continue
            iteration = iteration_of(at)
            agent = q_agents[node]
            if qtable_snapshot_every and node == 0:
                if (iteration - 1) % qtable_snapshot_every == 0:
                    for a in q_agents:
                        for s, row in enumerate(a.q.values):
                            for slot, value in enumerate(row):
                                snapshots.append(
                                    (iteration, a.node, s, slot, value)
                                )
            slot = agent.start_frame(iteration, at, rngs[node])
            wake = at + slot_start_offset_us(slot, cfg)
            if agent.converged:
                # Locked slot: transmit at the exact slot start, no jitter.
                heappush(heap, Event(wake, EventKind.SENSE_AND_TRANSMIT, node))
            else:
                heappush(heap, Event(wake, EventKind.SLOT_WAKE, node))
            heappush(heap, Event(at + frame_us, EventKind.FRAME_BOUNDARY, node))

        elif kind == EventKind.SLOT_WAKE:
            jitter = sense_jitter_us(rngs[node], cfg)
            heappush(heap, Event(at + jitter, EventKind.SENSE_AND_TRANSMIT, node))

        elif kind == EventKind.SENSE_AND_TRANSMIT:
            agent = q_agents[node]
            if agent.converged:
                # A locked node transmits at its final slot without
                # checking: its streak validated the window, and learner
                # channel checks keep everyone else out of it.
                busy = False
            else:
                busy = channel.sense(at, node)
                if not busy:
                    # A learner also replays what it heard over its
                    # intended airtime window in the two preceding frames:
                    # an instant carrier sample cannot see a later-slot
                    # transmission its own multi-slot packet would
                    # trample, and a claim is only safe once its window
                    # has stayed clear.
                    busy = channel.window_was_busy(
                        at - frame_us, at - frame_us + training_air_us, node
                    ) or channel.window_was_busy(
                        at - 2 * frame_us, at - 2 * frame_us + training_air_us, node
                    )
                n_senses += 1
                if busy:
                    busy_senses.append((at, node))
            decision = agent.observe_and_decide(busy, iteration_of(at))
            if decision.transmit:
                rec = channel.begin_transmission(
                    node, at, decision.packet.payload_bytes
                )
                in_flight[node] = decision.packet
                heappush(heap, Event(rec.end_us, EventKind.TX_END, node))

        else:  # BACKOFF_EXPIRY
            if at >= end_us:
                continue
            agent = c_agents[node]
            busy = channel.cca(at, node)
            n_senses += 1
            if busy:
                busy_senses.append((at, node))
            packet, expiry = agent.observe_cca(busy, at, rngs[node])
            if packet is not None:
                rec = channel.begin_transmission(node, at, packet.payload_bytes)
                in_flight[node] = packet
                heappush(heap, Event(rec.end_us, EventKind.TX_END, node))
            elif expiry is not None:
                heappush(heap, Event(expiry, EventKind.BACKOFF_EXPIRY, node))

    return RunResult(
        cfg=cfg,
        mac_kind=mac_kind,
        horizon=horizon,
        origin_us=origin_us,
        end_us=end_us,
        records=channel.log,
        rewards=[list(a.rewards) for a in q_agents],
        convergence=[a.convergence_iteration for a in q_agents],
        final_slots=[a.final_slot for a in q_agents],
        delays=delays,
        busy_senses=busy_senses,
        n_senses=n_senses,
        dropped=[a.dropped_packets for a in (q_agents or c_agents)],
        qtable_snapshots=snapshots,
    )


# -- serialization ------------------------------------------------------


def write_run_dir(result: RunResult, path: str | Path) -> list[Path]:
    """Serialize a RunResult to a directory; returns the files written.

    The directory is self-contained: events, rewards, delays, per-node
    convergence, the config echo, and the seed reproduce every metric.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        p = out / name
        p.write_text(text)
        written.append(p)

    emit("events.csv", "\n".join(log_to_csv_rows(result.records)) + "\n")

    lines = ["node,iteration,reward"]
    for node, series in enumerate(result.rewards):
        for iteration, reward in series:
            lines.append(f"{node},{iteration},{reward}")
    emit("rewards.csv", "\n".join(lines) + "\n")

    lines = ["node,generated_us,delivered_us,delay_us"]
    for node, generated, delivered in result.delays:
        lines.append(f"{node},{generated},{delivered},{delivered - generated}")
    emit("delays.csv", "\n".join(lines) + "\n")

    lines = ["node,convergence_iteration,final_slot"]
    for node, conv in enumerate(result.convergence):
        slot = result.final_slots[node] if result.final_slots else None
        lines.append(
            f"{node},{'' if conv is None else conv},{'' if slot is None else slot}"
        )
    emit("convergence.csv", "\n".join(lines) + "\n")

    emit("config.txt", result.cfg.echo())
    emit("seed.txt", f"{result.seed}\n")

    if result.qtable_snapshots:
        lines = ["iteration,node,state,slot,value"]
        for iteration, node, state, slot, value in result.qtable_snapshots:
            lines.append(f"{iteration},{node},{state},{slot},{value!r}")
        emit("qtables.csv", "\n".join(lines) + "\n")

    return written
