"""Per-node Q-learning TDMA agent.

Each node is an independent learner on a shared broadcast channel. Its
state is one of three MAC situations (fresh packet, deferred after a
busy channel, transmitted), its actions are the frame's slot indices,
and its rewards are fixed at +10 for a free channel, -10 for a busy
channel with retries left, and -20 for a busy channel that exhausts the
retransmission limit and drops the packet.

An agent keeps choosing slots epsilon-greedily (epsilon decaying
multiplicatively to a floor) until its most recent choice has been
repeated at least M-2 times within its last M choices. It then locks
that slot permanently: no more Q-updates, no more exploration, just a
fixed-slot transmission every frame. When every node has locked, the
network has organized itself into a collision-free TDMA schedule with
no coordinator.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from .timebase import ScenarioConfig
from .channel import NodeId

REWARD_SUCCESS = 10
REWARD_DEFER = -10
REWARD_DROP = -20


class MacState(IntEnum):
    """The three per-node MAC situations; values index Q-table rows."""

    FRESH = 0
    DEFERRED = 1
    TRANSMITTED = 2

NUM_STATES = len(MacState)


@dataclass
class QTable:
    """Action values, one row per MAC state, one column per slot."""

    values: list[list[float]]

    @classmethod
    def zeros(cls, num_slots: int) -> "QTable":
        return cls([[0.0] * num_slots for _ in range(NUM_STATES)])

    @property
    def num_slots(self) -> int:
        return len(self.values[0])

    def row(self, state: MacState) -> list[float]:
        return self.values[state]


def update_q(
    q: QTable,
    state: MacState,
    action: int,
    reward: float,
    next_state: MacState,
    *,
    alpha: float,
    gamma: float,
) -> QTable:
    """One temporal-difference backup of a single (state, action) cell.

    Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a));
    every other cell is untouched. Mutates and returns ``q``.
    """
    row = q.values[state]
    best_next = max(q.values[next_state])
    row[action] += alpha * (reward + gamma * best_next - row[action])
    return q


@dataclass(frozen=True)
class SyncFrame:
    """Broadcast once when a node joins; receivers re-base their timers."""

    origin: NodeId
    timestamp_us: int


@dataclass
class Packet:
    generated_us: int
    payload_bytes: int


@dataclass
class StepDecision:
    """What an agent decided after observing the channel at its slot."""

    slot: int
    transmit: bool
    reward: int
    packet: Packet | None  # the packet going on air, when transmit is True


@dataclass
class QLearningAgent:
    """One node's learner plus its MAC bookkeeping.

    The engine drives the per-frame sequence (frame start, slot wake,
    sense, transmit) through `start_frame` / `observe_and_decide`; all
    learning state lives here and is never shared between nodes.
    """

    node: NodeId
    cfg: ScenarioConfig
    q: QTable = field(init=False)
    mac_state: MacState = MacState.FRESH
    epsilon: float = field(init=False)
    retries: int = 0
    history: deque = field(init=False)
    converged: bool = False
    final_slot: int | None = None
    convergence_iteration: int | None = None
    joined: bool = False
    frame_origin_us: int | None = None
    head_packet: Packet | None = None
    rewards: list[tuple[int, int]] = field(default_factory=list)
    dropped_packets: int = 0
    # Slot chosen for the frame currently in progress.
    pending_slot: int | None = None
    # Whether the previous learning step actually put a packet on air.
    last_step_transmitted: bool = False

    def __post_init__(self) -> None:
        self.q = QTable.zeros(self.cfg.num_slots)
        self.epsilon = self.cfg.eps_max
        self.history = deque(maxlen=self.cfg.m_window)

    # -- decentralized synchronization ---------------------------------

    def join(self, t_us: int) -> SyncFrame:
        """Enter the network: broadcast a sync frame and start timers at t."""
        if self.joined:
            raise RuntimeError(f"node {self.node} joined twice")
        self.joined = True
        self.frame_origin_us = t_us
        return SyncFrame(origin=self.node, timestamp_us=t_us)

    def handle_sync(self, frame: SyncFrame) -> None:
        """Adopt the sender's frame origin; the newest joiner sets the phase."""
        self.frame_origin_us = frame.timestamp_us

    # -- epsilon-greedy policy ------------------------------------------

    def select_action(self, rng: random.Random) -> int:
        """Explore a uniform random slot when epsilon > u, else exploit.

        Exploitation returns an argmax element of the current state's
        Q-row, ties broken uniformly at random.
        """
        if self.converged:
            raise RuntimeError(f"node {self.node} selects actions after locking")
        if self.epsilon > rng.random():
            return rng.randrange(self.cfg.num_slots)
        row = self.q.row(self.mac_state)
        best = max(row)
        candidates = [slot for slot, value in enumerate(row) if value == best]
        if len(candidates) == 1:
            return candidates[0]
        return candidates[rng.randrange(len(candidates))]

    def decay_epsilon(self) -> None:
        """Multiplicative decay applied once per learning iteration, floored."""
        if self.epsilon > self.cfg.eps_min:
            self.epsilon = max(
                self.cfg.eps_min, self.epsilon * (1.0 - self.cfg.decay_rate)
            )

    # -- convergence ----------------------------------------------------

    def detect_convergence(self) -> bool:
        """True iff the most recent slot choice fills >= M-2 of the last M."""
        if len(self.history) < self.cfg.m_window:
            return False
        return self.history.count(self.history[-1]) >= self.cfg.m_window - 2

    # -- per-frame protocol (driven by the engine) ----------------------

    def start_frame(self, iteration: int, t_us: int, rng: random.Random) -> int:
        """Begin one iteration: convergence check, packet load, slot choice.

        Returns the slot whose start position this agent will wake at.
        """
        if (
            not self.converged
            and self.last_step_transmitted
            and self.detect_convergence()
        ):
            # Lock only off a successful claim: the repeated slot was just
            # used on a clear channel, so its airtime window is visible in
            # every other node's previous-frame view. A repetition streak
            # made of deferrals must not freeze a slot the node never held.
            self.converged = True
            self.final_slot = self.history[-1]
            self.convergence_iteration = iteration
        if self.converged:
            # Saturated source: a fresh packet becomes head-of-line at
            # every frame boundary once the slot is locked.
            self.head_packet = Packet(t_us, self.cfg.payload_bytes)
            self.pending_slot = self.final_slot
        else:
            if self.head_packet is None:
                self.head_packet = Packet(t_us, self.cfg.training_packet_bytes)
            self.pending_slot = self.select_action(rng)
        return self.pending_slot

    def observe_and_decide(self, busy: bool, iteration: int) -> StepDecision:
        """Consume the carrier-sense result for this frame's chosen slot.

        Locked agents just transmit or skip; learning agents additionally
        run the reward assignment, the Q-update, the action history, and
        the epsilon decay.
        """
        slot = self.pending_slot
        assert slot is not None, "observe_and_decide before start_frame"
        self.pending_slot = None

        if self.converged:
            # Fixed-slot mode transmits unconditionally: the slot was
            # validated by the success streak that locked it, and every
            # learner is barred from overlapping a locked window by its
            # own channel checks. No learning; the reward series keeps
            # recording +10 so post-convergence averages read +10.
            self.rewards.append((iteration, REWARD_SUCCESS))
            packet = self.head_packet
            self.head_packet = None
            return StepDecision(slot, True, REWARD_SUCCESS, packet)

        prev_state = self.mac_state
        if not busy:
            reward = REWARD_SUCCESS
            next_state = MacState.TRANSMITTED
            self.retries = 0
            packet = self.head_packet
            self.head_packet = None
            transmit = True
        elif self.retries < self.cfg.max_retransmissions:
            reward = REWARD_DEFER
            next_state = MacState.DEFERRED
            self.retries += 1
            packet = None
            transmit = False
        else:
            reward = REWARD_DROP
            next_state = MacState.FRESH
            self.retries = 0
            self.head_packet = None
            self.dropped_packets += 1
            packet = None
            transmit = False

        update_q(
            self.q,
            prev_state,
            slot,
            reward,
            next_state,
            alpha=self.cfg.alpha,
            gamma=self.cfg.gamma,
        )
        self.mac_state = next_state
        self.history.append(slot)
        self.decay_epsilon()
        self.rewards.append((iteration, reward))
        self.last_step_transmitted = transmit
        return StepDecision(slot, transmit, reward, packet)
