"""Q-learning decentralized-TDMA MAC simulator with a CSMA/CA baseline."""

from .timebase import (
    MS,
    SEC,
    US,
    ScenarioConfig,
    airtime_us,
    config_from_text,
    frame_and_iteration_of,
    slot_start_offset_us,
    validate_config,
)
from .channel import (
    BroadcastChannel,
    HalfDuplexViolation,
    Outcome,
    TransmissionRecord,
    sense_jitter_us,
)
from .qlearning import (
    MacState,
    Packet,
    QLearningAgent,
    QTable,
    SyncFrame,
    update_q,
    REWARD_DEFER,
    REWARD_DROP,
    REWARD_SUCCESS,
)
from .csma import CsmaAgent, CsmaParams, csma_defaults, draw_backoff_us
from .engine import Event, EventKind, RunResult, node_rng, run, write_run_dir

__all__ = [
    "MS",
    "SEC",
    "US",
    "ScenarioConfig",
    "airtime_us",
    "config_from_text",
    "frame_and_iteration_of",
    "slot_start_offset_us",
    "validate_config",
    "BroadcastChannel",
    "HalfDuplexViolation",
    "Outcome",
    "TransmissionRecord",
    "sense_jitter_us",
    "MacState",
    "Packet",
    "QLearningAgent",
    "QTable",
    "SyncFrame",
    "update_q",
    "REWARD_DEFER",
    "REWARD_DROP",
    "REWARD_SUCCESS",
    "CsmaAgent",
    "CsmaParams",
    "csma_defaults",
    "draw_backoff_us",
    "Event",
    "EventKind",
    "RunResult",
    "node_rng",
    "run",
    "write_run_dir",
]
