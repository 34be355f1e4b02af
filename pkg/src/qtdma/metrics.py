"""Evaluation quantities computed from a finished run.

Four quantities mirror the reference evaluation: the network-average
reward per iteration (learning curve), goodput over time windows, the
average generation-to-delivery delay of delivered packets, and the
convergence time of the slowest node. All are pure post-processing over
an immutable RunResult.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import RunResult, run
from .timebase import SEC, ScenarioConfig, airtime_us
from .channel import Outcome


@dataclass
class MetricsSeries:
    """A time- or iteration-indexed series of one metric."""

    kind: str  # "reward" | "goodput" | "delay"
    window: int  # iterations for reward, microseconds otherwise
    samples: list[tuple[int, float]]  # x strictly increasing

    def to_csv(self, path: str | Path, seed: int) -> Path:
        p = Path(path)
        lines = ["x,y,kind,window,seed"]
        for x, y in self.samples:
            lines.append(f"{x},{y!r},{self.kind},{self.window},{seed}")
        p.write_text("\n".join(lines) + "\n")
        return p


def network_average_reward(result: RunResult, window: int = 20) -> MetricsSeries:
    """Trailing per-node reward average, then the unweighted mean across nodes.

    Early iterations use the partial window available so the series is
    defined from iteration 1.
    """
    if window < 1:
        raise ValueError(f"window must be at least 1 iteration, got {window}")
    if not result.rewards or any(not series for series in result.rewards):
        raise ValueError("empty reward series: not a learning run?")

    per_node = np.array(
        [[reward for _, reward in series] for series in result.rewards],
        dtype=float,
    )
    n_iter = per_node.shape[1]
    csum = np.cumsum(per_node, axis=1)
    trailing = np.empty_like(per_node)
    head = min(window, n_iter)
    counts = np.arange(1, head + 1, dtype=float)
    trailing[:, :head] = csum[:, :head] / counts
    if n_iter > window:
        trailing[:, window:] = (csum[:, window:] - csum[:, :-window]) / window
    network = trailing.mean(axis=0)
    samples = [(i + 1, float(network[i])) for i in range(n_iter)]
    return MetricsSeries(kind="reward", window=window, samples=samples)


def _delivered_overlap_us(result: RunResult, t0: int, t1: int) -> int:
    total = 0
    for rec in result.records:
        if rec.outcome is Outcome.DELIVERED:
            lo = max(rec.start_us, t0)
            hi = min(rec.end_us, t1)
            if hi > lo:
                total += hi - lo
    return total


def goodput(result: RunResult, window_us: int = SEC) -> MetricsSeries:
    """Fraction of each window occupied by successfully delivered airtime."""
    if window_us <= 0:
        raise ValueError(f"window must be positive, got {window_us}")
    samples: list[tuple[int, float]] = []
    n_windows = result.end_us // window_us
    for k in range(n_windows):
        t0, t1 = k * window_us, (k + 1) * window_us
        samples.append((t1, _delivered_overlap_us(result, t0, t1) / window_us))
    return MetricsSeries(kind="goodput", window=window_us, samples=samples)


def average_delay(
    result: RunResult, window_us: int = SEC
) -> tuple[MetricsSeries, float | None]:
    """Windowed mean delivery delay plus the whole-run scalar mean.

    Only delivered packets count; collided and dropped ones are excluded.
    A run with nothing delivered yields an empty series and None (an
    explicit "undefined", never zero).
    """
    if window_us <= 0:
        raise ValueError(f"window must be positive, got {window_us}")
    by_window: dict[int, list[int]] = {}
    all_delays: list[int] = []
    for _node, generated, delivered in result.delays:
        delay = delivered - generated
        all_delays.append(delay)
        by_window.setdefault(delivered // window_us, []).append(delay)
    samples = [
        ((k + 1) * window_us, float(np.mean(by_window[k])))
        for k in sorted(by_window)
    ]
    series = MetricsSeries(kind="delay", window=window_us, samples=samples)
    scalar = float(np.mean(all_delays)) if all_delays else None
    return series, scalar


@dataclass(frozen=True)
class ConvergenceSummary:
    per_node: list[int | None]
    network_iteration: int | None  # max over nodes; None if any never locked
    network_seconds: float | None

    @property
    def converged(self) -> bool:
        return self.network_iteration is not None


def convergence_time(result: RunResult) -> ConvergenceSummary:
    """The network converges when its slowest node does."""
    if result.mac_kind != "qlearning":
        raise ValueError("convergence is defined for learning runs only")
    per_node = list(result.convergence)
    if any(c is None for c in per_node):
        return ConvergenceSummary(per_node, None, None)
    network = max(per_node)
    seconds = network * result.cfg.frame_period_us / SEC
    return ConvergenceSummary(per_node, network, seconds)


# -- steady-state measurement and the packet-size sweep ------------------

CSMA_SETTLE_FRAMES = 200


@dataclass(frozen=True)
class SteadyState:
    goodput: float
    mean_delay_us: float | None
    span_start_us: int
    span_end_us: int


def steady_state(result: RunResult, settle_frames: int | None = None) -> SteadyState:
    """Post-settling goodput and mean delay over the run's tail.

    Learning runs settle at the slowest node's convergence (raises if the
    run never converged); contention runs settle after a fixed warmup.
    """
    frame_us = result.cfg.frame_period_us
    if result.mac_kind == "qlearning":
        summary = convergence_time(result)
        if not summary.converged:
            raise ValueError("not converged within horizon")
        settle = summary.network_iteration
    else:
        settle = CSMA_SETTLE_FRAMES if settle_frames is None else settle_frames
    t0 = result.origin_us + (settle - 1) * frame_us
    t1 = result.end_us
    if t1 <= t0:
        raise ValueError(
            f"horizon too short: steady span would start at frame {settle}"
        )
    gp = _delivered_overlap_us(result, t0, t1) / (t1 - t0)
    delays = [d - g for _n, g, d in result.delays if g >= t0]
    mean_delay = float(np.mean(delays)) if delays else None
    return SteadyState(gp, mean_delay, t0, t1)


@dataclass(frozen=True)
class SweepPoint:
    size_bytes: int
    goodput: float
    mean_delay_us: float | None


def packet_size_sweep(
    cfg: ScenarioConfig,
    sizes: list[int],
    mac_kind: str,
    horizon: int = 3000,
) -> list[SweepPoint]:
    """Steady-state goodput/delay at each payload size for one MAC.

    Learning runs train with the full-size training packet and switch the
    converged payload to the swept size; sizes above the training packet
    are rejected because a locked slot only reserves the training
    packet's airtime.
    """
    points: list[SweepPoint] = []
    for size in sizes:
        if mac_kind == "qlearning" and size > cfg.training_packet_bytes:
            raise ValueError(
                f"size {size} B exceeds the training packet "
                f"({cfg.training_packet_bytes} B); a converged node can only "
                "send packets up to its training packet's size"
            )
        result = run(replace(cfg, data_packet_bytes=size), mac_kind, horizon)
        steady = steady_state(result)
        points.append(SweepPoint(size, steady.goodput, steady.mean_delay_us))
    return points


def theoretical_tdma_goodput(cfg: ScenarioConfig, size_bytes: int) -> float:
    """Closed form for a fully converged schedule: n x airtime / frame."""
    return (
        cfg.num_nodes
        * airtime_us(size_bytes, cfg.data_rate_bps)
        / cfg.frame_period_us
    )
