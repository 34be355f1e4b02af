"""Frame/slot/time arithmetic and scenario configuration.

All simulation time is integer microseconds. Every default duration below
is exactly representable in that unit, so event ordering is bit-exact and
replayable: there is no float anywhere on the time axis.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

# Microsecond-based unit helpers.
US = 1
MS = 1_000
SEC = 1_000_000


@dataclass(frozen=True)
class ScenarioConfig:
    """All timing, learning, and traffic parameters of one scenario.

    Defaults correspond to the reference network setup: a 100 ms
    transmission frame holding 16 slot start positions spaced 4.6 ms
    apart, 180-byte training packets at 115.2 kb/s, and the Q-learning
    hyperparameters gamma=0.99, alpha=0.2, eps 1 -> 0.05 at 1% decay,
    convergence window M=7, four nodes.
    """

    num_slots: int = 16
    slot_period_us: int = 4_600
    frame_period_us: int = 100_000
    data_rate_bps: int = 115_200
    training_packet_bytes: int = 180
    # Payload used by converged nodes (and by CSMA nodes throughout).
    # None means "same as the training packet".
    data_packet_bytes: int | None = None
    max_retransmissions: int = 5
    gamma: float = 0.99
    alpha: float = 0.2
    eps_max: float = 1.0
    eps_min: float = 0.05
    decay_rate: float = 0.01
    m_window: int = 7
    num_nodes: int = 4
    # Uniform per-attempt sense offset breaking same-slot ties (hardware
    # clock skew stand-in). Must be far below the slot period.
    sense_jitter_max_us: int = 50
    rng_seed: int = 0
    # Node k joins the empty network at k * join_spacing_us.
    join_spacing_us: int = 10_000
    # CSMA/CA baseline knobs.
    csma_min_be: int = 3
    csma_max_be: int = 5
    csma_max_backoffs: int = 4
    csma_unit_backoff_us: int = 1_000

    @property
    def payload_bytes(self) -> int:
        """Post-convergence / CSMA payload size."""
        if self.data_packet_bytes is None:
            return self.training_packet_bytes
        return self.data_packet_bytes

    def echo(self) -> str:
        """Canonical key=value rendering, one field per line.

        Used for the config-echo artifact and for config hashing; field
        order is declaration order, so the text is deterministic.
        """
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"


def airtime_us(size_bytes: int, data_rate_bps: int) -> int:
    """Time on air of a packet, rounded up to the next microsecond tick.

    Rounding up means the channel is never under-reserved.
    """
    if size_bytes <= 0:
        raise ValueError(f"packet size must be positive, got {size_bytes}")
    if data_rate_bps <= 0:
        raise ValueError(f"data rate must be positive, got {data_rate_bps}")
    bits = size_bytes * 8
    return -(-bits * SEC // data_rate_bps)


def slot_start_offset_us(slot_index: int, cfg: ScenarioConfig) -> int:
    """Offset of a slot's start position from the frame start."""
    if not 0 <= slot_index < cfg.num_slots:
        raise ValueError(
            f"slot index {slot_index} out of range [0, {cfg.num_slots})"
        )
    return slot_index * cfg.slot_period_us


def frame_and_iteration_of(t_us: int, cfg: ScenarioConfig) -> tuple[int, int]:
    """Map an absolute time to (frame index, offset within the frame)."""
    if t_us < 0:
        raise ValueError(f"time must be non-negative, got {t_us}")
    return divmod(t_us, cfg.frame_period_us)


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """Check every scenario invariant; return the violated ones by name.

    Returns an empty list when the config is valid. Never raises: callers
    decide whether a violation is fatal.
    """
    violations: list[str] = []

    def positive(name: str, value: int) -> bool:
        if value <= 0:
            violations.append(f"{name} must be positive (got {value})")
            return False
        return True

    ok_sizes = positive("num_slots", cfg.num_slots)
    ok_sizes &= positive("slot_period_us", cfg.slot_period_us)
    ok_sizes &= positive("frame_period_us", cfg.frame_period_us)
    ok_sizes &= positive("data_rate_bps", cfg.data_rate_bps)
    ok_sizes &= positive("training_packet_bytes", cfg.training_packet_bytes)
    positive("num_nodes", cfg.num_nodes)

    if ok_sizes:
        occupied = (
            cfg.num_slots * cfg.slot_period_us
            + airtime_us(cfg.training_packet_bytes, cfg.data_rate_bps)
        )
        if occupied > cfg.frame_period_us:
            violations.append(
                "guard time: slots plus training-packet airtime "
                f"({occupied} us) exceed the frame period "
                f"({cfg.frame_period_us} us)"
            )

    if not 0.0 < cfg.alpha <= 1.0:
        violations.append(f"alpha range: need 0 < alpha <= 1, got {cfg.alpha}")
    if not 0.0 < cfg.gamma < 1.0:
        violations.append(f"gamma range: need 0 < gamma < 1, got {cfg.gamma}")
    if not 0.0 <= cfg.eps_min <= cfg.eps_max <= 1.0:
        violations.append(
            "epsilon range: need 0 <= eps_min <= eps_max <= 1, got "
            f"eps_min={cfg.eps_min}, eps_max={cfg.eps_max}"
        )
    if not 0.0 <= cfg.decay_rate < 1.0:
        violations.append(
            f"decay rate: need 0 <= decay_rate < 1, got {cfg.decay_rate}"
        )
    if cfg.m_window < 3:
        violations.append(f"m_window: need m_window >= 3, got {cfg.m_window}")
    if cfg.max_retransmissions < 0:
        violations.append(
            "max_retransmissions: must be non-negative, got "
            f"{cfg.max_retransmissions}"
        )

    if cfg.sense_jitter_max_us < 0:
        violations.append(
            f"sense jitter: must be non-negative, got {cfg.sense_jitter_max_us}"
        )
    elif cfg.slot_period_us > 0 and cfg.sense_jitter_max_us >= cfg.slot_period_us:
        violations.append(
            f"sense jitter: {cfg.sense_jitter_max_us} us must be below the "
            f"slot period ({cfg.slot_period_us} us)"
        )

    if cfg.data_packet_bytes is not None and cfg.data_packet_bytes <= 0:
        violations.append(
            f"data_packet_bytes: must be positive, got {cfg.data_packet_bytes}"
        )

    if not 0 <= cfg.csma_min_be <= cfg.csma_max_be:
        violations.append(
            "csma backoff exponents: need 0 <= csma_min_be <= csma_max_be, "
            f"got {cfg.csma_min_be}, {cfg.csma_max_be}"
        )
    positive("csma_unit_backoff_us", cfg.csma_unit_backoff_us)
    if cfg.csma_max_backoffs < 0:
        violations.append(
            f"csma_max_backoffs: must be non-negative, got {cfg.csma_max_backoffs}"
        )
    if cfg.join_spacing_us < 0:
        violations.append(
            f"join spacing: must be non-negative, got {cfg.join_spacing_us}"
        )

    return violations


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def config_from_text(text: str) -> ScenarioConfig:
    """Parse a flat key=value scenario file.

    Every field is optional; omitted fields keep the reference defaults.
    Blank lines and '#' comments are ignored.
    """
    overrides: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown scenario field {key!r}")
        overrides[key] = _parse_field(key, value)
    return ScenarioConfig(**overrides)  # type: ignore[arg-type]


def _parse_field(key: str, value: str):
    decl = str(_FIELD_TYPES[key])
    if "float" in decl:
        return float(value)
    if value.lower() == "none":
        return None
    return int(value)
