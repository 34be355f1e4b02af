"""Command-line entry point.

Two subcommands:

* ``run``     — single experiments: per seed and MAC, a run directory plus
                metric series and a summary table.
* ``compare`` — the MAC comparison: a packet-size sweep of both MACs plus
                representative time series, a comparison table, and a
                manifest for the figure renderer.

Everything written is deterministic for a given spec: re-running into the
same directory overwrites with identical bytes. All randomness flows from
the seed list; no wall clock is read anywhere.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from .timebase import SEC, ScenarioConfig, config_from_text, validate_config
from .engine import run, write_run_dir
from . import metrics

REFERENCE_NOTE = (
    "hardware reference point: 220 iterations (22.0 s) network convergence"
)


def _config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(cfg.echo().encode()).hexdigest()[:12]


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _load_scenario(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return config_from_text(Path(path).read_text())


def _fmt(value: float | None, scale: float = 1.0) -> str:
    return "undefined" if value is None else f"{value * scale:.4f}"


def _emit_series(
    result, out: Path, mac: str, seed: int, reward_window: int, goodput_window_us: int
) -> list[dict]:
    """Write this run's metric series; returns their manifest entries."""
    series_dir = out / "series"
    series_dir.mkdir(parents=True, exist_ok=True)
    entries: list[dict] = []

    def add(series: metrics.MetricsSeries, name: str, x_unit: str, y_unit: str):
        path = series_dir / name
        series.to_csv(path, seed)
        entries.append(
            {
                "kind": series.kind,
                "mac": mac,
                "seed": seed,
                "window": series.window,
                "x_unit": x_unit,
                "y_unit": y_unit,
                "path": str(path.relative_to(out)),
            }
        )

    if mac == "qlearning":
        add(
            metrics.network_average_reward(result, reward_window),
            f"reward_{mac}_seed{seed}.csv",
            "iteration",
            "reward",
        )
    add(
        metrics.goodput(result, goodput_window_us),
        f"goodput_{mac}_seed{seed}.csv",
        "us",
        "fraction",
    )
    delay_series, _scalar = metrics.average_delay(result, goodput_window_us)
    add(delay_series, f"delay_{mac}_seed{seed}.csv", "us", "us")
    return entries


def cmd_run(args) -> int:
    cfg = _load_scenario(args.scenario)
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 2

    macs = ["qlearning", "csma"] if args.mac == "both" else [args.mac]
    seeds = _parse_int_list(args.seeds)
    if not seeds:
        print("at least one seed is required", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    manifest_series: list[dict] = []
    manifest_files: list[str] = ["summary.txt"]
    summary_lines = [
        "mac seed convergence_iter convergence_s steady_goodput steady_delay_ms",
    ]
    summary_info: dict = {}
    for mac in macs:
        for seed in seeds:
            run_cfg = replace(cfg, rng_seed=seed)
            result = run(
                run_cfg,
                mac,
                args.horizon,
                qtable_snapshot_every=args.qtable_snapshot_every,
            )
            written = write_run_dir(result, out / "runs" / f"{mac}_seed{seed}")
            manifest_files += [str(p.relative_to(out)) for p in written]
            manifest_series += _emit_series(
                result, out, mac, seed, args.reward_window, args.goodput_window_us
            )
            steady = None
            conv_it = conv_s = None
            if mac == "qlearning":
                conv = metrics.convergence_time(result)
                conv_it, conv_s = conv.network_iteration, conv.network_seconds
                conv_cell = conv_it if conv.converged else "not-converged"
                if conv.converged:
                    steady = metrics.steady_state(result)
            else:
                conv_cell = "-"
                steady = metrics.steady_state(result)
            summary_lines.append(
                f"{mac} {seed} {conv_cell} {_fmt(conv_s)} "
                f"{_fmt(steady.goodput) if steady else 'undefined'} "
                f"{_fmt(steady.mean_delay_us, 1e-3) if steady else 'undefined'}"
            )
            if mac == "qlearning" and seed == seeds[0]:
                summary_info = {
                    "network_convergence_iteration": conv_it,
                    "network_convergence_seconds": conv_s,
                }
    summary_lines.append(REFERENCE_NOTE)
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n")

    manifest = {
        "config_hash": _config_hash(cfg),
        "frame_period_us": cfg.frame_period_us,
        "seed": seeds[0],
        "series": manifest_series,
        "summary": summary_info,
        "files": sorted(manifest_files),
    }
    _write_manifest(out, manifest)
    print(f"wrote {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_scenario(args.scenario)
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 2
    sizes = _parse_int_list(args.sizes) if args.sizes else []
    if not sizes:
        print("sweep required: pass --sizes with at least one size", file=sys.stderr)
        return 2
    seeds = _parse_int_list(args.seeds)
    if not seeds:
        print("at least one seed is required", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # Sweep both MACs across seeds; aggregate per size by the seed mean.
    try:
        per_size: dict[int, dict[str, list[float]]] = {
            s: {"tg": [], "cg": [], "td": [], "cd": []} for s in sizes
        }
        for seed in seeds:
            seed_cfg = replace(cfg, rng_seed=seed)
            for point in metrics.packet_size_sweep(
                seed_cfg, sizes, "qlearning", args.horizon
            ):
                per_size[point.size_bytes]["tg"].append(point.goodput)
                per_size[point.size_bytes]["td"].append(point.mean_delay_us)
            for point in metrics.packet_size_sweep(
                seed_cfg, sizes, "csma", args.horizon
            ):
                per_size[point.size_bytes]["cg"].append(point.goodput)
                per_size[point.size_bytes]["cd"].append(point.mean_delay_us)
    except ValueError as err:
        print(f"sweep failed: {err}", file=sys.stderr)
        return 2

    rows = [
        "size_bytes,tdma_goodput,csma_goodput,tdma_delay_ms,csma_delay_ms,"
        "goodput_gain_pct,delay_reduction_pct"
    ]
    for size in sizes:
        cell = per_size[size]
        tg = sum(cell["tg"]) / len(cell["tg"])
        cg = sum(cell["cg"]) / len(cell["cg"])
        td = sum(cell["td"]) / len(cell["td"]) / 1000.0
        cd = sum(cell["cd"]) / len(cell["cd"]) / 1000.0
        gain = (tg - cg) / cg * 100.0 if cg > 0 else float("inf")
        reduction = (cd - td) / cd * 100.0 if cd > 0 else float("inf")
        rows.append(
            f"{size},{tg!r},{cg!r},{td!r},{cd!r},{gain:.2f},{reduction:.2f}"
        )
    (out / "compare.csv").write_text("\n".join(rows) + "\n")

    # Representative time series at the default payload, first seed.
    rep_seed = seeds[0]
    rep_cfg = replace(cfg, rng_seed=rep_seed)
    manifest_series: list[dict] = []
    rep_q = run(rep_cfg, "qlearning", args.horizon)
    manifest_series += _emit_series(
        rep_q, out, "qlearning", rep_seed, args.reward_window, args.goodput_window_us
    )
    rep_c = run(rep_cfg, "csma", args.horizon)
    manifest_series += _emit_series(
        rep_c, out, "csma", rep_seed, args.reward_window, args.goodput_window_us
    )

    conv = metrics.convergence_time(rep_q)
    summary_lines = [
        f"seeds: {' '.join(str(s) for s in seeds)}",
        f"sizes: {' '.join(str(s) for s in sizes)}",
        f"network_convergence_iteration: "
        f"{conv.network_iteration if conv.converged else 'not-converged'}",
        f"network_convergence_seconds: {_fmt(conv.network_seconds)}",
        REFERENCE_NOTE,
        "",
        "per-size seed means (delays in ms):",
        *rows,
    ]
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n")

    manifest = {
        "config_hash": _config_hash(cfg),
        "frame_period_us": cfg.frame_period_us,
        "seed": rep_seed,
        "series": manifest_series,
        "summary": {
            "network_convergence_iteration": conv.network_iteration,
            "network_convergence_seconds": conv.network_seconds,
        },
        "comparison": {
            "path": "compare.csv",
            "sizes": sizes,
            "seeds": seeds,
        },
        "files": ["summary.txt", "compare.csv"],
    }
    _write_manifest(out, manifest)
    print(f"wrote {out}")
    return 0


def _write_manifest(out: Path, manifest: dict) -> None:
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtdma",
        description="Q-learning decentralized-TDMA MAC simulator "
        "with a CSMA/CA baseline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", help="key=value scenario file (optional)")
        p.add_argument("--horizon", type=int, default=3000, help="frames to simulate")
        p.add_argument("--seeds", default="1", help="comma-separated seed list")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--reward-window", type=int, default=20)
        p.add_argument(
            "--goodput-window-us", type=int, default=SEC, help="time-window size"
        )

    p_run = sub.add_parser("run", help="run single experiments")
    common(p_run)
    p_run.add_argument("--mac", choices=["qlearning", "csma", "both"],
                       default="qlearning")
    p_run.add_argument("--qtable-snapshot-every", type=int, default=0,
                       help="snapshot Q-tables every N iterations (0 = off)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="packet-size sweep of both MACs")
    common(p_cmp)
    p_cmp.add_argument("--sizes", default="30,60,90,120,150,180",
                       help="comma-separated payload sizes in bytes")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
