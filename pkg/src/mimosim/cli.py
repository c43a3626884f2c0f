"""Campaign runner CLI: batch simulation campaigns, the paged-matrix
benchmark and a codebook dump, all driven by explicit seeds.

    mimosim run --campaign N --out DIR [--config FILE] [--seeds 1..10]
                [--distances 20,120,...] [--jobs K]
    mimosim bench [--depths 10,50,100,200,300] [--reps 2000] [--out FILE]
    mimosim codebook dump --ports P --rank R [--n1 N1 --n2 N2] [--out FILE]

The default output directory comes from $MIMOSIM_OUT_DIR.  Config files
hold flat ``key = value`` lines with ``#`` comments; keys are the
camel-case spellings of the scenario fields (e.g. ``rankLimit = 4``) and
unknown keys fail fast listing every valid key.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .bench import benchmark_csv, run_benchmark
from .codebook import dump_codebook, make_codebook
from .codebook_tables import PORT_LAYOUTS
from .simlink import (
    AggregateStats,
    Metrics,
    ScenarioConfig,
    aggregate_runs,
    fb_trace_csv,
    run_scenario,
    tb_trace_csv,
)

__all__ = [
    "CampaignSpec",
    "ConfigFileError",
    "parse_config",
    "campaign_variants",
    "run_campaign",
    "main",
    "AGGREGATE_HEADER",
]

OUTPUT_DIR_ENV = "MIMOSIM_OUT_DIR"
DEFAULT_DISTANCES = [20.0 + 100.0 * k for k in range(9)]  # 20..820 m
DEFAULT_SEEDS = list(range(1, 11))

AGGREGATE_HEADER = (
    "campaign,variant,distanceM,meanThroughputBps,ci95,meanMcs,meanRank,"
    "meanExecSeconds,csiSearchCount"
)


class ConfigFileError(ValueError):
    """Raised on malformed or unknown config entries."""


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(p.capitalize() for p in rest)


_FIELD_BY_KEY = {_camel(f.name): f for f in fields(ScenarioConfig)}


def _parse_value(field, raw: str):
    if field.type == "bool" or isinstance(field.default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(field.default, int) and not isinstance(field.default, bool):
        return int(raw)
    if isinstance(field.default, float):
        return float(raw)
    return raw


def parse_config(path: str | Path) -> dict:
    """Flat key = value overrides onto the scenario config."""
    overrides: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigFileError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_BY_KEY:
            valid = ", ".join(sorted(_FIELD_BY_KEY))
            raise ConfigFileError(f"{path}:{lineno}: unknown key {key!r}; valid keys: {valid}")
        field = _FIELD_BY_KEY[key]
        try:
            overrides[field.name] = _parse_value(field, raw)
        except ValueError as exc:
            raise ConfigFileError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return overrides


# ----------------------------------------------------------------------
# Campaign definitions (antenna rows follow the per-campaign configs)
# ----------------------------------------------------------------------

_CONF1_GNB = dict(gnb_rows=2, gnb_cols=4, gnb_dual_polarized=False, gnb_ports_h=2, gnb_ports_v=1)
_CONF1_UE = dict(ue_rows=2, ue_cols=2, ue_dual_polarized=False, ue_ports_h=2, ue_ports_v=1)
_CONF2A_GNB = dict(gnb_rows=4, gnb_cols=2, gnb_dual_polarized=True, gnb_ports_h=2, gnb_ports_v=2)
_CONF2B_GNB = dict(gnb_rows=8, gnb_cols=4, gnb_dual_polarized=True, gnb_ports_h=4, gnb_ports_v=2)
_CONF2_UE = dict(ue_rows=1, ue_cols=2, ue_dual_polarized=True, ue_ports_h=2, ue_ports_v=1)
_CONF3_GNB = {
    8: dict(gnb_rows=8, gnb_cols=4, gnb_dual_polarized=True, gnb_ports_h=2, gnb_ports_v=2),
    16: dict(gnb_rows=8, gnb_cols=4, gnb_dual_polarized=True, gnb_ports_h=4, gnb_ports_v=2),
    32: dict(gnb_rows=8, gnb_cols=4, gnb_dual_polarized=True, gnb_ports_h=4, gnb_ports_v=4),
}


def campaign_variants(campaign_id: int) -> list[tuple[str, dict]]:
    """Named variants with their scenario overrides, per campaign."""
    if campaign_id == 1:
        base = {**_CONF1_GNB, **_CONF1_UE}
        return [
            ("noFb", {**base, "enable_mimo_feedback": False, "rank_limit": 1}),
            ("fb-maxRi1", {**base, "enable_mimo_feedback": True, "rank_limit": 1}),
            ("fb-maxRi2", {**base, "enable_mimo_feedback": True, "rank_limit": 2}),
        ]
    if campaign_id == 2:
        base = {**_CONF2A_GNB, **_CONF2_UE}
        variants = [("noFb", {**base, "enable_mimo_feedback": False, "rank_limit": 1})]
        variants += [
            (f"fb-maxRi{r}", {**base, "enable_mimo_feedback": True, "rank_limit": r})
            for r in (1, 2, 3, 4)
        ]
        return variants
    if campaign_id == 3:
        return [
            (f"ports{p}", {**_CONF3_GNB[p], **_CONF2_UE, "rank_limit": 4})
            for p in (8, 16, 32)
        ]
    if campaign_id == 4:
        base = {**_CONF2B_GNB, **_CONF2_UE, "rank_limit": 4}
        return [
            (
                f"wb{int(wb)}-sb{int(sb)}",
                {
                    **base,
                    "wb_pmi_update_interval_ms": wb,
                    "sb_pmi_update_interval_ms": sb,
                },
            )
            for wb, sb in ((10.0, 2.0), (20.0, 2.0), (100.0, 100.0))
        ]
    if campaign_id == 5:
        base = {**_CONF3_GNB[16], **_CONF2_UE, "rank_limit": 4}
        out = []
        for fb in (True, False):
            for intf in (False, True):
                name = f"{'fb' if fb else 'noFb'}-{'intf' if intf else 'noIntf'}"
                out.append(
                    (
                        name,
                        {
                            **base,
                            "enable_mimo_feedback": fb,
                            "enable_interferer": intf,
                            **({} if fb else {"rank_limit": 1}),
                        },
                    )
                )
        return out
    raise ValueError(f"campaign id must be 1..5, got {campaign_id}")


@dataclass
class CampaignSpec:
    campaign_id: int
    distances_m: list[float]
    seeds: list[int]
    overrides: dict
    output_dir: Path

    def __post_init__(self):
        if not self.distances_m or not self.seeds:
            raise ValueError("distances and seeds must be nonempty")
        campaign_variants(self.campaign_id)  # validates the id


def build_cell_config(
    campaign_id: int, variant_overrides: dict, user_overrides: dict, distance_m: float, seed: int
) -> ScenarioConfig:
    """User overrides apply first; variant-defining keys always win."""
    cfg = ScenarioConfig(**{**user_overrides, **variant_overrides})
    cfg.distance_m = distance_m
    cfg.seed = seed
    return cfg


def _run_cell(args) -> tuple:
    campaign_id, variant, v_over, u_over, distance, seed = args
    cfg = build_cell_config(campaign_id, v_over, u_over, distance, seed)
    metrics, state = run_scenario(cfg)
    return (
        variant,
        distance,
        seed,
        metrics,
        tb_trace_csv(state.tb_trace),
        fb_trace_csv(state.fb_trace),
    )


def _plot_script(campaign_id: int, variants: list[str]) -> str:
    lines = [
        "# gnuplot script: four panels vs distance",
        "set datafile separator ','",
        "set terminal pngcairo size 1200,900",
        f"set output 'campaign{campaign_id}.png'",
        "set multiplot layout 2,2",
        "set key outside top",
        "set xlabel 'distance [m]'",
    ]
    panels = [
        ("throughput [Mbps]", "($2/1e6)"),
        ("mean MCS", "4"),
        ("mean rank", "5"),
        ("exec time [s]", "6"),
    ]
    for title, col in panels:
        lines.append(f"set ylabel '{title}'")
        plots = [
            f"'plotdata/{v}.csv' using 1:{col} with linespoints title '{v}'" for v in variants
        ]
        lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def run_campaign(spec: CampaignSpec, jobs: int | None = None) -> int:
    """Run every (variant, distance, seed) cell; returns the exit status.

    Writes aggregate.csv, per-variant plot data, a gnuplot script, slot and
    feedback traces per cell, and a manifest of completed cells.  Partial
    results are preserved on failure; the status is nonzero iff any cell
    failed.
    """
    variants = campaign_variants(spec.campaign_id)
    out = spec.output_dir
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "plotdata").mkdir(parents=True, exist_ok=True)

    cells = [
        (spec.campaign_id, name, v_over, spec.overrides, d, s)
        for name, v_over in variants
        for d in spec.distances_m
        for s in spec.seeds
    ]
    results: dict[tuple[str, float], list[Metrics]] = {}
    manifest: list[str] = []
    failed = False

    def consume(cell, outcome, error=None):
        nonlocal failed
        _, name, _, _, d, s = cell
        if error is not None:
            failed = True
            manifest.append(f"{name},{d:g},{s},error: {error}")
            return
        variant, distance, seed, metrics, tb_text, fb_text = outcome
        stem = f"c{spec.campaign_id}_{variant}_d{distance:g}_s{seed}"
        (out / "traces" / f"{stem}_tb.csv").write_text(tb_text)
        (out / "traces" / f"{stem}_fb.csv").write_text(fb_text)
        results.setdefault((variant, distance), []).append(metrics)
        manifest.append(f"{variant},{distance:g},{seed},ok")

    if jobs is not None and jobs <= 1:
        for cell in cells:
            try:
                consume(cell, _run_cell(cell))
            except Exception as exc:  # preserve partial results
                consume(cell, None, error=exc)
    else:
        with ProcessPoolExecutor(max_workers=jobs or os.cpu_count()) as pool:
            futures = [(cell, pool.submit(_run_cell, cell)) for cell in cells]
            for cell, fut in futures:
                try:
                    consume(cell, fut.result())
                except Exception as exc:
                    consume(cell, None, error=exc)

    agg_lines = [AGGREGATE_HEADER]
    per_variant: dict[str, list[tuple[float, AggregateStats]]] = {}
    for name, _ in variants:
        for d in spec.distances_m:
            runs = results.get((name, d))
            if not runs:
                continue
            stats = aggregate_runs(runs)
            per_variant.setdefault(name, []).append((d, stats))
            agg_lines.append(
                f"{spec.campaign_id},{name},{d:g},{stats.mean_throughput_bps:.3f},"
                f"{stats.ci95_throughput_bps:.3f},{stats.mean_mcs:.4f},{stats.mean_rank:.4f},"
                f"{stats.mean_exec_seconds:.4f},{stats.csi_search_count}"
            )
    (out / "aggregate.csv").write_text("\n".join(agg_lines) + "\n")

    for name, rows in per_variant.items():
        lines = ["distanceM,meanThroughputBps,ci95,meanMcs,meanRank,meanExecSeconds"]
        for d, st in sorted(rows):
            lines.append(
                f"{d:g},{st.mean_throughput_bps:.3f},{st.ci95_throughput_bps:.3f},"
                f"{st.mean_mcs:.4f},{st.mean_rank:.4f},{st.mean_exec_seconds:.4f}"
            )
        (out / "plotdata" / f"{name}.csv").write_text("\n".join(lines) + "\n")
    (out / "plot.gp").write_text(_plot_script(spec.campaign_id, [n for n, _ in variants]))
    (out / "manifest.csv").write_text(
        "\n".join(["variant,distanceM,seed,status"] + manifest) + "\n"
    )
    return 1 if failed else 0


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x]


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimosim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a simulation campaign")
    run_p.add_argument("--campaign", type=int, required=True, choices=range(1, 6))
    run_p.add_argument("--config", type=str, default=None)
    run_p.add_argument("--out", type=str, default=os.environ.get(OUTPUT_DIR_ENV))
    run_p.add_argument("--seeds", type=str, default=None, help="e.g. 1..10 or 1,2,3")
    run_p.add_argument("--distances", type=str, default=None, help="comma-separated meters")
    run_p.add_argument("--jobs", type=int, default=None)

    bench_p = sub.add_parser("bench", help="contiguous vs naive page-multiply benchmark")
    bench_p.add_argument("--depths", type=str, default="10,50,100,200,300")
    bench_p.add_argument("--reps", type=int, default=2000)
    bench_p.add_argument("--out", type=str, default=None)

    cb_p = sub.add_parser("codebook", help="codebook utilities")
    cb_p.add_argument("action", choices=["dump"])
    cb_p.add_argument("--ports", type=int, required=True)
    cb_p.add_argument("--rank", type=int, required=True)
    cb_p.add_argument("--n1", type=int, default=None)
    cb_p.add_argument("--n2", type=int, default=None)
    cb_p.add_argument("--out", type=str, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "run":
        if not args.out:
            print(f"error: --out or ${OUTPUT_DIR_ENV} required", file=sys.stderr)
            return 2
        try:
            overrides = parse_config(args.config) if args.config else {}
        except ConfigFileError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        spec = CampaignSpec(
            campaign_id=args.campaign,
            distances_m=_parse_floats(args.distances) if args.distances else DEFAULT_DISTANCES,
            seeds=_parse_seeds(args.seeds) if args.seeds else DEFAULT_SEEDS,
            overrides=overrides,
            output_dir=Path(args.out),
        )
        return run_campaign(spec, jobs=args.jobs)

    if args.command == "bench":
        rows = run_benchmark([int(d) for d in _parse_floats(args.depths)], repetitions=args.reps)
        text = benchmark_csv(rows)
        if args.out:
            Path(args.out).write_text(text)
        else:
            print(text, end="")
        return 0

    if args.command == "codebook":
        n1, n2 = args.n1, args.n2
        if n1 is None or n2 is None:
            layouts = PORT_LAYOUTS.get(args.ports)
            if not layouts:
                print(f"error: no layout for {args.ports} ports", file=sys.stderr)
                return 2
            n1, n2 = layouts[0]
        try:
            cb = make_codebook(args.ports, n1, n2, args.rank)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        text = dump_codebook(cb)
        if args.out:
            Path(args.out).write_text(text)
        else:
            print(text, end="")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
