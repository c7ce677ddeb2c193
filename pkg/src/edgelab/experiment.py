"""End-to-end experiment: build, deploy, audit, load, then report files.

For every configured variant the protocol is: apply the reset policy
and audit each configured page (run 1 reported separately from the
rest), then reset again and drive the sustained closed-loop load run.
Audit and load phases never overlap for a variant.

Outputs in the chosen directory:

    audit.md         aligned-column audit table
    audit.csv        same rows as CSV
    percentiles.csv  one row per percentile, one column per variant
    summary.json     machine-readable superset of the above

Every output embeds the seed, the config digest and the tool version.
In deterministic mode the whole experiment runs in-process against a
virtual clock and outputs are byte-for-byte reproducible; otherwise
variants are served over loopback HTTP and measured on the wall clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bench import (
    PERCENTILE_POINTS,
    AuditReport,
    BenchReport,
    ComparisonTable,
    apply_reset,
    run_audit,
    run_load,
)
from .clock import SerialScheduler, SystemClock, VirtualClock
from .config import ExperimentConfig
from .content import generate_posts
from .edge import EdgeWorker
from .httpserve import VariantServer
from .ssg import POST_PATH_PREFIX, build_site


def page_label(path: str) -> str:
    if path == "/":
        return "index"
    return path.removeprefix(POST_PATH_PREFIX).strip("/") or path


def _round_ms(seconds: float) -> float:
    return round(seconds * 1000.0, 6)


@dataclass
class ExperimentResult:
    audits: list[tuple[str, AuditReport]]
    benches: list[tuple[str, BenchReport]]
    summary: dict
    files: dict[str, Path]


def build_summary(
    cfg: ExperimentConfig,
    deterministic: bool,
    audits: list[tuple[str, AuditReport]],
    benches: list[tuple[str, BenchReport]],
) -> dict:
    profile = cfg.effective_profile()
    return {
        "tool": "edgelab",
        "version": __version__,
        "deterministic": deterministic,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "throttle_profile": cfg.throttle_profile,
        "render_overhead": profile.render_overhead,
        "connections": cfg.bench.connections,
        "reset_policy": {"purge": cfg.audit.reset.purge, "cold": cfg.audit.reset.cold},
        "audits": [
            {
                "label": label,
                "page": rep.page,
                "runs": rep.runs,
                "cache_statuses": list(rep.cache_statuses),
                "server_time_ms": {
                    "run_1": _round_ms(rep.server_time.run_1),
                    "median_rest": _round_ms(rep.server_time.median_rest),
                    "average_rest": _round_ms(rep.server_time.average_rest),
                },
                "fcp_proxy_ms": {
                    "run_1": _round_ms(rep.fcp_proxy.run_1),
                    "median_rest": _round_ms(rep.fcp_proxy.median_rest),
                    "average_rest": _round_ms(rep.fcp_proxy.average_rest),
                },
            }
            for label, rep in audits
        ],
        "bench": [
            {
                "variant": name,
                "requests_per_second": round(rep.requests_per_second, 6),
                "avg_latency_ms": _round_ms(rep.avg_latency),
                "bytes_per_second": round(rep.bytes_per_second, 6),
                "total_responses": rep.total_responses,
                "error_count": rep.error_count,
                "duration": round(rep.duration, 6),
                "connections": rep.connections,
                "percentiles_ms": {
                    f"{p:g}": _round_ms(rep.percentiles[p]) for p in PERCENTILE_POINTS
                },
            }
            for name, rep in benches
        ],
        "config": cfg.to_dict(),
    }


def tables_from_summary(summary: dict) -> tuple[ComparisonTable, ComparisonTable]:
    """Rebuild the report tables from a summary dict (used by `report` too)."""
    runs = max((a["runs"] for a in summary["audits"]), default=2)
    rest = f"2-{runs}"
    audit_headers = (
        "variant",
        "fcp_run1_ms", f"fcp_{rest}_med_ms", f"fcp_{rest}_avg_ms",
        "srt_run1_ms", f"srt_{rest}_med_ms", f"srt_{rest}_avg_ms",
    )
    audit_rows = tuple(
        (
            a["label"],
            f"{a['fcp_proxy_ms']['run_1']:.3f}",
            f"{a['fcp_proxy_ms']['median_rest']:.3f}",
            f"{a['fcp_proxy_ms']['average_rest']:.3f}",
            f"{a['server_time_ms']['run_1']:.3f}",
            f"{a['server_time_ms']['median_rest']:.3f}",
            f"{a['server_time_ms']['average_rest']:.3f}",
        )
        for a in summary["audits"]
    )
    audit_table = ComparisonTable(kind="audit", headers=audit_headers, rows=audit_rows)

    bench_headers = ("percentile",) + tuple(b["variant"] for b in summary["bench"])
    bench_rows = tuple(
        (f"{p:g}",) + tuple(f"{b['percentiles_ms'][f'{p:g}']:.3f}" for b in summary["bench"])
        for p in PERCENTILE_POINTS
    )
    bench_table = ComparisonTable(kind="bench", headers=bench_headers, rows=bench_rows)
    return audit_table, bench_table


def write_reports(summary: dict, out_dir: Path | str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    audit_table, bench_table = tables_from_summary(summary)
    reset = summary["reset_policy"]
    intro = (
        f"tool: {summary['tool']} {summary['version']}  "
        f"seed: {summary['seed']}  config: {summary['config_digest'][:12]}  "
        f"profile: {summary['throttle_profile']} "
        f"(render_overhead {summary['render_overhead']} s)  "
        f"connections: {summary['connections']}  "
        f"reset: purge={reset['purge']} cold={reset['cold']}\n\n"
    )
    files = {
        "audit.md": out / "audit.md",
        "audit.csv": out / "audit.csv",
        "percentiles.csv": out / "percentiles.csv",
    }
    files["audit.md"].write_text(intro + audit_table.to_markdown())
    files["audit.csv"].write_text(audit_table.to_csv())
    files["percentiles.csv"].write_text(bench_table.to_csv())
    return files


def run_experiment(
    cfg: ExperimentConfig,
    deterministic: bool = False,
    out_dir: Path | str | None = None,
) -> ExperimentResult:
    posts = generate_posts(cfg.seed, cfg.post_count, cfg.word_min, cfg.word_max)
    build = build_site(posts, 0, built_at=0.0 if deterministic else None)
    profile = cfg.effective_profile()

    audits: list[tuple[str, AuditReport]] = []
    benches: list[tuple[str, BenchReport]] = []
    servers: list[VariantServer] = []
    try:
        for variant in cfg.variants:
            scheduler = SerialScheduler() if deterministic else None
            worker = EdgeWorker(variant.config, scheduler)
            worker.deploy(build, posts)
            if deterministic:
                target: object = worker
                clock = VirtualClock()
            else:
                server = VariantServer(worker)
                server.start()
                servers.append(server)
                target = server.url
                clock = SystemClock()

            for page in cfg.audit.pages:
                rep = run_audit(
                    target, page, profile,
                    runs=cfg.audit.runs, reset=cfg.audit.reset, clock=clock,
                )
                audits.append((f"{variant.name} {page_label(page)}", rep))

            apply_reset(target, cfg.audit.reset)
            benches.append((variant.name, run_load(target, cfg.bench, clock, scheduler)))
    finally:
        for server in servers:
            server.stop()

    summary = build_summary(cfg, deterministic, audits, benches)
    files: dict[str, Path] = {}
    if out_dir is not None:
        files = write_reports(summary, out_dir)
        summary_path = Path(out_dir) / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        files["summary.json"] = summary_path
    return ExperimentResult(audits=audits, benches=benches, summary=summary, files=files)
