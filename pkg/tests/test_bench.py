"""Histogram accuracy, load-run accounting, audits, comparison tables."""

import math
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgelab.bench import (
    HIST_GROWTH,
    HIST_HIGH,
    HIST_LOW,
    PERCENTILE_POINTS,
    AuditReport,
    BenchConfig,
    EmptyHistogramError,
    LatencyHistogram,
    MixedKindsError,
    ResetPolicy,
    TargetUnreachableError,
    compare,
    run_audit,
    run_load,
)
from edgelab.clock import SerialScheduler, VirtualClock
from edgelab.edge import CacheStatus, Response, Strategy, StrategyConfig


def nearest_rank(sorted_values, p):
    """Nearest-rank oracle: smallest value with at least p% at or below."""
    if p >= 100:
        return sorted_values[-1]
    rank = max(1, math.ceil(p / 100 * len(sorted_values)))
    return sorted_values[rank - 1]


def constant_handler(latency, body=b"x" * 512):
    def handle(path, clock):
        clock.sleep(latency)
        return Response(200, body, latency, CacheStatus.BYPASS)

    return handle


# ---------------------------------------------------------------- histogram


def test_single_sample():
    h = LatencyHistogram()
    h.record(0.005)
    assert 0.00495 <= h.percentile(50) <= 0.00505
    assert h.percentile(100) == 0.005


def test_uniform_ramp_within_one_percent():
    h = LatencyHistogram()
    values = [i / 1000 for i in range(1, 1001)]  # 1..1000 ms
    for v in values:
        h.record(v)
    assert h.percentile(50) == pytest.approx(0.500, rel=0.01)


def test_hundred_point_grid_p99():
    h = LatencyHistogram()
    values = [i / 1000 for i in range(1, 101)]
    for v in values:
        h.record(v)
    assert h.percentile(99) == pytest.approx(0.099, rel=0.01)


def test_bimodal_p50():
    h = LatencyHistogram()
    for _ in range(99):
        h.record(0.010)
    h.record(1.000)
    assert h.percentile(50) == pytest.approx(0.010, rel=0.01)


def test_empty_histogram_raises():
    with pytest.raises(EmptyHistogramError):
        LatencyHistogram().percentile(50)
    with pytest.raises(EmptyHistogramError):
        _ = LatencyHistogram().mean


def test_p100_is_exact_max():
    h = LatencyHistogram()
    rng = random.Random(1)
    mx = 0.0
    for _ in range(1000):
        v = rng.uniform(1e-5, 10)
        mx = max(mx, v)
        h.record(v)
    assert h.percentile(100) == mx


def test_out_of_range_samples_are_clamped_and_flagged():
    h = LatencyHistogram()
    h.record(HIST_LOW / 10)
    h.record(HIST_HIGH * 2)
    assert h.clamped_count == 2
    assert h.total_count == 2
    h.record(0.5)
    assert h.total_count == 3


def test_mean_matches_arithmetic_mean():
    h = LatencyHistogram()
    values = [0.001, 0.002, 0.004, 0.1]
    for v in values:
        h.record(v)
    assert h.mean == pytest.approx(statistics.fmean(values), rel=1e-9)


def test_merge_equals_single_histogram():
    rng = random.Random(7)
    values = [rng.lognormvariate(-5, 1.5) for _ in range(2000)]
    whole = LatencyHistogram()
    part1, part2 = LatencyHistogram(), LatencyHistogram()
    for i, v in enumerate(values):
        whole.record(v)
        (part1 if i % 2 else part2).record(v)
    part1.merge(part2)
    assert part1.total_count == whole.total_count
    assert part1.percentile(100) == whole.percentile(100)
    for p in PERCENTILE_POINTS:
        assert part1.percentile(p) == whole.percentile(p)


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=1e-5, max_value=50.0), min_size=1, max_size=300))
def test_percentiles_track_oracle_and_stay_monotone(values):
    h = LatencyHistogram()
    for v in values:
        h.record(v)
    ordered = sorted(values)
    previous = 0.0
    for p in PERCENTILE_POINTS:
        got = h.percentile(p)
        want = nearest_rank(ordered, p)
        assert got == pytest.approx(want, rel=0.01)
        assert got >= previous
        previous = got


# ---------------------------------------------------------------- run_load


def test_simulated_load_exact_accounting():
    cfg = BenchConfig(duration=10.0, connections=3, target_path="/")
    report = run_load(constant_handler(0.01), cfg, VirtualClock())
    # float accumulation can shift the final-request boundary by one
    assert report.total_responses == pytest.approx(3 * 1000, abs=3)
    assert report.requests_per_second == report.total_responses / report.duration
    assert report.requests_per_second * report.duration == pytest.approx(
        report.total_responses, rel=0.05
    )
    assert report.percentiles[100.0] == pytest.approx(0.01, abs=1e-12)
    assert report.percentiles[50.0] == pytest.approx(0.01, rel=0.01)
    assert report.error_count == 0
    assert report.bytes_per_second == pytest.approx(512 * 300, rel=0.01)


def test_simulated_load_discard_first():
    cfg = BenchConfig(duration=10.0, connections=2, discard_first=5.0)
    report = run_load(constant_handler(0.01), cfg, VirtualClock())
    assert report.total_responses == pytest.approx(2 * 500, abs=2)
    assert report.duration == pytest.approx(5.0)


def test_simulated_load_counts_error_statuses():
    def handler(path, clock):
        clock.sleep(0.01)
        return Response(503, b"overloaded", 0.01, CacheStatus.BYPASS)

    report = run_load(handler, BenchConfig(duration=1.0, connections=1), VirtualClock())
    assert report.error_count == report.total_responses > 0


def test_simulated_load_rejects_url_targets():
    with pytest.raises(ValueError):
        run_load("http://127.0.0.1:1", BenchConfig(duration=1.0), VirtualClock())


def test_wallclock_load_against_dead_port_is_unreachable():
    with pytest.raises(TargetUnreachableError):
        run_load("http://127.0.0.1:1", BenchConfig(duration=0.4, connections=2))


@pytest.mark.wallclock
def test_wallclock_load_in_process_worker(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.STATIC, base_handling=0.0))
    w.deploy(build10, posts10)
    report = run_load(w, BenchConfig(duration=0.4, connections=4))
    assert report.total_responses > 0
    assert report.error_count == 0
    assert report.requests_per_second * report.duration == pytest.approx(
        report.total_responses, rel=0.05
    )


def test_load_drains_background_work(posts10, build10):
    from edgelab.edge import EdgeWorker

    sched = SerialScheduler()
    w = EdgeWorker(
        StrategyConfig(strategy=Strategy.SWR, upstream_delay=0.05, ttl=0.5), sched
    )
    w.deploy(build10, posts10)
    report = run_load(w, BenchConfig(duration=10.0, connections=2), VirtualClock(), sched)
    assert report.total_responses > 0
    assert sched.pending == 0  # revalidations ran inside the loop


# ---------------------------------------------------------------- run_audit


def test_audit_isr_shape(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.ISR, upstream_delay=0.1))
    w.deploy(build10, posts10)
    rep = run_audit(w, "/", runs=5, reset=ResetPolicy(purge=True), clock=VirtualClock())
    assert rep.cache_statuses == ("MISS", "HIT", "HIT", "HIT", "HIT")
    assert rep.server_time.run_1 >= 0.1
    assert rep.server_time.median_rest < 0.020
    assert rep.runs == 5
    assert len(rep.server_times) == 5


def test_audit_reset_applies_before_run_one_only(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.ISR, upstream_delay=0.1))
    w.deploy(build10, posts10)
    clock = VirtualClock()
    run_audit(w, "/", runs=5, reset=ResetPolicy(purge=True), clock=clock)
    second = run_audit(w, "/", runs=5, reset=ResetPolicy(purge=False), clock=clock)
    assert second.cache_statuses == ("HIT",) * 5


def test_audit_fcp_exceeds_server_time(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.STATIC))
    w.deploy(build10, posts10)
    rep = run_audit(w, "/", runs=3, clock=VirtualClock())
    assert rep.fcp_proxy.run_1 > rep.server_time.run_1 + 0.149


def test_audit_needs_at_least_two_runs(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.STATIC))
    w.deploy(build10, posts10)
    with pytest.raises(ValueError):
        run_audit(w, "/", runs=1, clock=VirtualClock())


def test_audit_404_page_is_unreachable(posts10, build10):
    from edgelab.edge import EdgeWorker

    w = EdgeWorker(StrategyConfig(strategy=Strategy.STATIC))
    w.deploy(build10, posts10)
    with pytest.raises(TargetUnreachableError):
        run_audit(w, "/definitely-missing", runs=2, clock=VirtualClock())


# ----------------------------------------------------------------- compare


def _audit_report(page="/"):
    from edgelab.bench import AuditMetric
    from edgelab.netmodel import PROFILES

    metric = AuditMetric(run_1=0.2, median_rest=0.1, average_rest=0.11)
    return AuditReport(
        page=page,
        runs=5,
        reset=ResetPolicy(),
        server_time=metric,
        fcp_proxy=metric,
        cache_statuses=("MISS", "HIT", "HIT", "HIT", "HIT"),
        profile=PROFILES["mobile-throttled"],
        server_times=(0.2, 0.1, 0.1, 0.11, 0.1),
    )


def test_compare_audits_three_rows_six_numeric_columns():
    table = compare([("ssr", _audit_report()), ("isr", _audit_report()), ("static", _audit_report())])
    assert table.kind == "audit"
    assert len(table.rows) == 3
    assert len(table.headers) == 7  # label + 6 numeric columns
    for row in table.rows:
        for cell in row[1:]:
            float(cell)  # numeric


def test_compare_single_report_is_fine():
    table = compare([("only", _audit_report())])
    assert len(table.rows) == 1


def test_compare_rejects_empty_and_mixed():
    with pytest.raises(ValueError):
        compare([])
    bench = run_load(constant_handler(0.01), BenchConfig(duration=1.0, connections=1), VirtualClock())
    with pytest.raises(MixedKindsError):
        compare([("a", _audit_report()), ("b", bench)])


def test_compare_bench_csv_layout():
    cfg = BenchConfig(duration=1.0, connections=1)
    fast = run_load(constant_handler(0.01), cfg, VirtualClock())
    slow = run_load(constant_handler(0.02), cfg, VirtualClock())
    table = compare([("fast", fast), ("slow", slow)])
    csv = table.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "percentile,fast,slow"
    assert len(lines) == 1 + len(PERCENTILE_POINTS)
    assert lines[1].startswith("50,")


def test_markdown_table_is_aligned():
    table = compare([("a", _audit_report()), ("b", _audit_report())])
    md_lines = table.to_markdown().strip().split("\n")
    widths = {len(line) for line in md_lines}
    assert len(widths) == 1  # every row padded to the same width
    assert md_lines[0].startswith("| variant")
