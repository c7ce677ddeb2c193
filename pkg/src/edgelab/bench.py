"""Load and audit benchmarks with a log-bucketed latency histogram.

Two protocols are implemented:

* ``run_load``: closed-loop sustained load. N connections each issue
  their next request as soon as the previous response lands, for a
  fixed duration. Latencies go into a histogram; the report carries
  throughput and a fixed percentile set.
* ``run_audit``: k sequential fetches of one page (default 5), with an
  optional cache purge / cold-start reset before run 1 only. Run 1 is
  reported separately from the median and average of runs 2..k, for
  both raw server time and the first-paint proxy.

Both accept either a base URL (wall clock, real sockets) or an
in-process worker. With a VirtualClock, ``run_load`` becomes a
deterministic event-driven simulation: each connection gets its own
forked clock and events are processed in timestamp order.

Percentiles are nearest-rank: the smallest recorded value v such that
at least p% of samples are <= v.
"""

from __future__ import annotations

import heapq
import json
import math
import statistics
import threading
import time
import urllib.parse
from dataclasses import dataclass, field
from http.client import HTTPConnection
from typing import Callable, Sequence, Union

from .clock import SYSTEM_CLOCK, Clock, SerialScheduler, SystemClock, VirtualClock
from .edge import CacheStatus, EdgeWorker, Response
from .netmodel import PROFILES, ThrottleProfile, fcp_proxy

PERCENTILE_POINTS = (50.0, 75.0, 90.0, 97.5, 99.0, 99.9, 99.99, 100.0)

# Histogram geometry: low and high trackable bounds (seconds) and the
# per-bucket growth factor. Buckets are geometric; reporting a bucket's
# geometric midpoint bounds the per-sample relative error by
# sqrt(growth) - 1, just under 1% at growth 1.02.
HIST_LOW = 1e-6
HIST_HIGH = 60.0
HIST_GROWTH = 1.02
_LOG_GROWTH = math.log(HIST_GROWTH)
_N_BUCKETS = int(math.ceil(math.log(HIST_HIGH / HIST_LOW) / _LOG_GROWTH)) + 1


class EmptyHistogramError(ValueError):
    """Percentiles are undefined before anything is recorded."""


class TargetUnreachableError(RuntimeError):
    """The benchmark target produced no successful response."""


class MixedKindsError(TypeError):
    """compare() needs reports of a single kind."""


class LatencyHistogram:
    """Log-bucketed latency histogram over 1 microsecond .. 60 seconds.

    Samples outside the trackable range are clamped and counted in
    ``clamped_count``; in-range samples are reported with at most 1%
    relative error. The observed maximum is tracked exactly.
    """

    def __init__(self) -> None:
        self.counts = [0] * _N_BUCKETS
        self.total_count = 0
        self.max_value = 0.0
        self.sum_value = 0.0
        self.clamped_count = 0

    @staticmethod
    def _bucket_index(value: float) -> int:
        return int(math.log(value / HIST_LOW) / _LOG_GROWTH)

    @staticmethod
    def _bucket_midpoint(index: int) -> float:
        return HIST_LOW * HIST_GROWTH ** (index + 0.5)

    def record(self, sample: float) -> None:
        if sample < HIST_LOW or sample > HIST_HIGH:
            self.clamped_count += 1
            sample_for_bucket = min(max(sample, HIST_LOW), HIST_HIGH)
        else:
            sample_for_bucket = sample
        idx = min(self._bucket_index(sample_for_bucket), _N_BUCKETS - 1)
        self.counts[idx] += 1
        self.total_count += 1
        self.sum_value += sample
        if sample > self.max_value:
            self.max_value = sample

    def percentile(self, p: float) -> float:
        if self.total_count == 0:
            raise EmptyHistogramError("no samples recorded")
        if not 0.0 < p <= 100.0:
            raise ValueError("p must be in (0, 100]")
        if p == 100.0:
            return self.max_value
        rank = max(1, math.ceil(p / 100.0 * self.total_count))
        seen = 0
        for idx, count in enumerate(self.counts):
            seen += count
            if seen >= rank:
                return min(self._bucket_midpoint(idx), self.max_value)
        return self.max_value

    @property
    def mean(self) -> float:
        if self.total_count == 0:
            raise EmptyHistogramError("no samples recorded")
        return self.sum_value / self.total_count

    def merge(self, other: "LatencyHistogram") -> None:
        for i, c in enumerate(other.counts):
            self.counts[i] += c
        self.total_count += other.total_count
        self.sum_value += other.sum_value
        self.clamped_count += other.clamped_count
        if other.max_value > self.max_value:
            self.max_value = other.max_value


@dataclass(frozen=True)
class BenchConfig:
    duration: float = 30.0
    connections: int = 10
    target_path: str = "/"
    # Seconds of initial samples to discard (0 keeps the cold start in
    # the curves, which is the default).
    discard_first: float = 0.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.connections < 1:
            raise ValueError("connections must be >= 1")
        if self.discard_first < 0:
            raise ValueError("discard_first must be >= 0")


@dataclass(frozen=True)
class BenchReport:
    avg_latency: float
    requests_per_second: float
    bytes_per_second: float
    percentiles: dict[float, float]
    total_responses: int
    error_count: int
    duration: float
    connections: int


@dataclass(frozen=True)
class ResetPolicy:
    """What to reset before run 1 of an audit (and between phases)."""

    purge: bool = True
    cold: bool = False


@dataclass(frozen=True)
class AuditMetric:
    run_1: float
    median_rest: float
    average_rest: float


@dataclass(frozen=True)
class AuditReport:
    page: str
    runs: int
    reset: ResetPolicy
    server_time: AuditMetric
    fcp_proxy: AuditMetric
    cache_statuses: tuple[str, ...]
    profile: ThrottleProfile
    server_times: tuple[float, ...] = field(default=())


Target = Union[str, EdgeWorker, Callable[[str, Clock], Response]]


class _WorkerTarget:
    def __init__(self, worker: EdgeWorker):
        self._worker = worker

    def fetch(self, path: str, clock: Clock) -> Response:
        return self._worker.handle_request(path, clock)

    def purge(self) -> int:
        return self._worker.purge_cache()

    def cold(self) -> None:
        self._worker.cold_worker()


class _CallableTarget:
    def __init__(self, handler: Callable[[str, Clock], Response]):
        self._handler = handler

    def fetch(self, path: str, clock: Clock) -> Response:
        return self._handler(path, clock)

    def purge(self) -> int:
        raise TypeError("bare handler target cannot purge; pass an EdgeWorker or URL")

    def cold(self) -> None:
        raise TypeError("bare handler target cannot reset; pass an EdgeWorker or URL")


class _HttpTarget:
    """Audit/reset access to a served variant over HTTP.

    Server time comes from the x-server-time-us response header so the
    client's own overhead does not pollute the server-side metric.
    """

    def __init__(self, base_url: str):
        split = urllib.parse.urlsplit(base_url)
        if split.scheme not in ("http", "") or not split.netloc and not split.path:
            raise ValueError(f"unsupported target url: {base_url}")
        netloc = split.netloc or split.path
        self._host = netloc.split(":")[0]
        self._port = int(netloc.split(":")[1]) if ":" in netloc else 80

    def _request(self, method: str, path: str) -> tuple[int, bytes, dict[str, str]]:
        conn = HTTPConnection(self._host, self._port, timeout=30)
        try:
            conn.request(method, path)
            resp = conn.getresponse()
            body = resp.read()
            headers = {k.lower(): v for k, v in resp.getheaders()}
            return resp.status, body, headers
        except OSError as exc:
            raise TargetUnreachableError(f"{self._host}:{self._port} unreachable: {exc}") from exc
        finally:
            conn.close()

    def fetch(self, path: str, clock: Clock) -> Response:
        t0 = clock.now()
        status, body, headers = self._request("GET", path)
        elapsed = clock.now() - t0
        if "x-server-time-us" in headers:
            server_time = int(headers["x-server-time-us"]) / 1e6
        else:
            server_time = elapsed
        cache_status = CacheStatus(headers.get("x-edge-cache", "BYPASS"))
        return Response(status, body, server_time, cache_status)

    def purge(self) -> int:
        status, body, _ = self._request("POST", "/__admin/purge")
        if status != 200:
            raise TargetUnreachableError(f"purge failed with status {status}")
        return int(json.loads(body)["removed"])

    def cold(self) -> None:
        status, _, _ = self._request("POST", "/__admin/cold")
        if status != 200:
            raise TargetUnreachableError(f"cold reset failed with status {status}")


def as_target(target: Target):
    if isinstance(target, EdgeWorker):
        return _WorkerTarget(target)
    if isinstance(target, str):
        return _HttpTarget(target)
    if callable(target):
        return _CallableTarget(target)
    raise TypeError(f"unsupported target: {target!r}")


def apply_reset(target: Target, reset: ResetPolicy) -> None:
    tgt = as_target(target)
    if reset.purge:
        tgt.purge()
    if reset.cold:
        tgt.cold()


def run_load(
    target: Target,
    cfg: BenchConfig,
    clock: Clock | None = None,
    background: SerialScheduler | None = None,
) -> BenchReport:
    """Closed-loop load run against ``target`` for ``cfg.duration`` seconds.

    With a VirtualClock the run is simulated deterministically (target
    must then be in-process). ``background`` drains a worker's deferred
    tasks between simulated events so SWR revalidations make progress.
    """
    clock = clock if clock is not None else SYSTEM_CLOCK
    if isinstance(clock, VirtualClock):
        if isinstance(target, str):
            raise ValueError("virtual-clock load runs need an in-process target")
        return _run_load_simulated(target, cfg, clock, background)
    return _run_load_threads(target, cfg)


def _run_load_simulated(
    target: Target,
    cfg: BenchConfig,
    clock: VirtualClock,
    background: SerialScheduler | None,
) -> BenchReport:
    tgt = as_target(target)
    start = clock.now()
    deadline = start + cfg.duration
    cutoff = start + cfg.discard_first
    hist = LatencyHistogram()
    conn_clocks = [clock.fork() for _ in range(cfg.connections)]
    heap: list[tuple[float, int]] = [(start, i) for i in range(cfg.connections)]
    heapq.heapify(heap)
    total_bytes = 0
    responses = 0
    errors = 0

    while heap:
        t, i = heapq.heappop(heap)
        if t >= deadline:
            continue
        conn = conn_clocks[i]
        conn.jump_to(t)
        resp = tgt.fetch(cfg.target_path, conn)
        latency = conn.now() - t
        if t >= cutoff:
            hist.record(latency)
            total_bytes += len(resp.body)
            responses += 1
            if resp.status >= 400:
                errors += 1
        if background is not None:
            background.drain()
        heapq.heappush(heap, (conn.now(), i))

    clock.jump_to(deadline)
    if responses == 0:
        raise TargetUnreachableError("no responses completed within the run")
    measured = cfg.duration - cfg.discard_first
    return BenchReport(
        avg_latency=hist.mean,
        requests_per_second=responses / measured,
        bytes_per_second=total_bytes / measured,
        percentiles={p: hist.percentile(p) for p in PERCENTILE_POINTS},
        total_responses=responses,
        error_count=errors,
        duration=measured,
        connections=cfg.connections,
    )


def _run_load_threads(target: Target, cfg: BenchConfig) -> BenchReport:
    results: list[tuple[LatencyHistogram, int, int, int]] = []
    results_lock = threading.Lock()
    start = time.perf_counter()
    deadline = start + cfg.duration
    cutoff = start + cfg.discard_first

    if isinstance(target, str):
        split = urllib.parse.urlsplit(target)
        netloc = split.netloc or split.path
        host = netloc.split(":")[0]
        port = int(netloc.split(":")[1]) if ":" in netloc else 80

        def connection_loop() -> None:
            hist = LatencyHistogram()
            nbytes = 0
            count = 0
            errors = 0
            conn = HTTPConnection(host, port, timeout=10)
            while True:
                t0 = time.perf_counter()
                if t0 >= deadline:
                    break
                try:
                    conn.request("GET", cfg.target_path)
                    resp = conn.getresponse()
                    body = resp.read()
                    status = resp.status
                except Exception:
                    errors += 1
                    conn.close()
                    conn = HTTPConnection(host, port, timeout=10)
                    continue
                latency = time.perf_counter() - t0
                if t0 >= cutoff:
                    hist.record(latency)
                    nbytes += len(body)
                    count += 1
                    if status >= 400:
                        errors += 1
            conn.close()
            with results_lock:
                results.append((hist, nbytes, count, errors))

    else:
        tgt = as_target(target)

        def connection_loop() -> None:
            hist = LatencyHistogram()
            nbytes = 0
            count = 0
            errors = 0
            clock = SystemClock()
            while True:
                t0 = time.perf_counter()
                if t0 >= deadline:
                    break
                try:
                    resp = tgt.fetch(cfg.target_path, clock)
                except Exception:
                    errors += 1
                    continue
                latency = time.perf_counter() - t0
                if t0 >= cutoff:
                    hist.record(latency)
                    nbytes += len(resp.body)
                    count += 1
                    if resp.status >= 400:
                        errors += 1
            with results_lock:
                results.append((hist, nbytes, count, errors))

    threads = [threading.Thread(target=connection_loop) for _ in range(cfg.connections)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - start

    merged = LatencyHistogram()
    total_bytes = 0
    responses = 0
    errors = 0
    for hist, nbytes, count, errs in results:
        merged.merge(hist)
        total_bytes += nbytes
        responses += count
        errors += errs
    if responses == 0:
        raise TargetUnreachableError("no successful responses from target")
    measured = elapsed - cfg.discard_first
    return BenchReport(
        avg_latency=merged.mean,
        requests_per_second=responses / measured,
        bytes_per_second=total_bytes / measured,
        percentiles={p: merged.percentile(p) for p in PERCENTILE_POINTS},
        total_responses=responses,
        error_count=errors,
        duration=measured,
        connections=cfg.connections,
    )


def run_audit(
    target: Target,
    page: str = "/",
    profile: ThrottleProfile = PROFILES["mobile-throttled"],
    runs: int = 5,
    reset: ResetPolicy = ResetPolicy(),
    clock: Clock | None = None,
) -> AuditReport:
    """Sequential k-run audit of one page with a run-1 reset policy."""
    if runs < 2:
        raise ValueError("audits need at least 2 runs to report a rest-of-runs median")
    clock = clock if clock is not None else SYSTEM_CLOCK
    tgt = as_target(target)
    if reset.purge:
        tgt.purge()
    if reset.cold:
        tgt.cold()

    server_times: list[float] = []
    fcps: list[float] = []
    statuses: list[str] = []
    for _ in range(runs):
        resp = tgt.fetch(page, clock)
        if resp.status != 200:
            raise TargetUnreachableError(f"audit fetch of {page} returned {resp.status}")
        server_times.append(resp.server_time)
        fcps.append(fcp_proxy(resp, profile))
        statuses.append(resp.cache_status.value)

    def metric(values: Sequence[float]) -> AuditMetric:
        rest = values[1:]
        return AuditMetric(
            run_1=values[0],
            median_rest=statistics.median(rest),
            average_rest=statistics.fmean(rest),
        )

    return AuditReport(
        page=page,
        runs=runs,
        reset=reset,
        server_time=metric(server_times),
        fcp_proxy=metric(fcps),
        cache_statuses=tuple(statuses),
        profile=profile,
        server_times=tuple(server_times),
    )


@dataclass(frozen=True)
class ComparisonTable:
    kind: str  # "audit" or "bench"
    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def to_markdown(self) -> str:
        widths = [
            max(len(self.headers[i]), *(len(row[i]) for row in self.rows)) if self.rows else len(self.headers[i])
            for i in range(len(self.headers))
        ]
        def line(cells: Sequence[str]) -> str:
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        out = [line(self.headers), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        out.extend(line(row) for row in self.rows)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.headers)]
        lines.extend(",".join(row) for row in self.rows)
        return "\n".join(lines) + "\n"


def _fmt_ms(seconds: float) -> str:
    return f"{seconds * 1000.0:.3f}"


def compare(reports: Sequence[tuple[str, AuditReport | BenchReport]]) -> ComparisonTable:
    """Tabulate reports of one kind side by side.

    Audit reports become one row per entry with run-1 / median / average
    columns for both metrics (milliseconds). Bench reports become one
    row per percentile with one column per entry (milliseconds).
    """
    if not reports:
        raise ValueError("nothing to compare")
    kinds = {type(r) for _, r in reports}
    if len(kinds) > 1:
        raise MixedKindsError(f"cannot mix report kinds: {sorted(k.__name__ for k in kinds)}")
    kind = kinds.pop()

    if kind is AuditReport:
        runs = {r.runs for _, r in reports}
        rest = f"2-{max(runs)}"
        headers = (
            "variant",
            f"fcp_run1_ms", f"fcp_{rest}_med_ms", f"fcp_{rest}_avg_ms",
            f"srt_run1_ms", f"srt_{rest}_med_ms", f"srt_{rest}_avg_ms",
        )
        rows = tuple(
            (
                name,
                _fmt_ms(r.fcp_proxy.run_1), _fmt_ms(r.fcp_proxy.median_rest), _fmt_ms(r.fcp_proxy.average_rest),
                _fmt_ms(r.server_time.run_1), _fmt_ms(r.server_time.median_rest), _fmt_ms(r.server_time.average_rest),
            )
            for name, r in reports
        )
        return ComparisonTable(kind="audit", headers=headers, rows=rows)

    if kind is BenchReport:
        headers = ("percentile",) + tuple(name for name, _ in reports)
        rows = tuple(
            (f"{p:g}",) + tuple(_fmt_ms(r.percentiles[p]) for _, r in reports)
            for p in PERCENTILE_POINTS
        )
        return ComparisonTable(kind="bench", headers=headers, rows=rows)

    raise MixedKindsError(f"unsupported report kind: {kind.__name__}")
