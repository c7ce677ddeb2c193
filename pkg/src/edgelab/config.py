"""Experiment configuration: one JSON file drives build, serve and bench.

All durations are seconds. The file format is validated against the
schema shipped as ``config.schema.json`` (also committed at the repo
root as ``config.example.json`` in filled-in form); command-line flags
override file values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .bench import BenchConfig, ResetPolicy
from .edge import Strategy, StrategyConfig
from .netmodel import PROFILES, ThrottleProfile


class ConfigError(ValueError):
    """Configuration file or flag values are invalid."""


@dataclass(frozen=True)
class VariantSpec:
    name: str
    config: StrategyConfig


@dataclass(frozen=True)
class AuditSettings:
    runs: int = 5
    pages: tuple[str, ...] = ("/", "/posts/post-0")
    reset: ResetPolicy = ResetPolicy(purge=True, cold=True)

    def __post_init__(self) -> None:
        if self.runs < 2:
            raise ConfigError("audit.runs must be >= 2")
        if not self.pages:
            raise ConfigError("audit.pages must not be empty")


def _core_variants(upstream_delay: float) -> tuple[VariantSpec, ...]:
    return (
        VariantSpec("static", StrategyConfig(Strategy.STATIC, upstream_delay=upstream_delay)),
        VariantSpec("ssr", StrategyConfig(Strategy.SSR, upstream_delay=upstream_delay)),
        VariantSpec("isr", StrategyConfig(Strategy.ISR, upstream_delay=upstream_delay)),
    )


def _all_variants(upstream_delay: float) -> tuple[VariantSpec, ...]:
    return _core_variants(upstream_delay) + (
        VariantSpec("swr", StrategyConfig(Strategy.SWR, upstream_delay=upstream_delay, ttl=1.0)),
        VariantSpec("dpr", StrategyConfig(Strategy.DPR, upstream_delay=upstream_delay)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 42
    post_count: int = 100
    word_min: int = 50
    word_max: int = 500
    variants: tuple[VariantSpec, ...] = field(default_factory=lambda: _core_variants(0.1))
    throttle_profile: str = "mobile-throttled"
    render_overhead: float = 0.0
    bench: BenchConfig = field(default_factory=BenchConfig)
    audit: AuditSettings = field(default_factory=AuditSettings)
    out_dir: str = "out"
    base_port: int = 8300

    def __post_init__(self) -> None:
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigError(f"variant names must be unique: {names}")
        if not self.variants:
            raise ConfigError("at least one variant is required")
        if self.throttle_profile not in PROFILES:
            raise ConfigError(
                f"unknown throttle profile {self.throttle_profile!r}; "
                f"known: {sorted(PROFILES)}"
            )
        if self.render_overhead < 0:
            raise ConfigError("render_overhead must be >= 0")
        if self.post_count < 0:
            raise ConfigError("post_count must be >= 0")

    def effective_profile(self) -> ThrottleProfile:
        base = PROFILES[self.throttle_profile]
        return replace(base, render_overhead=self.render_overhead)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "post_count": self.post_count,
            "word_min": self.word_min,
            "word_max": self.word_max,
            "variants": [
                {
                    "name": v.name,
                    "strategy": v.config.strategy.value,
                    "upstream_delay": v.config.upstream_delay,
                    "ttl": v.config.ttl,
                    "cold_start_penalty": v.config.cold_start_penalty,
                    "base_handling": v.config.base_handling,
                    "kv_read_delay": v.config.kv_read_delay,
                }
                for v in self.variants
            ],
            "throttle_profile": self.throttle_profile,
            "render_overhead": self.render_overhead,
            "bench": {
                "duration": self.bench.duration,
                "connections": self.bench.connections,
                "target_path": self.bench.target_path,
                "discard_first": self.bench.discard_first,
            },
            "audit": {
                "runs": self.audit.runs,
                "pages": list(self.audit.pages),
                "reset": {"purge": self.audit.reset.purge, "cold": self.audit.reset.cold},
            },
            "out_dir": self.out_dir,
            "base_port": self.base_port,
        }

    def emit(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.emit().encode("utf-8")).hexdigest()


def _schema() -> dict:
    text = resources.files("edgelab").joinpath("config.schema.json").read_text()
    return json.loads(text)


def from_dict(data: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config does not match schema: {exc.message}") from exc

    defaults = ExperimentConfig()
    try:
        variants = tuple(
            VariantSpec(
                name=v["name"],
                config=StrategyConfig(
                    strategy=Strategy(v["strategy"]),
                    upstream_delay=v.get("upstream_delay", 0.1),
                    ttl=v.get("ttl"),
                    cold_start_penalty=v.get("cold_start_penalty", 0.0),
                    base_handling=v.get("base_handling", 0.001),
                    kv_read_delay=v.get("kv_read_delay", 0.0),
                ),
            )
            for v in data.get("variants", [])
        ) or defaults.variants
        bench_data = data.get("bench", {})
        audit_data = data.get("audit", {})
        reset_data = audit_data.get("reset", {})
        return ExperimentConfig(
            seed=data.get("seed", defaults.seed),
            post_count=data.get("post_count", defaults.post_count),
            word_min=data.get("word_min", defaults.word_min),
            word_max=data.get("word_max", defaults.word_max),
            variants=variants,
            throttle_profile=data.get("throttle_profile", defaults.throttle_profile),
            render_overhead=data.get("render_overhead", defaults.render_overhead),
            bench=BenchConfig(
                duration=bench_data.get("duration", 30.0),
                connections=bench_data.get("connections", 10),
                target_path=bench_data.get("target_path", "/"),
                discard_first=bench_data.get("discard_first", 0.0),
            ),
            audit=AuditSettings(
                runs=audit_data.get("runs", 5),
                pages=tuple(audit_data.get("pages", ("/", "/posts/post-0"))),
                reset=ResetPolicy(
                    purge=reset_data.get("purge", True),
                    cold=reset_data.get("cold", True),
                ),
            ),
            out_dir=data.get("out_dir", defaults.out_dir),
            base_port=data.get("base_port", defaults.base_port),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def parse(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(data)


def load(path: Path | str) -> ExperimentConfig:
    return parse(Path(path).read_text())


def preset(name: str) -> ExperimentConfig:
    """Named starting points: "core-three" (STATIC/SSR/ISR) or "all-five"."""
    if name == "core-three":
        return ExperimentConfig()
    if name == "all-five":
        return ExperimentConfig(variants=_all_variants(0.1))
    raise ConfigError(f"unknown preset {name!r}; known: core-three, all-five")
