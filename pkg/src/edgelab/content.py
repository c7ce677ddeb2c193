"""Deterministic pseudorandom blog content and the simulated origin.

Posts are derived from a 64-bit seed with splitmix64, so a given
(seed, post id) pair produces byte-identical content on every platform
and in every process. The generator is fixed by these constants:

    GAMMA = 0x9E3779B97F4A7C15        (state increment)
    M1    = 0xBF58476D1CE4E5B9        (finalizer multiplier 1)
    M2    = 0x94D049BB133111EB        (finalizer multiplier 2)

    state_k  = (seed + (k + 1) * GAMMA) mod 2**64
    output_k = mix(state_k)           (xor-shift / multiply finalizer)

Random access is O(1): post ``i`` draws from its own splitmix64 stream
seeded with ``output_i`` of the site seed, so a single post can be
fetched without generating its predecessors.

The simulated origin (``upstream_fetch``) adds a fixed delay per call,
standing in for the cost of server-side logic behind a real content
API.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from .clock import SYSTEM_CLOCK, Clock

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

DEFAULT_WORD_MIN = 50
DEFAULT_WORD_MAX = 500

# Fixed embedded lexicon so body text is reproducible offline.
_LEXICON = (
    "ad adipiscing aliqua aliquip amet anim aute cillum commodo consectetur "
    "consequat culpa cupidatat deserunt do dolor dolore duis ea eiusmod elit "
    "enim esse est et eu ex excepteur exercitation fugiat id in incididunt "
    "ipsum irure labore laboris laborum lorem magna minim mollit nisi non "
    "nostrud nulla occaecat officia pariatur proident qui quis reprehenderit "
    "sed sint sit sunt tempor ullamco ut velit veniam voluptate"
).split()


class NotFoundError(LookupError):
    """Requested post id is outside the configured range."""


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal splitmix64 stream. Pure integer math, platform independent."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_int(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def below(self, n: int) -> int:
        """Uniform-ish draw in [0, n). Modulo bias is irrelevant at 64 bits."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_int() % n


def _stream_seed(seed: int, post_id: int) -> int:
    # k-th output of the site-level stream; gives O(1) access per post.
    return _mix((seed + (post_id + 1) * _GAMMA) & _MASK64)


@dataclass(frozen=True)
class Post:
    """One blog entry. ``body`` is plain text; rendering happens elsewhere."""

    id: int
    slug: str
    title: str
    body: str

    @property
    def word_count(self) -> int:
        return len(self.body.split())


@dataclass(frozen=True)
class UpstreamConfig:
    """Simulated content origin: which posts exist and what a fetch costs."""

    seed: int
    delay: float = 0.1
    post_count: int = 100
    word_min: int = DEFAULT_WORD_MIN
    word_max: int = DEFAULT_WORD_MAX

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if self.post_count < 0:
            raise ValueError("post_count must be >= 0")
        if not 1 <= self.word_min <= self.word_max:
            raise ValueError("need 1 <= word_min <= word_max")


def make_post(
    seed: int,
    post_id: int,
    word_min: int = DEFAULT_WORD_MIN,
    word_max: int = DEFAULT_WORD_MAX,
) -> Post:
    """Generate post ``post_id`` for ``seed`` without touching other posts."""
    if post_id < 0:
        raise ValueError("post_id must be >= 0")
    rng = SplitMix64(_stream_seed(seed, post_id))
    title_words = [_LEXICON[rng.below(len(_LEXICON))] for _ in range(3 + rng.below(5))]
    title = " ".join(title_words).capitalize()
    n_words = word_min + rng.below(word_max - word_min + 1)
    body = " ".join(_LEXICON[rng.below(len(_LEXICON))] for _ in range(n_words))
    return Post(id=post_id, slug=f"post-{post_id}", title=title, body=body)


def generate_posts(
    seed: int,
    count: int,
    word_min: int = DEFAULT_WORD_MIN,
    word_max: int = DEFAULT_WORD_MAX,
) -> list[Post]:
    """All posts for a site, ordered by id 0..count-1."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return [make_post(seed, i, word_min, word_max) for i in range(count)]


def upstream_fetch(post_id: int, cfg: UpstreamConfig, clock: Clock = SYSTEM_CLOCK) -> Post:
    """Fetch one post from the simulated origin, paying the configured delay.

    The delay applies per call and is not serialized across callers.
    Raises NotFoundError for ids outside [0, cfg.post_count).
    """
    if not 0 <= post_id < cfg.post_count:
        raise NotFoundError(f"post {post_id} not in [0, {cfg.post_count})")
    clock.sleep(cfg.delay)
    return make_post(cfg.seed, post_id, cfg.word_min, cfg.word_max)


def content_digest(posts: list[Post]) -> str:
    """Order-sensitive 256-bit digest over every field of every post."""
    payload = json.dumps([asdict(p) for p in posts], separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
