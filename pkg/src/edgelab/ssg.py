"""Static site builder: index plus one page per post, with incremental rebuild.

Templates are plain string interpolation embedded here; there is no
template engine. Rendering is deterministic, so a page's content hash
doubles as its identity and incremental rebuilds can be checked
page-for-page against a fresh build.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from html import escape
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .content import Post, content_digest

INDEX_PATH = "/"
POST_PATH_PREFIX = "/posts/"

_INDEX_TEMPLATE = """<!doctype html>
<html>
<head><meta charset="utf-8"><title>Blog</title></head>
<body>
<main>
<h1>Blog</h1>
<ul>
{items}</ul>
</main>
</body>
</html>
"""

_POST_TEMPLATE = """<!doctype html>
<html>
<head><meta charset="utf-8"><title>{title}</title></head>
<body>
<main>
<article>
<h1>{title}</h1>
<p>{body}</p>
</article>
<p><a href="/">Back to index</a></p>
</main>
</body>
</html>
"""


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class RenderedPage:
    path: str
    body: bytes
    content_hash: str

    @classmethod
    def from_html(cls, path: str, html: str) -> "RenderedPage":
        body = html.encode("utf-8")
        return cls(path=path, body=body, content_hash=_digest(body))


@dataclass(frozen=True)
class SiteBuild:
    """Immutable snapshot of a deploy: every page of the site at one instant.

    ``source_keys`` holds the per-page digests of the inputs each page
    was rendered from; incremental rebuilds compare against them to
    decide what can be reused.
    """

    deploy_id: int
    pages: Mapping[str, RenderedPage]
    source_digest: str
    built_at: float
    source_keys: Mapping[str, str] = field(default_factory=dict)

    def page_hashes(self) -> dict[str, str]:
        return {path: page.content_hash for path, page in self.pages.items()}


def post_path(post: Post) -> str:
    return f"{POST_PATH_PREFIX}{post.slug}"


def render_index(posts: Iterable[Post]) -> RenderedPage:
    """Index page at "/": one anchor per post, in id order."""
    items = "".join(
        f'<li><a href="{post_path(p)}">{escape(p.title)}</a></li>\n' for p in posts
    )
    return RenderedPage.from_html(INDEX_PATH, _INDEX_TEMPLATE.format(items=items))


def render_post(post: Post) -> RenderedPage:
    html = _POST_TEMPLATE.format(title=escape(post.title), body=escape(post.body))
    return RenderedPage.from_html(post_path(post), html)


def _index_source_key(posts: list[Post]) -> str:
    # Only fields that appear in index links; body edits must not touch "/".
    payload = json.dumps([[p.id, p.slug, p.title] for p in posts], separators=(",", ":"))
    return _digest(payload.encode("utf-8"))


def _post_source_key(post: Post) -> str:
    payload = json.dumps([post.id, post.slug, post.title, post.body], separators=(",", ":"))
    return _digest(payload.encode("utf-8"))


def build_site(
    posts: list[Post],
    prev_deploy_id: int = 0,
    built_at: float | None = None,
) -> SiteBuild:
    """Render every page from scratch. ``deploy_id`` is prev + 1."""
    pages: dict[str, RenderedPage] = {INDEX_PATH: render_index(posts)}
    keys: dict[str, str] = {INDEX_PATH: _index_source_key(posts)}
    for post in posts:
        page = render_post(post)
        pages[page.path] = page
        keys[page.path] = _post_source_key(post)
    return SiteBuild(
        deploy_id=prev_deploy_id + 1,
        pages=MappingProxyType(pages),
        source_digest=content_digest(posts),
        built_at=time.time() if built_at is None else built_at,
        source_keys=MappingProxyType(keys),
    )


def incremental_rebuild(
    prev: SiteBuild,
    posts: list[Post],
    built_at: float | None = None,
) -> tuple[SiteBuild, frozenset[str]]:
    """Rebuild only pages whose source changed, reusing the rest from ``prev``.

    Output is page-for-page identical to a fresh ``build_site(posts)``;
    the returned path set is exactly the pages that were re-rendered.
    """
    pages: dict[str, RenderedPage] = {}
    keys: dict[str, str] = {}
    rebuilt: set[str] = set()

    index_key = _index_source_key(posts)
    if prev.source_keys.get(INDEX_PATH) == index_key:
        pages[INDEX_PATH] = prev.pages[INDEX_PATH]
    else:
        pages[INDEX_PATH] = render_index(posts)
        rebuilt.add(INDEX_PATH)
    keys[INDEX_PATH] = index_key

    for post in posts:
        path = post_path(post)
        key = _post_source_key(post)
        if prev.source_keys.get(path) == key:
            pages[path] = prev.pages[path]
        else:
            pages[path] = render_post(post)
            rebuilt.add(path)
        keys[path] = key

    return (
        SiteBuild(
            deploy_id=prev.deploy_id + 1,
            pages=MappingProxyType(pages),
            source_digest=content_digest(posts),
            built_at=time.time() if built_at is None else built_at,
            source_keys=MappingProxyType(keys),
        ),
        frozenset(rebuilt),
    )


def export_site(build: SiteBuild, dest: Path | str) -> list[Path]:
    """Write the page map to disk for static file serving.

    Layout: "/" -> index.html, "/posts/<slug>" -> posts/<slug>/index.html.
    File bytes are identical to the in-memory page bodies.
    """
    dest = Path(dest)
    written: list[Path] = []
    for path, page in sorted(build.pages.items()):
        rel = "index.html" if path == INDEX_PATH else f"{path.lstrip('/')}/index.html"
        target = dest / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(page.body)
        written.append(target)
    return written
