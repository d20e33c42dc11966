"""Hyperlink extraction, short-link resolution and URL canonicalization.

Resolution is defined against a pluggable fetcher so the whole chain is
testable offline: a fetcher maps a URL to a redirect target (string), a
terminal answer (None) or a failure (raises FetchFailed).  The shipped
fetchers are an offline map-file fetcher and a live HTTP fetcher that
only touches redirect headers.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterable, Mapping, Optional, Sequence
from urllib.parse import urljoin, urlsplit

from .ingest import Message

__all__ = [
    "ExtractedLink",
    "ResolvedLink",
    "LinkRecord",
    "LinkStats",
    "LinkParseError",
    "FetchFailed",
    "OfflineFetcher",
    "LiveFetcher",
    "DEFAULT_SHORTENER_BASES",
    "SOCIAL_HOSTS",
    "STATUS_RESOLVED",
    "STATUS_LOOP",
    "STATUS_DEPTH",
    "STATUS_FAILED",
    "STATUS_NOT_SHORTENED",
    "extract_links",
    "is_shortener",
    "canonicalize",
    "resolve",
    "resolve_all",
    "build_link_records",
    "link_stats",
]

# Short-address services whose links must be expanded before the target
# resource can be identified.
DEFAULT_SHORTENER_BASES = (
    "http://migre.me/",
    "http://bit.ly/",
    "http://ow.ly/",
    "http://tinyurl.com/",
    "https://lnkd.in/",
    "https://goo.gl/",
    "http://wp.me/",
    "http://j.mp/",
    "http://dlvr.it/",
)

# Heavily cited hosts that point back into social platforms; kept in the
# ranking but tagged so downstream stages can separate them from
# external informational resources.
SOCIAL_HOSTS = frozenset(
    {
        "youtu.be",
        "youtube.com",
        "fb.me",
        "facebook.com",
        "vk.com",
        "twitter.com",
        "plus.google.com",
        "livejournal.com",
    }
)

STATUS_RESOLVED = "resolved"
STATUS_LOOP = "loop_detected"
STATUS_DEPTH = "depth_exceeded"
STATUS_FAILED = "fetch_failed"
STATUS_NOT_SHORTENED = "not_shortened"

_OK_STATUSES = (STATUS_RESOLVED, STATUS_NOT_SHORTENED)


class LinkParseError(ValueError):
    """A URL could not be parsed into scheme/host/path."""


class FetchFailed(RuntimeError):
    """A fetcher could not retrieve redirect information for a URL."""


@dataclass(frozen=True)
class ExtractedLink:
    message_id: str
    raw_url: str
    position: int


@dataclass(frozen=True)
class ResolvedLink:
    raw_url: str
    final_url: str
    redirect_chain: tuple[str, ...]
    was_shortened: bool
    status: str


@dataclass(frozen=True)
class LinkRecord:
    """One link occurrence joined with its message provenance."""

    message_id: str
    author: str
    timestamp: datetime
    raw_url: str
    final_url: str
    host: str
    status: str
    was_shortened: bool
    social: bool


@dataclass(frozen=True)
class LinkStats:
    messages_with_links_fraction: float
    unique_links_fraction: float
    unique_links_fraction_pre_resolution: float
    per_source_counts: dict[str, int]
    n_messages: int
    n_links: int


# URLs run over the RFC 3986 character set; trailing sentence
# punctuation and unbalanced closing brackets are peeled off.
_URL_RUN = re.compile(r"https?://[A-Za-z0-9\-._~:/?#\[\]@!$&'()*+,;=%]+")
_TRAILING_PUNCT = ".,;:!?'\""
_BRACKET_PAIRS = {")": "(", "]": "[", "}": "{"}


def _trim_url(candidate: str) -> str:
    while candidate:
        last = candidate[-1]
        if last in _TRAILING_PUNCT:
            candidate = candidate[:-1]
            continue
        if last in _BRACKET_PAIRS and candidate.count(_BRACKET_PAIRS[last]) < candidate.count(last):
            candidate = candidate[:-1]
            continue
        break
    return candidate


def extract_links(message: Message) -> list[ExtractedLink]:
    """All URLs in the message text, in text order, offsets preserved."""
    out = []
    for m in _URL_RUN.finditer(message.text):
        url = _trim_url(m.group(0))
        if len(url) <= len("https://"):
            continue
        out.append(ExtractedLink(message_id=message.id, raw_url=url, position=m.start()))
    return out


def _split_checked(url: str):
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https"):
        raise LinkParseError(f"unsupported scheme in {url!r}")
    if not parts.hostname:
        raise LinkParseError(f"no host in {url!r}")
    try:
        parts.port
    except ValueError as exc:
        raise LinkParseError(f"bad port in {url!r}") from exc
    return parts


def canonicalize(url: str) -> str:
    """Normalize a URL for uniqueness counting.

    Lowercases scheme and host, drops default ports and the fragment,
    keeps path and query byte-for-byte, and drops the trailing slash of
    an otherwise empty path.
    """
    parts = _split_checked(url)
    scheme = parts.scheme.lower()
    host = parts.hostname.lower()
    port = parts.port
    default_port = 80 if scheme == "http" else 443
    netloc = host if port is None or port == default_port else f"{host}:{port}"
    if "@" in parts.netloc:
        netloc = parts.netloc.rsplit("@", 1)[0] + "@" + netloc
    path = parts.path
    if path == "/":
        path = ""
    query = f"?{parts.query}" if parts.query else ""
    return f"{scheme}://{netloc}{path}{query}"


def _host_of(url: str) -> str:
    return _split_checked(url).hostname.lower()


def is_shortener(url: str, registry: Optional[Iterable[str]] = None) -> bool:
    """True when the URL's host is one of the short-address services."""
    bases = DEFAULT_SHORTENER_BASES if registry is None else tuple(registry)
    host = _host_of(url)
    return host in {_host_of(b) for b in bases}


class OfflineFetcher:
    """Redirect oracle backed by a {url: target} mapping.

    URLs absent from the map are terminal; a None target marks a URL
    whose fetch fails.  Immutable, safe to share between threads.
    """

    def __init__(self, mapping: Mapping[str, Optional[str]]):
        self._map = dict(mapping)

    def __call__(self, url: str) -> Optional[str]:
        if url not in self._map:
            return None
        target = self._map[url]
        if target is None:
            raise FetchFailed(f"fetch failed for {url}")
        return target


class LiveFetcher:
    """Follows one redirect hop over HTTP; HEAD first, GET fallback."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout

    def __call__(self, url: str) -> Optional[str]:
        import requests

        try:
            resp = requests.head(url, allow_redirects=False, timeout=self.timeout)
            if resp.status_code in (405, 501):
                resp = requests.get(
                    url, allow_redirects=False, timeout=self.timeout, stream=True
                )
                resp.close()
        except requests.RequestException as exc:
            raise FetchFailed(f"fetch failed for {url}: {exc}") from exc
        if 300 <= resp.status_code < 400:
            target = resp.headers.get("Location")
            if target:
                return urljoin(url, target)
        return None


def resolve(
    link: ExtractedLink,
    fetcher: Callable[[str], Optional[str]],
    registry: Optional[Iterable[str]] = None,
    max_depth: int = 10,
) -> ResolvedLink:
    """Follow redirects for one link; failures are statuses, not raises."""
    raw = link.raw_url
    try:
        from_shortener = is_shortener(raw, registry)
    except LinkParseError:
        return ResolvedLink(
            raw_url=raw,
            final_url=raw,
            redirect_chain=(raw,),
            was_shortened=False,
            status=STATUS_FAILED,
        )
    chain = [raw]
    current = raw
    followed = 0
    status = None
    while status is None:
        try:
            target = fetcher(current)
        except FetchFailed:
            status = STATUS_FAILED
            break
        if target is None:
            status = (
                STATUS_RESOLVED if (from_shortener or followed > 0) else STATUS_NOT_SHORTENED
            )
            break
        try:
            _split_checked(target)
        except LinkParseError:
            status = STATUS_FAILED
            break
        if target in chain:
            status = STATUS_LOOP
            break
        if followed >= max_depth:
            status = STATUS_DEPTH
            break
        chain.append(target)
        current = target
        followed += 1

    try:
        final = canonicalize(chain[-1])
    except LinkParseError:
        final = chain[-1]
    return ResolvedLink(
        raw_url=raw,
        final_url=final,
        redirect_chain=tuple(chain),
        was_shortened=from_shortener or len(chain) > 1,
        status=status,
    )


def resolve_all(
    links: Iterable[ExtractedLink],
    fetcher: Callable[[str], Optional[str]],
    registry: Optional[Iterable[str]] = None,
    max_depth: int = 10,
    max_in_flight: int = 8,
) -> dict[str, ResolvedLink]:
    """Resolve each distinct raw URL once; keyed results keep the output
    independent of completion order."""
    distinct: list[ExtractedLink] = []
    seen: set[str] = set()
    for link in links:
        if link.raw_url in seen:
            continue
        seen.add(link.raw_url)
        distinct.append(link)
    if max_in_flight > 1 and len(distinct) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(
                pool.map(lambda l: resolve(l, fetcher, registry, max_depth), distinct)
            )
    else:
        results = [resolve(l, fetcher, registry, max_depth) for l in distinct]
    return {r.raw_url: r for r in results}


def _is_social(host: str) -> bool:
    return host.removeprefix("www.") in SOCIAL_HOSTS


def build_link_records(
    messages: Sequence[Message],
    extracted: Sequence[ExtractedLink],
    resolved: Mapping[str, ResolvedLink],
) -> list[LinkRecord]:
    """Join link occurrences with message provenance, extraction order."""
    by_id = {m.id: m for m in messages}
    records = []
    for link in extracted:
        res = resolved[link.raw_url]
        msg = by_id[link.message_id]
        try:
            host = _host_of(res.final_url)
        except LinkParseError:
            host = ""
        records.append(
            LinkRecord(
                message_id=msg.id,
                author=msg.author,
                timestamp=msg.timestamp,
                raw_url=link.raw_url,
                final_url=res.final_url,
                host=host,
                status=res.status,
                was_shortened=res.was_shortened,
                social=_is_social(host) if host else False,
            )
        )
    return records


def link_stats(
    messages: Sequence[Message],
    extracted: Sequence[ExtractedLink],
    resolved: Mapping[str, ResolvedLink],
) -> LinkStats:
    """Corpus-level link ratios and per-source citation counts."""
    if not messages:
        raise ValueError("link statistics are undefined for zero messages")
    with_links = {link.message_id for link in extracted}
    n_links = len(extracted)

    finals = []
    raw_canonicals = []
    per_source: dict[str, int] = {}
    for link in extracted:
        res = resolved[link.raw_url]
        try:
            raw_canonicals.append(canonicalize(link.raw_url))
        except LinkParseError:
            raw_canonicals.append(link.raw_url)
        if res.status in _OK_STATUSES:
            finals.append(res.final_url)
            try:
                host = _host_of(res.final_url)
            except LinkParseError:
                host = res.final_url
            per_source[host] = per_source.get(host, 0) + 1

    return LinkStats(
        messages_with_links_fraction=len(with_links) / len(messages),
        unique_links_fraction=(len(set(finals)) / n_links) if n_links else 0.0,
        unique_links_fraction_pre_resolution=(
            len(set(raw_canonicals)) / n_links if n_links else 0.0
        ),
        per_source_counts=per_source,
        n_messages=len(messages),
        n_links=n_links,
    )
