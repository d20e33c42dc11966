"""Query packets and message-corpus scanning (pipeline stages 1 and 2).

The network scanner is abstracted as a line-delimited JSON stream so the
corpus can come from a fixture file, a spool directory or a live
collector without changing this module.  A message is formally relevant
to a query when every term of the query occurs in the message text as a
whole word, case-insensitively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import IO, Iterable, Union

__all__ = [
    "QueryPacket",
    "Message",
    "RejectRecord",
    "load_query_packet",
    "load_corpus",
    "match_queries",
    "dedupe",
    "parse_timestamp",
    "format_timestamp",
]


@dataclass(frozen=True)
class QueryPacket:
    """An ordered batch of corporate search queries."""

    queries: tuple[str, ...]
    name: str = "packet"

    def __post_init__(self) -> None:
        if not self.queries:
            raise ValueError("query packet must contain at least one query")
        for q in self.queries:
            if not q.strip():
                raise ValueError("queries must be non-empty")


@dataclass
class Message:
    id: str
    author: str
    timestamp: datetime
    text: str
    matched_queries: frozenset[int] = frozenset()


@dataclass(frozen=True)
class RejectRecord:
    line_no: int
    reason: str
    raw: str


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 UTC with a Z suffix, whole seconds."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_query_packet(source: Union[IO[str], Iterable[str]], name: str = "packet") -> QueryPacket:
    """One query per line; blank lines and '#' comments are skipped."""
    queries = []
    for line in source:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        queries.append(stripped)
    return QueryPacket(queries=tuple(queries), name=name)


_REQUIRED_FIELDS = ("id", "author", "timestamp", "text")


def load_corpus(
    source: Union[IO[str], Iterable[str]],
) -> tuple[list[Message], list[RejectRecord]]:
    """Parse a line-delimited JSON corpus.

    Malformed lines go into the rejects list with their 1-based line
    number instead of being dropped silently.
    """
    messages: list[Message] = []
    rejects: list[RejectRecord] = []
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            rejects.append(RejectRecord(line_no, f"invalid JSON: {exc.msg}", stripped))
            continue
        if not isinstance(obj, dict):
            rejects.append(RejectRecord(line_no, "not a JSON object", stripped))
            continue
        missing = [f for f in _REQUIRED_FIELDS if f not in obj]
        if missing:
            rejects.append(
                RejectRecord(line_no, f"missing fields: {', '.join(missing)}", stripped)
            )
            continue
        try:
            ts = parse_timestamp(str(obj["timestamp"]))
        except ValueError:
            rejects.append(
                RejectRecord(line_no, f"bad timestamp: {obj['timestamp']!r}", stripped)
            )
            continue
        messages.append(
            Message(
                id=str(obj["id"]),
                author=str(obj["author"]),
                timestamp=ts,
                text=str(obj["text"]),
            )
        )
    return messages, rejects


def _tokens(text: str) -> frozenset[str]:
    # Split on any non-alphanumeric character; numerals kept.
    toks = []
    current: list[str] = []
    for ch in text:
        if ch.isalnum():
            current.append(ch)
        else:
            if current:
                toks.append("".join(current).casefold())
                current = []
    if current:
        toks.append("".join(current).casefold())
    return frozenset(toks)


def match_queries(messages: Iterable[Message], packet: QueryPacket) -> list[Message]:
    """Keep messages matching at least one query, with matches recorded.

    A message matches a query when every term of the query appears in
    the message's token set (whole-word, case-folded).
    """
    query_tokens = [_tokens(q) for q in packet.queries]
    out: list[Message] = []
    for msg in messages:
        text_tokens = _tokens(msg.text)
        matched = frozenset(
            idx
            for idx, q_tokens in enumerate(query_tokens)
            if q_tokens and q_tokens.issubset(text_tokens)
        )
        if matched:
            out.append(replace(msg, matched_queries=matched))
    return out


def dedupe(messages: Iterable[Message]) -> list[Message]:
    """First occurrence of each id wins; order otherwise preserved."""
    seen: set[str] = set()
    out: list[Message] = []
    for msg in messages:
        if msg.id in seen:
            continue
        seen.add(msg.id)
        out.append(msg)
    return out
