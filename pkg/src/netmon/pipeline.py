"""Resource ranking, fetch-manifest emission, export and anomaly checks.

The ranked, deduplicated resource list is the product of the monitoring
run: the manifest feeds a downstream crawler, the export stream feeds
the corporate analytical system, and the anomaly report compares an
empirical citation series against the model baseline so artificially
amplified campaigns stand out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence, Union

from .distfit import PowerLawFit, WeibullFit, ks_statistic, powerlaw_cdf, weibull_cdf
from .ingest import Message, QueryPacket, format_timestamp
from .linknet import LinkRecord, STATUS_NOT_SHORTENED, STATUS_RESOLVED

__all__ = [
    "RankedResource",
    "ExportRecord",
    "AnomalyReport",
    "EXPORT_FORMAT_VERSION",
    "KOLMOGOROV_5PCT",
    "rank_resources",
    "fetch_manifest",
    "build_export_records",
    "export_stream",
    "compare_to_model",
]

EXPORT_FORMAT_VERSION = "corporate-v1"

# Asymptotic 5% two-sided Kolmogorov critical value is 1.36 / sqrt(n).
KOLMOGOROV_5PCT = 1.36

_OK_STATUSES = (STATUS_RESOLVED, STATUS_NOT_SHORTENED)

BaselineFit = Union[WeibullFit, PowerLawFit]


@dataclass(frozen=True)
class RankedResource:
    key: str
    citations: int
    distinct_authors: int
    rank: int
    social: bool


@dataclass(frozen=True)
class ExportRecord:
    url: str
    first_seen: datetime
    citations: int
    query_labels: tuple[str, ...]
    source_message_ids: tuple[str, ...]


@dataclass(frozen=True)
class AnomalyReport:
    series_name: str
    baseline: BaselineFit
    empirical_ks: float
    threshold: float
    flagged: bool
    top_outliers: tuple[tuple[str, int, float], ...]


def rank_resources(
    records: Sequence[LinkRecord],
    granularity: str = "document",
) -> list[RankedResource]:
    """Rank cited resources by citations, author diversity, then key.

    ``granularity`` selects the grouping key: the canonical final URL
    (``document``) or its host (``host``).  Only successfully resolved
    links count.  Ranks are dense, 1..N.
    """
    if granularity not in ("document", "host"):
        raise ValueError(f"granularity must be 'document' or 'host', got {granularity!r}")
    groups: dict[str, dict] = {}
    for r in records:
        if r.status not in _OK_STATUSES:
            continue
        key = r.final_url if granularity == "document" else r.host
        g = groups.setdefault(key, {"citations": 0, "authors": set(), "social": r.social})
        g["citations"] += 1
        g["authors"].add(r.author)
    ordered = sorted(
        groups.items(),
        key=lambda item: (-item[1]["citations"], -len(item[1]["authors"]), item[0]),
    )
    return [
        RankedResource(
            key=key,
            citations=g["citations"],
            distinct_authors=len(g["authors"]),
            rank=i + 1,
            social=g["social"],
        )
        for i, (key, g) in enumerate(ordered)
    ]


def fetch_manifest(ranked: Sequence[RankedResource], top_n: int) -> list[str]:
    """Top non-social resource URLs in rank order, for the crawler.

    Expects document-granularity ranking; emits the manifest only, the
    crawl itself happens downstream.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    urls = [r.key for r in ranked if not r.social]
    return urls[:top_n]


def build_export_records(
    messages: Sequence[Message],
    records: Sequence[LinkRecord],
    packet: QueryPacket,
) -> list[ExportRecord]:
    """Aggregate per-document export records for the corporate system.

    Social-platform links are excluded; the export carries external
    informational resources only.
    """
    by_id = {m.id: m for m in messages}
    groups: dict[str, dict] = {}
    for r in records:
        if r.status not in _OK_STATUSES or r.social:
            continue
        g = groups.setdefault(
            r.final_url,
            {"first_seen": r.timestamp, "citations": 0, "queries": set(), "ids": set()},
        )
        g["citations"] += 1
        g["first_seen"] = min(g["first_seen"], r.timestamp)
        g["ids"].add(r.message_id)
        msg = by_id.get(r.message_id)
        if msg is not None:
            g["queries"].update(packet.queries[i] for i in msg.matched_queries)
    return [
        ExportRecord(
            url=url,
            first_seen=g["first_seen"],
            citations=g["citations"],
            query_labels=tuple(sorted(g["queries"])),
            source_message_ids=tuple(sorted(g["ids"])),
        )
        for url, g in groups.items()
    ]


def export_stream(
    records: Sequence[ExportRecord],
    format_version: str = EXPORT_FORMAT_VERSION,
) -> bytes:
    """Serialize export records as deterministic line-delimited JSON.

    Lines are sorted by citations descending then url ascending; equal
    inputs always produce identical bytes.
    """
    if format_version != EXPORT_FORMAT_VERSION:
        raise ValueError(f"unsupported export format version {format_version!r}")
    seen: set[str] = set()
    for r in records:
        if r.url in seen:
            raise ValueError(f"duplicate export url: {r.url}")
        seen.add(r.url)
    ordered = sorted(records, key=lambda r: (-r.citations, r.url))
    lines = []
    for r in ordered:
        lines.append(
            json.dumps(
                {
                    "url": r.url,
                    "first_seen": format_timestamp(r.first_seen),
                    "citations": r.citations,
                    "query_labels": list(r.query_labels),
                    "source_message_ids": list(r.source_message_ids),
                }
            )
        )
    return "".join(line + "\n" for line in lines).encode("utf-8")


def _baseline_cdf(baseline: BaselineFit):
    if isinstance(baseline, WeibullFit):
        return lambda x: weibull_cdf(x, baseline.k, baseline.lam)
    if isinstance(baseline, PowerLawFit):
        return lambda x: powerlaw_cdf(x, baseline.alpha, baseline.xmin)
    raise TypeError(f"unsupported baseline type {type(baseline).__name__}")


def compare_to_model(
    empirical_counts: Union[Sequence[int], Mapping[str, int]],
    baseline: BaselineFit,
    threshold: float | None = None,
    series_name: str = "counts",
) -> AnomalyReport:
    """Kolmogorov-Smirnov check of a citation series against a baseline.

    ``flagged`` is set when the KS distance of the whole series exceeds
    ``threshold`` (default: the 5% critical value 1.36/sqrt(n)).
    Individual keys whose counts have baseline tail probability below
    0.001 are listed as top outliers, largest counts first, at most 10.
    """
    if isinstance(empirical_counts, Mapping):
        items = [(str(k), int(v)) for k, v in empirical_counts.items()]
    else:
        items = [(f"sample[{i}]", int(v)) for i, v in enumerate(empirical_counts)]
    if len(items) < 10:
        raise ValueError(f"need at least 10 counts, got {len(items)}")
    counts = [v for _, v in items]
    if any(v < 1 for v in counts):
        raise ValueError("counts must be positive")

    cdf = _baseline_cdf(baseline)
    ks = ks_statistic(counts, cdf)
    if threshold is None:
        threshold = KOLMOGOROV_5PCT / math.sqrt(len(counts))

    outliers = []
    for key, value in items:
        tail_probability = 1.0 - cdf(float(value))
        if tail_probability < 1e-3:
            outliers.append((key, value, tail_probability))
    outliers.sort(key=lambda t: (-t[1], t[0]))

    return AnomalyReport(
        series_name=series_name,
        baseline=baseline,
        empirical_ks=ks,
        threshold=threshold,
        flagged=ks > threshold,
        top_outliers=tuple(outliers[:10]),
    )
