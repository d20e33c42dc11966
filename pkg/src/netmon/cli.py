"""Command-line entry point for the modeling and monitoring workflows.

Subcommands: ``simulate`` (agent-space evolution), ``fit`` (Weibull /
power-law MLE), ``pipeline`` (query scan to export), ``compare``
(anomaly check against a model baseline) and ``plot-points`` (density
curve for external plotting).

Exit codes: 0 success, 2 usage or input error, 1 internal failure.
Every run echoes its fully resolved configuration (seed included) to a
sidecar JSON next to its outputs.  Setting NETMON_OFFLINE=1 forces the
offline redirect fetcher no matter what flags say.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
from pathlib import Path

from .diffusion import BehaviorParams
from .distfit import (
    ConvergenceError,
    PowerLawFit,
    WeibullFit,
    emit_pdf_points,
    fit_powerlaw_mle,
    fit_weibull_mle,
)
from .ingest import dedupe, format_timestamp, load_corpus, load_query_packet, match_queries
from .linknet import (
    DEFAULT_SHORTENER_BASES,
    LiveFetcher,
    OfflineFetcher,
    build_link_records,
    extract_links,
    link_stats,
    resolve_all,
)
from .pipeline import (
    build_export_records,
    compare_to_model,
    export_stream,
    fetch_manifest,
    rank_resources,
)
from .simulator import (
    CALIBRATED_E0,
    CALIBRATED_HORIZON,
    CALIBRATED_P_LIKE,
    CALIBRATED_P_REPOST,
    CALIBRATED_P_S,
    CALIBRATED_SEED,
    SimulationConfig,
    life_stats_to_jsonl,
    run_simulation,
)

__all__ = ["main"]


class CliError(Exception):
    """Input problem; reported on stderr with exit code 2."""


def _write_sidecar(target: Path, config: dict) -> None:
    target.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- simulate

_SIM_CONFIG_FIELDS = {
    "p_s": float,
    "e0": int,
    "p_like": float,
    "p_repost": float,
    "link_carrier_fraction": float,
    "link_boost": float,
    "rich_get_richer_gamma": float,
    "horizon": int,
    "seed": int,
    "runs": int,
    "max_agents": int,
    "initial_agents": int,
}


def _load_sim_config(args) -> dict:
    resolved = {
        "p_s": CALIBRATED_P_S,
        "e0": CALIBRATED_E0,
        "p_like": CALIBRATED_P_LIKE,
        "p_repost": CALIBRATED_P_REPOST,
        "link_carrier_fraction": 0.0,
        "link_boost": 1.0,
        "rich_get_richer_gamma": 0.0,
        "horizon": CALIBRATED_HORIZON,
        "seed": CALIBRATED_SEED,
        "runs": 1,
        "max_agents": None,
        "initial_agents": 1,
    }
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key not in _SIM_CONFIG_FIELDS:
                raise CliError(f"unknown config field: {key}")
            if value is None and key == "max_agents":
                resolved[key] = None
                continue
            try:
                resolved[key] = _SIM_CONFIG_FIELDS[key](value)
            except (TypeError, ValueError) as exc:
                raise CliError(f"bad value for config field {key}: {value!r}") from exc
    # flags override the config file
    if args.steps is not None:
        resolved["horizon"] = args.steps
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.runs is not None:
        resolved["runs"] = args.runs
    return resolved


def cmd_simulate(args) -> int:
    resolved = _load_sim_config(args)
    try:
        params = BehaviorParams.constant(
            p_s=resolved["p_s"],
            e0=resolved["e0"],
            p_like=resolved["p_like"],
            p_repost=resolved["p_repost"],
            link_carrier_fraction=resolved["link_carrier_fraction"],
            link_boost=resolved["link_boost"],
            rich_get_richer_gamma=resolved["rich_get_richer_gamma"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if resolved["runs"] < 1:
        raise CliError(f"runs must be >= 1, got {resolved['runs']}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    pooled = []
    event_lines: list[str] = []
    for k in range(resolved["runs"]):
        try:
            cfg = SimulationConfig(
                params=params,
                horizon=resolved["horizon"],
                seed=resolved["seed"] + k,
                max_agents=resolved["max_agents"],
                initial_agents=resolved["initial_agents"],
            )
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        result = run_simulation(cfg, record_events=not args.no_events)
        pooled.extend(result.stats)
        if not args.no_events:
            for e in result.events:
                event_lines.append(
                    json.dumps(
                        {
                            "run": k,
                            "tick": e.tick,
                            "kind": e.kind,
                            "agent_id": e.agent_id,
                            "related_agent_id": e.related_agent_id,
                        }
                    )
                )

    (out_dir / "life_stats.jsonl").write_text(life_stats_to_jsonl(pooled))
    if not args.no_events:
        (out_dir / "events.jsonl").write_text(
            "".join(line + "\n" for line in event_lines)
        )
    _write_sidecar(out_dir / "run_config.json", resolved)
    print(f"simulated {resolved['runs']} run(s), {len(pooled)} agents -> {out_dir}")
    return 0


# --------------------------------------------------------------------- fit

def _read_samples(path_str: str, want_int: bool) -> list:
    path = Path(path_str)
    if not path.exists():
        raise CliError(f"input file not found: {path}")
    samples = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            samples.append(int(stripped) if want_int else float(stripped))
        except ValueError as exc:
            raise CliError(f"non-numeric value on line {line_no}: {stripped!r}") from exc
    if not samples:
        raise CliError(f"no samples in {path}")
    return samples


def _fit_to_dict(fit) -> dict:
    if isinstance(fit, WeibullFit):
        return {
            "distribution": "weibull",
            "k": fit.k,
            "lambda": fit.lam,
            "log_likelihood": fit.log_likelihood,
            "n_samples": fit.n_samples,
            "ks_statistic": fit.ks_statistic,
        }
    return {
        "distribution": "powerlaw",
        "alpha": fit.alpha,
        "xmin": fit.xmin,
        "log_likelihood": fit.log_likelihood,
        "n_tail": fit.n_tail,
    }


def _load_fit(path_str: str):
    path = Path(path_str)
    if not path.exists():
        raise CliError(f"fit file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"fit file is not valid JSON: {exc}") from exc
    try:
        if obj.get("distribution") == "weibull" or "k" in obj:
            return WeibullFit(
                k=float(obj["k"]),
                lam=float(obj["lambda"]),
                log_likelihood=float(obj.get("log_likelihood", 0.0)),
                n_samples=int(obj.get("n_samples", 0) or 0),
                ks_statistic=float(obj.get("ks_statistic", 0.0)),
            )
        if obj.get("distribution") == "powerlaw" or "alpha" in obj:
            return PowerLawFit(
                alpha=float(obj["alpha"]),
                xmin=int(obj.get("xmin", 1)),
                log_likelihood=float(obj.get("log_likelihood", 0.0)),
                n_tail=int(obj.get("n_tail", 0) or 0),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"bad fit file {path}: {exc}") from exc
    raise CliError(f"fit file {path} names no known distribution")


def cmd_fit(args) -> int:
    if args.distribution == "weibull":
        samples = _read_samples(args.input, want_int=False)
        try:
            fit = fit_weibull_mle(samples)
        except (ValueError, ConvergenceError) as exc:
            raise CliError(f"weibull fit failed: {exc}") from exc
        print(f"k={fit.k:.6g} lambda={fit.lam:.6g}")
    else:
        samples = _read_samples(args.input, want_int=True)
        try:
            fit = fit_powerlaw_mle(samples, xmin=args.xmin)
        except ValueError as exc:
            raise CliError(f"power-law fit failed: {exc}") from exc
        print(f"alpha={fit.alpha:.6g} xmin={fit.xmin}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(_fit_to_dict(fit), indent=2) + "\n")
    _write_sidecar(
        Path(str(out) + ".run.json"),
        {"distribution": args.distribution, "input": args.input,
         "xmin": args.xmin if args.distribution == "powerlaw" else None,
         "out": str(out)},
    )
    return 0


# ---------------------------------------------------------------- pipeline

def _message_to_dict(msg) -> dict:
    return {
        "id": msg.id,
        "author": msg.author,
        "timestamp": format_timestamp(msg.timestamp),
        "text": msg.text,
        "matched_queries": sorted(msg.matched_queries),
    }


def cmd_pipeline(args) -> int:
    offline_forced = os.environ.get("NETMON_OFFLINE") == "1"
    if args.online and args.redirect_map:
        raise CliError("--online and --redirect-map are mutually exclusive")

    queries_path = Path(args.queries)
    if not queries_path.exists():
        raise CliError(f"queries file not found: {queries_path}")
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise CliError(f"corpus file not found: {corpus_path}")

    with queries_path.open() as fh:
        try:
            packet = load_query_packet(fh, name=queries_path.stem)
        except ValueError as exc:
            raise CliError(str(exc)) from exc

    registry = DEFAULT_SHORTENER_BASES
    if args.shortener_registry:
        reg_path = Path(args.shortener_registry)
        if not reg_path.exists():
            raise CliError(f"shortener registry not found: {reg_path}")
        registry = tuple(
            line.strip()
            for line in reg_path.read_text().splitlines()
            if line.strip() and not line.strip().startswith("#")
        )

    if args.online and not offline_forced:
        fetcher = LiveFetcher()
    else:
        mapping = {}
        if args.redirect_map:
            map_path = Path(args.redirect_map)
            if not map_path.exists():
                raise CliError(f"redirect map not found: {map_path}")
            try:
                mapping = json.loads(map_path.read_text())
            except json.JSONDecodeError as exc:
                raise CliError(f"redirect map is not valid JSON: {exc}") from exc
        fetcher = OfflineFetcher(mapping)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # stages 1-2: scan and match
    with corpus_path.open() as fh:
        messages, rejects = load_corpus(fh)
    messages = dedupe(messages)
    matched = match_queries(messages, packet)

    (out_dir / "rejects.jsonl").write_text(
        "".join(
            json.dumps({"line_no": r.line_no, "reason": r.reason, "raw": r.raw}) + "\n"
            for r in rejects
        )
    )
    (out_dir / "matched.jsonl").write_text(
        "".join(json.dumps(_message_to_dict(m)) + "\n" for m in matched)
    )

    # stage 3: extract hyperlinks
    extracted = [link for msg in matched for link in extract_links(msg)]
    (out_dir / "links.jsonl").write_text(
        "".join(
            json.dumps(
                {"message_id": l.message_id, "raw_url": l.raw_url, "position": l.position}
            )
            + "\n"
            for l in extracted
        )
    )

    # stage 4: open short addresses, canonicalize, rank
    resolved = resolve_all(
        extracted, fetcher, registry=registry, max_depth=args.max_depth,
        max_in_flight=args.max_in_flight,
    )
    seen: set[str] = set()
    resolved_lines = []
    for link in extracted:
        if link.raw_url in seen:
            continue
        seen.add(link.raw_url)
        r = resolved[link.raw_url]
        resolved_lines.append(
            json.dumps(
                {
                    "raw_url": r.raw_url,
                    "final_url": r.final_url,
                    "redirect_chain": list(r.redirect_chain),
                    "was_shortened": r.was_shortened,
                    "status": r.status,
                }
            )
        )
    (out_dir / "resolved.jsonl").write_text(
        "".join(line + "\n" for line in resolved_lines)
    )

    records = build_link_records(matched, extracted, resolved)
    ranked = rank_resources(records, granularity=args.granularity)
    (out_dir / "ranking.json").write_text(
        json.dumps(
            [
                {
                    "key": r.key,
                    "citations": r.citations,
                    "distinct_authors": r.distinct_authors,
                    "rank": r.rank,
                    "social": r.social,
                }
                for r in ranked
            ],
            indent=2,
        )
        + "\n"
    )

    # stage 5 boundary: manifest for the downstream crawler
    doc_ranked = ranked if args.granularity == "document" else rank_resources(records)
    manifest = fetch_manifest(doc_ranked, top_n=args.top)
    (out_dir / "manifest.txt").write_text("".join(u + "\n" for u in manifest))

    # stage 6: export stream for the corporate system
    export_records = build_export_records(matched, records, packet)
    (out_dir / "export.jsonl").write_bytes(export_stream(export_records))

    # summary statistics
    if matched:
        stats = link_stats(matched, extracted, resolved)
        stats_obj = {
            "n_messages": len(messages),
            "n_matched": len(matched),
            "n_rejected": len(rejects),
            "n_links": stats.n_links,
            "messages_with_links_fraction": stats.messages_with_links_fraction,
            "unique_links_fraction": stats.unique_links_fraction,
            "unique_links_fraction_pre_resolution": stats.unique_links_fraction_pre_resolution,
            "per_source_counts": dict(sorted(stats.per_source_counts.items())),
        }
    else:
        stats_obj = {
            "n_messages": len(messages),
            "n_matched": 0,
            "n_rejected": len(rejects),
            "n_links": 0,
            "messages_with_links_fraction": None,
            "unique_links_fraction": None,
            "unique_links_fraction_pre_resolution": None,
            "per_source_counts": {},
        }
    (out_dir / "stats.json").write_text(json.dumps(stats_obj, indent=2) + "\n")

    _write_sidecar(
        out_dir / "run_config.json",
        {
            "queries": str(queries_path),
            "corpus": str(corpus_path),
            "redirect_map": args.redirect_map,
            "online": bool(args.online and not offline_forced),
            "offline_forced": offline_forced,
            "granularity": args.granularity,
            "top": args.top,
            "max_depth": args.max_depth,
            "max_in_flight": args.max_in_flight,
            "shortener_registry": args.shortener_registry,
        },
    )
    print(
        f"pipeline: {len(messages)} messages, {len(matched)} matched, "
        f"{len(extracted)} links, {len(ranked)} resources -> {out_dir}"
    )
    return 0


# ----------------------------------------------------------------- compare

def _read_counts(path_str: str):
    path = Path(path_str)
    if not path.exists():
        raise CliError(f"empirical file not found: {path}")
    keyed: dict[str, int] = {}
    plain: list[int] = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        try:
            if len(parts) == 1:
                plain.append(int(parts[0]))
            elif len(parts) == 2:
                keyed[parts[0]] = int(parts[1])
            else:
                raise ValueError(stripped)
        except ValueError as exc:
            raise CliError(
                f"bad count on line {line_no}: {stripped!r} "
                "(expected 'count' or 'key count')"
            ) from exc
    if keyed and plain:
        raise CliError("mix of keyed and plain count lines")
    return keyed or plain


def cmd_compare(args) -> int:
    counts = _read_counts(args.empirical)
    baseline = _load_fit(args.baseline_fit)
    try:
        report = compare_to_model(
            counts, baseline, threshold=args.threshold,
            series_name=Path(args.empirical).stem,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    obj = {
        "series_name": report.series_name,
        "baseline": _fit_to_dict(report.baseline),
        "empirical_ks": report.empirical_ks,
        "threshold": report.threshold,
        "flagged": report.flagged,
        "top_outliers": [
            {"key": k, "count": c, "model_tail_probability": p}
            for k, c, p in report.top_outliers
        ],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(obj, indent=2) + "\n")
    _write_sidecar(
        Path(str(out) + ".run.json"),
        {"empirical": args.empirical, "baseline_fit": args.baseline_fit,
         "threshold": args.threshold, "out": str(out)},
    )
    print(f"ks={report.empirical_ks:.6g} threshold={report.threshold:.6g} "
          f"flagged={report.flagged}")
    return 0


# ------------------------------------------------------------- plot-points

def cmd_plot_points(args) -> int:
    fit = _load_fit(args.fit)
    if not isinstance(fit, WeibullFit):
        raise CliError("plot-points needs a weibull fit file")
    try:
        points = emit_pdf_points(fit, x_max=args.x_max, n_points=args.n)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["x,pdf"] + [f"{x!r},{y!r}" for x, y in points]
    out.write_text("".join(line + "\n" for line in lines))
    _write_sidecar(
        Path(str(out) + ".run.json"),
        {"fit": args.fit, "x_max": args.x_max, "n": args.n, "out": str(out)},
    )
    print(f"wrote {len(points)} curve points -> {out}")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netmon",
        description="Agent-based message diffusion model and link-monitoring pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="evolve the agent space")
    p_sim.add_argument("--config", help="JSON config file (flags override it)")
    p_sim.add_argument("--steps", type=int, help="simulation horizon in ticks")
    p_sim.add_argument("--seed", type=int, help="base random seed")
    p_sim.add_argument("--runs", type=int, help="number of replications (seeds seed..seed+runs-1)")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--no-events", action="store_true",
                       help="skip the event log, keep life stats only")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a distribution to samples")
    p_fit.add_argument("distribution", choices=["weibull", "powerlaw"])
    p_fit.add_argument("--input", required=True, help="one number per line")
    p_fit.add_argument("--out", required=True, help="fit JSON output path")
    p_fit.add_argument("--xmin", type=int, default=1, help="power-law tail cutoff")
    p_fit.set_defaults(func=cmd_fit)

    p_pipe = sub.add_parser("pipeline", help="run scan/extract/resolve/rank/export")
    p_pipe.add_argument("--queries", required=True, help="query packet file")
    p_pipe.add_argument("--corpus", required=True, help="line-delimited JSON corpus")
    p_pipe.add_argument("--redirect-map", help="offline redirect map JSON")
    p_pipe.add_argument("--online", action="store_true",
                        help="resolve redirects over HTTP (NETMON_OFFLINE=1 overrides)")
    p_pipe.add_argument("--top", type=int, default=100, help="manifest size")
    p_pipe.add_argument("--granularity", choices=["document", "host"], default="document")
    p_pipe.add_argument("--max-depth", type=int, default=10, help="redirect hop limit")
    p_pipe.add_argument("--max-in-flight", type=int, default=8,
                        help="parallel resolutions")
    p_pipe.add_argument("--shortener-registry", help="file of short-address bases")
    p_pipe.add_argument("--out-dir", required=True)
    p_pipe.set_defaults(func=cmd_pipeline)

    p_cmp = sub.add_parser("compare", help="anomaly check against a baseline fit")
    p_cmp.add_argument("--empirical", required=True,
                       help="counts file: 'count' or 'key count' per line")
    p_cmp.add_argument("--baseline-fit", required=True, help="fit JSON from `netmon fit`")
    p_cmp.add_argument("--threshold", type=float, default=None,
                       help="KS flag threshold (default 1.36/sqrt(n))")
    p_cmp.add_argument("--out", required=True, help="report JSON output path")
    p_cmp.set_defaults(func=cmd_compare)

    p_plot = sub.add_parser("plot-points", help="emit density curve points as CSV")
    p_plot.add_argument("--fit", required=True, help="weibull fit JSON")
    p_plot.add_argument("--x-max", type=float, required=True)
    p_plot.add_argument("--n", type=int, default=100, help="number of points")
    p_plot.add_argument("--out", required=True, help="CSV output path")
    p_plot.set_defaults(func=cmd_plot_points)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
