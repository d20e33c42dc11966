"""Discrete-time evolution of the message-agent space.

Tick protocol (fixed so equal configs replay bit-identically):

1. at most one self-generated agent appears (one Bernoulli(p_s) draw per
   tick); initial agents count as self-generated at tick 0;
2. every agent born on an earlier tick and still alive steps once, in
   ascending id order: one energy-step draw decides like/repost/both/
   neither, a repost immediately creates a child with energy e0 that
   inherits the parent's link and does not step until the next tick;
3. agents whose energy reached 0 emit a death event and stop for good.

Every uniform draw comes from one ``random.Random(seed)`` stream: one
draw per tick for self-generation, one per created non-repost agent for
link carriage, one per agent step.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .diffusion import AgentState, BehaviorParams, effective_repost_prob

__all__ = [
    "SimulationConfig",
    "EventRecord",
    "AgentLifeStats",
    "SimulationResult",
    "EVENT_SELF_GENERATE",
    "EVENT_REPOST",
    "EVENT_LIKE",
    "EVENT_DEATH",
    "EVENT_TRUNCATED",
    "run_simulation",
    "replicate",
    "repost_counts_by_link",
    "events_to_jsonl",
    "events_from_jsonl",
    "life_stats_to_jsonl",
    "life_stats_from_jsonl",
    "calibrated_default_config",
]

EVENT_SELF_GENERATE = "self_generate"
EVENT_REPOST = "repost"
EVENT_LIKE = "like"
EVENT_DEATH = "death"
# Marker appended when max_agents halts a run early; not a regular agent
# event, its agent_id is -1.
EVENT_TRUNCATED = "truncated"


@dataclass(frozen=True)
class SimulationConfig:
    params: BehaviorParams
    horizon: int
    seed: int
    max_agents: Optional[int] = None
    initial_agents: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.initial_agents < 1:
            raise ValueError(f"initial_agents must be >= 1, got {self.initial_agents}")
        if self.max_agents is not None and self.max_agents < 1:
            raise ValueError(f"max_agents must be >= 1, got {self.max_agents}")


@dataclass(frozen=True)
class EventRecord:
    tick: int
    kind: str
    agent_id: int
    related_agent_id: Optional[int] = None


@dataclass(frozen=True)
class AgentLifeStats:
    agent_id: int
    lifetime: int
    censored: bool
    total_likes: int
    total_reposts: int
    carried_link: Optional[str] = None


@dataclass
class SimulationResult:
    events: list[EventRecord]
    agents: list[AgentState]
    stats: list[AgentLifeStats]
    truncated: bool = False
    truncated_at: Optional[int] = None


def run_simulation(config: SimulationConfig, record_events: bool = True) -> SimulationResult:
    """Run one simulation; equal configs produce identical results.

    With ``record_events=False`` the event log is skipped (the random
    stream and all statistics are unchanged); replication harnesses use
    this to keep memory flat.
    """
    params = config.params
    rng = random.Random(config.seed)
    rand = rng.random
    e0 = params.e0
    p_s = params.p_s
    carrier_frac = params.link_carrier_fraction
    gamma_active = params.rich_get_richer_gamma > 0.0

    # Per-agent parallel arrays indexed by id (assigned in creation order).
    birth: list[int] = []
    energy: list[int] = []
    parent: list[Optional[int]] = []
    likes: list[int] = []
    reposts: list[int] = []
    link: list[Optional[str]] = []
    death_tick: list[Optional[int]] = []

    events: list[EventRecord] = []
    link_counter = 0
    seed_tag = f"r{config.seed}"

    def spawn_root(tick: int) -> int:
        # Self-generated message: fresh id, maybe carrying a new link.
        nonlocal link_counter
        aid = len(birth)
        carries = rand() < carrier_frac
        if carries:
            ref: Optional[str] = f"{seed_tag}-l{link_counter}"
            link_counter += 1
        else:
            ref = None
        birth.append(tick)
        energy.append(e0)
        parent.append(None)
        likes.append(0)
        reposts.append(0)
        link.append(ref)
        death_tick.append(None)
        return aid

    def spawn_child(tick: int, parent_id: int) -> int:
        aid = len(birth)
        birth.append(tick)
        energy.append(e0)
        parent.append(parent_id)
        likes.append(0)
        reposts.append(0)
        link.append(link[parent_id])
        death_tick.append(None)
        return aid

    # Cumulative step thresholds cached per (energy, link?, tally) key;
    # the repost tally only matters once the preferential term is on.
    threshold_cache: dict[tuple, tuple[float, float, float]] = {}

    def thresholds(e: int, has_link: bool, n_reposts: int) -> tuple[float, float, float]:
        key = (e, has_link, n_reposts if (gamma_active and has_link) else 0)
        cached = threshold_cache.get(key)
        if cached is not None:
            return cached
        p_like = params.like_prob(e)
        p_like = 0.0 if p_like < 0.0 else 1.0 if p_like > 1.0 else p_like
        p_repost = effective_repost_prob(e, params, has_link, n_reposts)
        c2 = p_like * p_repost
        c21 = c2 + (1.0 - p_like) * p_repost
        c210 = c21 + p_like * (1.0 - p_repost)
        out = (c2, c21, c210)
        threshold_cache[key] = out
        return out

    active: list[int] = []       # stepping this tick, ascending ids
    pending: list[int] = []      # born this tick, step from the next one
    truncated = False
    truncated_at: Optional[int] = None

    # Initial agents are the tick-0 self-generations; tick 0 still takes
    # its own Bernoulli(p_s) draw afterwards like every other tick.
    for _ in range(config.initial_agents):
        aid = spawn_root(0)
        pending.append(aid)
        if record_events:
            events.append(EventRecord(0, EVENT_SELF_GENERATE, aid))
    if config.max_agents is not None and len(birth) > config.max_agents:
        truncated = True
        truncated_at = 0
        if record_events:
            events.append(EventRecord(0, EVENT_TRUNCATED, -1))

    for tick in range(config.horizon):
        if truncated:
            break
        if rand() < p_s:
            aid = spawn_root(tick)
            pending.append(aid)
            if record_events:
                events.append(EventRecord(tick, EVENT_SELF_GENERATE, aid))

        survivors: list[int] = []
        for aid in active:
            e = energy[aid]
            c2, c21, c210 = thresholds(e, link[aid] is not None, reposts[aid])
            u = rand()
            if u < c2:       # like + repost
                likes[aid] += 1
                child = spawn_child(tick, aid)
                reposts[aid] += 1
                pending.append(child)
                if record_events:
                    events.append(EventRecord(tick, EVENT_LIKE, aid))
                    events.append(EventRecord(tick, EVENT_REPOST, aid, child))
                energy[aid] = e + 2
                survivors.append(aid)
            elif u < c21:    # repost only
                child = spawn_child(tick, aid)
                reposts[aid] += 1
                pending.append(child)
                if record_events:
                    events.append(EventRecord(tick, EVENT_REPOST, aid, child))
                energy[aid] = e + 1
                survivors.append(aid)
            elif u < c210:   # like only, energy unchanged
                likes[aid] += 1
                if record_events:
                    events.append(EventRecord(tick, EVENT_LIKE, aid))
                survivors.append(aid)
            else:            # neither: decay, possibly death
                e -= 1
                energy[aid] = e
                if e == 0:
                    death_tick[aid] = tick
                    if record_events:
                        events.append(EventRecord(tick, EVENT_DEATH, aid))
                else:
                    survivors.append(aid)

        # Newborn ids all exceed surviving ids, so order stays ascending.
        survivors.extend(pending)
        active = survivors
        pending = []

        if config.max_agents is not None and len(birth) > config.max_agents:
            truncated = True
            truncated_at = tick
            if record_events:
                events.append(EventRecord(tick, EVENT_TRUNCATED, -1))

    # Censoring point: end of the horizon, or end of the truncated tick.
    censor_tick = (truncated_at + 1) if truncated else config.horizon

    agents: list[AgentState] = []
    stats: list[AgentLifeStats] = []
    for aid in range(len(birth)):
        dead = death_tick[aid] is not None
        n_rep = reposts[aid]
        agents.append(
            AgentState(
                id=aid,
                birth_tick=birth[aid],
                energy=energy[aid],
                parent_id=parent[aid],
                likes_received=likes[aid],
                reposts_spawned=n_rep,
                authority=n_rep,
                link_ref=link[aid],
                alive=not dead,
            )
        )
        lifetime = (death_tick[aid] - birth[aid]) if dead else (censor_tick - birth[aid])
        stats.append(
            AgentLifeStats(
                agent_id=aid,
                lifetime=lifetime,
                censored=not dead,
                total_likes=likes[aid],
                total_reposts=n_rep,
                carried_link=link[aid],
            )
        )

    return SimulationResult(
        events=events,
        agents=agents,
        stats=stats,
        truncated=truncated,
        truncated_at=truncated_at,
    )


def replicate(config: SimulationConfig, n_runs: int) -> list[AgentLifeStats]:
    """Pool life statistics over runs seeded seed, seed+1, ..., seed+n-1."""
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    pooled: list[AgentLifeStats] = []
    for k in range(n_runs):
        cfg = SimulationConfig(
            params=config.params,
            horizon=config.horizon,
            seed=config.seed + k,
            max_agents=config.max_agents,
            initial_agents=config.initial_agents,
        )
        pooled.extend(run_simulation(cfg, record_events=False).stats)
    return pooled


def repost_counts_by_link(stats: Iterable[AgentLifeStats]) -> dict[str, int]:
    """Total reposts per carried link; agents without links are skipped."""
    counts: dict[str, int] = {}
    for s in stats:
        if s.carried_link is None:
            continue
        counts[s.carried_link] = counts.get(s.carried_link, 0) + s.total_reposts
    return counts


def events_to_jsonl(events: Iterable[EventRecord]) -> str:
    lines = []
    for e in events:
        lines.append(
            json.dumps(
                {
                    "tick": e.tick,
                    "kind": e.kind,
                    "agent_id": e.agent_id,
                    "related_agent_id": e.related_agent_id,
                }
            )
        )
    return "".join(line + "\n" for line in lines)


def events_from_jsonl(text: str) -> list[EventRecord]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            EventRecord(
                tick=d["tick"],
                kind=d["kind"],
                agent_id=d["agent_id"],
                related_agent_id=d.get("related_agent_id"),
            )
        )
    return out


def life_stats_to_jsonl(stats: Iterable[AgentLifeStats]) -> str:
    lines = []
    for s in stats:
        lines.append(
            json.dumps(
                {
                    "agent_id": s.agent_id,
                    "lifetime": s.lifetime,
                    "censored": s.censored,
                    "total_likes": s.total_likes,
                    "total_reposts": s.total_reposts,
                    "carried_link": s.carried_link,
                }
            )
        )
    return "".join(line + "\n" for line in lines)


def life_stats_from_jsonl(text: str) -> list[AgentLifeStats]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            AgentLifeStats(
                agent_id=d["agent_id"],
                lifetime=d["lifetime"],
                censored=d["censored"],
                total_likes=d["total_likes"],
                total_reposts=d["total_reposts"],
                carried_link=d.get("carried_link"),
            )
        )
    return out


# Default configuration, calibrated once: pooled repost counts of the
# completed agents over 10^4 replications fit Weibull shape k = 1.84,
# scale 3.83 (see tests/test_acceptance.py).  Strong negative energy
# drift with a high starting energy concentrates lifetimes, which is
# what pushes the count shape parameter near 1.9.
CALIBRATED_P_S = 0.0
CALIBRATED_E0 = 28
CALIBRATED_P_LIKE = 0.20
CALIBRATED_P_REPOST = 0.10
CALIBRATED_HORIZON = 65
CALIBRATED_SEED = 20160501


def calibrated_default_config(
    seed: int = CALIBRATED_SEED,
    horizon: int = CALIBRATED_HORIZON,
) -> SimulationConfig:
    """The shipped default simulation configuration."""
    return SimulationConfig(
        params=BehaviorParams.constant(
            p_s=CALIBRATED_P_S,
            e0=CALIBRATED_E0,
            p_like=CALIBRATED_P_LIKE,
            p_repost=CALIBRATED_P_REPOST,
        ),
        horizon=horizon,
        seed=seed,
        max_agents=None,
        initial_agents=1,
    )
