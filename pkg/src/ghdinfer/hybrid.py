"""Per-bag kernel strategy selection.

Fixed modes map every bag to one strategy.  Hybrid mode decides per seed bag
(a bag with at least one assigned factor, visited in decreasing truth-table
order) whether the dense truth-table product or the multiway join is the
better fit, then floods that decision through the seed's subtree until it
hits bags that already carry one.  Undecided leftovers form an
upward-closed region containing the root and inherit the first seed's
decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .cover import solve_cover
from .decomposition import Ghd
from .model import Model
from .products import (
    STRATEGY_MULTIWAY,
    STRATEGY_MULTIWAY_PROJECTIONS,
    STRATEGY_PAIRWISE,
)

MODES = ("multiway", "multiway01", "pairwise", "hybrid")

_FIXED = {
    "multiway": STRATEGY_MULTIWAY,
    "multiway01": STRATEGY_MULTIWAY_PROJECTIONS,
    "pairwise": STRATEGY_PAIRWISE,
}


@dataclass(frozen=True)
class SeedDecision:
    bag: int
    log2_table: float
    log2_bound: float
    strategy: int


@dataclass(frozen=True)
class StrategyMap:
    """Total assignment of a strategy to every bag.

    ``regions`` groups bags by the assignment event that decided them; every
    region is a connected subtree by construction.
    """

    assignment: tuple[int, ...]
    regions: tuple[tuple[int, ...], ...]
    seeds: tuple[SeedDecision, ...]

    def __getitem__(self, bag: int) -> int:
        return self.assignment[bag]


def _log2_table(chi: Sequence[int], domains: Sequence[int]) -> float:
    return sum(math.log2(domains[v]) for v in chi)


def _wants_projections(ghd: Ghd, model: Model, bag_id: int, sigma: float) -> bool:
    """A bag benefits from support projections when some factor assigned
    elsewhere projects onto it with support fraction below sigma."""
    b = ghd.bags[bag_id]
    domains = model.domain_sizes
    chi_set = set(b.chi)
    assigned = set(b.alpha)
    for fid, f in enumerate(model.factors):
        if fid in assigned:
            continue
        proj = tuple(sorted(chi_set & set(f.scope)))
        if not proj:
            continue
        frac = min(1.0, f.size / 2 ** _log2_table(proj, domains))
        if frac < sigma:
            return True
    return False


def _seed_decision(
    ghd: Ghd,
    model: Model,
    bag_id: int,
    beta: float,
    sigma: float,
    dense_cap: int,
) -> SeedDecision:
    """Decide one seed bag from its assigned factors alone.

    Dense wins when the bag's truth table fits the cap and is no larger than
    beta times the join bound; otherwise the bag joins, with projections
    included when some outside factor projects onto it usefully (support
    fraction below sigma).  The dense-versus-join half of the decision is
    what floods through the subtree; the projection refinement is re-derived
    per bag, since it depends on which factors surround each bag.
    """
    b = ghd.bags[bag_id]
    domains = model.domain_sizes
    chi_set = set(b.chi)
    edges = []
    for fid in b.alpha:
        f = model.factors[fid]
        edges.append((f.scope, math.log2(max(f.size, 1))))
    covered = {v for scope, _ in edges for v in scope}
    for v in sorted(chi_set - covered):
        edges.append(((v,), math.log2(domains[v])))
    bound = solve_cover(b.chi, edges, bag=bag_id).log2_bound

    log2_table = _log2_table(b.chi, domains)
    if log2_table <= math.log2(dense_cap) and log2_table <= math.log2(beta) + bound:
        strategy = STRATEGY_PAIRWISE
    elif _wants_projections(ghd, model, bag_id, sigma):
        strategy = STRATEGY_MULTIWAY_PROJECTIONS
    else:
        strategy = STRATEGY_MULTIWAY
    return SeedDecision(
        bag=bag_id, log2_table=log2_table, log2_bound=bound, strategy=strategy
    )


def assign_strategies(
    ghd: Ghd,
    model: Model,
    mode: str,
    beta: float = 1.0,
    sigma: float = 0.9,
    dense_cap: int = 2**31,
) -> StrategyMap:
    """Build the strategy map for a mode.

    Hybrid propagation never leaves the dense strategy on a bag whose truth
    table exceeds the cap; such bags fall back to the plain multiway join as
    a singleton region.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    nbags = len(ghd.bags)
    if mode in _FIXED:
        value = _FIXED[mode]
        return StrategyMap(
            assignment=(value,) * nbags,
            regions=(tuple(range(nbags)),),
            seeds=(),
        )

    domains = model.domain_sizes
    seeds_order = sorted(
        (b.id for b in ghd.bags if b.alpha),
        key=lambda bid: (-_log2_table(ghd.bags[bid].chi, domains), bid),
    )
    assignment: list[int | None] = [None] * nbags
    regions: list[list[int]] = []
    seeds: list[SeedDecision] = []
    log2_cap = math.log2(dense_cap)

    def join_value(bid: int) -> int:
        if _wants_projections(ghd, model, bid, sigma):
            return STRATEGY_MULTIWAY_PROJECTIONS
        return STRATEGY_MULTIWAY

    def flood(start: int, value: int) -> None:
        # The dense-versus-join choice propagates; whether a joining bag
        # includes projections is its own property.  Dense never lands on a
        # bag whose truth table exceeds the cap (those join instead, as
        # singleton regions).
        region: list[int] = []
        fallback_region: list[int] = []
        stack = [start]
        while stack:
            bid = stack.pop()
            if assignment[bid] is not None:
                continue
            if value == STRATEGY_PAIRWISE:
                if _log2_table(ghd.bags[bid].chi, domains) > log2_cap:
                    assignment[bid] = join_value(bid)
                    fallback_region.append(bid)
                else:
                    assignment[bid] = STRATEGY_PAIRWISE
                    region.append(bid)
            else:
                assignment[bid] = join_value(bid)
                region.append(bid)
            stack.extend(ghd.bags[bid].children)
        if region:
            regions.append(region)
        for bid in fallback_region:
            regions.append([bid])

    for bid in seeds_order:
        decision = _seed_decision(ghd, model, bid, beta, sigma, dense_cap)
        seeds.append(decision)
        if assignment[bid] is None:
            flood(bid, decision.strategy)

    if any(a is None for a in assignment):
        default = seeds[0].strategy if seeds else STRATEGY_MULTIWAY
        leftover = [bid for bid in ghd.topo_down() if assignment[bid] is None]
        region = []
        for bid in leftover:
            if default == STRATEGY_PAIRWISE:
                if _log2_table(ghd.bags[bid].chi, domains) > log2_cap:
                    assignment[bid] = join_value(bid)
                    regions.append([bid])
                else:
                    assignment[bid] = STRATEGY_PAIRWISE
                    region.append(bid)
            else:
                assignment[bid] = join_value(bid)
                region.append(bid)
        if region:
            regions.append(region)

    return StrategyMap(
        assignment=tuple(assignment),  # type: ignore[arg-type]
        regions=tuple(tuple(sorted(r)) for r in regions),
        seeds=tuple(seeds),
    )
