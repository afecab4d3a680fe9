"""End-to-end inference pipeline.

``prepare`` conditions a model on its evidence and builds the decomposition;
``infer_prepared`` runs one mode over that plan.  Marginals come back in the
original model's variable and factor numbering, with evidence variables as
point distributions.  ``diagnostics`` computes the structural measures
(treewidth, fractional hypertree width, total table size, predictors)
without running inference.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .cover import predictors
from .decomposition import Ghd, build_ghd, min_fill_order, rho
from .errors import InferenceTimeoutError
from .hybrid import MODES, StrategyMap, assign_strategies
from .model import FactorTable, MarginalSet, Model, condition_on_evidence
from .propagation import (
    BagState,
    calibration_gaps,
    downward_pass,
    extract_marginals,
    upward_pass,
)


@dataclass(frozen=True)
class EngineConfig:
    mode: str = "hybrid"
    dense_table_cap: int = 2**31
    hybrid_beta: float = 1.0
    hybrid_sigma: float = 0.9
    timeout_seconds: float | None = None
    root_override: int | None = None
    collect_stats: bool = False
    compare_kernels: bool = False  # test mode: run both kernels per bag

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")


class Deadline:
    """Cooperative wall-clock budget checked inside the passes."""

    def __init__(self, seconds: float | None):
        self._expires = None if seconds is None else time.monotonic() + seconds

    def __call__(self) -> None:
        if self._expires is not None and time.monotonic() > self._expires:
            raise InferenceTimeoutError("inference exceeded the configured time budget")


@dataclass
class BagStats:
    bag: int
    chi_size: int
    lambda_size: int
    strategy: int
    visited: int
    work: int
    product_size: int
    message_size: int
    log2_bound: float
    weights: tuple[float, ...]
    seconds: float
    other_visited: int | None = None
    other_work: int | None = None


@dataclass
class EngineStats:
    treewidth: int
    bag_count: int
    rho: int
    log10_rho: float
    strategy: StrategyMap
    bags: list[BagStats]
    agm_violations: list[str]
    fhtw: float | None = None
    log10_bound_sum_ratio: float | None = None
    log10_width_ratio: float | None = None
    calibration_gap: float | None = None
    seconds: float = 0.0


@dataclass
class Plan:
    """Reusable conditioned model plus decomposition."""

    original: Model
    conditioned: Model
    ghd: Ghd | None  # None when evidence fixed every variable
    ordering: list[int]


@dataclass
class InferenceResult:
    marginals: MarginalSet
    stats: EngineStats | None
    states: dict[int, BagState] | None = None


def prepare(model: Model, root_override: int | None = None) -> Plan:
    conditioned = condition_on_evidence(model)
    if conditioned.num_variables == 0:
        return Plan(original=model, conditioned=conditioned, ghd=None, ordering=[])
    ordering = min_fill_order(conditioned)
    ghd = build_ghd(conditioned, ordering, root_override=root_override)
    return Plan(original=model, conditioned=conditioned, ghd=ghd, ordering=ordering)


def _embed_marginals(original: Model, conditioned: Model, inner: MarginalSet) -> MarginalSet:
    """Translate conditioned-space marginals back to the original numbering."""
    evidence = original.evidence_dict()
    source_ids = conditioned.source_ids or tuple(range(conditioned.num_variables))
    by_source = {src: i for i, src in enumerate(source_ids)}

    variable_marginals = []
    for v in range(original.num_variables):
        if v in evidence:
            dist = [0.0] * original.variables[v].domain_size
            dist[evidence[v]] = 1.0
            variable_marginals.append(tuple(dist))
        else:
            variable_marginals.append(inner.variable_marginals[by_source[v]])

    source_factor_ids = conditioned.source_factor_ids or tuple(
        range(conditioned.num_factors)
    )
    inner_factor = {src: i for i, src in enumerate(source_factor_ids)}
    factor_marginals = []
    for fid, f in enumerate(original.factors):
        if fid in inner_factor:
            fm = inner.factor_marginals[inner_factor[fid]]
            # Reinsert evidence components; map surviving components back.
            entries = []
            free = [i for i, v in enumerate(f.scope) if v not in evidence]
            for t, p in zip(fm.tuples, fm.probs):
                full = [0] * len(f.scope)
                for slot, value in zip(free, t):
                    full[slot] = value
                for i, v in enumerate(f.scope):
                    if v in evidence:
                        full[i] = evidence[v]
                entries.append((tuple(full), p))
            factor_marginals.append(FactorTable.from_entries(f.scope, entries))
        else:
            # Fully fixed by evidence: a point table at the evidence row.
            row = tuple(evidence[v] for v in f.scope)
            factor_marginals.append(FactorTable.from_entries(f.scope, [(row, 1.0)]))

    return MarginalSet(
        variable_marginals=tuple(variable_marginals),
        factor_marginals=tuple(factor_marginals),
        log_partition=inner.log_partition,
    )


def infer_prepared(plan: Plan, config: EngineConfig = EngineConfig()) -> InferenceResult:
    deadline = Deadline(config.timeout_seconds)
    started = time.perf_counter()
    conditioned = plan.conditioned

    if plan.ghd is None:
        # Every variable was fixed by evidence; Z is the folded scalar.
        inner = MarginalSet(
            variable_marginals=(),
            factor_marginals=(),
            log_partition=conditioned.log_scale,
        )
        marginals = _embed_marginals(plan.original, conditioned, inner)
        return InferenceResult(marginals=marginals, stats=None, states=None)

    ghd = plan.ghd
    strategy_map = assign_strategies(
        ghd,
        conditioned,
        config.mode,
        beta=config.hybrid_beta,
        sigma=config.hybrid_sigma,
        dense_cap=config.dense_table_cap,
    )
    deadline()
    up = upward_pass(
        ghd,
        conditioned,
        strategy_map.assignment,
        dense_cap=config.dense_table_cap,
        deadline=deadline,
        compare_kernels=config.compare_kernels,
    )
    states = downward_pass(ghd, up.states, deadline=deadline)
    inner = extract_marginals(ghd, states, conditioned, log_shift=up.log_shift)
    marginals = _embed_marginals(plan.original, conditioned, inner)

    stats = None
    if config.collect_stats:
        domains = conditioned.domain_sizes
        rho_value = rho(ghd, domains)
        pred = predictors(ghd, conditioned)
        bags = [
            BagStats(
                bag=b.id,
                chi_size=len(b.chi),
                lambda_size=len(b.lambda_edges),
                strategy=states[b.id].strategy,
                visited=states[b.id].visited,
                work=states[b.id].work,
                product_size=len(states[b.id].probs),
                message_size=len(states[b.id].up_message.tuples)
                if states[b.id].up_message is not None
                else 0,
                log2_bound=states[b.id].cover.log2_bound,
                weights=states[b.id].cover.weights,
                seconds=states[b.id].seconds,
                other_visited=states[b.id].other_visited,
                other_work=states[b.id].other_work,
            )
            for b in ghd.bags
        ]
        gaps = calibration_gaps(ghd, states)
        stats = EngineStats(
            treewidth=ghd.treewidth,
            bag_count=len(ghd.bags),
            rho=rho_value,
            log10_rho=pred.log10_rho,
            strategy=strategy_map,
            bags=bags,
            agm_violations=up.agm_violations,
            fhtw=pred.fhtw,
            log10_bound_sum_ratio=pred.log10_bound_sum_ratio,
            log10_width_ratio=pred.log10_width_ratio,
            calibration_gap=max((g for _, _, g in gaps), default=0.0),
            seconds=time.perf_counter() - started,
        )
    else:
        rho_value = rho(ghd, conditioned.domain_sizes)
        stats = EngineStats(
            treewidth=ghd.treewidth,
            bag_count=len(ghd.bags),
            rho=rho_value,
            log10_rho=math.log10(rho_value),
            strategy=strategy_map,
            bags=[],
            agm_violations=up.agm_violations,
            seconds=time.perf_counter() - started,
        )
    return InferenceResult(marginals=marginals, stats=stats, states=states)


def run_inference(model: Model, config: EngineConfig = EngineConfig()) -> InferenceResult:
    plan = prepare(model, root_override=config.root_override)
    return infer_prepared(plan, config)


def format_stats(stats: EngineStats) -> str:
    """Human-readable diagnostics block."""
    lines = ["== diagnostics =="]
    lines.append(f"bags: {stats.bag_count}  tw: {stats.treewidth}")
    if stats.fhtw is not None:
        lines.append(f"fhtw: {stats.fhtw:.6g}")
    if stats.rho < 10**9:
        lines.append(f"rho: {stats.rho}  (log10: {stats.log10_rho:.4f})")
    else:
        lines.append(f"rho: 10^{stats.log10_rho:.4f}")
    if stats.log10_bound_sum_ratio is not None:
        lines.append(f"R_J (log10): {stats.log10_bound_sum_ratio:.4f}")
    if stats.log10_width_ratio is not None:
        lines.append(f"R_D (log10): {stats.log10_width_ratio:.4f}")
    lines.append(f"strategy map: {list(stats.strategy.assignment)}")
    for seed in stats.strategy.seeds:
        lines.append(
            f"  seed bag {seed.bag}: log2 table {seed.log2_table:.3f} "
            f"log2 bound {seed.log2_bound:.3f} -> strategy {seed.strategy}"
        )
    for b in stats.bags:
        log10_bound = b.log2_bound * math.log10(2.0)
        line = (
            f"bag {b.bag}: |chi|={b.chi_size} |lambda|={b.lambda_size} "
            f"strategy={b.strategy} visited={b.visited} work={b.work} "
            f"product={b.product_size} message={b.message_size} "
            f"log10bound={log10_bound:.4f} x*={[round(w, 4) for w in b.weights]} "
            f"time={b.seconds:.4f}s"
        )
        if b.other_visited is not None:
            line += f" other_kernel: visited={b.other_visited} work={b.other_work}"
        lines.append(line)
    if stats.calibration_gap is not None:
        lines.append(f"calibration gap: {stats.calibration_gap:.3e}")
    lines.append(f"AGM violations: {len(stats.agm_violations)}")
    lines.extend(f"  {v}" for v in stats.agm_violations)
    lines.append(f"elapsed: {stats.seconds:.4f}s")
    return "\n".join(lines)
