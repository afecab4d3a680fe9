"""Two-pass message passing over a rooted decomposition.

The upward pass computes every bag's factor product and its message to the
parent (leaves to root, level order).  The downward pass calibrates: each
bag's product is multiplied in place by the ratio of the parent's separator
marginal to the bag's own up-message, located through indices recorded
during the upward pass rather than by re-joining.  Afterwards every bag's
product carries the same total mass (the partition function, up to the
rescaling shift) and all marginals read off any containing bag agree.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cover import CoverSolution, solve_fractional_cover
from .decomposition import Ghd
from .errors import InconsistentModelError, IndexOverflowError
from .model import FactorTable, MarginalSet, Model
from .products import (
    STRATEGY_MULTIWAY_PROJECTIONS,
    STRATEGY_PAIRWISE,
    ProductResult,
    ProductTask,
    multiway_product,
    pairwise_product,
    run_kernel,
    zero_one_projection,
)
from .storage import IndexedList, build_index_list, encode_index

# Rescaling kicks in when a bag's peak probability leaves this range.
_RESCALE_LO = 1e-300
_RESCALE_HI = 1e300


@dataclass
class BagState:
    """Per-bag result of the passes.

    ``rows``/``probs`` hold the bag product in kernel order (``order``);
    ``probs`` is updated in place by the downward pass.  ``up_message`` is
    the marginalized message sent to the parent, stored both as a table and
    as a reverse-sorted index list whose slots the down-message reuses.
    """

    bag_id: int
    order: tuple[int, ...]
    rows: np.ndarray
    probs: np.ndarray
    sep_pos: np.ndarray
    up_message: FactorTable | None
    up_list: IndexedList | None
    emission_to_list: np.ndarray | None
    down_probs: np.ndarray | None
    cover: CoverSolution
    strategy: int
    visited: int
    work: int
    seconds: float = 0.0
    other_visited: int | None = None
    other_work: int | None = None

    @property
    def mass(self) -> float:
        return float(self.probs.sum()) if len(self.probs) else 0.0


@dataclass
class UpResult:
    states: dict[int, BagState]
    log_shift: float
    agm_violations: list[str]


def bag_order(ghd: Ghd, bag_id: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Kernel variable order for a bag: separator first, each group ascending.

    Returns (order, marginal_vars); the root marginalizes nothing, so its
    marginal variables are the whole bag.
    """
    b = ghd.bags[bag_id]
    if b.parent is None:
        order = tuple(sorted(b.chi))
        return order, order
    sep = tuple(sorted(b.separator))
    rest = tuple(sorted(set(b.chi) - set(sep)))
    return sep + rest, sep


def bag_inputs(
    ghd: Ghd,
    model: Model,
    bag_id: int,
    states: dict[int, BagState],
    strategy: int,
) -> list[FactorTable]:
    """Assemble a bag's kernel inputs: assigned factors, child messages, and
    (for the projection strategy) support projections of outside factors.

    A bag variable constrained by nothing (possible when its only factors
    live across the parent separator, or when it sits in no factor at all)
    gets an explicit uniform unit factor, so every task covers its bag.
    """
    b = ghd.bags[bag_id]
    inputs = [model.factors[fid] for fid in b.alpha]
    for w in b.children:
        inputs.append(states[w].up_message)
    if strategy == STRATEGY_MULTIWAY_PROJECTIONS:
        assigned = set(b.alpha)
        chi_set = set(b.chi)
        for fid, f in enumerate(model.factors):
            if fid not in assigned and chi_set & set(f.scope):
                inputs.append(zero_one_projection(f, b.chi))
    covered = {v for f in inputs for v in f.scope}
    for v in sorted(set(b.chi) - covered):
        domain = model.variables[v].domain_size
        inputs.append(
            FactorTable.from_entries((v,), (((x,), 1.0) for x in range(domain)))
        )
    return inputs


def _cover_for(
    bag_id: int, chi: Sequence[int], domains: Sequence[int], inputs: Sequence[FactorTable]
) -> CoverSolution:
    edges: list[tuple[tuple[int, ...], int]] = [
        (f.scope, f.size) for f in inputs if f.scope
    ]
    covered = {v for scope, _ in edges for v in scope}
    for v in sorted(set(chi) - covered):
        # Variables no input constrains range over their whole domain.
        edges.append(((v,), domains[v]))
    return solve_fractional_cover(chi, edges, bag=bag_id)


def _rescale(result: ProductResult) -> tuple[ProductResult, float]:
    if not len(result.probs):
        return result, 0.0
    peak = float(result.probs.max())
    if peak <= 0.0 or _RESCALE_LO <= peak <= _RESCALE_HI:
        return result, 0.0
    # Divide by the peak itself: forming exp(-log(peak)) would overflow for
    # subnormal peaks, element-wise division does not.
    shift = math.log(peak)
    result.probs /= peak
    message = FactorTable.from_entries(
        result.message.scope,
        ((t, p / peak) for t, p in zip(result.message.tuples, result.message.probs)),
    )
    result.message = message
    return result, shift


def upward_pass(
    ghd: Ghd,
    model: Model,
    strategies: Sequence[int],
    dense_cap: int = 2**31,
    deadline: Callable[[], None] | None = None,
    compare_kernels: bool = False,
) -> UpResult:
    """Run every bag's kernel from the leaves to the root.

    With ``compare_kernels`` (test mode), bags whose truth table fits the cap
    also run the kernel they did not select; the results must agree and both
    counters land in the bag state.
    """
    domains = model.domain_sizes
    states: dict[int, BagState] = {}
    log_shift = 0.0
    agm_violations: list[str] = []

    for bid in ghd.topo_up():
        started = time.perf_counter()
        b = ghd.bags[bid]
        order, marginal_vars = bag_order(ghd, bid)
        strategy = strategies[bid]
        inputs = bag_inputs(ghd, model, bid, states, strategy)
        cover = _cover_for(bid, b.chi, domains, inputs)
        task = ProductTask(
            bag_vars=order,
            domain_sizes=tuple(domains[v] for v in order),
            inputs=tuple(inputs),
            marginal_vars=marginal_vars,
            strategy=strategy,
        )
        result = run_kernel(task, dense_cap=dense_cap, deadline=deadline)
        other_visited = other_work = None
        if compare_kernels:
            table = 1
            for v in order:
                table *= domains[v]
            if table <= min(dense_cap, 10**6):
                if strategy == STRATEGY_PAIRWISE:
                    other = multiway_product(task, deadline=deadline)
                else:
                    other = pairwise_product(task, dense_cap=dense_cap, deadline=deadline)
                if result.rows.tolist() != other.rows.tolist() or not np.allclose(
                    result.probs, other.probs, rtol=1e-12, atol=0.0
                ):
                    agm_violations.append(f"bag {bid}: kernels disagree")
                other_visited, other_work = other.visited, other.work
        if len(result.rows) and math.log2(len(result.rows)) > cover.log2_bound + 1e-9:
            agm_violations.append(
                f"bag {bid}: product size {len(result.rows)} exceeds bound "
                f"2^{cover.log2_bound:.6f}"
            )
        if result.visited and math.log2(result.visited) > cover.log2_bound + math.log2(
            max(len(order), 1)
        ) + 1e-9:
            agm_violations.append(
                f"bag {bid}: visited counter {result.visited} exceeds bound x levels"
            )
        result, shift = _rescale(result)
        log_shift += shift

        up_message = None
        up_list = None
        emission_to_list = None
        if b.parent is not None:
            up_message = result.message
            try:
                up_list = build_index_list(up_message, domains, kind="forward_and_reverse")
                radices = up_list.radices
                rev = np.array(
                    [encode_index(t, radices, reverse=True) for t in up_message.tuples],
                    dtype=np.int64,
                )
                emission_to_list = np.searchsorted(up_list.reverse_indices, rev)
            except IndexOverflowError:
                up_list = None
                emission_to_list = None

        states[bid] = BagState(
            bag_id=bid,
            order=order,
            rows=result.rows,
            probs=result.probs,
            sep_pos=result.sep_pos,
            up_message=up_message,
            up_list=up_list,
            emission_to_list=emission_to_list,
            down_probs=None,
            cover=cover,
            strategy=strategy,
            visited=result.visited,
            work=result.work,
            seconds=time.perf_counter() - started,
            other_visited=other_visited,
            other_work=other_work,
        )
    return UpResult(states=states, log_shift=log_shift, agm_violations=agm_violations)


def _project_mass(
    state: BagState, positions: Sequence[int], weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate a bag product onto a variable subset, keyed by reverse index."""
    if not len(state.rows):
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    if positions:
        enc = state.rows[:, list(positions)] @ weights
    else:
        enc = np.zeros(len(state.rows), dtype=np.int64)
    uniq, inverse = np.unique(enc, return_inverse=True)
    sums = np.bincount(inverse, weights=state.probs)
    return uniq, sums


def _reverse_weights(radices: Sequence[int]) -> np.ndarray:
    # Position i of the forward-ordered assignment weighs prod(radices[:i])
    # in the reverse encoding.
    weights = []
    acc = 1
    for r in radices:
        weights.append(acc)
        acc *= r
    return np.array(weights, dtype=np.int64)


def downward_pass(
    ghd: Ghd,
    states: dict[int, BagState],
    deadline: Callable[[], None] | None = None,
) -> dict[int, BagState]:
    """Calibrate all bags from the root toward the leaves.

    For each child: the parent's (already updated) product marginalizes onto
    the separator; the correction is that marginal divided entry-wise by the
    child's up-message (0/0 := 0), applied to the child's product rows via
    the index positions recorded on the way up.
    """
    for uid in ghd.topo_down():
        parent = states[uid]
        for vid in ghd.bags[uid].children:
            if deadline is not None:
                deadline()
            child = states[vid]
            message = child.up_message
            sep = message.scope
            positions = [parent.order.index(v) for v in sep]

            if child.up_list is not None:
                weights = _reverse_weights(child.up_list.radices)
                uniq, sums = _project_mass(parent, positions, weights)
                idx = np.searchsorted(uniq, child.up_list.reverse_indices)
                idx_clamped = np.minimum(idx, max(len(uniq) - 1, 0))
                if len(uniq):
                    found = uniq[idx_clamped] == child.up_list.reverse_indices
                    down = np.where(found, sums[idx_clamped], 0.0)
                else:
                    down = np.zeros(len(child.up_list), dtype=np.float64)
                up_probs = child.up_list.probs
                corr_list = np.divide(
                    down,
                    np.where(up_probs > 0.0, up_probs, 1.0),
                    out=np.zeros_like(down),
                    where=up_probs > 0.0,
                )
                corr_emission = corr_list[child.emission_to_list]
                child.down_probs = down
            else:
                # Index overflow fallback: hash on raw assignments.
                mass: dict[tuple[int, ...], float] = {}
                for row, p in zip(parent.rows, parent.probs):
                    key = tuple(int(row[i]) for i in positions)
                    mass[key] = mass.get(key, 0.0) + float(p)
                corr_emission = np.array(
                    [
                        mass.get(t, 0.0) / p if p > 0 else 0.0
                        for t, p in zip(message.tuples, message.probs)
                    ],
                    dtype=np.float64,
                )
                child.down_probs = np.array(
                    [mass.get(t, 0.0) for t in message.tuples], dtype=np.float64
                )
            if len(child.probs):
                child.probs *= corr_emission[child.sep_pos]
    return states


def extract_marginals(
    ghd: Ghd, states: dict[int, BagState], model: Model, log_shift: float = 0.0
) -> MarginalSet:
    """Read normalized variable and factor marginals off the calibrated bags.

    Every variable reads from the smallest bag containing it, every factor
    from its assigned bag; each table is normalized by that bag's own mass.
    The partition function folds in the rescaling shift and the model's
    scalar weight.
    """
    root_mass = states[ghd.root].mass
    if root_mass <= 0.0:
        raise InconsistentModelError("the joint distribution has zero total mass")
    log_partition = math.log(root_mass) + log_shift + model.log_scale

    domains = model.domain_sizes
    owner: dict[int, int] = {}
    for b in sorted(ghd.bags, key=lambda b: (len(b.chi), b.id)):
        for v in b.chi:
            owner.setdefault(v, b.id)

    variable_marginals = []
    for v in range(model.num_variables):
        state = states[owner[v]]
        col = state.order.index(v)
        if len(state.rows):
            dist = np.bincount(
                state.rows[:, col], weights=state.probs, minlength=domains[v]
            )
        else:
            dist = np.zeros(domains[v])
        mass = state.mass
        if mass <= 0.0:
            raise InconsistentModelError(f"bag {state.bag_id} carries zero mass")
        variable_marginals.append(tuple(float(x) for x in dist / mass))

    factor_marginals: list[FactorTable] = []
    assigned_bag = {}
    for b in ghd.bags:
        for fid in b.alpha:
            assigned_bag[fid] = b.id
    for fid, f in enumerate(model.factors):
        state = states[assigned_bag[fid]]
        positions = [state.order.index(v) for v in f.scope]
        mass = state.mass
        entries: dict[tuple[int, ...], float] = {}
        for row, p in zip(state.rows, state.probs):
            key = tuple(int(row[i]) for i in positions)
            entries[key] = entries.get(key, 0.0) + float(p)
        factor_marginals.append(
            FactorTable.from_entries(
                f.scope, ((t, p / mass) for t, p in entries.items())
            )
        )

    return MarginalSet(
        variable_marginals=tuple(variable_marginals),
        factor_marginals=tuple(factor_marginals),
        log_partition=log_partition,
    )


def calibration_gaps(ghd: Ghd, states: dict[int, BagState]) -> list[tuple[int, int, float]]:
    """Worst relative separator disagreement per tree edge, post-calibration."""
    gaps = []
    for uid, vid in ghd.edges():
        sep = ghd.bags[vid].separator
        tables = []
        for sid in (uid, vid):
            state = states[sid]
            positions = [state.order.index(v) for v in sep]
            table: dict[tuple[int, ...], float] = {}
            for row, p in zip(state.rows, state.probs):
                key = tuple(int(row[i]) for i in positions)
                table[key] = table.get(key, 0.0) + float(p)
            tables.append(table)
        a, b = tables
        worst = 0.0
        for key in set(a) | set(b):
            x, y = a.get(key, 0.0), b.get(key, 0.0)
            denom = max(abs(x), abs(y))
            if denom > 0:
                worst = max(worst, abs(x - y) / denom)
        gaps.append((uid, vid, worst))
    return gaps
