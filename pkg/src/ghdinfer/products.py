"""Factor-product kernels.

Two interchangeable kernels compute, for one bag, the product of its input
factors over the bag variables together with the message marginalized onto a
prefix of the bag order:

* :func:`multiway_product` joins all inputs at once, variable by variable,
  intersecting the candidate values offered by every trie whose scope
  contains the current variable.  Its work is bounded by the bag's
  fractional-cover output bound, so it never materializes large intermediate
  products.
* :func:`pairwise_product` is the classical truth-table scheme: a dense
  array over the bag's full assignment space, multiplied factor by factor
  via index arithmetic.  It fails with :class:`ResourceLimitError` when the
  table would exceed the configured cell cap.

Bag orders always put the marginalized variables first, so both kernels can
emit the message as a prefix aggregation of the product, and both emit
product rows in lexicographic bag order.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ResourceLimitError
from .model import FactorTable
from .storage import LevelOrderTrie, build_trie

STRATEGY_MULTIWAY = 0
STRATEGY_MULTIWAY_PROJECTIONS = 1
STRATEGY_PAIRWISE = 2


@dataclass(frozen=True)
class ProductTask:
    """One bag's product computation.

    ``bag_vars`` is the kernel's variable order (marginal variables first);
    ``domain_sizes`` aligns with it.  Every input scope must be a subset of
    the bag.  ``marginal_vars`` must be a prefix of ``bag_vars``.
    """

    bag_vars: tuple[int, ...]
    domain_sizes: tuple[int, ...]
    inputs: tuple[FactorTable, ...]
    marginal_vars: tuple[int, ...]
    strategy: int = STRATEGY_MULTIWAY

    def __post_init__(self) -> None:
        if self.marginal_vars != self.bag_vars[: len(self.marginal_vars)]:
            raise ValueError("marginal_vars must be a prefix of bag_vars")
        if len(self.domain_sizes) != len(self.bag_vars):
            raise ValueError("domain_sizes must align with bag_vars")
        bag = set(self.bag_vars)
        for f in self.inputs:
            if not set(f.scope) <= bag:
                raise ValueError(f"input scope {f.scope} not within bag {self.bag_vars}")


@dataclass
class ProductResult:
    """Product and fused message of one kernel invocation.

    ``rows``/``probs`` list the product assignments (lexicographic in bag
    order).  ``sep_pos[i]`` is the message entry that row ``i`` aggregates
    into, which later lets corrections flowing back down be applied without
    re-joining.  ``visited`` counts candidate nodes the multiway search
    touched; ``work`` counts dense cells the pairwise scheme allocated.
    """

    bag_vars: tuple[int, ...]
    rows: np.ndarray
    probs: np.ndarray
    sep_pos: np.ndarray
    message: FactorTable
    visited: int
    work: int


def _empty_result(task: ProductTask) -> ProductResult:
    return ProductResult(
        bag_vars=task.bag_vars,
        rows=np.empty((0, len(task.bag_vars)), dtype=np.int64),
        probs=np.empty(0, dtype=np.float64),
        sep_pos=np.empty(0, dtype=np.int64),
        message=FactorTable.from_entries(task.marginal_vars, []),
        visited=0,
        work=0,
    )


def _advance(values: list[int], pos: int, hi: int, target: int, gallop: bool) -> int:
    """First index in values[pos:hi] holding a value >= target."""
    if gallop:
        step = 1
        probe = pos
        while probe < hi and values[probe] < target:
            pos = probe + 1
            probe += step
            step *= 2
        return bisect_left(values, target, pos, min(probe + 1, hi))
    while pos < hi and values[pos] < target:
        pos += 1
    return pos


def _intersect_sorted(
    slices: list[tuple[list[int], int, int]],
) -> list[tuple[int, tuple[int, ...]]]:
    """Intersect sorted sibling blocks; yields (value, position in each block).

    The smallest block drives; larger blocks advance by galloping when they
    are at least 4x bigger, linear merge otherwise.
    """
    order = sorted(range(len(slices)), key=lambda i: slices[i][2] - slices[i][1])
    dvals, dlo, dhi = slices[order[0]]
    driver_len = dhi - dlo
    others = order[1:]
    cursors = {i: slices[i][1] for i in others}
    out: list[tuple[int, tuple[int, ...]]] = []
    positions = [0] * len(slices)
    for dpos in range(dlo, dhi):
        value = dvals[dpos]
        positions[order[0]] = dpos
        matched = True
        for i in others:
            vals, lo, hi = slices[i]
            gallop = (hi - lo) >= 4 * driver_len
            cur = _advance(vals, cursors[i], hi, value, gallop)
            cursors[i] = cur
            if cur >= hi or vals[cur] != value:
                matched = False
                break
            positions[i] = cur
        if matched:
            out.append((value, tuple(positions)))
    return out


def _split_scalar(
    inputs: Sequence[FactorTable],
) -> tuple[float, list[FactorTable]]:
    """Fold empty-scope inputs into a constant; an empty table zeroes it."""
    scalar = 1.0
    proper = []
    for f in inputs:
        if f.scope:
            proper.append(f)
        else:
            scalar *= f.probs[0] if f.size else 0.0
    return scalar, proper


def multiway_product(
    task: ProductTask, deadline: Callable[[], None] | None = None
) -> ProductResult:
    """Worst-case optimal multiway join with fused marginalization.

    Walks the bag variables in order; at each depth intersects the candidate
    values of every input trie containing that variable (a variable no input
    constrains ranges over its full domain).  Probabilities multiply in as
    tries bottom out; message entries accumulate whenever the marginal
    prefix changes, so no second pass is needed.
    """
    scalar, proper = _split_scalar(task.inputs)
    if scalar == 0.0 or any(f.size == 0 for f in proper):
        return _empty_result(task)

    nvars = len(task.bag_vars)
    k = len(task.marginal_vars)
    tries: list[LevelOrderTrie] = []
    for f in proper:
        order = tuple(v for v in task.bag_vars if v in f.scope)
        tries.append(build_trie(f, order))

    # per bag depth: (trie index, trie level) of every participating trie
    active: list[list[tuple[int, int]]] = [[] for _ in range(nvars)]
    var_depth = {v: d for d, v in enumerate(task.bag_vars)}
    for ti, t in enumerate(tries):
        for level, v in enumerate(t.var_order):
            active[var_depth[v]].append((ti, level))

    ranges: list[list[tuple[int, int]]] = [[t.root_range()] for t in tries]
    values = [0] * nvars
    prob_stack = [0.0] * (nvars + 1)
    prob_stack[0] = scalar

    rows: list[tuple[int, ...]] = []
    probs: list[float] = []
    sep_pos: list[int] = []
    msg_tuples: list[tuple[int, ...]] = []
    msg_probs: list[float] = []
    visited = 0

    def emit() -> None:
        p = prob_stack[nvars]
        prefix = tuple(values[:k])
        if not msg_tuples or msg_tuples[-1] != prefix:
            msg_tuples.append(prefix)
            msg_probs.append(0.0)
        msg_probs[-1] += p
        sep_pos.append(len(msg_tuples) - 1)
        rows.append(tuple(values))
        probs.append(p)

    def descend(depth: int) -> None:
        nonlocal visited
        if depth == nvars:
            emit()
            return
        participants = active[depth]
        if not participants:
            candidates = [(value, ()) for value in range(task.domain_sizes[depth])]
        else:
            slices = []
            for ti, level in participants:
                lo, hi = ranges[ti][-1]
                slices.append((tries[ti].level_values[level], lo, hi))
            candidates = _intersect_sorted(slices)
        for value, positions in candidates:
            visited += 1
            if deadline is not None and visited % 4096 == 0:
                deadline()
            values[depth] = value
            p = prob_stack[depth]
            pushed = 0
            for slot, (ti, level) in enumerate(participants):
                pos = positions[slot]
                trie = tries[ti]
                if level == trie.depth - 1:
                    p *= trie.leaf_probs[pos]
                else:
                    ranges[ti].append(
                        (trie.child_lo[level][pos], trie.child_hi[level][pos])
                    )
                    pushed += 1
            prob_stack[depth + 1] = p
            descend(depth + 1)
            if pushed:
                for ti, level in participants:
                    if level < tries[ti].depth - 1:
                        ranges[ti].pop()

    descend(0)
    return ProductResult(
        bag_vars=task.bag_vars,
        rows=np.array(rows, dtype=np.int64).reshape(len(rows), nvars),
        probs=np.array(probs, dtype=np.float64),
        sep_pos=np.array(sep_pos, dtype=np.int64),
        message=FactorTable.from_entries(
            task.marginal_vars, zip(msg_tuples, msg_probs)
        ),
        visited=visited,
        work=0,
    )


def pairwise_product(
    task: ProductTask,
    dense_cap: int = 2**31,
    deadline: Callable[[], None] | None = None,
) -> ProductResult:
    """Classical truth-table product over the bag's dense assignment space.

    Factors multiply in ascending support-size order into a running dense
    array over the union of scopes seen so far, then the table expands to
    the full bag.  ``work`` accumulates allocated cells.  A table larger
    than ``dense_cap`` cells raises :class:`ResourceLimitError`.
    """
    nvars = len(task.bag_vars)
    k = len(task.marginal_vars)
    full_cells = 1
    for d in task.domain_sizes:
        full_cells *= d
    if full_cells > dense_cap:
        raise ResourceLimitError(
            f"truth table over bag {task.bag_vars} needs {full_cells} cells; "
            f"cap is {dense_cap}"
        )

    scalar, proper = _split_scalar(task.inputs)
    if scalar == 0.0 or any(f.size == 0 for f in proper):
        return _empty_result(task)

    depth_of = {v: d for d, v in enumerate(task.bag_vars)}
    sizes = task.domain_sizes
    acc = np.full((), scalar, dtype=np.float64)
    acc_vars: list[int] = []
    work = 0
    for f in sorted(proper, key=lambda f: f.size):
        if deadline is not None:
            deadline()
        f_vars = sorted(f.scope, key=depth_of.__getitem__)
        union = sorted(set(acc_vars) | set(f_vars), key=depth_of.__getitem__)
        cells = 1
        for v in union:
            cells *= sizes[depth_of[v]]
        work += cells

        f_shape = tuple(sizes[depth_of[v]] for v in f_vars)
        dense = np.zeros(f_shape, dtype=np.float64)
        cols = [
            np.array([t[f.scope.index(v)] for t in f.tuples], dtype=np.int64)
            for v in f_vars
        ]
        dense[tuple(cols)] = np.array(f.probs, dtype=np.float64)

        acc_aligned = acc.reshape(
            tuple(sizes[depth_of[v]] if v in acc_vars else 1 for v in union)
        )
        dense_aligned = dense.reshape(
            tuple(sizes[depth_of[v]] if v in f_vars else 1 for v in union)
        )
        acc = acc_aligned * dense_aligned
        acc_vars = union

    if acc_vars != list(task.bag_vars):
        shape = tuple(sizes[d] if task.bag_vars[d] in acc_vars else 1 for d in range(nvars))
        acc = np.ascontiguousarray(np.broadcast_to(acc.reshape(shape), tuple(sizes)))
        work += full_cells
    nz = np.nonzero(acc)
    rows = np.stack(nz, axis=1).astype(np.int64) if acc.ndim else np.empty((0, 0), np.int64)
    probs = acc[nz]

    if k == 0:
        total = float(acc.sum())
        message = FactorTable.from_entries((), [((), total)] if total else [])
        sep_pos = np.zeros(len(rows), dtype=np.int64)
    else:
        msg_dense = acc.sum(axis=tuple(range(k, nvars))) if k < nvars else acc
        msg_nz = np.nonzero(msg_dense)
        msg_tuples = [tuple(int(x) for x in row) for row in np.stack(msg_nz, axis=1)]
        msg_probs = msg_dense[msg_nz]
        message = FactorTable.from_entries(task.marginal_vars, zip(msg_tuples, msg_probs))
        if len(rows):
            msg_flat = np.ravel_multi_index(msg_nz, msg_dense.shape)
            row_prefix_flat = np.ravel_multi_index(
                tuple(rows[:, i] for i in range(k)), tuple(sizes[:k])
            )
            sep_pos = np.searchsorted(msg_flat, row_prefix_flat)
        else:
            sep_pos = np.zeros(0, dtype=np.int64)
    return ProductResult(
        bag_vars=task.bag_vars,
        rows=rows,
        probs=np.asarray(probs, dtype=np.float64),
        sep_pos=np.asarray(sep_pos, dtype=np.int64),
        message=message,
        visited=0,
        work=work,
    )


def run_kernel(
    task: ProductTask,
    dense_cap: int = 2**31,
    deadline: Callable[[], None] | None = None,
) -> ProductResult:
    """Dispatch on the task's strategy."""
    if task.strategy == STRATEGY_PAIRWISE:
        return pairwise_product(task, dense_cap=dense_cap, deadline=deadline)
    return multiway_product(task, deadline=deadline)


def zero_one_projection(factor: FactorTable, bag_vars: Sequence[int]) -> FactorTable:
    """Support-only projection of a factor onto a bag.

    The result ranges over scope ∩ bag_vars with every probability 1: it
    prunes assignments outside the factor's projected support without
    contributing probability mass.
    """
    proj_scope = tuple(sorted(set(factor.scope) & set(bag_vars)))
    if not proj_scope:
        raise ValueError(
            f"scope {factor.scope} does not intersect bag {tuple(bag_vars)}"
        )
    positions = [factor.scope.index(v) for v in proj_scope]
    support = {tuple(t[i] for i in positions) for t in factor.tuples}
    return FactorTable.from_entries(proj_scope, ((t, 1.0) for t in support))
