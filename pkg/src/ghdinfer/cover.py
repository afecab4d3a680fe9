"""Fractional edge covers, output-size bounds, and cost predictors.

Each bag of the decomposition gets a tiny linear program: minimize
sum_e x_e * log2(size_e) subject to every bag variable being covered by
total weight >= 1, x >= 0.  Its optimum exponentiates to a worst-case bound
on the bag's factor-product size.  The same LP with unit costs yields the
fractional edge-cover number, whose maximum over bags is the fractional
hypertree width of the decomposition.

The LPs have at most a few dozen variables/constraints, so a dense
two-phase primal simplex with Bland's rule is plenty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decomposition import Ghd, rho
from .errors import CoverInfeasibleError
from .model import Model

_TOL = 1e-9


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: list[int], cost: np.ndarray) -> None:
    """Iterate Bland-rule pivots on tableau rows T until optimal."""
    m = T.shape[0]
    while True:
        reduced = cost.copy()
        for r in range(m):
            if cost[basis[r]] != 0.0:
                reduced -= cost[basis[r]] * T[r, :-1]
        entering = -1
        for j in range(T.shape[1] - 1):
            if j not in basis and reduced[j] < -_TOL:
                entering = j
                break
        if entering < 0:
            return
        leaving = -1
        best_ratio = math.inf
        for r in range(m):
            if T[r, entering] > _TOL:
                ratio = T[r, -1] / T[r, entering]
                if ratio < best_ratio - _TOL or (
                    ratio < best_ratio + _TOL
                    and (leaving < 0 or basis[r] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = r
        if leaving < 0:
            raise RuntimeError("LP is unbounded; cover LPs never are")
        _pivot(T, basis, leaving, entering)


def solve_min_lp(c: Sequence[float], A: np.ndarray, b: Sequence[float]) -> tuple[np.ndarray, float]:
    """Solve min c.x subject to A x >= b, x >= 0 (two-phase simplex).

    Raises :class:`CoverInfeasibleError` when no feasible point exists.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("right-hand sides must be non-negative")

    # Columns: n originals, m surplus, m artificials, then RHS.
    T = np.zeros((m, n + 2 * m + 1))
    T[:, :n] = A
    T[:, n : n + m] = -np.eye(m)
    T[:, n + m : n + 2 * m] = np.eye(m)
    T[:, -1] = b
    basis = [n + m + i for i in range(m)]

    phase1 = np.zeros(n + 2 * m)
    phase1[n + m :] = 1.0
    _run_simplex(T, basis, phase1)
    value = sum(phase1[basis[r]] * T[r, -1] for r in range(m))
    if value > 1e-7:
        raise CoverInfeasibleError("no feasible cover: some variable cannot be covered")

    # Drive leftover artificials out of the basis; rows where that is
    # impossible are redundant and get dropped along with all artificial
    # columns before phase 2.
    for r in range(m):
        if basis[r] >= n + m:
            pivot_col = next(
                (j for j in range(n + m) if abs(T[r, j]) > _TOL),
                None,
            )
            if pivot_col is not None:
                _pivot(T, basis, r, pivot_col)
    keep_rows = [r for r in range(m) if basis[r] < n + m]
    T = np.hstack([T[keep_rows, : n + m], T[keep_rows, -1:]])
    basis = [basis[r] for r in keep_rows]

    phase2 = np.zeros(n + m)
    phase2[:n] = c
    _run_simplex(T, basis, phase2)

    x = np.zeros(n)
    for r, col in enumerate(basis):
        if col < n:
            x[col] = T[r, -1]
    return x, float(c @ x)


@dataclass(frozen=True)
class CoverSolution:
    """Optimal fractional edge cover of one bag.

    ``edges`` holds (scope, log2 size) per covering edge, ``weights`` the
    optimal x, and ``log2_bound`` the optimal objective, so the output-size
    bound is ``2 ** log2_bound``.
    """

    bag: int
    edges: tuple[tuple[tuple[int, ...], float], ...]
    weights: tuple[float, ...]
    log2_bound: float

    def check_feasible(self, bag_vars: Sequence[int], tol: float = 1e-9) -> None:
        for v in bag_vars:
            total = sum(
                w for (scope, _), w in zip(self.edges, self.weights) if v in scope
            )
            if total < 1.0 - tol:
                raise AssertionError(
                    f"cover of bag {self.bag}: variable {v} covered by {total} < 1"
                )


def solve_cover(
    bag_vars: Sequence[int],
    edges: Sequence[tuple[Sequence[int], float]],
    bag: int = -1,
) -> CoverSolution:
    """Minimum-weight fractional cover of ``bag_vars`` by ``edges``.

    Each edge is (scope, log2 of its size); edges disjoint from the bag are
    ignored and an uncoverable bag variable raises
    :class:`CoverInfeasibleError`.  Weights above 1 are clamped (this keeps
    feasibility and never raises the objective since costs are >= 0).
    """
    bag_set = set(bag_vars)
    kept = [
        (tuple(scope), float(log2_size))
        for scope, log2_size in edges
        if bag_set & set(scope)
    ]
    covered = set()
    for scope, _ in kept:
        covered.update(bag_set & set(scope))
    if covered != bag_set:
        missing = sorted(bag_set - covered)
        raise CoverInfeasibleError(f"bag variables {missing} not covered by any edge")

    vars_sorted = sorted(bag_set)
    A = np.zeros((len(vars_sorted), len(kept)))
    for j, (scope, _) in enumerate(kept):
        for v in scope:
            if v in bag_set:
                A[vars_sorted.index(v), j] = 1.0
    costs = [log2_size for _, log2_size in kept]
    x, _ = solve_min_lp(costs, A, np.ones(len(vars_sorted)))
    x = np.clip(x, 0.0, 1.0)
    bound = float(np.dot(costs, x))
    solution = CoverSolution(
        bag=bag,
        edges=tuple(kept),
        weights=tuple(float(w) for w in x),
        log2_bound=bound,
    )
    solution.check_feasible(vars_sorted)
    return solution


def solve_fractional_cover(
    bag_vars: Sequence[int],
    covering_edges: Sequence[tuple[Sequence[int], int]],
    bag: int = -1,
) -> CoverSolution:
    """Cover a bag by edges given as (scope, entry count)."""
    edges = [
        (scope, math.log2(max(size, 1))) for scope, size in covering_edges
    ]
    return solve_cover(bag_vars, edges, bag=bag)


def _bag_hyperedges(model: Model, chi: Sequence[int]) -> list[tuple[tuple[int, ...], int]]:
    """Factor scopes intersecting the bag, plus unit edges for variables
    that appear in no factor at all."""
    chi_set = set(chi)
    edges: list[tuple[tuple[int, ...], int]] = []
    in_some_factor: set[int] = set()
    for f in model.factors:
        in_some_factor.update(f.scope)
        if chi_set & set(f.scope):
            edges.append((f.scope, f.size))
    for v in sorted(chi_set - in_some_factor):
        edges.append(((v,), model.variables[v].domain_size))
    return edges


def fhtw(ghd: Ghd, model: Model) -> float:
    """Fractional hypertree width of this decomposition.

    Per bag: the optimal total weight of a fractional edge cover when every
    edge counts equally (all log-sizes 1); the width is the maximum over
    bags.
    """
    worst = 0.0
    for b in ghd.bags:
        edges = [(scope, 1.0) for scope, _ in _bag_hyperedges(model, b.chi)]
        sol = solve_cover(b.chi, edges, bag=b.id)
        worst = max(worst, sol.log2_bound)
    return worst


def log10_width_ratio(
    max_factor_size: int, fhtw_value: float, max_domain: int, treewidth: int
) -> float:
    """log10 of (N ** fhtw) / (D ** tw): join-bound cost over truth-table cost."""
    return fhtw_value * math.log10(max(max_factor_size, 1)) - treewidth * math.log10(
        max(max_domain, 1)
    )


def _log10_sum_of_log2(values: Sequence[float]) -> float:
    """log10 of a sum whose terms are given as log2(term)."""
    log10s = [v * math.log10(2.0) for v in values]
    top = max(log10s)
    return top + math.log10(sum(10.0 ** (v - top) for v in log10s))


@dataclass(frozen=True)
class Predictors:
    """Cost predictors comparing join bounds to truth-table work.

    ``log10_bound_sum_ratio`` is log10 of (sum over bags of the per-bag
    output bound) / rho; ``log10_width_ratio`` is log10 of N^fhtw / D^tw.
    """

    log10_bound_sum_ratio: float
    log10_width_ratio: float
    log10_rho: float
    fhtw: float
    treewidth: int
    max_factor_size: int
    max_domain: int
    bag_log2_bounds: tuple[float, ...]


def predictors(ghd: Ghd, model: Model) -> Predictors:
    """Compute both predictors for a model and its decomposition.

    Per-bag bounds follow the upward pass: assigned factor scopes, child
    message scopes (sizes estimated bottom-up as min(child bound, separator
    truth table)), and support projections of outside factors (sizes
    estimated as min(factor size, projected truth-table size)).
    """
    domains = model.domain_sizes

    def log2_table(vars_: Sequence[int]) -> float:
        return sum(math.log2(domains[v]) for v in vars_)

    est_message_log2: dict[int, float] = {}
    bag_bounds: dict[int, float] = {}
    for bid in ghd.topo_up():
        b = ghd.bags[bid]
        chi_set = set(b.chi)
        edges: list[tuple[tuple[int, ...], float]] = []
        assigned = set(b.alpha)
        for fid in b.alpha:
            f = model.factors[fid]
            edges.append((f.scope, math.log2(max(f.size, 1))))
        for w in b.children:
            sep = ghd.bags[w].separator
            if sep:
                edges.append((sep, est_message_log2[w]))
        for fid, f in enumerate(model.factors):
            if fid in assigned:
                continue
            proj = tuple(sorted(chi_set & set(f.scope)))
            if proj:
                est = min(math.log2(max(f.size, 1)), log2_table(proj))
                edges.append((proj, est))
        in_some = {v for scope, _ in edges for v in scope}
        for v in sorted(chi_set - in_some):
            edges.append(((v,), math.log2(domains[v])))
        sol = solve_cover(b.chi, edges, bag=bid)
        bag_bounds[bid] = sol.log2_bound
        est_message_log2[bid] = min(sol.log2_bound, log2_table(b.separator))

    rho_value = rho(ghd, domains)
    log10_rho = math.log10(rho_value)
    bounds = tuple(bag_bounds[b.id] for b in ghd.bags)
    log10_sum = _log10_sum_of_log2(bounds)
    width = fhtw(ghd, model)
    n_max = max((f.size for f in model.factors), default=1)
    d_max = max(domains, default=1)
    return Predictors(
        log10_bound_sum_ratio=log10_sum - log10_rho,
        log10_width_ratio=log10_width_ratio(n_max, width, d_max, ghd.treewidth),
        log10_rho=log10_rho,
        fhtw=width,
        treewidth=ghd.treewidth,
        max_factor_size=n_max,
        max_domain=d_max,
        bag_log2_bounds=bounds,
    )
