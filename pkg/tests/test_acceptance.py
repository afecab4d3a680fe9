"""End-to-end acceptance criteria.

Each test covers one numbered criterion and prints a PASS line once its
assertions hold; run with ``pytest tests/test_acceptance.py -v -s`` to see
them.  The random suite (criterion 1) is computed once per session and
reused by the structural criteria.
"""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from ghdinfer.cover import log10_width_ratio, solve_fractional_cover
from ghdinfer.engine import EngineConfig, InferenceResult, infer_prepared, prepare
from ghdinfer.errors import ResourceLimitError
from ghdinfer.hybrid import assign_strategies
from ghdinfer.model import FactorTable, Model, Variable
from ghdinfer.oracle import brute_force_marginals, compare_marginals, random_model
from ghdinfer.products import multiway_product, pairwise_product
from ghdinfer.propagation import calibration_gaps
from ghdinfer.uai import parse_uai, write_marginals, write_uai

from conftest import lp_vertex_minimum
from test_products import extreme_triangle_task

MODES = ("multiway", "multiway01", "pairwise", "hybrid")
SUITE_SIZE = 500
TOLERANCE = 1e-9


@dataclass
class SuiteRecord:
    seed: int
    model: Model
    oracle: object
    plan: object
    results: dict[str, InferenceResult]


@pytest.fixture(scope="session")
def suite():
    records = []
    for seed in range(SUITE_SIZE):
        model = random_model(seed, with_evidence=(seed % 2 == 1))
        oracle = brute_force_marginals(model)
        plan = prepare(model)
        results = {
            mode: infer_prepared(plan, EngineConfig(mode=mode)) for mode in MODES
        }
        records.append(
            SuiteRecord(seed=seed, model=model, oracle=oracle, plan=plan, results=results)
        )
    return records


def _report(number: int, name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {number} [{name}]: PASS{suffix}")


def test_criterion_1_oracle_equivalence(suite):
    worst = 0.0
    for record in suite:
        for mode in MODES:
            report = compare_marginals(
                record.results[mode].marginals, record.oracle, tol=TOLERANCE
            )
            worst = max(worst, report.max_abs_error)
            assert report.passed, (
                f"seed {record.seed} mode {mode}: "
                f"max abs error {report.max_abs_error:.3e} at variable "
                f"{report.worst_variable}"
            )
    _report(1, "oracle equivalence", f"{SUITE_SIZE} models x 4 modes, worst {worst:.2e}")


def test_criterion_2_worst_case_optimality():
    counters = {}
    for n in (100, 1000, 10000):
        result = multiway_product(extreme_triangle_task(n))
        assert len(result.rows) <= n
        assert result.visited <= 8 * n, f"counter {result.visited} above 8x{n}"
        counters[n] = result.visited
    for small, big in ((100, 1000), (1000, 10000)):
        ratio = counters[big] / counters[small]
        n_ratio = big / small
        assert n_ratio / 1.2 <= ratio <= n_ratio * 1.2, (
            f"counter ratio {ratio} not within 1.2x of {n_ratio}"
        )
    dense_works = {}
    for n in (25, 50, 100):
        dense_works[n] = pairwise_product(extreme_triangle_task(n)).work
        assert dense_works[n] >= n**3
    assert dense_works[100] / dense_works[50] == pytest.approx(8.0, rel=0.15)
    _report(
        2,
        "worst-case optimality",
        f"counters {counters}, dense work {dense_works}",
    )


def test_criterion_3_agm_compliance(suite):
    bags_checked = 0
    for record in suite:
        for mode in MODES:
            result = record.results[mode]
            assert result.stats.agm_violations == [], (
                f"seed {record.seed} mode {mode}: {result.stats.agm_violations}"
            )
            for state in result.states.values():
                bags_checked += 1
                size = len(state.probs)
                if size:
                    assert math.log2(size) <= state.cover.log2_bound + 1e-9, (
                        f"seed {record.seed} mode {mode} bag {state.bag_id}: "
                        f"{size} rows above bound"
                    )
                state.cover.check_feasible(state.order, tol=1e-9)
    _report(3, "AGM compliance", f"{bags_checked} bag executions, zero violations")


def test_criterion_4_lp_ground_truth(suite):
    n = 64
    triangle = solve_fractional_cover(
        (0, 1, 2), [((0, 1), n), ((1, 2), n), ((0, 2), n)]
    )
    assert triangle.weights == pytest.approx((0.5, 0.5, 0.5), abs=1e-9)
    assert sum(triangle.weights) == pytest.approx(1.5, abs=1e-9)
    single = solve_fractional_cover((0, 1), [((0, 1), 12)])
    assert sum(single.weights) == pytest.approx(1.0, abs=1e-9)

    checked = set()
    compared = 0
    for record in suite:
        for mode in MODES:
            for state in record.results[mode].states.values():
                cover = state.cover
                key = (tuple(state.order), cover.edges)
                constraint_count = len(state.order)
                if constraint_count > 3 or len(cover.edges) > 8 or key in checked:
                    continue
                checked.add(key)
                compared += 1
                vars_sorted = sorted(state.order)
                A = np.zeros((len(vars_sorted), len(cover.edges)))
                costs = []
                for j, (scope, log2_size) in enumerate(cover.edges):
                    costs.append(log2_size)
                    for v in scope:
                        if v in state.order:
                            A[vars_sorted.index(v), j] = 1.0
                expected, _ = lp_vertex_minimum(costs, A, np.ones(len(vars_sorted)))
                assert cover.log2_bound == pytest.approx(expected, abs=1e-9), (
                    f"simplex {cover.log2_bound} vs enumeration {expected} on {key}"
                )
    assert compared > 0
    _report(4, "LP ground truth", f"{compared} suite LPs cross-checked")


def test_criterion_5_predictor_reproduction():
    got = log10_width_ratio(387, 4.0, 44, 8)
    expected = 4 * math.log10(387) - 8 * math.log10(44)
    assert got == pytest.approx(expected, abs=1e-6)
    assert got == pytest.approx(-2.80, abs=0.01)
    _report(5, "predictor reproduction", f"log10 ratio {got:.6f}")


def _diagonal_clique_model(n_vars: int, domain: int) -> Model:
    factors = []
    for i in range(n_vars):
        for j in range(i + 1, n_vars):
            factors.append(
                FactorTable.from_entries(
                    (i, j), (((v, v), 0.5 + 0.4 * (v % 2)) for v in range(domain))
                )
            )
    return Model(
        variables=tuple(Variable(i, domain) for i in range(n_vars)),
        factors=tuple(factors),
    )


def test_criterion_6_dense_table_threshold():
    cap = 10**6
    big = _diagonal_clique_model(8, 12)  # truth table 12**8 ~ 4.3e8 > cap
    plan = prepare(big)
    with pytest.raises(ResourceLimitError):
        infer_prepared(plan, EngineConfig(mode="pairwise", dense_table_cap=cap))
    completing = {}
    for mode in ("multiway", "hybrid"):
        result = infer_prepared(plan, EngineConfig(mode=mode, dense_table_cap=cap))
        completing[mode] = result.marginals
    assert compare_marginals(
        completing["multiway"], completing["hybrid"], tol=TOLERANCE
    ).passed

    small = _diagonal_clique_model(8, 3)
    oracle = brute_force_marginals(small)
    for mode in ("multiway", "hybrid"):
        result = infer_prepared(prepare(small), EngineConfig(mode=mode, dense_table_cap=cap))
        assert compare_marginals(result.marginals, oracle, tol=TOLERANCE).passed
    _report(6, "dense-table threshold", "pairwise fails, multiway/hybrid complete")


def test_criterion_7_calibration_and_root_invariance(suite):
    worst_gap = 0.0
    for record in suite:
        result = record.results["multiway"]
        for _, _, gap in calibration_gaps(record.plan.ghd, result.states):
            worst_gap = max(worst_gap, gap)
            assert gap <= TOLERANCE, f"seed {record.seed}: calibration gap {gap:.3e}"

    roots_checked = 0
    for record in suite:
        nbags = len(record.plan.ghd.bags)
        roots = sorted({0, nbags // 2, nbags - 1})
        for root in roots:
            plan = prepare(record.model, root_override=root)
            result = infer_prepared(plan, EngineConfig(mode="multiway"))
            roots_checked += 1
            report = compare_marginals(result.marginals, record.oracle, tol=TOLERANCE)
            assert report.passed, (
                f"seed {record.seed} root {root}: error {report.max_abs_error:.3e}"
            )
    _report(
        7,
        "calibration and root invariance",
        f"worst gap {worst_gap:.2e}, {roots_checked} rooted runs",
    )


def test_criterion_8_strategy_invariance(suite):
    for record in suite:
        hybrid = record.results["hybrid"].marginals
        for mode in ("multiway", "multiway01", "pairwise"):
            report = compare_marginals(record.results[mode].marginals, hybrid, tol=TOLERANCE)
            assert report.passed, f"seed {record.seed}: {mode} differs from hybrid"

        ghd = record.plan.ghd
        conditioned = record.plan.conditioned
        first = assign_strategies(ghd, conditioned, "hybrid")
        for _ in range(4):
            assert assign_strategies(ghd, conditioned, "hybrid") == first
        assert sorted(b for region in first.regions for b in region) == list(
            range(len(ghd.bags))
        )
        depth = {}
        for bid in ghd.topo_down():
            parent = ghd.bags[bid].parent
            depth[bid] = 0 if parent is None else depth[parent] + 1
        for region in first.regions:
            members = set(region)
            top = min(members, key=lambda b: depth[b])
            reached = {top}
            frontier = [top]
            while frontier:
                u = frontier.pop()
                for w in ghd.bags[u].children:
                    if w in members and w not in reached:
                        reached.add(w)
                        frontier.append(w)
            assert reached == members, f"seed {record.seed}: region {region} disconnected"
    _report(8, "strategy invariance", f"{len(suite)} models, 5 repeated assignments")


def test_criterion_9_io_round_trip(suite):
    for seed in range(50):
        model = random_model(seed + 10_000, with_evidence=False)
        text = write_uai(model)
        reparsed = parse_uai(text)
        assert parse_uai(write_uai(reparsed)) == reparsed, f"file seed {seed}"

    repeats_checked = 0
    for record in suite[:50]:
        for mode in MODES:
            first = write_marginals(
                infer_prepared(record.plan, EngineConfig(mode=mode)).marginals
            )
            second = write_marginals(
                infer_prepared(prepare(record.model), EngineConfig(mode=mode)).marginals
            )
            assert first == second, f"seed {record.seed} mode {mode}: output not stable"
            repeats_checked += 1
    _report(9, "i/o round trip", f"50 files, {repeats_checked} repeated runs byte-identical")
