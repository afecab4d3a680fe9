"""Upward/downward passes, calibration, and marginal extraction."""

import math

import numpy as np
import pytest

import ghdinfer.storage as storage
from ghdinfer.decomposition import build_ghd, min_fill_order
from ghdinfer.engine import EngineConfig, run_inference
from ghdinfer.errors import InconsistentModelError
from ghdinfer.hybrid import assign_strategies
from ghdinfer.oracle import brute_force_marginals, compare_marginals, random_model
from ghdinfer.propagation import (
    calibration_gaps,
    downward_pass,
    extract_marginals,
    upward_pass,
)

from conftest import dense_factor, make_model


def _run_passes(model, mode="multiway", root_override=None):
    ghd = build_ghd(model, min_fill_order(model), root_override=root_override)
    strategies = assign_strategies(ghd, model, mode).assignment
    up = upward_pass(ghd, model, strategies)
    states = downward_pass(ghd, up.states)
    return ghd, states, up


class TestUpwardPass:
    def test_single_bag_message_equals_product(self, triangle_uniform):
        ghd, states, _ = _run_passes(triangle_uniform)
        assert len(states) == 1
        root = states[ghd.root]
        # Root keeps the full product; with all factors at 0.25 each of the
        # eight assignments carries 0.25**3.
        assert len(root.rows) == 8
        assert root.probs == pytest.approx([0.25**3] * 8)

    def test_chain_leaf_message_is_marginalized_product(self, chain_model):
        # On bags {A,B} and {B,C}, the non-root bag sends its factor summed
        # over its private variable; spell the sum out by hand.
        ghd, states, _ = _run_passes(chain_model)
        child_id = next(b.id for b in ghd.bags if b.parent is not None)
        child_bag = ghd.bags[child_id]
        message = states[child_id].up_message
        assert message.scope == (1,)
        factor = chain_model.factors[child_bag.alpha[0]]
        expected = {}
        for t, p in zip(factor.tuples, factor.probs):
            key = (t[factor.scope.index(1)],)
            expected[key] = expected.get(key, 0.0) + p
        assert message.as_dict() == pytest.approx(expected)

    def test_up_message_carries_both_index_kinds(self, chain_model):
        ghd, states, _ = _run_passes(chain_model)
        child = next(b.id for b in ghd.bags if b.parent is not None)
        lst = states[child].up_list
        assert lst is not None
        assert lst.kind == "forward_and_reverse"
        assert lst.forward_indices is not None


class TestDownwardPass:
    def test_root_only_tree_is_noop(self, triangle_uniform):
        ghd = build_ghd(triangle_uniform, min_fill_order(triangle_uniform))
        strategies = assign_strategies(ghd, triangle_uniform, "multiway").assignment
        up = upward_pass(ghd, triangle_uniform, strategies)
        before = up.states[ghd.root].probs.copy()
        states = downward_pass(ghd, up.states)
        assert np.array_equal(states[ghd.root].probs, before)
        assert states[ghd.root].down_probs is None

    def test_chain_calibrates_on_separator(self, chain_model):
        ghd, states, _ = _run_passes(chain_model)
        gaps = calibration_gaps(ghd, states)
        assert all(g <= 1e-12 for _, _, g in gaps)

    def test_down_messages_align_with_up_list(self, chain_model):
        ghd, states, _ = _run_passes(chain_model)
        child = next(b.id for b in ghd.bags if b.parent is not None)
        state = states[child]
        assert state.down_probs is not None
        assert len(state.down_probs) == len(state.up_list)

    @pytest.mark.parametrize("seed", range(10))
    def test_every_bag_mass_equals_partition_function(self, seed):
        model = random_model(seed)
        oracle = brute_force_marginals(model)
        ghd, states, up = _run_passes(model)
        z = math.exp(oracle.log_partition)
        for state in states.values():
            assert state.mass * math.exp(up.log_shift) == pytest.approx(z, rel=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_bag_products_match_oracle_joint(self, seed):
        # Every calibrated bag product, marginalized to any single variable,
        # reproduces the oracle marginal scaled by Z.
        model = random_model(seed)
        oracle = brute_force_marginals(model)
        ghd, states, _ = _run_passes(model)
        for state in states.values():
            mass = state.mass
            for col, v in enumerate(state.order):
                dist = np.bincount(
                    state.rows[:, col],
                    weights=state.probs,
                    minlength=model.variables[v].domain_size,
                ) / mass
                assert dist == pytest.approx(oracle.variable_marginals[v], abs=1e-9)


class TestExtractMarginals:
    def test_single_variable_model(self):
        model = make_model((2,), [((0,), {(0,): 0.4, (1,): 0.6})])
        ghd, states, up = _run_passes(model)
        ms = extract_marginals(ghd, states, model, log_shift=up.log_shift)
        assert ms.variable_marginals[0] == pytest.approx((0.4, 0.6))
        assert ms.log_partition == pytest.approx(0.0, abs=1e-12)

    def test_uniform_triangle_partition_function(self, triangle_uniform):
        # Eight assignments, each the product of three 0.25 values.
        ghd, states, up = _run_passes(triangle_uniform)
        ms = extract_marginals(ghd, states, triangle_uniform, log_shift=up.log_shift)
        assert math.exp(ms.log_partition) == pytest.approx(8 * 0.25**3)
        for dist in ms.variable_marginals:
            assert dist == pytest.approx((0.5, 0.5))

    def test_factor_marginals_match_oracle(self):
        model = random_model(14)
        oracle = brute_force_marginals(model)
        ghd, states, up = _run_passes(model)
        ms = extract_marginals(ghd, states, model, log_shift=up.log_shift)
        for got, expected in zip(ms.factor_marginals, oracle.factor_marginals):
            assert got.scope == expected.scope
            assert got.as_dict() == pytest.approx(expected.as_dict(), abs=1e-9)

    def test_zero_mass_raises(self):
        # Two factors with disjoint supports over the same pair.
        model = make_model(
            (2, 2),
            [((0, 1), {(0, 0): 1.0}), ((0, 1), {(1, 1): 1.0})],
        )
        ghd = build_ghd(model, min_fill_order(model))
        strategies = assign_strategies(ghd, model, "multiway").assignment
        up = upward_pass(ghd, model, strategies)
        states = downward_pass(ghd, up.states)
        with pytest.raises(InconsistentModelError):
            extract_marginals(ghd, states, model, log_shift=up.log_shift)

    def test_variable_with_no_factor_is_uniform_and_scales_z(self):
        # An unconstrained variable contributes |domain| to Z and a uniform
        # marginal.
        model = make_model((2, 3), [((0,), {(0,): 0.25, (1,): 0.75})])
        ghd, states, up = _run_passes(model)
        ms = extract_marginals(ghd, states, model, log_shift=up.log_shift)
        assert ms.variable_marginals[1] == pytest.approx((1 / 3, 1 / 3, 1 / 3))
        assert math.exp(ms.log_partition) == pytest.approx(3.0)


class TestCalibrationOnRandomSuite:
    @pytest.mark.parametrize("seed", range(15))
    def test_adjacent_bags_agree_on_separators(self, seed):
        model = random_model(seed, with_evidence=False)
        ghd, states, _ = _run_passes(model, mode="hybrid")
        for _, _, gap in calibration_gaps(ghd, states):
            assert gap <= 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_compare_kernels_mode_records_both_counters(self, seed):
        model = random_model(seed)
        ghd = build_ghd(model, min_fill_order(model))
        strategies = assign_strategies(ghd, model, "multiway").assignment
        up = upward_pass(ghd, model, strategies, compare_kernels=True)
        assert up.agm_violations == []
        assert all(s.other_work is not None for s in up.states.values())


class TestIndexOverflowFallback:
    def test_small_index_limit_forces_dict_path(self, monkeypatch):
        # Shrinking the index cap makes every message overflow, driving the
        # down pass through the hash fallback; results must not change.
        model = random_model(23)
        oracle = brute_force_marginals(model)
        monkeypatch.setattr(storage, "INDEX_LIMIT", 1)
        result = run_inference(model, EngineConfig(mode="multiway"))
        report = compare_marginals(result.marginals, oracle, tol=1e-9)
        assert report.passed

    def test_rescaling_survives_deep_chain_drift(self):
        # A 30-edge chain of constant 1e-20 factors drives bag products far
        # below the float range; per-bag rescaling must absorb the drift and
        # reconstruct log Z = (L+1) ln 2 + L ln c exactly.
        length = 30
        tiny = 1e-20
        n = length + 1
        specs = [
            dense_factor((i, i + 1), (2,) * n, lambda t: tiny) for i in range(length)
        ]
        model = make_model((2,) * n, specs)
        result = run_inference(model, EngineConfig(mode="multiway"))
        for dist in result.marginals.variable_marginals:
            assert dist == pytest.approx((0.5, 0.5))
        # Transits through the subnormal range just above the rescale
        # threshold cost a few bits; 1e-10 relative still has margin on the
        # engine-wide 1e-9 bar.
        expected_log_z = n * math.log(2) + length * math.log(tiny)
        assert result.marginals.log_partition == pytest.approx(expected_log_z, rel=1e-10)
