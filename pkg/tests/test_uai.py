"""UAI parsing, evidence files, and text emitters."""

import itertools

import pytest

from ghdinfer.errors import UaiFormatError
from ghdinfer.model import MarginalSet
from ghdinfer.oracle import random_model
from ghdinfer.uai import parse_evidence, parse_uai, write_marginals, write_uai

from conftest import TRIANGLE_UAI


class TestParseUai:
    def test_single_binary_variable(self):
        model = parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0.4 0.6")
        assert model.num_variables == 1
        assert model.variables[0].domain_size == 2
        assert model.factors[0].as_dict() == {(0,): 0.4, (1,): 0.6}

    def test_zero_entries_dropped(self):
        model = parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0.0 1.0")
        assert model.factors[0].size == 1
        assert model.factors[0].as_dict() == {(1,): 1.0}

    def test_bayes_preamble_accepted(self):
        model = parse_uai("BAYES\n1\n2\n1\n1 0\n2\n0.4 0.6")
        assert model.factors[0].as_dict() == {(0,): 0.4, (1,): 0.6}

    def test_triangle_row_major_decode(self):
        # Independent decode: enumerate the scope's assignments with the last
        # variable fastest and pair them with distinct table values.
        values = [0.11, 0.22, 0.33, 0.44]
        text = (
            "MARKOV\n3\n2 2 2\n3\n"
            "2 0 1\n2 1 2\n2 0 2\n"
            "4\n" + " ".join(str(v) for v in values) + "\n"
            "4\n0.25 0.25 0.25 0.25\n"
            "4\n0.25 0.25 0.25 0.25\n"
        )
        model = parse_uai(text)
        assert [f.scope for f in model.factors] == [(0, 1), (1, 2), (0, 2)]
        expected = {}
        for value, t in zip(values, itertools.product(range(2), range(2))):
            expected[t] = value
        assert model.factors[0].as_dict() == pytest.approx(expected)

    def test_scope_normalized_to_ascending_ids(self):
        # Scope written as (1, 0): the table is laid out with variable 0
        # fastest, and parsing must re-index assignments onto scope (0, 1).
        text = "MARKOV\n2\n2 3\n1\n2 1 0\n6\n1 2 3 4 5 6"
        model = parse_uai(text)
        f = model.factors[0]
        assert f.scope == (0, 1)
        expected = {}
        value = 1
        for b in range(3):
            for a in range(2):
                expected[(a, b)] = float(value)
                value += 1
        assert f.as_dict() == pytest.approx(expected)

    def test_unknown_preamble(self):
        with pytest.raises(UaiFormatError, match="preamble"):
            parse_uai("HUGIN\n1\n2\n0")

    def test_truncated_stream(self):
        with pytest.raises(UaiFormatError, match="truncated"):
            parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0.4")

    def test_entry_count_mismatch(self):
        with pytest.raises(UaiFormatError, match="entry count"):
            parse_uai("MARKOV\n1\n2\n1\n1 0\n3\n0.4 0.3 0.3")

    def test_variable_id_out_of_range(self):
        with pytest.raises(UaiFormatError, match="out of range"):
            parse_uai("MARKOV\n1\n2\n1\n1 1\n2\n0.4 0.6")

    def test_trailing_garbage(self):
        with pytest.raises(UaiFormatError, match="trailing"):
            parse_uai("MARKOV\n1\n2\n1\n1 0\n2\n0.4 0.6 extra")


class TestParseEvidence:
    def test_pairs(self):
        assert parse_evidence("2 0 1 3 0", (2, 2, 2, 2)) == {0: 1, 3: 0}

    def test_empty(self):
        assert parse_evidence("0", (2, 2)) == {}

    def test_out_of_range_value(self):
        with pytest.raises(UaiFormatError, match="out of range"):
            parse_evidence("1 0 5", (2,))

    def test_duplicate_variable(self):
        with pytest.raises(UaiFormatError, match="duplicate"):
            parse_evidence("2 0 1 0 0", (2, 2))


class TestWriteMarginals:
    def test_uniform_binary_exact_text(self):
        ms = MarginalSet(
            variable_marginals=((0.5, 0.5),), factor_marginals=(), log_partition=0.0
        )
        assert write_marginals(ms) == "MAR\n1 2 0.500000 0.500000"

    def test_point_distribution(self):
        ms = MarginalSet(
            variable_marginals=((0.0, 1.0),), factor_marginals=(), log_partition=0.0
        )
        assert write_marginals(ms) == "MAR\n1 2 0.000000 1.000000"

    def test_tiny_values_keep_significant_digits(self):
        ms = MarginalSet(
            variable_marginals=((1e-9, 1.0 - 1e-9),),
            factor_marginals=(),
            log_partition=0.0,
        )
        text = write_marginals(ms)
        assert "1.000000e-09" in text


class TestRoundTrip:
    @pytest.mark.parametrize("seed", range(8))
    def test_parse_write_parse_identity(self, seed):
        model = random_model(seed)
        text = write_uai(model)
        reparsed = parse_uai(text)
        assert reparsed == parse_uai(write_uai(reparsed))
        assert reparsed.domain_sizes == model.domain_sizes
        assert [f.scope for f in reparsed.factors] == [f.scope for f in model.factors]
        for a, b in zip(reparsed.factors, model.factors):
            assert a.tuples == b.tuples
            assert a.probs == pytest.approx(b.probs, rel=0, abs=0)

    def test_triangle_round_trip(self):
        model = parse_uai(TRIANGLE_UAI)
        assert parse_uai(write_uai(model)) == model

    def test_write_is_deterministic(self):
        model = random_model(3)
        assert write_uai(model) == write_uai(model)
