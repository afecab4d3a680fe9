"""Discrete graphical-model types in listing representation.

A model is a set of variables with finite domains plus a set of factors.
Each factor stores only the assignments with strictly positive probability
("listing representation"); everything absent is an exact zero.  Evidence
conditioning slices factors, folds fully-fixed factors into a scalar weight,
and renumbers the surviving variables so ids stay dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import InconsistentEvidenceError

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class Variable:
    """A discrete random variable identified by a dense integer id."""

    id: int
    domain_size: int

    def __post_init__(self) -> None:
        if self.domain_size < 1:
            raise ValueError(f"variable {self.id}: domain_size must be >= 1")


@dataclass(frozen=True)
class FactorTable:
    """A factor stored as sorted (assignment, probability) pairs.

    Assignment components follow ``scope`` order.  Entries are sorted
    lexicographically, are unique, and carry strictly positive
    probabilities; use :meth:`from_entries` to build one from raw data
    (exact zeros are dropped there).
    """

    scope: tuple[int, ...]
    tuples: tuple[Assignment, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(set(self.scope)) != len(self.scope):
            raise ValueError(f"duplicate variable in scope {self.scope}")
        if len(self.tuples) != len(self.probs):
            raise ValueError("tuples and probs must have equal length")
        arity = len(self.scope)
        prev = None
        for t, p in zip(self.tuples, self.probs):
            if len(t) != arity:
                raise ValueError(f"assignment {t} does not match scope arity {arity}")
            if not (p > 0.0) or math.isinf(p) or math.isnan(p):
                raise ValueError(f"stored probability must be finite and > 0, got {p}")
            if prev is not None and t <= prev:
                raise ValueError("assignments must be sorted and unique")
            prev = t

    @classmethod
    def from_entries(
        cls,
        scope: Sequence[int],
        entries: Iterable[tuple[Sequence[int], float]],
    ) -> "FactorTable":
        """Build a table from (assignment, probability) pairs, dropping zeros."""
        kept: dict[Assignment, float] = {}
        for t, p in entries:
            if p == 0.0:
                continue
            key = tuple(t)
            if key in kept:
                raise ValueError(f"duplicate assignment {key}")
            kept[key] = float(p)
        ordered = sorted(kept.items())
        return cls(
            scope=tuple(scope),
            tuples=tuple(t for t, _ in ordered),
            probs=tuple(p for _, p in ordered),
        )

    @property
    def size(self) -> int:
        """Number of stored (non-zero) entries."""
        return len(self.tuples)

    def as_dict(self) -> dict[Assignment, float]:
        return dict(zip(self.tuples, self.probs))

    def canonical(self) -> "FactorTable":
        """Equivalent table with scope sorted by ascending variable id."""
        if all(a < b for a, b in zip(self.scope, self.scope[1:])):
            return self
        order = sorted(range(len(self.scope)), key=lambda i: self.scope[i])
        scope = tuple(self.scope[i] for i in order)
        entries = ((tuple(t[i] for i in order), p) for t, p in zip(self.tuples, self.probs))
        return FactorTable.from_entries(scope, entries)


@dataclass(frozen=True)
class Model:
    """A hypergraph of factors over discrete variables, plus optional evidence.

    ``log_scale`` is the natural log of a scalar weight multiplying the whole
    distribution; evidence conditioning accumulates fully-fixed factors there.
    ``source_ids`` / ``source_factor_ids`` record the pre-conditioning
    identities of variables and factors (``None`` means untouched input).
    """

    variables: tuple[Variable, ...]
    factors: tuple[FactorTable, ...]
    evidence: tuple[tuple[int, int], ...] = ()
    log_scale: float = 0.0
    source_ids: tuple[int, ...] | None = None
    source_factor_ids: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        for i, v in enumerate(self.variables):
            if v.id != i:
                raise ValueError("variable ids must form a contiguous range [0, n)")
        n = len(self.variables)
        for f in self.factors:
            for v in f.scope:
                if not 0 <= v < n:
                    raise ValueError(f"factor scope references undeclared variable {v}")
            for t in f.tuples:
                for v, value in zip(f.scope, t):
                    if not 0 <= value < self.variables[v].domain_size:
                        raise ValueError(
                            f"assignment value {value} out of range for variable {v}"
                        )
        seen = set()
        for v, value in self.evidence:
            if v in seen:
                raise ValueError(f"duplicate evidence variable {v}")
            seen.add(v)
            if not 0 <= v < n:
                raise ValueError(f"evidence variable {v} not declared")
            if not 0 <= value < self.variables[v].domain_size:
                raise ValueError(f"evidence value {value} out of range for variable {v}")

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(v.domain_size for v in self.variables)

    def evidence_dict(self) -> dict[int, int]:
        return dict(self.evidence)

    def with_evidence(self, evidence: Mapping[int, int]) -> "Model":
        return replace(self, evidence=tuple(sorted(evidence.items())))


@dataclass(frozen=True)
class MarginalSet:
    """All single-variable and per-factor marginals plus ln(Z)."""

    variable_marginals: tuple[tuple[float, ...], ...]
    factor_marginals: tuple[FactorTable, ...]
    log_partition: float

    def validate(self, tol: float = 1e-9) -> None:
        for v, dist in enumerate(self.variable_marginals):
            total = math.fsum(dist)
            if abs(total - 1.0) > tol:
                raise ValueError(f"variable {v} marginal sums to {total}, not 1")
        for i, fm in enumerate(self.factor_marginals):
            total = math.fsum(fm.probs)
            if abs(total - 1.0) > tol:
                raise ValueError(f"factor {i} marginal sums to {total}, not 1")


def factor_sparsity(factor: FactorTable, domains: Sequence[int]) -> float:
    """Support size divided by the full truth-table size of the scope.

    The denominator is computed with exact integer arithmetic, so it cannot
    overflow; ratios below the smallest subnormal float round to 0.0.
    """
    if not factor.scope:
        raise ValueError("factor_sparsity requires a non-empty scope")
    denom = 1
    for v in factor.scope:
        denom *= domains[v]
    return factor.size / denom


def condition_on_evidence(model: Model) -> Model:
    """Slice all factors on the model's evidence and renumber variables.

    Rows inconsistent with the evidence are dropped and evidence variables
    leave every scope; a factor whose support empties out signals
    inconsistent (zero-probability) evidence.  Factors fully fixed by
    evidence become scalars folded into ``log_scale``.  The result carries
    no evidence and maps its variables/factors back through ``source_ids``
    and ``source_factor_ids``.
    """
    if not model.evidence:
        return model
    evidence = model.evidence_dict()
    kept = [v.id for v in model.variables if v.id not in evidence]
    remap = {old: new for new, old in enumerate(kept)}

    log_scale = model.log_scale
    new_factors: list[FactorTable] = []
    factor_map: list[int] = []
    for idx, f in enumerate(model.factors):
        fixed = [(i, evidence[v]) for i, v in enumerate(f.scope) if v in evidence]
        if not fixed:
            new_factors.append(replace(f, scope=tuple(remap[v] for v in f.scope)))
            factor_map.append(idx)
            continue
        free = [i for i, v in enumerate(f.scope) if v not in evidence]
        rows = [
            (tuple(t[i] for i in free), p)
            for t, p in zip(f.tuples, f.probs)
            if all(t[i] == val for i, val in fixed)
        ]
        if not rows:
            raise InconsistentEvidenceError(
                f"evidence assigns zero probability to factor {idx} over scope {f.scope}"
            )
        if not free:
            # Fully fixed: exactly one surviving row, a scalar weight.
            log_scale += math.log(rows[0][1])
            continue
        scope = tuple(remap[f.scope[i]] for i in free)
        new_factors.append(FactorTable.from_entries(scope, rows))
        factor_map.append(idx)

    if model.source_ids is not None:
        source_ids = tuple(model.source_ids[v] for v in kept)
    else:
        source_ids = tuple(kept)
    if model.source_factor_ids is not None:
        source_factor_ids = tuple(model.source_factor_ids[i] for i in factor_map)
    else:
        source_factor_ids = tuple(factor_map)

    return Model(
        variables=tuple(
            Variable(new, model.variables[old].domain_size) for new, old in enumerate(kept)
        ),
        factors=tuple(new_factors),
        evidence=(),
        log_scale=log_scale,
        source_ids=source_ids,
        source_factor_ids=source_factor_ids,
    )
