"""Brute-force reference inference, sparsity induction, and comparison.

The reference path evaluates the defining sum directly: a dense joint array
over all variables, multiplied factor by factor, conditioned by slicing on
evidence.  It shares no code with the message-passing engine.

Randomness is produced by an explicitly documented generator (splitmix64
with rejection sampling and partial Fisher-Yates selection) so sparsified
networks and the random test suite are reproducible bit for bit by any
implementation, not just this process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentModelError, OracleGuardError
from .model import FactorTable, MarginalSet, Model, Variable

#: Largest joint truth table the oracle will enumerate.
GUARD_CELLS = 10**7

_MASK = (1 << 64) - 1


class SplitMix64:
    """splitmix64: state advances by the golden-gamma constant; output mixes
    the state with two xor-shift-multiply rounds.  Bounded draws use
    rejection sampling (no modulo bias); floats take the top 53 bits."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % n

    def uniform(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """k distinct indices from [0, n), by partial Fisher-Yates; sorted."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} of {n}")
        arr = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            arr[i], arr[j] = arr[j], arr[i]
        return sorted(arr[:k])


def _dense_joint(model: Model) -> np.ndarray:
    sizes = model.domain_sizes
    cells = 1
    for d in sizes:
        cells *= d
    if cells > GUARD_CELLS:
        raise OracleGuardError(
            f"joint truth table needs {cells} cells; oracle guard is {GUARD_CELLS}"
        )
    joint = np.ones(sizes, dtype=np.float64)
    n = model.num_variables
    for f in model.factors:
        order = sorted(range(len(f.scope)), key=lambda i: f.scope[i])
        sorted_scope = tuple(f.scope[i] for i in order)
        dense = np.zeros(tuple(sizes[v] for v in sorted_scope), dtype=np.float64)
        cols = tuple(np.array([t[i] for t in f.tuples], dtype=np.int64) for i in order)
        dense[cols] = np.array(f.probs, dtype=np.float64)
        aligned = dense.reshape(
            tuple(sizes[v] if v in sorted_scope else 1 for v in range(n))
        )
        joint = joint * aligned
    return joint * math.exp(model.log_scale)


def brute_force_marginals(model: Model) -> MarginalSet:
    """Evaluate all marginals by direct enumeration of the joint.

    Evidence is honored by slicing the joint before normalization; evidence
    variables report a point distribution and factor marginals keep their
    original scopes with inconsistent rows at probability zero (dropped).
    """
    joint = _dense_joint(model)
    evidence = model.evidence_dict()
    n = model.num_variables
    sizes = model.domain_sizes
    index = tuple(evidence.get(v, slice(None)) for v in range(n))
    conditioned = np.zeros_like(joint)
    conditioned[index] = joint[index]

    z = float(conditioned.sum())
    if z <= 0.0:
        raise InconsistentModelError("the joint distribution has zero total mass")

    variable_marginals = []
    for v in range(n):
        axes = tuple(a for a in range(n) if a != v)
        dist = conditioned.sum(axis=axes) / z
        variable_marginals.append(tuple(float(x) for x in dist))

    factor_marginals = []
    for f in model.factors:
        axes = tuple(a for a in range(n) if a not in f.scope)
        table = conditioned.sum(axis=axes) / z  # axes ordered by ascending id
        sorted_scope = tuple(sorted(f.scope))
        entries = []
        for t in np.argwhere(table > 0.0):
            key = tuple(int(x) for x in t)
            entries.append((key, float(table[tuple(t)])))
        fm = FactorTable.from_entries(sorted_scope, entries)
        if sorted_scope != f.scope:
            # Present in the factor's own scope order.
            inv = [sorted_scope.index(v) for v in f.scope]
            fm = FactorTable.from_entries(
                f.scope, ((tuple(t[i] for i in inv), p) for t, p in zip(fm.tuples, fm.probs))
            )
        factor_marginals.append(fm)

    return MarginalSet(
        variable_marginals=tuple(variable_marginals),
        factor_marginals=tuple(factor_marginals),
        log_partition=math.log(z),
    )


def induce_sparsity(model: Model, keep_fraction: float, seed: int) -> Model:
    """Keep a uniformly random ceil(keep_fraction * size) subset of every
    factor's entries, independently per factor, deterministically per seed.

    The ceiling keeps at least one entry per factor.  Draw order: factors in
    model order, one subset draw each.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    if keep_fraction == 1.0:
        return model
    rng = SplitMix64(seed)
    factors = []
    for f in model.factors:
        k = math.ceil(keep_fraction * f.size)
        chosen = rng.sample_without_replacement(f.size, k)
        factors.append(
            FactorTable.from_entries(
                f.scope, ((f.tuples[i], f.probs[i]) for i in chosen)
            )
        )
    return Model(
        variables=model.variables,
        factors=tuple(factors),
        evidence=model.evidence,
        log_scale=model.log_scale,
        source_ids=model.source_ids,
        source_factor_ids=model.source_factor_ids,
    )


@dataclass(frozen=True)
class ComparisonReport:
    max_abs_error: float
    worst_variable: int
    passed: bool


def compare_marginals(a: MarginalSet, b: MarginalSet, tol: float = 1e-5) -> ComparisonReport:
    """Maximum absolute difference over all variable marginal entries."""
    if len(a.variable_marginals) != len(b.variable_marginals):
        raise ValueError("marginal sets cover different variable sets")
    worst = 0.0
    worst_var = 0
    for v, (da, db) in enumerate(zip(a.variable_marginals, b.variable_marginals)):
        if len(da) != len(db):
            raise ValueError(f"variable {v}: domain sizes differ ({len(da)} vs {len(db)})")
        for x, y in zip(da, db):
            err = abs(x - y)
            if err > worst:
                worst = err
                worst_var = v
    return ComparisonReport(max_abs_error=worst, worst_variable=worst_var, passed=worst <= tol)


def random_model(
    seed: int,
    max_joint_cells: int = 10**6,
    with_evidence: bool = False,
) -> Model:
    """Seeded random model for the verification suite.

    4-12 variables with domains 2-4, 3-12 factors with arities 1-4 and
    support fractions 0.3-1.0.  A random full assignment is planted into
    every factor's support so the joint mass stays positive, and evidence
    (when requested) fixes 1-2 variables to their planted values.
    """
    rng = SplitMix64(seed)
    while True:
        n = 4 + rng.below(9)
        sizes = [2 + rng.below(3) for _ in range(n)]
        cells = 1
        for d in sizes:
            cells *= d
        if cells <= max_joint_cells:
            break
    planted = [rng.below(d) for d in sizes]
    m = 3 + rng.below(10)
    factors = []
    for _ in range(m):
        arity = 1 + rng.below(min(4, n))
        scope = rng.sample_without_replacement(n, arity)
        table = 1
        for v in scope:
            table *= sizes[v]
        fraction = 0.3 + 0.7 * rng.uniform()
        k = max(1, math.ceil(fraction * table))
        chosen = set(rng.sample_without_replacement(table, k))
        planted_index = 0
        for v in scope:
            planted_index = planted_index * sizes[v] + planted[v]
        chosen.add(planted_index)
        entries = []
        for flat in sorted(chosen):
            t = []
            rest = flat
            for v in reversed(scope):
                t.append(rest % sizes[v])
                rest //= sizes[v]
            entries.append((tuple(reversed(t)), 0.05 + 0.95 * rng.uniform()))
        factors.append(FactorTable.from_entries(tuple(scope), entries))
    evidence = {}
    if with_evidence:
        count = 1 + rng.below(2)
        for v in rng.sample_without_replacement(n, count):
            evidence[v] = planted[v]
    return Model(
        variables=tuple(Variable(i, d) for i, d in enumerate(sizes)),
        factors=tuple(factors),
        evidence=tuple(sorted(evidence.items())),
    )
