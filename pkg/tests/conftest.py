"""Shared fixtures and independent reference implementations for tests.

Everything here recomputes expected values from first principles (vertex
enumeration, explicit elimination simulation, nested-loop joins) so the
tests never assert what the engine itself produced.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from ghdinfer.model import FactorTable, Model, Variable


def lp_vertex_minimum(c, A, b):
    """Minimize c.x over {A x >= b, x >= 0} by enumerating basic solutions.

    Stacks the inequality rows with the non-negativity rows and solves every
    n-subset as equalities; feasible solutions are candidate vertices.
    Returns (best objective, list of optimal vertices).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    rows = np.vstack([A, np.eye(n)])
    rhs = np.concatenate([b, np.zeros(n)])
    best = math.inf
    argmins = []
    for subset in itertools.combinations(range(m + n), n):
        M = rows[list(subset)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, rhs[list(subset)])
        if np.any(x < -1e-9) or np.any(A @ x < b - 1e-9):
            continue
        value = float(c @ x)
        if value < best - 1e-9:
            best = value
            argmins = [x]
        elif abs(value - best) <= 1e-9:
            argmins.append(x)
    assert argmins, "LP has no vertex optimum (infeasible?)"
    return best, argmins


def elimination_fill(scopes, n, order):
    """Total fill edges added when eliminating ``order`` on the primal graph."""
    adj = [set() for _ in range(n)]
    for scope in scopes:
        for i, u in enumerate(scope):
            for v in scope[i + 1 :]:
                adj[u].add(v)
                adj[v].add(u)
    alive = set(range(n))
    fill = 0
    for v in order:
        nbrs = [u for u in adj[v] if u in alive]
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                if b not in adj[a]:
                    fill += 1
                    adj[a].add(b)
                    adj[b].add(a)
        alive.remove(v)
    return fill


def nested_loop_join(inputs, bag_vars, domain_sizes):
    """All assignments over ``bag_vars`` consistent with every input factor,
    with multiplied probabilities; brute force over the full cross product."""
    lookups = [(f.scope, f.as_dict()) for f in inputs]
    out = {}
    for assignment in itertools.product(*(range(d) for d in domain_sizes)):
        value = dict(zip(bag_vars, assignment))
        p = 1.0
        for scope, table in lookups:
            key = tuple(value[v] for v in scope)
            q = table.get(key, 0.0)
            if q == 0.0:
                p = 0.0
                break
            p *= q
        if p != 0.0:
            out[assignment] = p
    return out


def make_model(domain_sizes, factor_specs, evidence=()):
    """Model from [(scope, {assignment: prob})] specs."""
    factors = tuple(
        FactorTable.from_entries(scope, entries.items()) for scope, entries in factor_specs
    )
    return Model(
        variables=tuple(Variable(i, d) for i, d in enumerate(domain_sizes)),
        factors=factors,
        evidence=tuple(sorted(evidence)),
    )


def dense_factor(scope, domain_sizes, value_fn):
    """Full truth table over ``scope`` with value_fn(assignment) entries."""
    entries = {}
    for t in itertools.product(*(range(domain_sizes[v]) for v in scope)):
        entries[t] = value_fn(t)
    return scope, entries


@pytest.fixture
def triangle_uniform():
    """Three binary variables, three dense pairwise factors of 0.25 each."""
    specs = [
        dense_factor((0, 1), (2, 2, 2), lambda t: 0.25),
        dense_factor((1, 2), (2, 2, 2), lambda t: 0.25),
        dense_factor((0, 2), (2, 2, 2), lambda t: 0.25),
    ]
    return make_model((2, 2, 2), specs)


@pytest.fixture
def chain_model():
    """Path A - B - C with distinct dense pairwise factors."""
    specs = [
        dense_factor((0, 1), (2, 2, 2), lambda t: 0.1 + 0.2 * t[0] + 0.3 * t[1]),
        dense_factor((1, 2), (2, 2, 2), lambda t: 0.4 + 0.1 * t[0] + 0.25 * t[1]),
    ]
    return make_model((2, 2, 2), specs)


TRIANGLE_UAI = """MARKOV
3
2 2 2
3
2 0 1
2 1 2
2 0 2
4
 0.25 0.25 0.25 0.25
4
 0.25 0.25 0.25 0.25
4
 0.25 0.25 0.25 0.25
"""
