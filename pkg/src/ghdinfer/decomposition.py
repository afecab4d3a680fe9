"""Rooted tree decompositions of the model's primal graph.

The primal graph connects every pair of variables sharing a factor scope.
Min-fill elimination triangulates it; the maximal cliques of the fill-in
graph become bags, joined by a maximum-weight spanning tree on separator
sizes.  Each factor is assigned to exactly one bag containing its scope.
Disconnected components are stitched together with synthetic zero-separator
edges so a single rooted tree always comes out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Model


@dataclass
class BagNode:
    """One node of the decomposition."""

    id: int
    chi: tuple[int, ...]                 # bag variables, ascending
    lambda_edges: tuple[int, ...] = ()   # factor/hyperedge ids routed here
    alpha: tuple[int, ...] = ()          # factors uniquely assigned here
    parent: int | None = None
    children: tuple[int, ...] = ()
    separator: tuple[int, ...] = ()      # chi ∩ chi(parent), ascending


@dataclass
class Ghd:
    """A rooted, labeled decomposition tree."""

    bags: list[BagNode]
    root: int

    @property
    def treewidth(self) -> int:
        # Convention: the size of the largest bag, not size - 1.
        return max(len(b.chi) for b in self.bags)

    def topo_down(self) -> list[int]:
        """Bag ids in level order from the root toward the leaves."""
        order = [self.root]
        i = 0
        while i < len(order):
            order.extend(self.bags[order[i]].children)
            i += 1
        return order

    def topo_up(self) -> list[int]:
        """Bag ids in level order from the leaves toward the root."""
        return list(reversed(self.topo_down()))

    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs."""
        return [(b.parent, b.id) for b in self.bags if b.parent is not None]


def _primal_adjacency(model: Model) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(model.num_variables)]
    for f in model.factors:
        for i, u in enumerate(f.scope):
            for v in f.scope[i + 1 :]:
                adj[u].add(v)
                adj[v].add(u)
    return adj


def _fill_cost(adj: list[set[int]], alive: set[int], v: int) -> int:
    nbrs = [u for u in adj[v] if u in alive]
    cost = 0
    for i, a in enumerate(nbrs):
        for b in nbrs[i + 1 :]:
            if b not in adj[a]:
                cost += 1
    return cost


def min_fill_order(model: Model) -> list[int]:
    """Greedy elimination ordering minimizing fill edges at each step.

    Ties break toward the smallest variable id, so the ordering is
    deterministic for a given model.
    """
    if model.num_variables == 0:
        raise ValueError("cannot order a model with no variables")
    adj = _primal_adjacency(model)
    alive = set(range(model.num_variables))
    order: list[int] = []
    while alive:
        best = min(alive, key=lambda v: (_fill_cost(adj, alive, v), v))
        nbrs = [u for u in adj[best] if u in alive]
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        alive.remove(best)
        order.append(best)
    return order


def _elimination_cliques(model: Model, ordering: list[int]) -> list[tuple[int, ...]]:
    adj = _primal_adjacency(model)
    alive = set(range(model.num_variables))
    cliques = []
    for v in ordering:
        nbrs = [u for u in adj[v] if u in alive]
        cliques.append(tuple(sorted([v] + nbrs)))
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        alive.remove(v)
    return cliques


def build_ghd(model: Model, ordering: list[int], root_override: int | None = None) -> Ghd:
    """Build a rooted decomposition from an elimination ordering.

    Bags are the maximal cliques of the fill-in graph.  The tree is a
    maximum-weight spanning tree on separator sizes (Kruskal, deterministic
    tie-breaks).  The root is the bag with the largest truth table unless
    ``root_override`` picks another; factors go to the containing bag with
    the smallest truth table.
    """
    if sorted(ordering) != list(range(model.num_variables)):
        raise ValueError("ordering must be a permutation of the variable ids")
    cliques = _elimination_cliques(model, ordering)
    # Absorb non-maximal cliques (duplicates keep their first occurrence).
    sets = [set(c) for c in cliques]
    maximal = []
    for i, c in enumerate(cliques):
        dominated = any(
            sets[i] < sets[j] or (sets[i] == sets[j] and j < i)
            for j in range(len(cliques))
            if j != i
        )
        if not dominated:
            maximal.append(c)
    bags = [BagNode(id=i, chi=c) for i, c in enumerate(maximal)]
    bag_sets = [set(c) for c in maximal]

    # Maximum-weight spanning forest on separator size, then stitch
    # components with synthetic zero-separator edges.
    candidates = []
    for i in range(len(bags)):
        for j in range(i + 1, len(bags)):
            w = len(bag_sets[i] & bag_sets[j])
            if w > 0:
                candidates.append((-w, i, j))
    candidates.sort()
    parent_uf = list(range(len(bags)))

    def find(x: int) -> int:
        while parent_uf[x] != x:
            parent_uf[x] = parent_uf[parent_uf[x]]
            x = parent_uf[x]
        return x

    tree_adj: list[list[int]] = [[] for _ in bags]
    for _, i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_uf[ri] = rj
            tree_adj[i].append(j)
            tree_adj[j].append(i)
    components: dict[int, int] = {}
    for i in range(len(bags)):
        components.setdefault(find(i), i)
    reps = sorted(components.values())
    for other in reps[1:]:
        tree_adj[reps[0]].append(other)
        tree_adj[other].append(reps[0])

    domains = model.domain_sizes

    def table_size(chi: tuple[int, ...]) -> int:
        size = 1
        for v in chi:
            size *= domains[v]
        return size

    if root_override is not None:
        if not 0 <= root_override < len(bags):
            raise ValueError(f"root_override {root_override} out of range")
        root = root_override
    else:
        root = max(range(len(bags)), key=lambda i: (table_size(bags[i].chi), -i))

    # Orient the tree away from the root.
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        kids = []
        for w in sorted(tree_adj[u]):
            if w not in seen:
                seen.add(w)
                bags[w].parent = u
                bags[w].separator = tuple(sorted(set(bags[w].chi) & set(bags[u].chi)))
                kids.append(w)
                stack.append(w)
        bags[u].children = tuple(kids)

    # Unique factor assignment: smallest containing truth table, then bag id.
    alpha: list[list[int]] = [[] for _ in bags]
    for fid, f in enumerate(model.factors):
        scope = set(f.scope)
        hosts = [b.id for b in bags if scope <= bag_sets[b.id]]
        if not hosts:
            raise ValueError(f"no bag contains factor {fid} scope {f.scope}")
        chosen = min(hosts, key=lambda i: (table_size(bags[i].chi), i))
        alpha[chosen].append(fid)
    for b in bags:
        b.alpha = tuple(alpha[b.id])
        b.lambda_edges = tuple(alpha[b.id])

    return Ghd(bags=bags, root=root)


def rho(ghd: Ghd, domains: list[int] | tuple[int, ...]) -> int:
    """Total truth-table size over all bags, computed exactly."""
    total = 0
    for b in ghd.bags:
        size = 1
        for v in b.chi:
            size *= domains[v]
        total += size
    return total
