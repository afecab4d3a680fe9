"""Physical factor layouts used by the join kernels.

Two layouts coexist.  A *level-order trie* flattens a conventional trie into
per-level arrays: each level stores the node values plus the contiguous range
of children in the next level, and the last level aligns 1:1 with stored
assignments and their probabilities.  *Index lists* encode each assignment as
a single mixed-radix integer: the forward index treats the first variable of
the order as most significant, the reverse index the last.  Reverse-sorted
lists double as placeholders for values flowing back down the tree.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOverflowError
from .model import FactorTable

#: Assignments must encode into a signed 64-bit integer.
INDEX_LIMIT = 2**63


def encode_index(
    assignment: Sequence[int], radices: Sequence[int], reverse: bool = False
) -> int:
    """Mixed-radix encoding of an assignment.

    Forward: the first position is most significant.  Reverse: the last
    position is most significant.
    """
    if len(assignment) != len(radices):
        raise ValueError("assignment and radices must have equal length")
    pairs = zip(assignment, radices)
    if reverse:
        pairs = zip(reversed(assignment), reversed(radices))
    index = 0
    for value, radix in pairs:
        if not 0 <= value < radix:
            raise ValueError(f"component {value} out of range [0, {radix})")
        index = index * radix + value
    return index


def decode_index(
    index: int, radices: Sequence[int], reverse: bool = False
) -> tuple[int, ...]:
    """Inverse of :func:`encode_index`."""
    total = 1
    for r in radices:
        total *= r
    if not 0 <= index < max(total, 1):
        raise ValueError(f"index {index} out of range [0, {total})")
    out = []
    for radix in reversed(radices) if not reverse else radices:
        out.append(index % radix)
        index //= radix
    if not reverse:
        out.reverse()
    return tuple(out)


@dataclass
class LevelOrderTrie:
    """A trie over reordered assignments, flattened into per-level arrays.

    ``level_values[l]`` holds the node values of level ``l`` (cells), grouped
    so siblings are contiguous and strictly increasing.  For non-leaf levels,
    cell ``p`` owns the children block ``level_values[l + 1][child_lo[l][p] :
    child_hi[l][p]]``.  Leaf cells align with ``leaf_probs``; every
    root-to-leaf path spells exactly one stored assignment.
    """

    var_order: tuple[int, ...]
    level_values: list[list[int]]
    child_lo: list[list[int]]
    child_hi: list[list[int]]
    leaf_probs: list[float]

    @property
    def depth(self) -> int:
        return len(self.var_order)

    @property
    def num_leaves(self) -> int:
        return len(self.leaf_probs)

    def root_range(self) -> tuple[int, int]:
        return 0, len(self.level_values[0])

    def leaves(self) -> list[tuple[tuple[int, ...], float]]:
        """All (assignment, probability) pairs in trie order."""
        out: list[tuple[tuple[int, ...], float]] = []

        def walk(level: int, lo: int, hi: int, prefix: tuple[int, ...]) -> None:
            for p in range(lo, hi):
                value = self.level_values[level][p]
                if level == self.depth - 1:
                    out.append((prefix + (value,), self.leaf_probs[p]))
                else:
                    walk(
                        level + 1,
                        self.child_lo[level][p],
                        self.child_hi[level][p],
                        prefix + (value,),
                    )

        if self.num_leaves:
            walk(0, 0, len(self.level_values[0]), ())
        return out


def build_trie(factor: FactorTable, var_order: Sequence[int]) -> LevelOrderTrie:
    """Build a level-order trie over the factor's assignments in ``var_order``.

    ``var_order`` must be a permutation of the factor scope.  Construction is
    a single grouping pass over the rows sorted in the target order; already
    sorted input (e.g. a list ordered by the matching index) costs only the
    verification scan.
    """
    if sorted(var_order) != sorted(factor.scope):
        raise ValueError(f"var_order {var_order} is not a permutation of {factor.scope}")
    perm = [factor.scope.index(v) for v in var_order]
    rows = sorted(
        (tuple(t[i] for i in perm), p) for t, p in zip(factor.tuples, factor.probs)
    )
    k = len(var_order)
    if k == 0:
        raise ValueError("cannot build a trie over an empty scope")

    n = len(rows)
    level_values: list[list[int]] = [[] for _ in range(k)]
    child_lo: list[list[int]] = [[] for _ in range(k - 1)]
    child_hi: list[list[int]] = [[] for _ in range(k - 1)]
    # starts[l][i] = row index where the i-th level-l cell begins.
    starts: list[list[int]] = []
    for level in range(k):
        level_starts = []
        for i in range(n):
            if i == 0 or rows[i][0][: level + 1] != rows[i - 1][0][: level + 1]:
                level_starts.append(i)
                level_values[level].append(rows[i][0][level])
        starts.append(level_starts)
    for level in range(k - 1):
        below = starts[level + 1]
        cells = starts[level]
        for i, a in enumerate(cells):
            b = cells[i + 1] if i + 1 < len(cells) else n
            child_lo[level].append(bisect.bisect_left(below, a))
            child_hi[level].append(bisect.bisect_left(below, b))
    leaf_probs = [p for _, p in rows]
    return LevelOrderTrie(
        var_order=tuple(var_order),
        level_values=level_values,
        child_lo=child_lo,
        child_hi=child_hi,
        leaf_probs=leaf_probs,
    )


@dataclass
class IndexedList:
    """Assignments of one factor as mixed-radix indices, sorted by the
    reverse index.  ``forward_indices`` is populated for the
    forward-and-reverse kind used by intermediary messages."""

    var_order: tuple[int, ...]
    radices: tuple[int, ...]
    reverse_indices: np.ndarray
    probs: np.ndarray
    forward_indices: np.ndarray | None
    kind: str  # "reverse" or "forward_and_reverse"

    def __len__(self) -> int:
        return len(self.reverse_indices)

    def entries(self) -> list[tuple[tuple[int, ...], float]]:
        """Decode back to (assignment, probability) pairs in list order."""
        return [
            (decode_index(int(idx), self.radices, reverse=True), float(p))
            for idx, p in zip(self.reverse_indices, self.probs)
        ]


def build_index_list(
    factor: FactorTable,
    domain_sizes: Sequence[int],
    kind: str = "reverse",
) -> IndexedList:
    """Encode a factor as an index list sorted by reverse index.

    Raises :class:`IndexOverflowError` when the scope's truth table does not
    fit in a signed 64-bit index; callers fall back to trie-only handling.
    """
    if kind not in ("reverse", "forward_and_reverse"):
        raise ValueError(f"unknown kind {kind!r}")
    radices = tuple(domain_sizes[v] for v in factor.scope)
    total = 1
    for r in radices:
        total *= r
    if total > INDEX_LIMIT:
        raise IndexOverflowError(
            f"truth table of scope {factor.scope} needs {total} indices; "
            f"limit is {INDEX_LIMIT}"
        )
    rev = [encode_index(t, radices, reverse=True) for t in factor.tuples]
    order = sorted(range(len(rev)), key=rev.__getitem__)
    reverse_indices = np.array([rev[i] for i in order], dtype=np.int64)
    probs = np.array([factor.probs[i] for i in order], dtype=np.float64)
    forward = None
    if kind == "forward_and_reverse":
        forward = np.array(
            [encode_index(factor.tuples[i], radices, reverse=False) for i in order],
            dtype=np.int64,
        )
    return IndexedList(
        var_order=factor.scope,
        radices=radices,
        reverse_indices=reverse_indices,
        probs=probs,
        forward_indices=forward,
        kind=kind,
    )
