"""UAI-format network and evidence parsing, plus text emitters.

Conventions: tables are written row-major over the scope as declared in the
file, with the LAST scope variable varying fastest.  Zero entries are dropped
on parse (listing representation) and scopes are normalized to ascending
variable id with assignments re-indexed accordingly.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

from .errors import UaiFormatError
from .model import FactorTable, MarginalSet, Model, Variable

_PREAMBLES = ("MARKOV", "BAYES")


class _Tokens:
    """Whitespace token stream with positional error messages."""

    def __init__(self, text: str):
        self._toks = text.split()
        self._pos = 0

    def next(self, what: str) -> str:
        if self._pos >= len(self._toks):
            raise UaiFormatError(f"truncated input: expected {what}")
        tok = self._toks[self._pos]
        self._pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise UaiFormatError(f"expected integer {what}, got {tok!r}") from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise UaiFormatError(f"expected number {what}, got {tok!r}") from None

    def expect_end(self) -> None:
        if self._pos < len(self._toks):
            raise UaiFormatError(f"trailing tokens starting at {self._toks[self._pos]!r}")


def _decode_text(data: str | bytes) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _row_major_assignments(sizes: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All assignments in row-major order (last position fastest)."""
    n = len(sizes)
    current = [0] * n
    while True:
        yield tuple(current)
        for i in range(n - 1, -1, -1):
            current[i] += 1
            if current[i] < sizes[i]:
                break
            current[i] = 0
        else:
            return


def parse_uai(data: str | bytes) -> Model:
    """Parse a MARKOV/BAYES network into a :class:`Model`.

    BAYES files are treated identically to MARKOV (CPTs become plain
    factors).  Table entries equal to 0 are not stored.
    """
    toks = _Tokens(_decode_text(data))
    preamble = toks.next("preamble")
    if preamble not in _PREAMBLES:
        raise UaiFormatError(f"unknown preamble {preamble!r}, expected MARKOV or BAYES")
    n = toks.next_int("variable count")
    if n < 0:
        raise UaiFormatError("negative variable count")
    sizes = []
    for i in range(n):
        d = toks.next_int(f"domain size of variable {i}")
        if d < 1:
            raise UaiFormatError(f"variable {i}: domain size must be >= 1, got {d}")
        sizes.append(d)
    m = toks.next_int("factor count")
    if m < 0:
        raise UaiFormatError("negative factor count")
    scopes: list[tuple[int, ...]] = []
    for j in range(m):
        arity = toks.next_int(f"arity of factor {j}")
        if arity < 1:
            raise UaiFormatError(f"factor {j}: arity must be >= 1, got {arity}")
        scope = tuple(toks.next_int(f"scope variable of factor {j}") for _ in range(arity))
        for v in scope:
            if not 0 <= v < n:
                raise UaiFormatError(f"factor {j}: variable id {v} out of range [0, {n})")
        if len(set(scope)) != arity:
            raise UaiFormatError(f"factor {j}: repeated variable in scope {scope}")
        scopes.append(scope)

    factors = []
    for j, scope in enumerate(scopes):
        table_size = 1
        for v in scope:
            table_size *= sizes[v]
        count = toks.next_int(f"entry count of factor {j}")
        if count != table_size:
            raise UaiFormatError(
                f"factor {j}: entry count {count} does not match truth-table size {table_size}"
            )
        scope_sizes = [sizes[v] for v in scope]
        entries = []
        for t in _row_major_assignments(scope_sizes):
            p = toks.next_float(f"entry of factor {j}")
            if p < 0 or math.isnan(p) or math.isinf(p):
                raise UaiFormatError(f"factor {j}: invalid probability {p}")
            if p != 0.0:
                entries.append((t, p))
        factors.append(FactorTable.from_entries(scope, entries).canonical())
    toks.expect_end()

    return Model(
        variables=tuple(Variable(i, d) for i, d in enumerate(sizes)),
        factors=tuple(factors),
    )


def parse_evidence(data: str | bytes, domain_sizes: Sequence[int]) -> dict[int, int]:
    """Parse a .evid stream (count, then variable/value pairs)."""
    toks = _Tokens(_decode_text(data))
    count = toks.next_int("evidence count")
    if count < 0:
        raise UaiFormatError("negative evidence count")
    out: dict[int, int] = {}
    for _ in range(count):
        var = toks.next_int("evidence variable")
        value = toks.next_int("evidence value")
        if var in out:
            raise UaiFormatError(f"duplicate evidence variable {var}")
        if not 0 <= var < len(domain_sizes):
            raise UaiFormatError(f"evidence variable {var} out of range")
        if not 0 <= value < domain_sizes[var]:
            raise UaiFormatError(
                f"evidence value {value} out of range for variable {var} "
                f"(domain size {domain_sizes[var]})"
            )
        out[var] = value
    toks.expect_end()
    return out


def _format_prob(p: float) -> str:
    # Fixed six decimals keeps six significant digits only down to 0.1;
    # smaller non-zero values switch to scientific notation.
    if p != 0.0 and abs(p) < 0.1:
        return f"{p:.6e}"
    return f"{p:.6f}"


def write_marginals(result: MarginalSet) -> str:
    """Render variable marginals as MAR-style text.

    Line 1 is "MAR"; line 2 lists the variable count, then for each variable
    its domain size followed by its distribution.
    """
    parts = [str(len(result.variable_marginals))]
    for dist in result.variable_marginals:
        parts.append(str(len(dist)))
        parts.extend(_format_prob(p) for p in dist)
    return "MAR\n" + " ".join(parts)


def write_uai(model: Model) -> str:
    """Render a model as MARKOV-format text (dense tables, zeros restored)."""
    if model.log_scale != 0.0:
        raise ValueError("cannot serialize a model with a folded scalar weight")
    lines = ["MARKOV", str(model.num_variables)]
    lines.append(" ".join(str(v.domain_size) for v in model.variables))
    lines.append(str(model.num_factors))
    for f in model.factors:
        lines.append(" ".join([str(len(f.scope))] + [str(v) for v in f.scope]))
    for f in model.factors:
        scope_sizes = [model.variables[v].domain_size for v in f.scope]
        table_size = 1
        for d in scope_sizes:
            table_size *= d
        lookup = f.as_dict()
        lines.append("")
        lines.append(str(table_size))
        values = [repr(lookup.get(t, 0.0)) for t in _row_major_assignments(scope_sizes)]
        lines.append(" ".join(values))
    return "\n".join(lines) + "\n"
