"""Discrete Bayesian-network file handling and dataset encoding.

Parses the BIF dialect used by the classic benchmark networks: ``network``
blocks, ``variable`` blocks with ``type discrete [k] { levels };`` and
``probability`` blocks holding either a ``table`` row or per-configuration
``( level, ... ) p, p, ...;`` rows.  ``property`` lines are ignored.  Arcs
come from the conditioning lists of the probability blocks.

A parsed network has no intrinsic outcome; the underlying causal graph
designates the highest-index sink node as a provisional outcome so graph
invariants hold, and experiments name their outcome variable explicitly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional

import numpy as np

from .dataset import DataError, Dataset
from .graphs import CausalDag
from .synth import BayesNet


class BifError(DataError):
    """Syntax or consistency error in a BIF file."""


@dataclass(frozen=True)
class DiscreteNet:
    """A possibly multi-level Bayesian network with named levels."""

    net: BayesNet
    levels: tuple[tuple[str, ...], ...]
    name: str = ""

    def __post_init__(self) -> None:
        if len(self.levels) != self.net.dag.node_count:
            raise DataError("one level list per variable required")
        for node, levs in enumerate(self.levels):
            if len(levs) != self.net.cards[node]:
                raise DataError(
                    f"variable {self.variable_names[node]} declares "
                    f"{self.net.cards[node]} levels but lists {len(levs)}"
                )
            if len(set(levs)) != len(levs):
                raise DataError(
                    f"duplicate level names on {self.variable_names[node]}"
                )

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.net.dag.node_labels

    @property
    def node_count(self) -> int:
        return self.net.dag.node_count

    @property
    def edge_count(self) -> int:
        return len(self.net.dag.edges)

    def index_of(self, variable: str) -> int:
        try:
            return self.variable_names.index(variable)
        except ValueError:
            raise DataError(f"unknown variable {variable!r}") from None

    def parents_of(self, variable: str) -> tuple[str, ...]:
        node = self.index_of(variable)
        return tuple(self.variable_names[p] for p in self.net.dag.parents[node])


# --- tokenizer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"[^"]*")
  | (?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?![A-Za-z0-9_]))
  | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.\-]*)
  | (?P<punct>[{}()\[\];|,])
    """,
    re.VERBOSE | re.DOTALL,
)  # level names may start with digits (e.g. 0_5_MG_L), so a number token
#    must not be immediately followed by an identifier character


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            col = pos - line_start + 1
            raise BifError(f"line {line}, col {col}: unexpected character {text[pos]!r}")
        kind = match.lastgroup or ""
        value = match.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rfind("\n") + 1
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expect: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok is None:
            raise BifError("unexpected end of input")
        if expect is not None and tok.text != expect:
            raise BifError(
                f"line {tok.line}, col {tok.col}: expected {expect!r}, "
                f"got {tok.text!r}"
            )
        self.pos += 1
        return tok

    def next_word(self) -> _Token:
        tok = self.next()
        if tok.kind != "word":
            raise BifError(
                f"line {tok.line}, col {tok.col}: expected a name, got {tok.text!r}"
            )
        return tok

    def next_number(self) -> float:
        tok = self.next()
        if tok.kind != "num":
            raise BifError(
                f"line {tok.line}, col {tok.col}: expected a number, got {tok.text!r}"
            )
        return float(tok.text)

    def skip_statement(self) -> None:
        """Consume tokens through the next ';' (property lines etc.)."""
        while True:
            tok = self.next()
            if tok.text == ";":
                return

    def skip_block(self) -> None:
        depth = 0
        while True:
            tok = self.next()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
                if depth == 0:
                    return


def parse_bif(text: str) -> DiscreteNet:
    """Parse BIF text into a :class:`DiscreteNet`.

    CPT rows are validated against [0, 1], must cover every parent
    configuration exactly once and must sum to one (within 1e-6; they are
    renormalised exactly).  Errors carry line/column positions.
    """
    parser = _Parser(_tokenize(text))
    name = ""
    var_names: list[str] = []
    var_levels: dict[str, tuple[str, ...]] = {}
    prob_blocks: list[tuple[_Token, str, list[str], list]] = []

    while parser.peek() is not None:
        tok = parser.next_word()
        if tok.text == "network":
            name_tok = parser.peek()
            if name_tok is not None and name_tok.kind == "word":
                name = parser.next().text
            parser.skip_block()
        elif tok.text == "variable":
            var_tok = parser.next_word()
            if var_tok.text in var_levels:
                raise BifError(
                    f"line {var_tok.line}: variable {var_tok.text!r} redeclared"
                )
            levels = _parse_variable_block(parser, var_tok)
            var_names.append(var_tok.text)
            var_levels[var_tok.text] = levels
        elif tok.text == "probability":
            prob_blocks.append(_parse_probability_block(parser))
        else:
            raise BifError(
                f"line {tok.line}, col {tok.col}: unexpected {tok.text!r} "
                "(wanted network/variable/probability)"
            )

    if not var_names:
        raise BifError("no variables declared")
    return _assemble(name, var_names, var_levels, prob_blocks)


def _parse_variable_block(parser: _Parser, var_tok: _Token) -> tuple[str, ...]:
    parser.next("{")
    levels: Optional[tuple[str, ...]] = None
    while True:
        tok = parser.next()
        if tok.text == "}":
            break
        if tok.text == "type":
            parser.next("discrete")
            parser.next("[")
            count = int(parser.next_number())
            parser.next("]")
            parser.next("{")
            names: list[str] = []
            while True:
                item = parser.next()
                if item.text == "}":
                    break
                if item.text == ",":
                    continue
                names.append(item.text)
            parser.next(";")
            if len(names) != count:
                raise BifError(
                    f"line {var_tok.line}: {var_tok.text} declares {count} "
                    f"levels but lists {len(names)}"
                )
            levels = tuple(names)
        elif tok.text == "property":
            parser.skip_statement()
        else:
            raise BifError(
                f"line {tok.line}, col {tok.col}: unexpected {tok.text!r} in "
                f"variable {var_tok.text}"
            )
    if levels is None:
        raise BifError(f"line {var_tok.line}: variable {var_tok.text} has no type")
    return levels


def _parse_probability_block(parser: _Parser):
    parser.next("(")
    child_tok = parser.next_word()
    parents: list[str] = []
    tok = parser.next()
    if tok.text == "|":
        while True:
            parents.append(parser.next_word().text)
            tok = parser.next()
            if tok.text == ")":
                break
            if tok.text != ",":
                raise BifError(
                    f"line {tok.line}, col {tok.col}: expected ',' or ')'"
                )
    elif tok.text != ")":
        raise BifError(f"line {tok.line}, col {tok.col}: expected '|' or ')'")

    parser.next("{")
    entries: list = []
    while True:
        tok = parser.next()
        if tok.text == "}":
            break
        if tok.text == "table":
            values: list[float] = []
            while True:
                item = parser.peek()
                if item is None:
                    raise BifError("unexpected end of input in table row")
                if item.text == ";":
                    parser.next()
                    break
                if item.text == ",":
                    parser.next()
                    continue
                values.append(parser.next_number())
            entries.append(("table", None, values, tok))
        elif tok.text == "(":
            config: list[str] = []
            while True:
                item = parser.next()
                if item.text == ")":
                    break
                if item.text == ",":
                    continue
                config.append(item.text)
            values = []
            while True:
                item = parser.peek()
                if item is None:
                    raise BifError("unexpected end of input in probability row")
                if item.text == ";":
                    parser.next()
                    break
                if item.text == ",":
                    parser.next()
                    continue
                values.append(parser.next_number())
            entries.append(("row", config, values, tok))
        elif tok.text == "property":
            parser.skip_statement()
        else:
            raise BifError(
                f"line {tok.line}, col {tok.col}: unexpected {tok.text!r} in "
                f"probability block for {child_tok.text}"
            )
    return (child_tok, child_tok.text, parents, entries)


def _assemble(name, var_names, var_levels, prob_blocks) -> DiscreteNet:
    index = {v: i for i, v in enumerate(var_names)}
    cards = tuple(len(var_levels[v]) for v in var_names)
    edges: set[tuple[int, int]] = set()
    raw: dict[int, tuple[list[str], list]] = {}

    for child_tok, child, parents, entries in prob_blocks:
        if child not in index:
            raise BifError(
                f"line {child_tok.line}: undeclared variable {child!r}"
            )
        for p in parents:
            if p not in index:
                raise BifError(
                    f"line {child_tok.line}: undeclared parent {p!r} of {child}"
                )
        child_idx = index[child]
        if child_idx in raw:
            raise BifError(
                f"line {child_tok.line}: duplicate probability block for {child}"
            )
        for p in parents:
            edges.add((index[p], child_idx))
        raw[child_idx] = (parents, entries)

    missing = [v for i, v in enumerate(var_names) if i not in raw]
    if missing:
        raise BifError(f"no probability block for {', '.join(missing)}")

    dag = _dag_for_parsed(var_names, edges)
    tables: list[np.ndarray] = []
    for node in range(len(var_names)):
        parents, entries = raw[node]
        tables.append(
            _build_table(
                node, var_names, var_levels, cards, dag, parents, entries, index
            )
        )
    net = BayesNet(dag=dag, cards=cards, tables=tuple(tables))
    return DiscreteNet(
        net=net, levels=tuple(var_levels[v] for v in var_names), name=name
    )


def _dag_for_parsed(var_names: list[str], edges: set[tuple[int, int]]) -> CausalDag:
    has_child = {u for u, _ in edges}
    sinks = [i for i in range(len(var_names)) if i not in has_child]
    if not sinks:
        raise BifError("network has no sink node; arcs must be cyclic")
    return CausalDag(
        node_count=len(var_names),
        node_labels=tuple(var_names),
        edges=frozenset(edges),
        outcome=max(sinks),
        observed=(True,) * len(var_names),
    )


def _build_table(
    node, var_names, var_levels, cards, dag, bif_parents, entries, index
) -> np.ndarray:
    card = cards[node]
    sorted_parents = dag.parents[node]
    rows = 1
    for p in sorted_parents:
        rows *= cards[p]
    strides = {}
    acc = 1
    for p in sorted_parents:
        strides[p] = acc
        acc *= cards[p]

    table = np.full((rows, card), np.nan, dtype=np.float64)
    child_name = var_names[node]

    def place(row_idx: int, values: list[float], tok) -> None:
        if len(values) != card:
            raise BifError(
                f"line {tok.line}: {child_name} row lists {len(values)} "
                f"probabilities, needs {card}"
            )
        if any(v < 0 or v > 1 for v in values):
            raise BifError(
                f"line {tok.line}: probability outside [0, 1] for {child_name}"
            )
        total = sum(values)
        if abs(total - 1.0) > 1e-3:  # printed files round their entries
            raise BifError(
                f"line {tok.line}: {child_name} row sums to {total:.8f}, not 1"
            )
        if not np.isnan(table[row_idx]).all():
            raise BifError(f"line {tok.line}: duplicate row for {child_name}")
        row = np.asarray(values, dtype=np.float64)
        if abs(total - 1.0) > 1e-12:
            row = row / total
        table[row_idx] = row

    for kind, config, values, tok in entries:
        if kind == "table":
            if not bif_parents:
                place(0, values, tok)
                continue
            # conditional `table`: configurations iterate over the listed
            # parents in row-major order (last listed parent fastest),
            # child levels fastest within each configuration
            if len(values) != rows * card:
                raise BifError(
                    f"line {tok.line}: table for {child_name} lists "
                    f"{len(values)} values, needs {rows * card}"
                )
            parent_cards = [cards[index[p]] for p in bif_parents]
            for flat, assignment in enumerate(product(*[range(c) for c in parent_cards])):
                row_idx = sum(
                    assignment[k] * strides[index[p]]
                    for k, p in enumerate(bif_parents)
                )
                chunk = values[flat * card : (flat + 1) * card]
                place(row_idx, chunk, tok)
        else:
            if len(config) != len(bif_parents):
                raise BifError(
                    f"line {tok.line}: configuration arity mismatch for "
                    f"{child_name}"
                )
            row_idx = 0
            for level_name, parent in zip(config, bif_parents):
                p_idx = index[parent]
                try:
                    level_idx = var_levels[parent].index(level_name)
                except ValueError:
                    raise BifError(
                        f"line {tok.line}: unknown level {level_name!r} "
                        f"of {parent}"
                    ) from None
                row_idx += level_idx * strides[p_idx]
            place(row_idx, values, tok)

    if np.isnan(table).any():
        raise BifError(f"missing CPT rows for {child_name}")
    return table


def write_bif(dnet: DiscreteNet) -> str:
    """Serialise to BIF text; parse_bif(write_bif(x)) reproduces x exactly."""
    out: list[str] = [f"network {dnet.name or 'unnamed'} {{", "}"]
    names = dnet.variable_names
    for node, var in enumerate(names):
        levels = ", ".join(dnet.levels[node])
        out.append(f"variable {var} {{")
        out.append(
            f"  type discrete [ {dnet.net.cards[node]} ] {{ {levels} }};"
        )
        out.append("}")
    for node, var in enumerate(names):
        parents = dnet.net.dag.parents[node]
        table = dnet.net.tables[node]
        if not parents:
            row = ", ".join(repr(float(v)) for v in table[0])
            out.append(f"probability ( {var} ) {{")
            out.append(f"  table {row};")
            out.append("}")
            continue
        plist = ", ".join(names[p] for p in parents)
        out.append(f"probability ( {var} | {plist} ) {{")
        strides = dnet.net.parent_strides(node)
        for row_idx in range(table.shape[0]):
            config = []
            for p, stride in zip(parents, strides):
                level_idx = (row_idx // stride) % dnet.net.cards[p]
                config.append(dnet.levels[p][level_idx])
            cfg = ", ".join(config)
            row = ", ".join(repr(float(v)) for v in table[row_idx])
            out.append(f"  ({cfg}) {row};")
        out.append("}")
    return "\n".join(out) + "\n"


def load_bif(path: str) -> DiscreteNet:
    with open(path, "r") as handle:
        return parse_bif(handle.read())


def one_hot_encode(
    dnet: DiscreteNet,
    codes: np.ndarray,
    outcome_var: str,
    positive_levels: Iterable[str],
) -> Dataset:
    """Expand every non-outcome variable into per-level indicator columns.

    Columns are named ``Variable_Level`` and ordered by variable then
    level.  The outcome column is 1 exactly when the outcome variable's
    level falls in ``positive_levels`` (a non-empty proper subset of its
    levels).
    """
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[1] != dnet.node_count:
        raise DataError("codes must have one column per network variable")
    out_idx = dnet.index_of(outcome_var)
    out_levels = dnet.levels[out_idx]
    positive = list(dict.fromkeys(positive_levels))
    if not positive:
        raise DataError("positive_levels must not be empty")
    bad = [lev for lev in positive if lev not in out_levels]
    if bad:
        raise DataError(f"unknown level(s) {bad} for {outcome_var}")
    if len(positive) >= len(out_levels):
        raise DataError("positive_levels must be a proper subset of the levels")
    positive_codes = np.asarray([out_levels.index(lev) for lev in positive])

    columns: list[np.ndarray] = []
    column_names: list[str] = []
    for node, var in enumerate(dnet.variable_names):
        if node == out_idx:
            continue
        for level_idx, level in enumerate(dnet.levels[node]):
            column_names.append(f"{var}_{level}")
            columns.append((codes[:, node] == level_idx).astype(np.int64))
    features = (
        np.column_stack(columns) if columns else np.zeros((codes.shape[0], 0), int)
    )
    outcome = np.isin(codes[:, out_idx], positive_codes).astype(np.int64)
    return Dataset(
        feature_names=tuple(column_names),
        features=features,
        outcome=outcome,
        cards=(2,) * features.shape[1],
    )


def most_frequent_level(dnet: DiscreteNet, codes: np.ndarray, variable: str) -> str:
    """Default positive class: the variable's most frequent level in the
    sample (smallest level index on ties)."""
    node = dnet.index_of(variable)
    counts = np.bincount(
        np.asarray(codes)[:, node], minlength=dnet.net.cards[node]
    )
    return dnet.levels[node][int(np.argmax(counts))]
