"""Synthetic causal worlds: random DAGs, latent masking, random CPTs,
ancestral sampling, and the exact-inference oracle model.

All generators are pure functions of (config, seed); rerunning with the
same seed reproduces the same world bit for bit.  Variables are binary
throughout this module; multi-level networks enter through the BIF parser
in :mod:`amie.dataio` and reuse the same :class:`BayesNet` container and
sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .dataset import Dataset
from .graphs import CausalDag, GraphError, RoleKind, classify_roles, topological_order

_RETRY_BUDGET = 1000
_MAX_CPT_ROWS = 1 << 22
_MAX_ORACLE_CONFIGS = 1 << 22


class LatentMode(Enum):
    NONE = "none"
    CONNECTED_ONLY = "connected"
    STANDALONE_DC = "standalone"


@dataclass(frozen=True)
class GenConfig:
    """Knobs for one synthetic world.

    ``edge_ratio`` is edges per node (edge count = round(ratio * nodes));
    ``cpt_margin`` keeps conditional probabilities away from 0/1 and
    ``min_effect`` forces every parent to move its child's distribution by
    at least that much somewhere in the table, so generated worlds stay
    faithful and effects stay statistically visible.
    """

    total_nodes: int
    edge_ratio: float
    latent_count: int = 0
    latent_mode: LatentMode = LatentMode.NONE
    cpt_margin: float = 0.1
    min_effect: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.total_nodes <= 0:
            raise ValueError("total_nodes must be positive")
        if self.edge_ratio <= 0:
            raise ValueError("edge_ratio must be positive")
        if self.latent_count < 0:
            raise ValueError("latent_count must be non-negative")
        if not 0 < self.cpt_margin < 0.5:
            raise ValueError("cpt_margin must lie in (0, 0.5)")
        if self.min_effect < 0:
            raise ValueError("min_effect must be non-negative")
        if self.cpt_margin + self.min_effect >= 0.5:
            raise ValueError("cpt_margin + min_effect must stay below 0.5")
        capacity = self.total_nodes * (self.total_nodes - 1) // 2
        if self.edge_count > capacity:
            raise ValueError(
                f"edge budget {self.edge_count} exceeds the "
                f"{capacity} available forward pairs"
            )

    @property
    def edge_count(self) -> int:
        return int(round(self.edge_ratio * self.total_nodes))


@dataclass(frozen=True)
class BayesNet:
    """A causal DAG plus one conditional probability table per node.

    ``tables[i]`` has one row per configuration of node ``i``'s parents
    (parents in ascending index order, first parent varying fastest) and
    one column per level of node ``i``; rows sum to one.
    """

    dag: CausalDag
    cards: tuple[int, ...]
    tables: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.cards) != self.dag.node_count:
            raise ValueError("one cardinality per node required")
        if any(c < 2 for c in self.cards):
            raise ValueError("every variable needs at least two levels")
        if len(self.tables) != self.dag.node_count:
            raise ValueError("one table per node required")
        for node, table in enumerate(self.tables):
            rows = 1
            for p in self.dag.parents[node]:
                rows *= self.cards[p]
            if table.shape != (rows, self.cards[node]):
                raise ValueError(
                    f"table for node {node} must have shape "
                    f"({rows}, {self.cards[node]}), got {table.shape}"
                )
            if np.any(table < 0) or np.any(table > 1):
                raise ValueError(f"probabilities out of [0, 1] at node {node}")
            if np.max(np.abs(table.sum(axis=1) - 1.0)) > 1e-9:
                raise ValueError(f"rows of node {node} must sum to 1")

    def parent_strides(self, node: int) -> tuple[int, ...]:
        strides = []
        acc = 1
        for p in self.dag.parents[node]:
            strides.append(acc)
            acc *= self.cards[p]
        return tuple(strides)

    def row_index(self, node: int, assignment: Mapping[int, int]) -> int:
        idx = 0
        for p, stride in zip(self.dag.parents[node], self.parent_strides(node)):
            idx += int(assignment[p]) * stride
        return idx

    def prob_one(self, node: int) -> np.ndarray:
        """P(node = 1 | row) per parent configuration; binary nodes only."""
        if self.cards[node] != 2:
            raise ValueError("prob_one applies to binary nodes")
        return self.tables[node][:, 1]

    @property
    def is_binary(self) -> bool:
        return all(c == 2 for c in self.cards)


def binary_net(dag: CausalDag, prob_one_rows: list[np.ndarray]) -> BayesNet:
    """Build an all-binary net from per-node P(node=1 | parents) vectors."""
    tables = tuple(
        np.column_stack([1.0 - np.asarray(p, dtype=np.float64), np.asarray(p)])
        for p in prob_one_rows
    )
    return BayesNet(dag=dag, cards=(2,) * dag.node_count, tables=tables)


def generate_dag(config: GenConfig) -> CausalDag:
    """Random DAG over nodes 0..n-1 in fixed topological order.

    The last node is the outcome; edges are sampled uniformly without
    replacement from the forward pairs (i < j).  Resamples until the
    outcome has at least one parent.
    """
    n = config.total_nodes
    rng = np.random.default_rng(config.seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(_RETRY_BUDGET):
        chosen = rng.choice(len(pairs), size=config.edge_count, replace=False)
        edges = frozenset(pairs[k] for k in chosen)
        if any(v == n - 1 for _, v in edges):
            labels = tuple("X%d" % i for i in range(n - 1)) + ("Y",)
            return CausalDag(
                node_count=n,
                node_labels=labels,
                edges=edges,
                outcome=n - 1,
                observed=(True,) * n,
            )
    raise GraphError(
        "could not draw a DAG whose outcome has a parent "
        f"within {_RETRY_BUDGET} attempts"
    )


def mask_latents(dag: CausalDag, config: GenConfig) -> CausalDag:
    """Introduce unobserved variables according to the configured mode.

    ``CONNECTED_ONLY`` hides existing non-outcome nodes, resampling any
    selection that would leave a latent direct cause of the outcome with
    no observed parent and no observed child.  ``STANDALONE_DC`` instead
    grafts fresh latent root nodes straight onto the outcome.  ``NONE``
    returns the graph unchanged.
    """
    if config.latent_mode is LatentMode.NONE or config.latent_count == 0:
        return dag
    rng = np.random.default_rng(config.seed)

    if config.latent_mode is LatentMode.STANDALONE_DC:
        n, extra = dag.node_count, config.latent_count
        new_edges = set(dag.edges)
        new_edges.update((n + k, dag.outcome) for k in range(extra))
        labels = dag.node_labels + tuple("U%d" % k for k in range(extra))
        return CausalDag(
            node_count=n + extra,
            node_labels=labels,
            edges=frozenset(new_edges),
            outcome=dag.outcome,
            observed=dag.observed + (False,) * extra,
        )

    if config.latent_count >= dag.node_count - 1:
        raise ValueError("latent_count must leave at least one observed feature")
    candidates = [i for i in range(dag.node_count) if i != dag.outcome]
    for _ in range(_RETRY_BUDGET):
        hidden = set(
            int(i) for i in rng.choice(candidates, size=config.latent_count, replace=False)
        )
        observed = tuple(
            dag.observed[i] and i not in hidden for i in range(dag.node_count)
        )
        masked = CausalDag(
            node_count=dag.node_count,
            node_labels=dag.node_labels,
            edges=dag.edges,
            outcome=dag.outcome,
            observed=observed,
        )
        roles = classify_roles(masked)
        if not any(
            r.kind is RoleKind.STANDALONE_LATENT_CAUSE for r in roles.values()
        ):
            return masked
    raise GraphError(
        "no latent selection without a standalone latent direct cause found "
        f"within {_RETRY_BUDGET} attempts"
    )


def random_cpts(dag: CausalDag, config: GenConfig) -> BayesNet:
    """Random binary CPTs with rows in [margin, 1 - margin].

    Each node's table is redrawn until every parent has a pair of rows,
    differing only in that parent, whose probabilities are at least
    ``min_effect`` apart.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.cpt_margin, 1.0 - config.cpt_margin
    prob_rows: list[np.ndarray] = []
    for node in range(dag.node_count):
        k = len(dag.parents[node])
        rows = 1 << k
        if rows > _MAX_CPT_ROWS:
            raise ValueError(
                f"node {node} has {k} parents; its CPT of {rows} rows "
                "exceeds the generator bound"
            )
        for attempt in range(_RETRY_BUDGET):
            p = rng.uniform(lo, hi, size=rows)
            if _all_parents_effective(p, k, config.min_effect):
                prob_rows.append(p)
                break
        else:
            raise ValueError(
                f"could not satisfy min_effect={config.min_effect} for node "
                f"{node} within {_RETRY_BUDGET} attempts"
            )
    return binary_net(dag, prob_rows)


def _all_parents_effective(p: np.ndarray, parent_count: int, min_effect: float) -> bool:
    if min_effect <= 0:
        return True
    for j in range(parent_count):
        bit = 1 << j
        low = np.array([r for r in range(p.size) if not r & bit])
        if np.max(np.abs(p[low] - p[low + bit])) < min_effect:
            return False
    return True


def sample_codes(net: BayesNet, n: int, seed: int) -> np.ndarray:
    """Ancestral sampling; returns level codes for every node (column order
    = node order), including latent nodes and the outcome."""
    if n <= 0:
        raise ValueError("sample size must be positive")
    rng = np.random.default_rng(seed)
    codes = np.zeros((n, net.dag.node_count), dtype=np.int64)
    for node in topological_order(net.dag):
        parents = net.dag.parents[node]
        if parents:
            idx = np.zeros(n, dtype=np.int64)
            for p, stride in zip(parents, net.parent_strides(node)):
                idx += codes[:, p] * stride
            rows = net.tables[node][idx]
        else:
            rows = np.broadcast_to(net.tables[node][0], (n, net.cards[node]))
        cum = np.cumsum(rows, axis=1)
        draws = rng.random(n)
        codes[:, node] = (draws[:, None] >= cum).sum(axis=1)
    return codes


def sample(net: BayesNet, n: int, seed: int) -> Dataset:
    """Sample a dataset of the observed features plus the binary outcome.

    Latent columns are generated during ancestral sampling and dropped
    from the emitted dataset; use :func:`sample_codes` to inspect them.
    """
    if net.cards[net.dag.outcome] != 2:
        raise ValueError(
            "sample emits a binary outcome; encode multi-level networks "
            "with amie.dataio.one_hot_encode instead"
        )
    codes = sample_codes(net, n, seed)
    feats = net.dag.observed_features
    return Dataset(
        feature_names=tuple(net.dag.node_labels[i] for i in feats),
        features=codes[:, feats],
        outcome=codes[:, net.dag.outcome],
        cards=tuple(net.cards[i] for i in feats),
    )


class OracleModel:
    """Exact conditional model: P(outcome=1 | all observed features).

    Computes the conditional by enumerating joint configurations of the
    latent nodes and the outcome through the factored joint; it satisfies
    the exact-conditional-model assumption with zero estimation error.
    Prediction returns NaN where the conditioning event has probability
    zero (an undefined conditional).
    """

    kind = "oracle"

    def __init__(self, net: BayesNet):
        dag = net.dag
        if net.cards[dag.outcome] != 2:
            raise ValueError("oracle model needs a binary outcome")
        hidden = [i for i in range(dag.node_count) if not dag.observed[i]]
        hidden.append(dag.outcome)
        configs = 1
        for h in hidden:
            configs *= net.cards[h]
        if configs > _MAX_ORACLE_CONFIGS:
            raise ValueError(
                f"{configs} latent/outcome configurations exceed the "
                "oracle enumeration bound"
            )
        self.net = net
        self._hidden = hidden
        self._features = dag.observed_features
        self.feature_count = len(self._features)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ValueError("feature matrix has the wrong shape")
        net, dag = self.net, self.net.dag
        n = X.shape[0]
        col_of = {node: k for k, node in enumerate(self._features)}
        numer = np.zeros(n, dtype=np.float64)
        denom = np.zeros(n, dtype=np.float64)
        hidden_cards = [net.cards[h] for h in self._hidden]
        assignment = np.zeros(len(self._hidden), dtype=np.int64)
        total = int(np.prod(hidden_cards))
        for _ in range(total):
            hidden_val = dict(zip(self._hidden, assignment))
            weight = np.ones(n, dtype=np.float64)
            for node in range(dag.node_count):
                parents = dag.parents[node]
                if parents:
                    idx = np.zeros(n, dtype=np.int64)
                    for p, stride in zip(parents, net.parent_strides(node)):
                        if p in hidden_val:
                            idx += int(hidden_val[p]) * stride
                        else:
                            idx += X[:, col_of[p]] * stride
                    rows = net.tables[node][idx]
                else:
                    rows = np.broadcast_to(net.tables[node][0], (n, net.cards[node]))
                if node in hidden_val:
                    weight *= rows[:, hidden_val[node]]
                else:
                    weight *= rows[np.arange(n), X[:, col_of[node]]]
            denom += weight
            if hidden_val[dag.outcome] == 1:
                numer += weight
            # advance the mixed-radix assignment
            for pos in range(len(assignment)):
                assignment[pos] += 1
                if assignment[pos] < hidden_cards[pos]:
                    break
                assignment[pos] = 0
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(denom > 0.0, numer / np.maximum(denom, 1e-300), np.nan)
        return out

    def predict(self, row) -> float:
        return float(self.predict_many(np.asarray(row)[None, :])[0])


def oracle_model(net: BayesNet) -> OracleModel:
    """Exact-inference model over a net's observed features."""
    return OracleModel(net)


def net_to_text(net: BayesNet) -> str:
    """Graph text plus ``cpt <node> <row> <p>`` lines; binary nets only."""
    from .graphs import graph_to_text

    if not net.is_binary:
        raise ValueError("the plain-text net format covers binary nets only")
    lines = [graph_to_text(net.dag).rstrip("\n")]
    for node in range(net.dag.node_count):
        for row, p in enumerate(net.prob_one(node)):
            lines.append(f"cpt {node} {row} {float(p)!r}")
    return "\n".join(lines) + "\n"


def net_from_text(text: str) -> BayesNet:
    from .graphs import graph_from_text

    graph_lines: list[str] = []
    cpt_lines: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        (cpt_lines if stripped.startswith("cpt ") else graph_lines).append(stripped)
    dag = graph_from_text("\n".join(graph_lines))
    rows = [np.zeros(1 << len(dag.parents[i])) for i in range(dag.node_count)]
    seen = [np.zeros(1 << len(dag.parents[i]), dtype=bool) for i in range(dag.node_count)]
    for line in cpt_lines:
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"bad cpt line: {line!r}")
        node, row, p = int(parts[1]), int(parts[2]), float(parts[3])
        if not 0 <= node < dag.node_count or not 0 <= row < rows[node].size:
            raise ValueError(f"cpt line out of range: {line!r}")
        rows[node][row] = p
        seen[node][row] = True
    for node, flags in enumerate(seen):
        if not flags.all():
            raise ValueError(f"missing cpt rows for node {node}")
    return binary_net(dag, rows)
