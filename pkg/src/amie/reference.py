"""Slow enumeration-based reference implementations.

These deliberately avoid the traversal algorithms in :mod:`amie.graphs`:
they enumerate every simple path (or every joint configuration) and apply
definitions literally.  The verification suite and the tests compare the
fast implementations against these on small graphs.  Path enumeration is
exponential; keep graphs at ten-ish nodes.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable, Optional

import numpy as np

from .graphs import CausalDag


def _adjacency(dag: CausalDag) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {i: set() for i in range(dag.node_count)}
    for u, v in dag.edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def all_simple_paths(dag: CausalDag, start: int, end: int) -> list[list[int]]:
    """Every simple path between two nodes, ignoring edge direction."""
    adj = _adjacency(dag)
    paths: list[list[int]] = []
    stack: list[int] = [start]
    on_path = {start}

    def walk(node: int) -> None:
        if node == end:
            paths.append(list(stack))
            return
        for nxt in sorted(adj[node]):
            if nxt not in on_path:
                stack.append(nxt)
                on_path.add(nxt)
                walk(nxt)
                on_path.remove(nxt)
                stack.pop()

    walk(start)
    return paths


def _descendant_sets(dag: CausalDag) -> list[set[int]]:
    desc: list[set[int]] = [set() for _ in range(dag.node_count)]
    children: list[list[int]] = [[] for _ in range(dag.node_count)]
    for u, v in dag.edges:
        children[u].append(v)
    for node in range(dag.node_count):
        seen: set[int] = set()
        frontier = list(children[node])
        while frontier:
            cur = frontier.pop()
            if cur not in seen:
                seen.add(cur)
                frontier.extend(children[cur])
        desc[node] = seen
    return desc


def _ancestor_set(dag: CausalDag, node: int) -> set[int]:
    parents: list[list[int]] = [[] for _ in range(dag.node_count)]
    for u, v in dag.edges:
        parents[v].append(u)
    seen: set[int] = set()
    frontier = list(parents[node])
    while frontier:
        cur = frontier.pop()
        if cur not in seen:
            seen.add(cur)
            frontier.extend(parents[cur])
    return seen


def _path_blocked(
    dag: CausalDag, path: list[int], z: frozenset[int], desc: list[set[int]]
) -> bool:
    for k in range(1, len(path) - 1):
        prev_node, node, next_node = path[k - 1], path[k], path[k + 1]
        into_from_prev = (prev_node, node) in dag.edges
        into_from_next = (next_node, node) in dag.edges
        if into_from_prev and into_from_next:
            # collider: blocked unless it or a descendant is conditioned on
            if node not in z and not (desc[node] & z):
                return True
        else:
            if node in z:
                return True
    return False


def d_separated_by_enumeration(
    dag: CausalDag, x: int, y: int, z: Iterable[int]
) -> bool:
    """Definition applied path by path over every simple path."""
    zset = frozenset(z)
    desc = _descendant_sets(dag)
    for path in all_simple_paths(dag, x, y):
        if not _path_blocked(dag, path, zset, desc):
            return False
    return True


def _is_inducing_path(dag: CausalDag, path: list[int], relaxed: bool) -> bool:
    anc_y = _ancestor_set(dag, dag.outcome)
    for k in range(1, len(path) - 1):
        node = path[k]
        if not dag.observed[node]:
            continue
        prev_node, next_node = path[k - 1], path[k + 1]
        collider = (prev_node, node) in dag.edges and (next_node, node) in dag.edges
        if not collider:
            return False
        if node in anc_y:
            continue
        if not relaxed:
            return False
        if dag.observed[next_node]:
            return False
        shared = _ancestor_set(dag, node) & anc_y
        if not any(not dag.observed[w] for w in shared):
            return False
    return True


def inducing_path_by_enumeration(
    dag: CausalDag, x: int, relaxed: bool = False
) -> Optional[list[int]]:
    """First simple path to the outcome satisfying the inducing conditions."""
    for path in all_simple_paths(dag, x, dag.outcome):
        if _is_inducing_path(dag, path, relaxed):
            return path
    return None


def check_inducing_path(dag: CausalDag, path_nodes: list[int], relaxed: bool) -> bool:
    """Apply the inducing-path conditions to a concrete node sequence."""
    return _is_inducing_path(dag, path_nodes, relaxed)


# --- exact distributions by full-joint enumeration ----------------------------


def joint_distribution(net) -> np.ndarray:
    """Full joint over all nodes of a :class:`amie.synth.BayesNet`.

    Returns an array indexed by one axis per node (axis order = node
    order).  Bounded to 22 total nodes; beyond that the table does not
    fit in memory.
    """
    dag = net.dag
    if dag.node_count > 22:
        raise ValueError("joint enumeration is bounded to 22 nodes")
    shape = tuple(net.cards)
    joint = np.ones(shape, dtype=np.float64)
    for node in range(dag.node_count):
        parents = dag.parents[node]
        table = net.tables[node]
        for assignment in product(*(range(net.cards[p]) for p in parents)):
            row = net.row_index(node, dict(zip(parents, assignment)))
            index: list = [slice(None)] * dag.node_count
            for p, val in zip(parents, assignment):
                index[p] = val
            for val in range(net.cards[node]):
                sub = list(index)
                sub[node] = val
                joint[tuple(sub)] *= table[row, val]
    return joint


def exact_conditional_outcome(net, x_columns: Iterable[int], x_values) -> float:
    """P(outcome = 1 | given nodes = values) from the enumerated joint.

    Returns NaN when the conditioning event has probability zero.
    """
    joint = joint_distribution(net)
    axes = dict(zip(x_columns, x_values))
    index: list = [slice(None)] * net.dag.node_count
    for node, val in axes.items():
        index[node] = int(val)
    sub = joint[tuple(index)]
    keep_axes = [n for n in range(net.dag.node_count) if n not in axes]
    outcome_axis = keep_axes.index(net.dag.outcome)
    reduce_axes = tuple(k for k in range(len(keep_axes)) if k != outcome_axis)
    marg = sub.sum(axis=reduce_axes) if reduce_axes else sub
    total = marg.sum()
    if total <= 0.0:
        return float("nan")
    return float(marg[1] / total)


def exact_independent(net, x: int, y: int, z: Iterable[int], tol: float = 1e-6) -> bool:
    """Exact conditional independence X ⊥ Y | Z from the enumerated joint."""
    joint = joint_distribution(net)
    n = net.dag.node_count
    zlist = sorted(set(z))
    other = [a for a in range(n) if a not in (x, y, *zlist)]
    marg = joint.sum(axis=tuple(other)) if other else joint
    # axes of marg follow ascending node order of [x, y, *z]
    kept = sorted([x, y, *zlist])
    ax_x, ax_y = kept.index(x), kept.index(y)
    ax_z = [kept.index(c) for c in zlist]
    for z_assign in product(*(range(marg.shape[a]) for a in ax_z)):
        index: list = [slice(None)] * marg.ndim
        for axis, val in zip(ax_z, z_assign):
            index[axis] = val
        block = marg[tuple(index)]
        if ax_x > ax_y:
            block = block.T
        total = block.sum()
        if total <= 0.0:
            continue
        pxy = block / total
        px = pxy.sum(axis=1, keepdims=True)
        py = pxy.sum(axis=0, keepdims=True)
        if np.max(np.abs(pxy - px * py)) > tol:
            return False
    return True


def attainable_accuracy(net) -> float:
    """Best possible accuracy predicting the outcome from observed features.

    Expected ``max(q, 1-q)`` with ``q`` the exact outcome conditional given
    the observed feature configuration; latent nodes are marginalised out.
    """
    joint = joint_distribution(net)
    dag = net.dag
    drop = [i for i in range(dag.node_count) if not dag.observed[i]]
    marg = joint.sum(axis=tuple(drop)) if drop else joint
    kept = [i for i in range(dag.node_count) if dag.observed[i]]
    outcome_axis = kept.index(dag.outcome)
    marg = np.moveaxis(marg, outcome_axis, -1)
    flat = marg.reshape(-1, marg.shape[-1])
    return float(np.maximum(flat[:, 0], flat[:, 1]).sum())
