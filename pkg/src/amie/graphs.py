"""Causal DAG representation and structural queries.

A :class:`CausalDag` is an immutable directed acyclic graph over indexed
nodes, with a designated outcome node and an observed/latent flag per node.
Everything here is a pure function of the graph, so graphs can be shared
freely across workers.

The queries answered by this module:

* topological order, ancestor/descendant sets
* d-separation via a linear-time reachability traversal
* causal-role classification of features relative to the outcome
  (direct cause, activator or proxy of a latent direct cause,
  standalone latent direct cause)
* detection of inducing paths and relaxed inducing paths to the outcome
* classification of non-causal features with non-zero intervention
  effects into the three structural false-positive cases

Relaxed inducing paths: an observed intermediate node is normally required
to be a collider on the path *and* an ancestor of the outcome.  In relaxed
mode the ancestor requirement is waived for an observed collider whose next
node toward the outcome on the path is latent, provided the collider shares
a latent ancestor with the outcome.  This pins down the otherwise ambiguous
"variables next to Y" clause: exactly the observed nodes sitting adjacent
to the shared latent structure are exempt.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional


class GraphError(ValueError):
    """Structural invariant violation (cycle, bad index, bad flags)."""


class RoleKind(Enum):
    DIRECT_CAUSE = "direct_cause"
    ACTIVATOR = "activator"
    PROXY = "proxy"
    STANDALONE_LATENT_CAUSE = "standalone_latent_cause"
    OTHER = "other"


@dataclass(frozen=True)
class FeatureRole:
    """Causal role of a node relative to the outcome.

    ``witness`` is the latent direct cause being activated (activator) or
    confounding (proxy); ``None`` for the remaining kinds.
    """

    kind: RoleKind
    witness: Optional[int] = None


class FpKind(Enum):
    PARENT_OF_PROXY = "parent_of_proxy"
    SHARED_LATENT_ANCESTOR = "shared_latent_ancestor"
    INDUCING_PATH = "inducing_path"
    UNEXPLAINED = "unexplained"


@dataclass(frozen=True)
class WitnessPath:
    """A path with explicit arrowhead orientations.

    ``arrows[k]`` is ``"->"`` if the edge between ``nodes[k]`` and
    ``nodes[k+1]`` points forward along the path, ``"<-"`` otherwise, so
    collider conditions can be re-verified without consulting the graph.
    """

    nodes: tuple[int, ...]
    arrows: tuple[str, ...]

    def is_collider(self, position: int) -> bool:
        """True if the node at ``position`` has both path edges pointing in."""
        if position <= 0 or position >= len(self.nodes) - 1:
            return False
        return self.arrows[position - 1] == "->" and self.arrows[position] == "<-"

    def __str__(self) -> str:
        parts = [str(self.nodes[0])]
        for arrow, node in zip(self.arrows, self.nodes[1:]):
            parts.append(arrow)
            parts.append(str(node))
        return " ".join(parts)


@dataclass(frozen=True)
class FalsePositiveCase:
    """Structural explanation for a flagged non-causal feature."""

    kind: FpKind
    witness_node: Optional[int] = None
    witness_path: Optional[WitnessPath] = None


@dataclass(frozen=True)
class CausalDag:
    node_count: int
    node_labels: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    outcome: int
    observed: tuple[bool, ...]

    def __post_init__(self) -> None:
        n = self.node_count
        if n <= 0:
            raise GraphError("node_count must be positive")
        if len(self.node_labels) != n or len(self.observed) != n:
            raise GraphError("labels/observed flags must cover every node")
        if len(set(self.node_labels)) != n:
            raise GraphError("node labels must be unique")
        if not 0 <= self.outcome < n:
            raise GraphError(f"outcome index {self.outcome} out of range")
        if not self.observed[self.outcome]:
            raise GraphError("outcome node must be observed")
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if u == self.outcome:
                raise GraphError(f"outcome has outgoing edge ({u}, {v})")
        topological_order(self)  # raises on cycles

    @cached_property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        par: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            par[v].append(u)
        return tuple(tuple(sorted(p)) for p in par)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            ch[u].append(v)
        return tuple(tuple(sorted(c)) for c in ch)

    @property
    def observed_features(self) -> tuple[int, ...]:
        """Observed non-outcome nodes in ascending index order."""
        return tuple(
            i for i in range(self.node_count) if self.observed[i] and i != self.outcome
        )

    @property
    def latent_nodes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.node_count) if not self.observed[i])


def make_dag(
    node_count: int,
    edges: Iterable[tuple[int, int]],
    outcome: Optional[int] = None,
    latent: Iterable[int] = (),
    labels: Optional[Iterable[str]] = None,
) -> CausalDag:
    """Convenience constructor with default labels ``X0..`` and ``Y``."""
    if outcome is None:
        outcome = node_count - 1
    latent_set = set(latent)
    observed = tuple(i not in latent_set for i in range(node_count))
    if labels is None:
        labels = tuple(
            "Y" if i == outcome else ("U%d" % i if i in latent_set else "X%d" % i)
            for i in range(node_count)
        )
    return CausalDag(
        node_count=node_count,
        node_labels=tuple(labels),
        edges=frozenset((int(u), int(v)) for u, v in edges),
        outcome=outcome,
        observed=observed,
    )


def topological_order(dag: CausalDag) -> list[int]:
    """Kahn's algorithm with ties broken toward the smallest node index."""
    indegree = [0] * dag.node_count
    children: list[list[int]] = [[] for _ in range(dag.node_count)]
    for u, v in dag.edges:
        indegree[v] += 1
        children[u].append(v)
    ready = [i for i in range(dag.node_count) if indegree[i] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    if len(order) < dag.node_count:
        placed = set(order)
        offending = next((u, v) for u, v in sorted(dag.edges) if u not in placed)
        raise GraphError(f"cycle detected through edge {offending}")
    return order


def _check_index(dag: CausalDag, node: int) -> None:
    if not 0 <= node < dag.node_count:
        raise GraphError(f"node index {node} out of range")


def ancestors(dag: CausalDag, node: int) -> frozenset[int]:
    """All nodes with a directed path into ``node``; excludes ``node``."""
    _check_index(dag, node)
    seen: set[int] = set()
    stack = list(dag.parents[node])
    while stack:
        cur = stack.pop()
        if cur not in seen:
            seen.add(cur)
            stack.extend(dag.parents[cur])
    return frozenset(seen)


def descendants(dag: CausalDag, node: int) -> frozenset[int]:
    """All nodes reachable from ``node`` by directed paths; excludes ``node``."""
    _check_index(dag, node)
    seen: set[int] = set()
    stack = list(dag.children[node])
    while stack:
        cur = stack.pop()
        if cur not in seen:
            seen.add(cur)
            stack.extend(dag.children[cur])
    return frozenset(seen)


def d_separated(dag: CausalDag, x: int, y: int, z: Iterable[int]) -> bool:
    """Decide whether every path between ``x`` and ``y`` is blocked by ``z``.

    Reachability traversal over (node, incoming-direction) states: a chain
    or fork is passable when its middle node is outside ``z``; a collider
    is passable when it or one of its descendants is in ``z``.
    """
    _check_index(dag, x)
    _check_index(dag, y)
    zset = frozenset(z)
    for node in zset:
        _check_index(dag, node)
    if x == y:
        raise GraphError("x and y must differ")
    if x in zset or y in zset:
        raise GraphError("x and y must not be in the conditioning set")

    # z together with every ancestor of z; colliders open exactly there
    opened: set[int] = set(zset)
    stack = list(zset)
    while stack:
        cur = stack.pop()
        for parent in dag.parents[cur]:
            if parent not in opened:
                opened.add(parent)
                stack.append(parent)

    UP, DOWN = 0, 1  # UP: arrived from a child; DOWN: arrived from a parent
    queue: deque[tuple[int, int]] = deque([(x, UP)])
    visited: set[tuple[int, int]] = set()
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == UP:
            if node not in zset:
                for parent in dag.parents[node]:
                    queue.append((parent, UP))
                for child in dag.children[node]:
                    queue.append((child, DOWN))
        else:
            if node not in zset:
                for child in dag.children[node]:
                    queue.append((child, DOWN))
            if node in opened:
                for parent in dag.parents[node]:
                    queue.append((parent, UP))
    return True


def node_roles(
    dag: CausalDag, node: int, chain_activators: bool = False
) -> tuple[FeatureRole, ...]:
    """Every role the node matches, in priority order.

    Observed features can match direct cause, activator and proxy at once;
    the first entry is the primary role.  With ``chain_activators`` the
    activator pattern extends to directed chains reaching a latent direct
    cause of the outcome through latent intermediates only.
    """
    _check_index(dag, node)
    if node == dag.outcome:
        raise GraphError("outcome node has no feature role")
    y = dag.outcome
    latent_parents_of_y = [u for u in dag.parents[y] if not dag.observed[u]]

    if not dag.observed[node]:
        if (node, y) in dag.edges:
            has_obs_parent = any(dag.observed[p] for p in dag.parents[node])
            has_obs_child = any(
                dag.observed[c] for c in dag.children[node] if c != y
            )
            if not has_obs_parent and not has_obs_child:
                return (FeatureRole(RoleKind.STANDALONE_LATENT_CAUSE),)
        return (FeatureRole(RoleKind.OTHER),)

    roles: list[FeatureRole] = []
    if (node, y) in dag.edges:
        roles.append(FeatureRole(RoleKind.DIRECT_CAUSE))
    activator_witness = None
    for u in latent_parents_of_y:
        if (node, u) in dag.edges:
            activator_witness = u
            break
    if activator_witness is None and chain_activators:
        # walk forward through latent-only nodes looking for a latent parent of Y
        stack = [c for c in dag.children[node] if not dag.observed[c]]
        seen = set(stack)
        while stack:
            cur = stack.pop()
            if (cur, y) in dag.edges:
                activator_witness = cur
                break
            for child in dag.children[cur]:
                if not dag.observed[child] and child not in seen:
                    seen.add(child)
                    stack.append(child)
    if activator_witness is not None:
        roles.append(FeatureRole(RoleKind.ACTIVATOR, witness=activator_witness))
    for u in latent_parents_of_y:
        if (u, node) in dag.edges:
            roles.append(FeatureRole(RoleKind.PROXY, witness=u))
            break
    if not roles:
        roles.append(FeatureRole(RoleKind.OTHER))
    return tuple(roles)


def classify_roles(
    dag: CausalDag, chain_activators: bool = False
) -> dict[int, FeatureRole]:
    """Primary causal role for every non-outcome node."""
    return {
        i: node_roles(dag, i, chain_activators)[0]
        for i in range(dag.node_count)
        if i != dag.outcome
    }


def _shares_latent_ancestor_with_outcome(dag: CausalDag, node: int) -> bool:
    anc_y = ancestors(dag, dag.outcome)
    anc_node = ancestors(dag, node) | {node}
    return any(not dag.observed[w] for w in anc_y & anc_node)


def has_inducing_path(
    dag: CausalDag, x: int, relaxed: bool = False
) -> Optional[WitnessPath]:
    """Find a path from ``x`` to the outcome on which every observed
    intermediate is a collider and an ancestor of the outcome.

    Latent intermediates are unconstrained.  In relaxed mode the
    ancestor-of-outcome requirement is waived for observed colliders
    adjacent (toward the outcome) to a latent node, when the collider
    shares a latent ancestor with the outcome.  Returns a witness path
    or ``None``.
    """
    _check_index(dag, x)
    if not dag.observed[x]:
        raise GraphError("inducing-path source must be observed")
    if x == dag.outcome:
        raise GraphError("inducing-path source must differ from the outcome")

    y = dag.outcome
    anc_y = ancestors(dag, y)
    exempt_cache: dict[int, bool] = {}

    def exempt(node: int) -> bool:
        if node not in exempt_cache:
            exempt_cache[node] = _shares_latent_ancestor_with_outcome(dag, node)
        return exempt_cache[node]

    HEAD, TAIL = 0, 1  # orientation of the arrow at the state's node
    # state: (node, mark of the edge we arrived by, at this node's end)
    start: list[tuple[int, int]] = []
    for child in dag.children[x]:
        start.append((child, HEAD))
    for parent in dag.parents[x]:
        start.append((parent, TAIL))

    prev: dict[tuple[int, int], Optional[tuple[int, int]]] = {}
    queue: deque[tuple[int, int]] = deque()
    for state in start:
        if state not in prev:
            prev[state] = None
            queue.append(state)

    goal: Optional[tuple[int, int]] = None
    while queue:
        node, mark = queue.popleft()
        if node == y:
            goal = (node, mark)
            break
        for nxt, depart, arrive in _orientation_steps(dag, node):
            if dag.observed[node]:
                if mark != HEAD or depart != HEAD:
                    continue  # observed intermediates must be colliders
                if node not in anc_y:
                    if not relaxed:
                        continue
                    if dag.observed[nxt] or not exempt(node):
                        continue
            state = (nxt, arrive)
            if state not in prev:
                prev[state] = (node, mark)
                queue.append(state)

    if goal is None:
        return None
    return _reconstruct_witness(dag, x, goal, prev)


def _orientation_steps(dag: CausalDag, node: int):
    """Yield (next_node, mark at this node, mark at next node) transitions."""
    HEAD, TAIL = 0, 1
    for child in dag.children[node]:
        yield child, TAIL, HEAD  # node -> child
    for parent in dag.parents[node]:
        yield parent, HEAD, TAIL  # parent -> node, walked backwards


def _reconstruct_witness(
    dag: CausalDag,
    x: int,
    goal: tuple[int, int],
    prev: dict[tuple[int, int], Optional[tuple[int, int]]],
) -> WitnessPath:
    HEAD = 0
    states = [goal]
    while prev[states[-1]] is not None:
        states.append(prev[states[-1]])  # type: ignore[arg-type]
    states.append((x, -1))
    states.reverse()
    nodes = [s[0] for s in states]
    arrows = ["->" if s[1] == HEAD else "<-" for s in states[1:]]
    # a walk found by state search may revisit a node; splice repeats out
    # (arrival of the first occurrence joined to departure of the last)
    changed = True
    while changed:
        changed = False
        seen: dict[int, int] = {}
        for pos, node in enumerate(nodes):
            if node in seen:
                first = seen[node]
                nodes = nodes[: first + 1] + nodes[pos + 1 :]
                arrows = arrows[:first] + arrows[pos:]
                changed = True
                break
            seen[node] = pos
    return WitnessPath(nodes=tuple(nodes), arrows=tuple(arrows))


def inducing_reachable(dag: CausalDag, relaxed: bool = False) -> frozenset[int]:
    """All observed non-outcome nodes with an inducing path to the outcome.

    Single reverse traversal from the outcome; equivalent to calling
    :func:`has_inducing_path` per node but linear in the graph size.
    """
    y = dag.outcome
    anc_y = ancestors(dag, y)
    exempt_cache: dict[int, bool] = {}

    def exempt(node: int) -> bool:
        if node not in exempt_cache:
            exempt_cache[node] = _shares_latent_ancestor_with_outcome(dag, node)
        return exempt_cache[node]

    HEAD, TAIL = 0, 1
    # Walk paths backwards from the outcome.  State: (node, mark at node's
    # end of its outcome-side path edge, outcome-side neighbour is latent).
    # Any node ever reached can terminate the walk as the path's far
    # endpoint, which carries no constraint.
    queue: deque[tuple[int, int, bool]] = deque()
    visited: set[tuple[int, int, bool]] = set()
    reached: set[int] = set()
    for parent in dag.parents[y]:
        state = (parent, TAIL, False)  # edge parent -> Y: tail at parent
        visited.add(state)
        queue.append(state)
        reached.add(parent)

    while queue:
        node, toward_y_mark, prev_latent = queue.popleft()
        # Extending the walk makes `node` an intermediate of the path; its
        # outcome-side mark is the forward walk's departure mark, the mark
        # on the new edge is the forward walk's arrival mark.
        if dag.observed[node]:
            if toward_y_mark != HEAD:
                continue  # collider needs the outcome-side edge pointing in
            if node not in anc_y and not (relaxed and prev_latent and exempt(node)):
                continue
        for nxt in dag.parents[node]:
            # edge nxt -> node: head at node (collider ok), tail at nxt
            _push(queue, visited, reached, (nxt, TAIL, not dag.observed[node]))
        for nxt in dag.children[node]:
            # edge node -> nxt: tail at node (latent intermediates only)
            if dag.observed[node]:
                continue
            _push(queue, visited, reached, (nxt, HEAD, True))

    reached.discard(y)
    return frozenset(n for n in reached if dag.observed[n])


def _push(queue, visited, reached, state) -> None:
    if state not in visited:
        visited.add(state)
        queue.append(state)
        reached.add(state[0])


def classify_false_positive(dag: CausalDag, x_j: int) -> FalsePositiveCase:
    """Explain why a non-causal feature can carry a non-zero effect.

    Checks, in order: parent of a proxy, shared latent ancestor with a
    proxy, inducing or relaxed inducing path.  Proxies are nodes whose
    primary role is proxy.  Calling this on a node with a causal role is
    a contract error.
    """
    roles = classify_roles(dag)
    if roles[x_j].kind is not RoleKind.OTHER:
        raise GraphError(
            f"node {x_j} has causal role {roles[x_j].kind.value}; "
            "false-positive classification applies to role-other features"
        )
    proxies = [i for i, role in roles.items() if role.kind is RoleKind.PROXY]

    for proxy in proxies:
        if (x_j, proxy) in dag.edges:
            return FalsePositiveCase(FpKind.PARENT_OF_PROXY, witness_node=proxy)

    anc_j = ancestors(dag, x_j)
    for proxy in proxies:
        shared = anc_j & ancestors(dag, proxy)
        latent_shared = sorted(w for w in shared if not dag.observed[w])
        if latent_shared:
            return FalsePositiveCase(
                FpKind.SHARED_LATENT_ANCESTOR, witness_node=latent_shared[0]
            )

    witness = has_inducing_path(dag, x_j, relaxed=False)
    if witness is None:
        witness = has_inducing_path(dag, x_j, relaxed=True)
    if witness is not None:
        return FalsePositiveCase(FpKind.INDUCING_PATH, witness_path=witness)

    return FalsePositiveCase(FpKind.UNEXPLAINED)


# --- plain-text serialization -------------------------------------------------
#
# Line-oriented fixture format:
#   nodes <n> outcome <i>
#   flags obs|lat ... (one token per node)
#   edge <u> <v>


def graph_to_text(dag: CausalDag) -> str:
    lines = [f"nodes {dag.node_count} outcome {dag.outcome}"]
    lines.append(
        "flags " + " ".join("obs" if flag else "lat" for flag in dag.observed)
    )
    for u, v in sorted(dag.edges):
        lines.append(f"edge {u} {v}")
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> CausalDag:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GraphError("empty graph text")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "nodes" or header[2] != "outcome":
        raise GraphError(f"bad graph header: {lines[0]!r}")
    try:
        n, outcome = int(header[1]), int(header[3])
    except ValueError:
        raise GraphError(f"bad graph header: {lines[0]!r}") from None
    if len(lines) < 2 or not lines[1].startswith("flags"):
        raise GraphError("missing flags line")
    tokens = lines[1].split()[1:]
    if len(tokens) != n or any(t not in ("obs", "lat") for t in tokens):
        raise GraphError("flags line must hold one obs/lat token per node")
    observed = tuple(t == "obs" for t in tokens)
    edges = set()
    for line in lines[2:]:
        parts = line.split()
        if len(parts) != 3 or parts[0] != "edge":
            raise GraphError(f"bad edge line: {line!r}")
        try:
            edges.add((int(parts[1]), int(parts[2])))
        except ValueError:
            raise GraphError(f"bad edge line: {line!r}") from None
    labels = tuple(
        "Y" if i == outcome else ("X%d" % i if observed[i] else "U%d" % i)
        for i in range(n)
    )
    return CausalDag(
        node_count=n,
        node_labels=labels,
        edges=frozenset(edges),
        outcome=outcome,
        observed=observed,
    )
