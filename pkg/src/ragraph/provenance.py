"""Lineage queries over implicit PPCs: backward, forward, and environment history.

Lineage follows material edges plus interjection edges (an interjected
action feeds its parent). Precedence edges carry no material.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from .graph import (
    Edge, Environment, EnvironmentResolver, GraphError, IngredientRoot, PPCRef, RecipeGraph,
    UnknownEndpointError, UnvalidatedGraphError, ValidatedGraph,
)

LINEAGE_KINDS = ("material", "interjection")


class NotARootError(GraphError):
    pass


@dataclass(frozen=True)
class Leaf:
    node: str
    # None when a portion is absolute or the path runs through residue.
    fraction: Optional[float]
    residual: bool = False
    opaque: bool = False


@dataclass
class ProvenanceTree:
    """Ancestor sub-DAG of one PPC. Shared ancestors appear once."""
    target: str
    nodes: FrozenSet[str]
    edges: Tuple[Edge, ...]
    leaves: Dict[str, Leaf] = field(default_factory=dict)
    labels: Dict[str, str] = field(default_factory=dict)

    @property
    def ingredients(self) -> List[str]:
        return sorted(n for n, leaf in self.leaves.items() if not leaf.opaque)

    @property
    def depth(self) -> int:
        parents = {}
        for e in self.edges:
            parents.setdefault(e.dst, []).append(e.src)
        memo = {}

        def height(n):
            if n not in memo:
                memo[n] = 1 + max((height(p) for p in parents.get(n, ())), default=-1)
            return memo[n]
        return height(self.target)

    def render(self) -> str:
        parents = {}
        for e in self.edges:
            parents.setdefault(e.dst, []).append((e.src, e.role or e.kind))
        lines = []

        def walk(n, indent, via):
            leaf = self.leaves.get(n)
            text = f"{'  ' * indent}{via}{self.labels.get(n, n)}"
            if leaf is not None:
                frac = "unknown" if leaf.fraction is None else f"{leaf.fraction:g}"
                notes = [f"fraction {frac}"] + (["residual"] if leaf.residual else []) \
                    + (["opaque plugin"] if leaf.opaque else [])
                text += f"  ({', '.join(notes)})"
            lines.append(text)
            for src, role in sorted(parents.get(n, ())):
                walk(src, indent + 1, f"<-{role}- ")
        walk(self.target, 0, "")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "nodes": sorted(self.nodes),
            "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind, "role": e.role}
                      for e in sorted(self.edges, key=Edge.sort_key)],
            "leaves": {n: {"fraction": None if l.fraction is None else round(l.fraction, 6),
                           "residual": l.residual, "opaque": l.opaque}
                       for n, l in sorted(self.leaves.items())},
        }


def _graph(validated) -> RecipeGraph:
    if not isinstance(validated, ValidatedGraph):
        raise UnvalidatedGraphError("lineage queries need a ValidatedGraph; run validate() first")
    return validated.graph


def _target(graph: RecipeGraph, ppc: Union[PPCRef, str]) -> str:
    node_id = ppc.producing_node if isinstance(ppc, PPCRef) else ppc
    if node_id not in graph.nodes:
        raise UnknownEndpointError(f"unknown node {node_id!r}")
    if isinstance(graph.nodes[node_id], IngredientRoot):
        raise GraphError(f"{node_id!r} is an ingredient, not a PPC producer")
    return node_id


def _is_leaf(graph, node_id) -> bool:
    node = graph.nodes[node_id]
    return isinstance(node, IngredientRoot) or (node.kind == "plugin" and not node.payload.expanded)


def _edge_factor(graph, e: Edge):
    """(fraction or None, residual) contributed by crossing edge e."""
    if e.kind != "material" or e.role != "from":
        return 1.0, False
    p = graph.nodes[e.dst].payload
    if p.scope == "residual_only":
        return None, True
    if p.scope == "partial":
        if p.portion is not None and p.portion.fraction is not None:
            return p.portion.fraction, False
        return None, False
    return 1.0, False


def backward(validated: ValidatedGraph, ppc: Union[PPCRef, str]) -> ProvenanceTree:
    """Ancestors of `ppc` down to ingredient roots (and unexpanded plugins).

    The target may also be the final plate. A leaf's fraction is the summed
    product of portions over all its paths, capped at 1.
    """
    g = _graph(validated)
    target = _target(g, ppc)
    seen = {target}
    edges = []
    queue = deque([target])
    while queue:
        n = queue.popleft()
        for e in g.in_edges(n):
            if e.kind not in LINEAGE_KINDS or e.src not in g.nodes:
                continue
            edges.append(e)
            if e.src not in seen:
                seen.add(e.src)
                queue.append(e.src)
    # fraction of each ancestor that reaches the target
    out = {}
    for e in edges:
        out.setdefault(e.src, []).append(e)
    memo: Dict[str, Tuple[Optional[float], bool]] = {target: (1.0, False)}

    def share(n):
        if n in memo:
            return memo[n]
        total, residual, unknown = 0.0, False, False
        for e in out.get(n, ()):
            f, r = _edge_factor(g, e)
            down, down_r = share(e.dst)
            residual = residual or r or down_r
            if f is None or down is None:
                unknown = True
            else:
                total += f * down
        memo[n] = (None if unknown else min(total, 1.0), residual)
        return memo[n]

    leaves = {}
    for n in sorted(seen):
        if n != target and _is_leaf(g, n):
            frac, residual = share(n)
            leaves[n] = Leaf(n, frac, residual, opaque=not isinstance(g.nodes[n], IngredientRoot))
    edges = tuple(sorted(set(edges), key=Edge.sort_key))
    return ProvenanceTree(target, frozenset(seen), edges, leaves, {n: g.label(n) for n in seen})


def forward(validated: ValidatedGraph, ingredient: str) -> set:
    """Every action the ingredient (or opaque plugin) flows into."""
    g = _graph(validated)
    if ingredient not in g.nodes or not _is_leaf(g, ingredient):
        raise NotARootError(f"{ingredient!r} is not an ingredient root")
    succ = g.adjacency(LINEAGE_KINDS)
    reached = set()
    queue = deque([ingredient])
    while queue:
        for nxt in succ[queue.popleft()]:
            if nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)
    sinks = [n for n, s in succ.items() if not s]
    assert len(sinks) == 1 and sinks[0] in reached, "validated graph must drain into its single sink"
    return reached


def primary_lineage(graph: RecipeGraph, node_id: str, envs: EnvironmentResolver = None) -> List[str]:
    """Chain from a root to `node_id`. Transfers follow the moved item; merges follow
    the smallest-id input that decides the environment."""
    envs = envs or EnvironmentResolver(graph)
    chain = [node_id]
    n = node_id
    while not _is_leaf(graph, n):
        kind = graph.kind_of(n)
        if kind == "transfer":
            srcs = graph.material_sources(n, "from")
        elif kind == "process":
            envs.of_node(n)  # raises on merge ambiguity
            srcs = envs.governing_inputs(n)
        else:
            srcs = sorted(graph.material_sources(n, "input"))
        if not srcs:
            break
        n = min(srcs)
        chain.append(n)
    chain.reverse()
    return chain


def environment_history(validated: ValidatedGraph, ppc: Union[PPCRef, str]) -> List[Tuple[str, Environment]]:
    """Environment assignments along the primary lineage, oldest first.

    Lists the root's initial environment, then every transfer on the way.
    Raises MergeAmbiguityError if a merge on the lineage is ambiguous.
    """
    g = _graph(validated)
    target = _target(g, ppc)
    envs = EnvironmentResolver(g)
    history = []
    for n in primary_lineage(g, target, envs):
        if _is_leaf(g, n) or g.kind_of(n) == "transfer":
            history.append((n, envs.of_node(n)))
    return history
