"""Execution planning: linearizations, list schedules, and a brute-force oracle.

Scheduling model
  * Ingredient roots are available at time 0 and are not scheduled.
  * A process occupies one worker for its whole duration. Transfers, plates
    and plugins take `DurationPolicy.*_seconds` (0 by default).
  * An interjected action is not scheduled on its own; it becomes instances
    inside its parent's block. Offsets are measured in parent active time.
      breaking   - the parent pauses; active time is kept, wall time grows.
      repeating  - instances at offset, offset+every, ... while < duration.
      overlay    - one instance; the parent keeps running.
    Repeating instances and (unless overlay_free) overlay instances need an
    extra worker while they last.
  * Two positive-length pieces may share a non-unassigned environment only if
    they belong to the same block or one lineage feeds the other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .graph import (
    Environment, EnvironmentResolver, GraphError, IngredientRoot, RecipeGraph, UnvalidatedGraphError,
    ValidatedGraph,
)
from .lexicon import TechniqueError, TechniqueLexicon, default_lexicon, resolve
from .validator import environment_moves, happens_before

ORACLE_MAX_EVENTS = 10
ORDER_KINDS = ("material", "precedence")


class MissingDurationError(GraphError):
    def __init__(self, nodes):
        self.nodes = sorted(nodes)
        super().__init__("no duration for: " + ", ".join(self.nodes))


class InfeasibleResourcesError(GraphError):
    pass


class OracleTooLargeError(GraphError):
    pass


def _num(x):
    if isinstance(x, float):
        x = round(x, 6)
        if x.is_integer():
            return int(x)
    return x


@dataclass
class DurationPolicy:
    """Where node durations come from.

    Process: expect, then the termination bound, then `overrides` (by node id
    or technique id), then the lexicon default, then `fallback_seconds`.
    """
    lexicon: Optional[TechniqueLexicon] = None
    fallback_seconds: Optional[int] = 300
    overrides: Dict[str, int] = field(default_factory=dict)
    transfer_seconds: int = 0
    plate_seconds: int = 0
    plugin_seconds: int = 0

    def duration(self, graph: RecipeGraph, node_id: str):
        node = graph.nodes[node_id]
        kind = node.kind
        if kind == "transfer":
            return self.overrides.get(node_id, self.transfer_seconds)
        if kind == "plate":
            return self.overrides.get(node_id, self.plate_seconds)
        if kind == "plugin":
            return self.overrides.get(node_id, self.plugin_seconds)
        if kind != "process":
            raise GraphError(f"{node_id!r} is not schedulable")
        p = node.payload
        if p.expected_duration_seconds is not None:
            return p.expected_duration_seconds
        if p.termination is not None and p.termination.duration_bound() is not None:
            return p.termination.duration_bound()
        for key in (node_id, p.technique.lexicon_id):
            if key in self.overrides:
                return self.overrides[key]
        if self.lexicon is None:
            self.lexicon = default_lexicon()
        try:
            default = resolve(p.technique, self.lexicon).entry.expected_duration_default
        except TechniqueError:
            default = None
        if default is not None:
            return default
        if self.fallback_seconds is None:
            raise MissingDurationError([node_id])
        return self.fallback_seconds


@dataclass(frozen=True)
class Event:
    node: str
    start: float
    end: float
    environment: Optional[str] = None
    kind: str = "action"
    parent: Optional[str] = None
    behavior: Optional[str] = None
    index: int = 0

    @property
    def length(self):
        return self.end - self.start

    def sort_key(self):
        return (self.start, self.end, self.node, self.kind, self.index)

    def to_dict(self) -> dict:
        out = {"node": self.node, "start": _num(self.start), "end": _num(self.end),
               "environment": self.environment, "kind": self.kind}
        if self.kind == "interjection_instance":
            out.update(parent=self.parent, behavior=self.behavior, index=self.index)
        elif self.index:
            out["segment"] = self.index
        return out


@dataclass
class Schedule:
    events: List[Event]
    makespan_seconds: float
    workers: int

    def to_dict(self) -> dict:
        return {"workers": self.workers, "makespan_seconds": _num(self.makespan_seconds),
                "events": [e.to_dict() for e in self.events]}

    def table(self) -> str:
        rows = [("start", "end", "node", "kind", "environment")]
        for e in self.events:
            kind = e.kind if e.kind == "action" else f"{e.behavior} in {e.parent}"
            rows.append((str(_num(e.start)), str(_num(e.end)), e.node, kind, e.environment or "-"))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.append(f"makespan {_num(self.makespan_seconds)} s with {self.workers} worker(s)")
        return "\n".join(lines)

    def of_node(self, node_id) -> List[Event]:
        return [e for e in self.events if e.node == node_id]


def _graph(validated) -> RecipeGraph:
    if not isinstance(validated, ValidatedGraph):
        raise UnvalidatedGraphError("planning needs a ValidatedGraph; run validate() first")
    return validated.graph


# linearizations

def linearizations(validated: ValidatedGraph, limit: Optional[int] = None) -> List[List[str]]:
    """Topological orders of every node over material+precedence edges, in
    lexicographic order; at most `limit` of them (all when limit is None)."""
    g = _graph(validated)
    return list(itertools.islice(iter_linearizations(g), limit))


def iter_linearizations(graph: RecipeGraph) -> Iterator[List[str]]:
    succ = graph.adjacency(ORDER_KINDS)
    indeg = {n: 0 for n in graph.nodes}
    for n in succ:
        for m in succ[n]:
            indeg[m] += 1
    order: List[str] = []
    total = len(indeg)

    def dfs():
        if len(order) == total:
            yield list(order)
            return
        for n in sorted(k for k, d in indeg.items() if d == 0 and k not in placed):
            placed.add(n)
            order.append(n)
            for m in succ[n]:
                indeg[m] -= 1
            yield from dfs()
            for m in succ[n]:
                indeg[m] += 1
            order.pop()
            placed.discard(n)

    placed = set()
    yield from dfs()


def brute_force_orders(graph, max_nodes: int = 9) -> set:
    """All permutations that respect every material/precedence edge (test oracle)."""
    g = graph.graph if isinstance(graph, ValidatedGraph) else graph
    nodes = sorted(g.nodes)
    if len(nodes) > max_nodes:
        raise OracleTooLargeError(f"{len(nodes)} nodes exceeds the permutation oracle bound {max_nodes}")
    pairs = [(e.src, e.dst) for e in g.node_edges(ORDER_KINDS)]
    found = set()
    for perm in itertools.permutations(nodes):
        pos = {n: i for i, n in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in pairs):
            found.add(perm)
    return found


# blocks

@dataclass(frozen=True)
class _Piece:
    rel_start: float
    rel_end: float
    node: str
    kind: str
    workers: int
    env: Optional[Environment]
    parent: Optional[str] = None
    behavior: Optional[str] = None
    index: int = 0


@dataclass
class _Block:
    owner: str
    pieces: Tuple[_Piece, ...]
    length: float


class _Model:
    """Everything the schedulers share: blocks, block precedence, lineage relation."""

    def __init__(self, graph: RecipeGraph, policy: DurationPolicy, overlay_free: bool):
        self.g = graph
        self.policy = policy
        self.overlay_free = overlay_free
        self.envs = EnvironmentResolver(graph)
        self.owner = {}
        for n, node in graph.nodes.items():
            if isinstance(node, IngredientRoot):
                continue
            self.owner[n] = graph.interjection_parent(n) or n
        owners = sorted(set(self.owner.values()))
        missing = []
        self.blocks: Dict[str, _Block] = {}
        for b in owners:
            try:
                self.blocks[b] = self._build(b)
            except MissingDurationError as exc:
                missing.extend(exc.nodes)
        if missing:
            raise MissingDurationError(missing)
        self.preds = {b: set() for b in owners}
        for e in graph.node_edges(ORDER_KINDS):
            if e.src in self.owner and e.dst in self.owner:
                a, b = self.owner[e.src], self.owner[e.dst]
                if a != b:
                    self.preds[b].add(a)
        self.succs = {b: set() for b in owners}
        for b, ps in self.preds.items():
            for a in ps:
                self.succs[a].add(b)
        reach = _descendants(graph, ("material", "interjection"))
        self.related = lambda a, b: a == b or b in reach[a] or a in reach[b]
        self.tail = {}
        for b in reversed(self._topo()):
            self.tail[b] = self.blocks[b].length + max((self.tail[s] for s in self.succs[b]), default=0)

    def _topo(self) -> List[str]:
        indeg = {b: len(p) for b, p in self.preds.items()}
        ready = sorted(b for b, d in indeg.items() if d == 0)
        out = []
        while ready:
            b = ready.pop(0)
            out.append(b)
            for s in sorted(self.succs[b]):
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
            ready.sort()
        if len(out) != len(indeg):
            raise GraphError("interjections create a cycle between action blocks")
        return out

    def env(self, node_id) -> Optional[Environment]:
        if self.g.kind_of(node_id) in ("plate", "plugin"):
            return None
        try:
            env = self.envs.of_node(node_id)
        except GraphError:
            return None
        return None if env.is_unassigned else env

    def _build(self, owner) -> _Block:
        g = self.g
        D = self.policy.duration(g, owner)
        env = self.env(owner)
        instances = []  # (active offset, child, behavior, index, duration)
        for e in g.interjections_into(owner):
            child_d = self.policy.duration(g, e.src)
            offset = e.offset_fraction * D if e.offset_fraction is not None else e.offset_seconds
            if e.behavior == "repeating":
                k = 0
                while offset + k * e.repeat_every_seconds < D:
                    instances.append((offset + k * e.repeat_every_seconds, e.src, e.behavior, k, child_d))
                    k += 1
            else:
                instances.append((offset, e.src, e.behavior, 0, child_d))
        instances.sort(key=lambda i: (i[0], i[1], i[3]))
        breaks = [i for i in instances if i[2] == "breaking"]

        def wall(active):
            return active + sum(b[4] for b in breaks if b[0] < active)

        pieces = []
        cuts = sorted({0, D} | {b[0] for b in breaks if 0 < b[0] < D})
        segs = [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a] or [(0, 0)]
        for i, (a, b) in enumerate(segs):
            # a breaking instance at `a` runs before this segment resumes
            start = wall(a) + sum(x[4] for x in breaks if x[0] == a)
            pieces.append(_Piece(start, start + (b - a), owner, "action", 1 if b > a else 0, env))
        paused = 0
        for active, child, behavior, index, d in instances:
            if behavior == "breaking":
                start = active + paused
                paused += d
                workers = 1
            else:
                start = wall(active)
                workers = 0 if (behavior == "overlay" and self.overlay_free) else 1
            pieces.append(_Piece(start, start + d, child, "interjection_instance", workers if d > 0 else 0,
                                 self.env(child), owner, behavior, index))
        length = max(p.rel_end for p in pieces)
        return _Block(owner, tuple(pieces), length)

    def n_events(self) -> int:
        return sum(len(b.pieces) for b in self.blocks.values())


def _descendants(graph: RecipeGraph, kinds) -> Dict[str, set]:
    succ = graph.adjacency(kinds)
    out = {}
    for n in graph.nodes:
        seen, stack = set(), [n]
        while stack:
            for m in succ[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        out[n] = seen
    return out


class _Timeline:
    def __init__(self, model: _Model, workers: int):
        self.m = model
        self.workers = workers
        self.placed: List[Tuple[float, float, _Piece, str]] = []  # (start, end, piece, block)

    def copy(self):
        dup = _Timeline(self.m, self.workers)
        dup.placed = list(self.placed)
        return dup

    def fits(self, block: _Block, t) -> bool:
        new = [(t + p.rel_start, t + p.rel_end, p, block.owner) for p in block.pieces if p.rel_end > p.rel_start]
        for s, e, p, _ in new:
            if p.env is None:
                continue
            for s2, e2, p2, owner2 in self.placed:
                if p2.env == p.env and s2 < e and s < e2 and e2 > s2 and not (
                        owner2 == block.owner or self.m.related(p.node, p2.node)):
                    return False
        busy = [(s, e, p.workers) for s, e, p, _ in self.placed if p.workers and e > s]
        mine = [(s, e, p.workers) for s, e, p, _ in new if p.workers]
        if not mine:
            return True
        for s, e, _ in mine:
            for x in {s} | {bs for bs, be, _ in busy + mine if s < bs < e}:
                load = sum(w for bs, be, w in busy + mine if bs <= x < be)
                if load > self.workers:
                    return False
        return True

    def place(self, block: _Block, t):
        for p in block.pieces:
            self.placed.append((t + p.rel_start, t + p.rel_end, p, block.owner))

    def earliest(self, block: _Block, est) -> float:
        candidates = {est}
        for _, e, _, _ in self.placed:
            for p in block.pieces:
                t = e - p.rel_start
                if t > est:
                    candidates.add(t)
        for t in sorted(candidates):
            if self.fits(block, t):
                return t
        raise InfeasibleResourcesError(f"block {block.owner!r} never fits")  # pragma: no cover

    def schedule(self) -> Schedule:
        events = []
        for s, e, p, _ in self.placed:
            env = p.env.label if p.env is not None else None
            events.append(Event(p.node, _num(s), _num(e), env, p.kind, p.parent, p.behavior, p.index))
        events.sort(key=Event.sort_key)
        makespan = max((e.end for e in events), default=0)
        return Schedule(events, makespan, self.workers)


def _prepare(validated, workers, policy, overlay_free) -> _Model:
    g = _graph(validated)
    if not isinstance(workers, int) or workers < 1:
        raise InfeasibleResourcesError(f"need at least one worker, got {workers!r}")
    model = _Model(g, policy or DurationPolicy(), overlay_free)
    for b in model.blocks.values():
        if not _Timeline(model, workers).fits(b, 0):
            raise InfeasibleResourcesError(
                f"{b.owner!r} needs more than {workers} worker(s) at once (its interjections need hands too)")
    return model


def schedule(validated: ValidatedGraph, workers: int = 1, duration_policy: Optional[DurationPolicy] = None,
             *, overlay_free: bool = False) -> Schedule:
    """Non-delay list schedule. Priority: longest downstream path, then node id."""
    model = _prepare(validated, workers, duration_policy, overlay_free)
    tl = _Timeline(model, workers)
    finish: Dict[str, float] = {}
    todo = set(model.blocks)
    priority = lambda b: (-model.tail[b], b)
    t = 0
    while todo:
        progressed = True
        while progressed:
            progressed = False
            ready = [b for b in todo if all(p in finish and finish[p] <= t for p in model.preds[b])]
            for b in sorted(ready, key=priority):
                block = model.blocks[b]
                if tl.fits(block, t):
                    tl.place(block, t)
                    finish[b] = t + block.length
                    todo.discard(b)
                    progressed = True
        if not todo:
            break
        later = [e for _, e, _, _ in tl.placed if e > t] + [f for f in finish.values() if f > t]
        if not later:  # pragma: no cover - a lone block always fits eventually
            raise InfeasibleResourcesError("scheduler made no progress")
        t = min(later)
    return tl.schedule()


def brute_force_plans(validated: ValidatedGraph, workers: int = 1,
                      duration_policy: Optional[DurationPolicy] = None, *,
                      overlay_free: bool = False, max_events: int = ORACLE_MAX_EVENTS):
    """Optimal makespan and a witness schedule by exhaustive search.

    Tries every precedence-feasible block order with a serial decoder
    (each block at its earliest feasible start), pruning with a critical-path
    bound. Returns (makespan, Schedule).
    """
    model = _prepare(validated, workers, duration_policy, overlay_free)
    if model.n_events() > max_events:
        raise OracleTooLargeError(f"{model.n_events()} events exceeds the oracle bound {max_events}")
    best = [float("inf"), None]

    def lower_bound(finish):
        lb = max(finish.values(), default=0)
        for b in model.blocks:
            if b not in finish:
                est = max((finish[p] for p in model.preds[b] if p in finish), default=0)
                lb = max(lb, est + model.tail[b])
        return lb

    def dfs(tl, finish):
        if len(finish) == len(model.blocks):
            span = max(finish.values(), default=0)
            if span < best[0]:
                best[0], best[1] = span, tl.schedule()
            return
        if lower_bound(finish) >= best[0]:
            return
        for b in sorted(model.blocks):
            if b in finish or not all(p in finish for p in model.preds[b]):
                continue
            block = model.blocks[b]
            est = max((finish[p] for p in model.preds[b]), default=0)
            nxt = tl.copy()
            t = nxt.earliest(block, est)
            nxt.place(block, t)
            finish[b] = t + block.length
            dfs(nxt, finish)
            del finish[b]

    dfs(_Timeline(model, workers), {})
    return _num(best[0]), best[1]


# verification (independent of the schedulers above)

def verify_schedule(validated: ValidatedGraph, sched: Schedule,
                    duration_policy: Optional[DurationPolicy] = None, *, overlay_free: bool = False) -> List[str]:
    """Return every violated schedule invariant as a message (empty when valid)."""
    g = _graph(validated)
    policy = duration_policy or DurationPolicy()
    problems = []
    eps = 1e-6
    by_node: Dict[str, List[Event]] = {}
    for ev in sched.events:
        by_node.setdefault(ev.node, []).append(ev)
    owned: Dict[str, List[Event]] = {}
    for ev in sched.events:
        owned.setdefault(ev.parent or ev.node, []).append(ev)

    scheduled = [n for n, node in g.nodes.items() if not isinstance(node, IngredientRoot)]
    for n in scheduled:
        if n not in by_node:
            problems.append(f"{n} has no event")
    for e in g.edges:
        if e.kind not in ORDER_KINDS or e.src not in by_node or e.dst not in by_node:
            continue
        done = max(ev.end for ev in owned.get(e.src, by_node[e.src]))
        begin = min(ev.start for ev in by_node[e.dst])
        if done > begin + eps:
            problems.append(f"{e.src} ends at {done} after {e.dst} starts at {begin}")

    # lineage relation, recomputed by plain search over the edge list
    succ: Dict[str, set] = {n: set() for n in g.nodes}
    for e in g.edges:
        if e.kind in ("material", "interjection") and e.src in g.nodes:
            succ[e.src].add(e.dst)

    def reaches(a, b):
        stack, seen = [a], set()
        while stack:
            x = stack.pop()
            if x == b:
                return True
            for y in succ[x] - seen:
                seen.add(y)
                stack.append(y)
        return False

    def uses_worker(ev):
        if ev.length <= 0:
            return 0
        if ev.kind == "interjection_instance" and ev.behavior == "overlay" and overlay_free:
            return 0
        return 1

    timed = [ev for ev in sched.events if ev.length > 0]
    for ev in timed:
        load = sum(uses_worker(o) for o in timed if o.start <= ev.start < o.end)
        if load > sched.workers:
            problems.append(f"{load} workers busy at {ev.start} (limit {sched.workers})")
    for a, b in itertools.combinations(timed, 2):
        if a.environment is None or a.environment != b.environment:
            continue
        if a.start < b.end and b.start < a.end:
            same_block = (a.parent or a.node) == (b.parent or b.node)
            if not (same_block or a.node == b.node or reaches(a.node, b.node) or reaches(b.node, a.node)):
                problems.append(f"{a.node} and {b.node} share {a.environment} at the same time")

    for p in g.ids_of_kind("process"):
        if g.interjection_parent(p) is not None:
            continue
        active = sum(ev.length for ev in by_node.get(p, ()) if ev.kind == "action")
        declared = policy.duration(g, p)
        if abs(active - declared) > eps:
            problems.append(f"{p} active for {active} s, declared {declared} s")
    return sorted(set(problems))


# contention

@dataclass(frozen=True)
class ContentionEntry:
    environment: Environment
    names: Tuple[str, ...]
    # (transfer id, "fill" or "evacuate", start seconds)
    sequence: Tuple[Tuple[str, str, float], ...]
    reuse: Tuple[Tuple[str, str], ...]
    gaps: Tuple[Tuple[str, str, float], ...]
    unordered: Tuple[Tuple[str, str], ...] = ()

    @property
    def nodes(self) -> List[str]:
        return [n for n, _, _ in self.sequence]

    def to_dict(self) -> dict:
        return {
            "environment": self.environment.label,
            "names": list(self.names),
            "sequence": [{"node": n, "move": m, "start": _num(t)} for n, m, t in self.sequence],
            "reuse": [list(p) for p in self.reuse],
            "gaps": [{"after": a, "before": b, "seconds": _num(s)} for a, b, s in self.gaps],
            "unordered": [list(p) for p in self.unordered],
        }


def contention_report(validated: ValidatedGraph, duration_policy: Optional[DurationPolicy] = None,
                      *, workers: int = 1, overlay_free: bool = False) -> List[ContentionEntry]:
    """Occupancy sequence of every environment filled by two or more transfers.

    A `reuse` pair is an evacuation immediately followed by a fill.
    """
    g = _graph(validated)
    envs = EnvironmentResolver(g)
    try:
        sched = schedule(validated, workers, duration_policy, overlay_free=overlay_free)
    except InfeasibleResourcesError:
        sched = schedule(validated, len(g.nodes) + 1, duration_policy, overlay_free=overlay_free)
    start = {}
    for ev in sched.events:
        start.setdefault(ev.node, ev.start)
    rank = {n: i for i, n in enumerate(next(iter_linearizations(g)))}
    reach = happens_before(g)
    names: Dict[Environment, List[str]] = {}
    for name, env in g.environments.items():
        names.setdefault(env, []).append(name)
    report = []
    for env, (fills, evacs) in environment_moves(g, envs).items():
        if len(set(fills)) < 2:
            continue
        moves = [(n, "fill") for n in sorted(set(fills))] + [(n, "evacuate") for n in sorted(set(evacs))]
        moves.sort(key=lambda m: (start[m[0]], rank[m[0]]))
        seq = tuple((n, kind, _num(start[n])) for n, kind in moves)
        reuse = tuple((a[0], b[0]) for a, b in zip(moves, moves[1:])
                      if a[1] == "evacuate" and b[1] == "fill")
        ends = {ev.node: ev.end for ev in sched.events}
        gaps = tuple((a[0], b[0], _num(start[b[0]] - ends[a[0]])) for a, b in zip(moves, moves[1:]))
        unordered = tuple((o, f) for o in sorted(set(evacs)) for f in sorted(set(fills))
                          if o != f and f not in reach[o] and o not in reach[f])
        report.append(ContentionEntry(env, tuple(sorted(names.get(env, ()))), seq, reuse, gaps, unordered))
    report.sort(key=lambda c: c.environment.label)
    return report
