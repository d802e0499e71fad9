"""Typed action-graph IR: ingredients, environments, action nodes, and edges.

A `RecipeGraph` is built incrementally (by the parser, the JSON importer, or
by hand) and is not checked beyond local edge rules until it goes through
`ragraph.validator.validate`, which wraps it in a `ValidatedGraph`.

Intermediate products are never stored as nodes. The output of a Process,
Transfer, or Plugin node is addressed through a `PPCRef` to that node.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .diagnostics import RecipeError, SourceSpan

UNASSIGNED = "unassigned"

BASE_UNITS = ("g", "kg", "ml", "l", "tsp", "tbsp", "cup", "count", "unspecified")

TRANSFER_MODES = ("place", "pour", "scrape", "ladle", "drain", "lift")
TRANSFER_SCOPES = ("whole", "partial", "residual_only")
MATERIAL_ROLES = ("input", "from", "to")
EDGE_KINDS = ("material", "precedence", "interjection")
INTERJECTION_BEHAVIORS = ("breaking", "repeating", "overlay")
OUTCOME_CATEGORIES = ("doneness", "texture", "color", "aroma", "custom")
TEMPERATURE_KINDS = ("constant", "range", "ramp")
TERMINATION_KINDS = ("duration", "outcome", "compound")


class GraphError(RecipeError):
    pass


class DuplicateIdError(GraphError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"duplicate id {node_id!r}")


class UnknownEndpointError(GraphError):
    pass


class InterjectionTargetError(GraphError):
    pass


class RepeatIntervalError(GraphError):
    pass


class NotAProducerError(GraphError):
    pass


class UnvalidatedGraphError(GraphError):
    pass


class MergeAmbiguityError(GraphError):
    def __init__(self, node_id, environments):
        self.node_id = node_id
        self.environments = environments
        names = ", ".join(sorted(e.label for e in environments))
        super().__init__(f"inputs of {node_id!r} live in different environments: {names}")


class EnvironmentUndefinedError(GraphError):
    pass


class FrozenGraphError(GraphError):
    pass


@dataclass(frozen=True)
class Geometry:
    pose: str
    tilt_degrees: Optional[float] = None


@dataclass(frozen=True)
class Environment:
    container: str
    location: str
    geometry: Optional[Geometry] = None
    # Set on environments spliced in from a plugin so they never alias host environments.
    namespace: str = ""

    @property
    def is_unassigned(self) -> bool:
        return self.container == UNASSIGNED and self.location == UNASSIGNED

    @property
    def label(self) -> str:
        if self.is_unassigned:
            return "φ"
        text = f"{self.container}@{self.location}"
        if self.geometry:
            text += f"[{self.geometry.pose}"
            if self.geometry.tilt_degrees is not None:
                text += f" {self.geometry.tilt_degrees:g}°"
            text += "]"
        if self.namespace:
            text = f"{self.namespace}:{text}"
        return text


PHI = Environment(UNASSIGNED, UNASSIGNED)


@dataclass(frozen=True)
class Ingredient:
    name: str
    quantity: float = 0
    unit: str = "unspecified"
    form: Optional[str] = None
    modifiers: Tuple[str, ...] = ()
    instance_tag: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.name} [{self.instance_tag}]" if self.instance_tag else self.name


@dataclass(frozen=True)
class TemperatureSpec:
    kind: str
    low_c: float
    high_c: float
    ramp_points: Tuple[Tuple[float, float], ...] = ()
    source_phrase: Optional[str] = None

    @classmethod
    def constant(cls, temp_c, source_phrase=None):
        return cls("constant", temp_c, temp_c, (), source_phrase)

    @classmethod
    def ramp(cls, points, source_phrase=None):
        points = tuple((float(t), float(c)) for t, c in points)
        temps = [c for _, c in points]
        return cls("ramp", min(temps), max(temps), points, source_phrase)


@dataclass(frozen=True)
class TerminationCondition:
    kind: str
    duration_seconds: Optional[int] = None
    outcome_predicate: Optional[str] = None
    outcome_category: Optional[str] = None
    combine: Optional[str] = None
    conditions: Tuple["TerminationCondition", ...] = ()

    @classmethod
    def after(cls, seconds):
        return cls("duration", duration_seconds=seconds)

    @classmethod
    def outcome(cls, predicate, category="custom"):
        return cls("outcome", outcome_predicate=predicate, outcome_category=category)

    @classmethod
    def compound(cls, combine, *conditions):
        return cls("compound", combine=combine, conditions=tuple(conditions))

    def duration_bound(self) -> Optional[int]:
        """Seconds after which the condition is certainly met, if knowable."""
        if self.kind == "duration":
            return self.duration_seconds
        if self.kind == "compound":
            bounds = [c.duration_bound() for c in self.conditions]
            known = [b for b in bounds if b is not None]
            if self.combine == "any_of" and known:
                return min(known)
            if self.combine == "all_of" and known and len(known) == len(bounds):
                return max(known)
        return None

    def iter_outcomes(self):
        if self.kind == "outcome":
            yield self
        for c in self.conditions:
            yield from c.iter_outcomes()


@dataclass(frozen=True)
class TechniqueRef:
    lexicon_id: str
    lexicon_version: str = "^1.0"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PPCRef:
    producing_node: str

    @property
    def implicit(self) -> bool:
        return True


@dataclass(frozen=True)
class Portion:
    fraction: Optional[float] = None
    quantity: Optional[float] = None
    unit: Optional[str] = None


@dataclass(frozen=True)
class ProcessPayload:
    technique: TechniqueRef
    tool: Optional[str] = None
    temperature: Optional[TemperatureSpec] = None
    termination: Optional[TerminationCondition] = None
    modifiers: Tuple[str, ...] = ()
    expected_duration_seconds: Optional[int] = None

    kind = "process"


@dataclass(frozen=True)
class TransferPayload:
    # An environment binding name, or the PPC the moved item is combined into.
    destination: Union[str, PPCRef]
    mode: str = "place"
    scope: str = "whole"
    portion: Optional[Portion] = None

    kind = "transfer"


@dataclass(frozen=True)
class PlatePayload:
    arrangement_notes: Tuple[str, ...] = ()

    kind = "plate"


@dataclass(frozen=True)
class PluginPayload:
    recipe_ref: str
    expanded: bool = False
    # (host environment name, plugin environment name) pairs.
    env_map: Tuple[Tuple[str, str], ...] = ()

    kind = "plugin"


Payload = Union[ProcessPayload, TransferPayload, PlatePayload, PluginPayload]


@dataclass
class ActionNode:
    id: str
    payload: Payload
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    @property
    def kind(self) -> str:
        return self.payload.kind


@dataclass
class IngredientRoot:
    id: str
    ingredient: Ingredient
    # Name of the initial environment binding; None means unassigned.
    environment: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    kind = "ingredient"


Node = Union[ActionNode, IngredientRoot]


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str
    role: Optional[str] = None
    offset_fraction: Optional[float] = None
    offset_seconds: Optional[float] = None
    behavior: Optional[str] = None
    repeat_every_seconds: Optional[int] = None
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    @classmethod
    def material(cls, src, dst, role="input", span=None):
        return cls(src, dst, "material", role=role, span=span)

    @classmethod
    def precedence(cls, src, dst, span=None):
        return cls(src, dst, "precedence", span=span)

    @classmethod
    def interjection(cls, src, dst, *, fraction=None, seconds=None, behavior="overlay",
                     every=None, span=None):
        return cls(src, dst, "interjection", offset_fraction=fraction, offset_seconds=seconds,
                   behavior=behavior, repeat_every_seconds=every, span=span)

    def sort_key(self):
        return (self.src, self.dst, self.kind, self.role or "", self.behavior or "",
                self.offset_fraction or 0, self.offset_seconds or 0, self.repeat_every_seconds or 0)

    @property
    def is_ordering(self) -> bool:
        return self.kind in ("material", "precedence")


class RecipeGraph:
    """Mutable action graph; see module docstring."""

    def __init__(self, name: str = "", lexicon_requirement=("techniques", "^1.0"),
                 metadata: Optional[dict] = None, source_path: Optional[str] = None):
        self.name = name
        self.lexicon_requirement = tuple(lexicon_requirement)
        self.metadata: Dict[str, str] = dict(metadata or {})
        self.source_path = source_path
        self.nodes: Dict[str, Node] = {}
        self.edges: List[Edge] = []
        self.environments: Dict[str, Environment] = {}
        self.env_spans: Dict[str, SourceSpan] = {}
        self.warnings: list = []
        self.expanded_plugins: set = set()
        self.frozen = False

    def __repr__(self):
        return f"<RecipeGraph {self.name!r}: {len(self.nodes)} nodes, {len(self.edges)} edges>"

    def _check_mutable(self):
        if self.frozen:
            raise FrozenGraphError("validated graphs are immutable; work on graph.copy()")

    def add_node(self, node: Node) -> str:
        self._check_mutable()
        if node.id in self.nodes or node.id in self.environments:
            raise DuplicateIdError(node.id)
        self.nodes[node.id] = node
        return node.id

    def add_environment(self, name: str, env: Environment, span=None) -> str:
        self._check_mutable()
        if name in self.environments or name in self.nodes:
            raise DuplicateIdError(name)
        self.environments[name] = env
        if span is not None:
            self.env_spans[name] = span
        return name

    def add_edge(self, edge: Edge) -> None:
        self._check_mutable()
        if edge.kind not in EDGE_KINDS:
            raise GraphError(f"unknown edge kind {edge.kind!r}")
        src_ok = edge.src in self.nodes or (
            edge.kind == "material" and edge.role == "to" and edge.src in self.environments)
        if not src_ok:
            raise UnknownEndpointError(f"unknown edge source {edge.src!r}")
        if edge.dst not in self.nodes:
            raise UnknownEndpointError(f"unknown edge target {edge.dst!r}")
        if edge.kind == "material" and edge.role not in MATERIAL_ROLES:
            raise GraphError(f"material edge needs a role in {MATERIAL_ROLES}, got {edge.role!r}")
        if edge.kind == "interjection":
            if self.kind_of(edge.dst) != "process":
                raise InterjectionTargetError(
                    f"interjection target {edge.dst!r} is a {self.kind_of(edge.dst)}, not a process")
            if edge.behavior not in INTERJECTION_BEHAVIORS:
                raise GraphError(f"unknown interjection behavior {edge.behavior!r}")
            if edge.behavior == "repeating" and not edge.repeat_every_seconds:
                raise RepeatIntervalError(f"repeating interjection {edge.src}->{edge.dst} needs an interval")
        self.edges.append(edge)

    def ppc_of(self, node_id: str) -> PPCRef:
        if node_id not in self.nodes:
            raise UnknownEndpointError(f"unknown node {node_id!r}")
        kind = self.kind_of(node_id)
        if kind not in ("process", "transfer", "plugin"):
            raise NotAProducerError(f"{node_id!r} is a {kind} and produces no consumable PPC")
        return PPCRef(node_id)

    # accessors

    def kind_of(self, node_id: str) -> str:
        return self.nodes[node_id].kind

    def ids_of_kind(self, *kinds) -> List[str]:
        return [n.id for n in self.nodes.values() if n.kind in kinds]

    def in_edges(self, node_id, kind=None, role=None) -> List[Edge]:
        return [e for e in self.edges if e.dst == node_id
                and (kind is None or e.kind == kind) and (role is None or e.role == role)]

    def out_edges(self, node_id, kind=None, role=None) -> List[Edge]:
        return [e for e in self.edges if e.src == node_id
                and (kind is None or e.kind == kind) and (role is None or e.role == role)]

    def node_edges(self, kinds=("material", "precedence")) -> List[Edge]:
        """Edges of the given kinds whose endpoints are both nodes."""
        return [e for e in self.edges if e.kind in kinds and e.src in self.nodes]

    def adjacency(self, kinds=("material", "precedence")) -> Dict[str, List[str]]:
        succ = {n: [] for n in self.nodes}
        for e in self.node_edges(kinds):
            if e.dst not in succ[e.src]:
                succ[e.src].append(e.dst)
        for n in succ:
            succ[n].sort()
        return succ

    def predecessors(self, kinds=("material", "precedence")) -> Dict[str, List[str]]:
        pred = {n: [] for n in self.nodes}
        for e in self.node_edges(kinds):
            if e.src not in pred[e.dst]:
                pred[e.dst].append(e.src)
        for n in pred:
            pred[n].sort()
        return pred

    def material_sources(self, node_id, role=None) -> List[str]:
        return [e.src for e in self.in_edges(node_id, "material", role) if e.src in self.nodes]

    def interjections_into(self, node_id) -> List[Edge]:
        return sorted(self.in_edges(node_id, "interjection"), key=Edge.sort_key)

    def interjection_parent(self, node_id) -> Optional[str]:
        for e in self.edges:
            if e.kind == "interjection" and e.src == node_id:
                return e.dst
        return None

    def label(self, node_id) -> str:
        node = self.nodes[node_id]
        if isinstance(node, IngredientRoot):
            return node.ingredient.label
        return node_id

    def copy(self) -> "RecipeGraph":
        dup = copy.copy(self)
        dup.metadata = dict(self.metadata)
        dup.nodes = dict(self.nodes)
        dup.edges = list(self.edges)
        dup.environments = dict(self.environments)
        dup.env_spans = dict(self.env_spans)
        dup.warnings = list(self.warnings)
        dup.expanded_plugins = set(self.expanded_plugins)
        dup.frozen = False
        return dup

    def freeze(self) -> "RecipeGraph":
        self.frozen = True
        return self

    def structure(self):
        """Span-free canonical form; equal structures mean id-respecting isomorphic graphs."""
        return (
            self.name,
            self.lexicon_requirement,
            tuple(sorted(self.metadata.items())),
            tuple(sorted((k, v) for k, v in self.environments.items())),
            tuple(sorted(((n.id, _node_key(n)) for n in self.nodes.values()), key=lambda x: x[0])),
            tuple(sorted(self.edges, key=Edge.sort_key)),
        )

    def isomorphic(self, other: "RecipeGraph") -> bool:
        return self.structure() == other.structure()


def _node_key(node):
    if isinstance(node, IngredientRoot):
        return ("ingredient", node.ingredient, node.environment)
    payload = node.payload
    if isinstance(payload, ProcessPayload):
        params = tuple(sorted(payload.technique.params.items()))
        technique = (payload.technique.lexicon_id, payload.technique.lexicon_version, params)
        return ("process", technique, payload.tool, payload.temperature, payload.termination,
                payload.modifiers, payload.expected_duration_seconds)
    return (payload.kind, payload)


class ValidatedGraph:
    """A graph that passed every validator check. Only the validator builds these."""

    def __init__(self, graph: RecipeGraph, proof, lexicon_snapshot, warnings=()):
        self.graph = graph.freeze()
        self.proof = frozenset(proof)
        self.lexicon_snapshot = tuple(lexicon_snapshot)
        self.warnings = list(warnings)

    def __repr__(self):
        return f"<ValidatedGraph {self.graph.name!r} checks={sorted(self.proof)}>"

    @property
    def nodes(self):
        return self.graph.nodes

    @property
    def edges(self):
        return self.graph.edges

    def ppc_of(self, node_id) -> PPCRef:
        return self.graph.ppc_of(node_id)


class EnvironmentResolver:
    """Computes the environment an item or PPC sits in, memoized per graph snapshot.

    Transfers set the environment; Process nodes inherit it from their inputs.
    Inputs still in the unassigned environment do not vote at a merge.
    """

    def __init__(self, graph: RecipeGraph):
        self.graph = graph
        self._memo: Dict[str, Environment] = {}

    def of_node(self, node_id: str) -> Environment:
        if node_id in self._memo:
            return self._memo[node_id]
        env = self._compute(node_id, set())
        self._memo[node_id] = env
        return env

    def _compute(self, node_id, visiting):
        if node_id in self._memo:
            return self._memo[node_id]
        if node_id in visiting:
            raise GraphError(f"cycle while resolving environment of {node_id!r}")
        visiting.add(node_id)
        g = self.graph
        node = g.nodes[node_id]
        if isinstance(node, IngredientRoot):
            env = g.environments[node.environment] if node.environment else PHI
        elif node.kind == "transfer":
            dest = node.payload.destination
            if isinstance(dest, PPCRef):
                env = self._compute(dest.producing_node, visiting)
            else:
                env = g.environments[dest]
        elif node.kind == "process":
            envs = {self._compute(src, visiting) for src in g.material_sources(node_id, "input")}
            placed = {e for e in envs if not e.is_unassigned}
            if len(placed) > 1:
                raise MergeAmbiguityError(node_id, placed)
            env = placed.pop() if placed else PHI
        elif node.kind == "plugin":
            env = PHI
        else:
            raise EnvironmentUndefinedError(f"{node_id!r} is a plate; its output has no environment")
        visiting.discard(node_id)
        self._memo[node_id] = env
        return env

    def governing_inputs(self, node_id) -> List[str]:
        """Process inputs whose environment decides the output environment."""
        srcs = self.graph.material_sources(node_id, "input")
        placed = [s for s in srcs if not self.of_node(s).is_unassigned]
        return sorted(placed or srcs)


def environment_of(graph: ValidatedGraph, ppc: PPCRef) -> Environment:
    """Environment of the PPC `ppc` in a validated graph."""
    if not isinstance(graph, ValidatedGraph):
        raise UnvalidatedGraphError("environment_of needs a ValidatedGraph; run validate() first")
    graph.graph.ppc_of(ppc.producing_node)
    return EnvironmentResolver(graph.graph).of_node(ppc.producing_node)
