"""Canonical JSON IR and Graphviz DOT output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import jsonschema

from .diagnostics import RecipeError
from .graph import (
    Edge, Environment, Geometry, Ingredient, IngredientRoot, ActionNode, PlatePayload, PluginPayload,
    Portion, PPCRef, ProcessPayload, RecipeGraph, TechniqueRef, TemperatureSpec, TerminationCondition,
    TransferPayload, UnvalidatedGraphError, ValidatedGraph,
)

SCHEMA_VERSION = "1"
PRECISION = 6


class IRError(RecipeError):
    pass


_NULLABLE_STR = {"type": ["string", "null"]}
_NUM = {"type": "number"}
_NULLABLE_NUM = {"type": ["number", "null"]}

IR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "recipe action graph IR",
    "type": "object",
    "required": ["schema_version", "recipe", "environments", "nodes", "edges"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "recipe": {
            "type": "object",
            "required": ["name", "lexicon", "metadata"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "lexicon": {"type": "object", "required": ["name", "range"],
                            "properties": {"name": {"type": "string"}, "range": {"type": "string"}}},
                "metadata": {"type": "object", "additionalProperties": {"type": "string"}},
            },
        },
        "validation": {
            "type": "object",
            "properties": {"proof": {"type": "array", "items": {"type": "string"}},
                           "lexicon": {"type": "array", "items": {"type": "string"}}},
        },
        "expanded_plugins": {"type": "array", "items": {"type": "string"}},
        "environments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "container", "location"],
                "properties": {
                    "name": {"type": "string"},
                    "container": {"type": "string"},
                    "location": {"type": "string"},
                    "namespace": {"type": "string"},
                    "geometry": {"type": ["object", "null"],
                                 "properties": {"pose": {"type": "string"}, "tilt_degrees": _NULLABLE_NUM}},
                },
            },
        },
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind"],
                "properties": {
                    "id": {"type": "string"},
                    "kind": {"enum": ["ingredient", "process", "transfer", "plate", "plugin"]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["src", "dst", "kind"],
                "properties": {
                    "src": {"type": "string"},
                    "dst": {"type": "string"},
                    "kind": {"enum": ["material", "precedence", "interjection"]},
                    "role": _NULLABLE_STR,
                    "offset_fraction": _NULLABLE_NUM,
                    "offset_seconds": _NULLABLE_NUM,
                    "behavior": _NULLABLE_STR,
                    "repeat_every_seconds": _NULLABLE_NUM,
                },
            },
        },
    },
}


def _canon(value):
    if isinstance(value, float):
        value = round(value, PRECISION)
        return int(value) if value.is_integer() else value
    if isinstance(value, dict):
        return {str(k): _canon(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    return value


def _termination(c: Optional[TerminationCondition]):
    if c is None:
        return None
    return {"kind": c.kind, "duration_seconds": c.duration_seconds, "outcome_predicate": c.outcome_predicate,
            "outcome_category": c.outcome_category, "combine": c.combine,
            "conditions": [_termination(s) for s in c.conditions]}


def _node_doc(node) -> dict:
    if isinstance(node, IngredientRoot):
        ing = node.ingredient
        return {"id": node.id, "kind": "ingredient", "environment": node.environment,
                "ingredient": {"name": ing.name, "quantity": ing.quantity, "unit": ing.unit, "form": ing.form,
                               "modifiers": list(ing.modifiers), "instance_tag": ing.instance_tag}}
    p = node.payload
    doc = {"id": node.id, "kind": p.kind}
    if isinstance(p, ProcessPayload):
        t = p.temperature
        doc.update(
            technique={"id": p.technique.lexicon_id, "version": p.technique.lexicon_version,
                       "params": dict(sorted(p.technique.params.items()))},
            tool=p.tool,
            temperature=None if t is None else {
                "kind": t.kind, "low_c": t.low_c, "high_c": t.high_c,
                "ramp_points": [list(pt) for pt in t.ramp_points], "source_phrase": t.source_phrase},
            termination=_termination(p.termination),
            modifiers=list(p.modifiers),
            expected_duration_seconds=p.expected_duration_seconds,
        )
    elif isinstance(p, TransferPayload):
        dest = ({"ppc": p.destination.producing_node} if isinstance(p.destination, PPCRef)
                else {"environment": p.destination})
        portion = None if p.portion is None else {
            "fraction": p.portion.fraction, "quantity": p.portion.quantity, "unit": p.portion.unit}
        doc.update(destination=dest, mode=p.mode, scope=p.scope, portion=portion)
    elif isinstance(p, PlatePayload):
        doc["arrangement_notes"] = list(p.arrangement_notes)
    elif isinstance(p, PluginPayload):
        doc.update(recipe_ref=p.recipe_ref, expanded=p.expanded, env_map=[list(m) for m in p.env_map])
    return doc


def _edge_doc(e: Edge) -> dict:
    return {"src": e.src, "dst": e.dst, "kind": e.kind, "role": e.role,
            "offset_fraction": e.offset_fraction, "offset_seconds": e.offset_seconds,
            "behavior": e.behavior, "repeat_every_seconds": e.repeat_every_seconds}


def to_document(graph: Union[ValidatedGraph, RecipeGraph]) -> dict:
    validation = None
    if isinstance(graph, ValidatedGraph):
        validation = {"proof": sorted(graph.proof), "lexicon": list(graph.lexicon_snapshot)}
        graph = graph.graph
    envs = []
    for name in sorted(graph.environments):
        env = graph.environments[name]
        geo = None if env.geometry is None else {"pose": env.geometry.pose,
                                                  "tilt_degrees": env.geometry.tilt_degrees}
        envs.append({"name": name, "container": env.container, "location": env.location,
                     "geometry": geo, "namespace": env.namespace})
    doc = {
        "schema_version": SCHEMA_VERSION,
        "recipe": {"name": graph.name,
                   "lexicon": {"name": graph.lexicon_requirement[0], "range": graph.lexicon_requirement[1]},
                   "metadata": dict(sorted(graph.metadata.items()))},
        "environments": envs,
        "nodes": [_node_doc(graph.nodes[n]) for n in sorted(graph.nodes)],
        "edges": [_edge_doc(e) for e in sorted(graph.edges, key=Edge.sort_key)],
        "expanded_plugins": sorted(graph.expanded_plugins),
    }
    if validation is not None:
        doc["validation"] = validation
    return _canon(doc)


def export_json(graph: ValidatedGraph) -> str:
    """Canonical JSON text: sorted keys, nodes by id, floats at fixed precision."""
    if not isinstance(graph, ValidatedGraph):
        raise UnvalidatedGraphError("export_json needs a ValidatedGraph; run validate() first")
    return json.dumps(to_document(graph), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _termination_from(doc):
    if doc is None:
        return None
    return TerminationCondition(doc["kind"], doc.get("duration_seconds"), doc.get("outcome_predicate"),
                                doc.get("outcome_category"), doc.get("combine"),
                                tuple(_termination_from(c) for c in doc.get("conditions", ())))


def _node_from(doc):
    kind = doc["kind"]
    if kind == "ingredient":
        i = doc["ingredient"]
        ing = Ingredient(i["name"], i["quantity"], i["unit"], i.get("form"), tuple(i.get("modifiers", ())),
                         i.get("instance_tag"))
        return IngredientRoot(doc["id"], ing, doc.get("environment"))
    if kind == "process":
        t = doc["technique"]
        temp = doc.get("temperature")
        if temp is not None:
            temp = TemperatureSpec(temp["kind"], temp["low_c"], temp["high_c"],
                                   tuple(tuple(pt) for pt in temp["ramp_points"]), temp.get("source_phrase"))
        payload = ProcessPayload(TechniqueRef(t["id"], t["version"], dict(t["params"])), doc.get("tool"), temp,
                                 _termination_from(doc.get("termination")), tuple(doc.get("modifiers", ())),
                                 doc.get("expected_duration_seconds"))
    elif kind == "transfer":
        d = doc["destination"]
        dest = PPCRef(d["ppc"]) if "ppc" in d else d["environment"]
        portion = doc.get("portion")
        if portion is not None:
            portion = Portion(portion.get("fraction"), portion.get("quantity"), portion.get("unit"))
        payload = TransferPayload(dest, doc["mode"], doc["scope"], portion)
    elif kind == "plate":
        payload = PlatePayload(tuple(doc.get("arrangement_notes", ())))
    else:
        payload = PluginPayload(doc["recipe_ref"], doc.get("expanded", False),
                                tuple(tuple(m) for m in doc.get("env_map", ())))
    return ActionNode(doc["id"], payload)


def import_json(text: Union[str, dict], *, source_path: Optional[str] = None) -> RecipeGraph:
    """Rebuild an (unvalidated) RecipeGraph from the JSON IR."""
    try:
        doc = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise IRError(f"not JSON: {exc}") from exc
    problems = sorted(jsonschema.Draft202012Validator(IR_SCHEMA).iter_errors(doc),
                      key=lambda e: [str(p) for p in e.absolute_path])
    if problems:
        raise IRError("; ".join(f"{'/'.join(map(str, p.absolute_path)) or '<document>'}: {p.message}"
                                for p in problems))
    r = doc["recipe"]
    g = RecipeGraph(r["name"], (r["lexicon"]["name"], r["lexicon"]["range"]), r["metadata"], source_path)
    for env in doc["environments"]:
        geo = env.get("geometry")
        geometry = None if geo is None else Geometry(geo["pose"], geo.get("tilt_degrees"))
        g.add_environment(env["name"], Environment(env["container"], env["location"], geometry,
                                                   env.get("namespace", "")))
    for n in doc["nodes"]:
        g.add_node(_node_from(n))
    for e in doc["edges"]:
        g.add_edge(Edge(e["src"], e["dst"], e["kind"], e.get("role"), e.get("offset_fraction"),
                        e.get("offset_seconds"), e.get("behavior"), e.get("repeat_every_seconds")))
    g.expanded_plugins = set(doc.get("expanded_plugins", ()))
    return g


# DOT

THEME = {
    "graph": {"rankdir": "LR", "fontname": "Helvetica", "nodesep": "0.4"},
    "ingredient": {"shape": "ellipse", "style": "filled", "fillcolor": "#fff5d6"},
    "environment": {"shape": "house", "style": "filled", "fillcolor": "#e3eefc"},
    "process": {"shape": "box", "style": "rounded,filled", "fillcolor": "#ffffff"},
    "transfer": {"shape": "box", "style": "filled", "fillcolor": "#eef7ea"},
    "plate": {"shape": "box", "style": "filled,bold", "fillcolor": "#f3e8fd", "peripheries": "2"},
    "plugin": {"shape": "circle", "style": "filled", "fillcolor": "#fde8e8"},
    "plugin_expanded": {"shape": "box", "style": "dashed"},
    "material": {},
    "precedence": {"style": "bold", "color": "#888888"},
    "interjection": {"style": "dashed", "color": "#c0392b"},
    "to_environment": {"color": "#2c6fbb"},
}


@dataclass
class DotOptions:
    show_params: bool = True
    show_environments: bool = True
    theme: dict = field(default_factory=lambda: THEME)


def _q(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _attrs(d: dict) -> str:
    return ", ".join(f"{k}={_q(v)}" for k, v in sorted(d.items()))


def _env_id(name):
    return f"env:{name}"


def _label(graph: RecipeGraph, node, show_params) -> str:
    from .formatter import _termination, duration, num
    if isinstance(node, IngredientRoot):
        ing = node.ingredient
        lines = [ing.label]
        if show_params and ing.quantity:
            lines.append(f"{num(ing.quantity)} {ing.unit}")
        lines.append(node.environment or "φ")
        return "\n".join(lines)
    p = node.payload
    lines = [node.id]
    if isinstance(p, ProcessPayload):
        lines.append(p.technique.lexicon_id)
        if show_params:
            lines.extend(f"{k}={v}" for k, v in sorted(p.technique.params.items()))
            if p.temperature is not None:
                t = p.temperature
                lines.append(f"{num(t.low_c)} C" if t.low_c == t.high_c else f"{num(t.low_c)}..{num(t.high_c)} C")
            if p.termination is not None:
                lines.append(f"until {_termination(p.termination)}")
            if p.expected_duration_seconds is not None:
                lines.append(f"~{duration(p.expected_duration_seconds)}")
    elif isinstance(p, TransferPayload):
        lines.append(f"transfer ({p.mode})")
        if show_params and p.scope != "whole":
            lines.append(p.scope)
    elif isinstance(p, PlatePayload):
        lines.append("plate")
    elif isinstance(p, PluginPayload):
        lines.append(p.recipe_ref)
    return "\n".join(lines)


def export_dot(graph: ValidatedGraph, options: Optional[DotOptions] = None) -> str:
    """Deterministic DOT: ellipses for ingredients, houses for environments, boxes for
    actions, a circle for an unexpanded plugin, dashed interjection edges."""
    if not isinstance(graph, ValidatedGraph):
        raise UnvalidatedGraphError("export_dot needs a ValidatedGraph; run validate() first")
    opts = options or DotOptions()
    theme = opts.theme
    g = graph.graph
    out = [f"digraph {_q(g.name or 'recipe')} {{", f"  graph [{_attrs(theme['graph'])}];",
           f"  node [fontname={_q(theme['graph'].get('fontname', 'Helvetica'))}];"]
    used_envs = sorted({e.src for e in g.edges if e.src in g.environments})
    if opts.show_environments:
        for name in used_envs:
            env = g.environments[name]
            out.append(f"  {_q(_env_id(name))} [{_attrs({**theme['environment'], 'label': name + chr(10) + env.label})}];")
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        style_key = node.kind
        if node.kind == "plugin" and node.payload.expanded:
            style_key = "plugin_expanded"
        attrs = {**theme[style_key], "label": _label(g, node, opts.show_params)}
        out.append(f"  {_q(nid)} [{_attrs(attrs)}];")
    for e in sorted(g.edges, key=Edge.sort_key):
        if e.src in g.environments:
            if not opts.show_environments:
                continue
            attrs = {**theme["material"], **theme["to_environment"], "label": "to"}
            out.append(f"  {_q(_env_id(e.src))} -> {_q(e.dst)} [{_attrs(attrs)}];")
            continue
        if e.kind == "material":
            attrs = {**theme["material"], "label": e.role}
        elif e.kind == "precedence":
            attrs = {**theme["precedence"], "label": "then"}
        else:
            at = (f"{_canon(e.offset_fraction * 100)}%" if e.offset_fraction is not None
                  else f"{_canon(e.offset_seconds)} s")
            label = f"{e.behavior} @ {at}"
            if e.behavior == "repeating":
                label += f" every {e.repeat_every_seconds} s"
            attrs = {**theme["interjection"], "label": label}
        out.append(f"  {_q(e.src)} -> {_q(e.dst)} [{_attrs(attrs)}];")
    out.append("}")
    return "\n".join(out) + "\n"
