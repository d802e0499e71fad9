"""Canonical pretty-printer: RecipeGraph back to `.rag` source."""

from __future__ import annotations

import re
from typing import List

from .graph import (
    ActionNode, Edge, IngredientRoot, PlatePayload, PluginPayload, PPCRef, ProcessPayload,
    RecipeGraph, TemperatureSpec, TerminationCondition, TransferPayload,
)

_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
INDENT = "  "


def num(x) -> str:
    if isinstance(x, float) and x.is_integer():
        x = int(x)
    return repr(x)


def quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def duration(seconds) -> str:
    seconds = int(seconds)
    if seconds and seconds % 3600 == 0:
        return f"{seconds // 3600} h"
    if seconds and seconds % 60 == 0:
        return f"{seconds // 60} min"
    return f"{seconds} s"


def _word(value) -> str:
    from .parser import RESERVED
    if isinstance(value, str):
        return value if _BARE.match(value) and value not in RESERVED else quote(value)
    return num(value)


def _temperature(t: TemperatureSpec) -> str:
    if t.kind == "range":
        text = f"temp range {num(t.low_c)}..{num(t.high_c)} C"
    elif t.kind == "ramp":
        points = " ".join(f"({duration(o)} {num(c)} C)" for o, c in t.ramp_points)
        text = f"temp ramp {points}"
    else:
        text = f"temp {num(t.low_c)} C"
    if t.source_phrase is not None:
        text += f" from {quote(t.source_phrase)}"
    return text


def _termination(c: TerminationCondition) -> str:
    if c.kind == "duration":
        return duration(c.duration_seconds)
    if c.kind == "outcome":
        category = c.outcome_category or "custom"
        prefix = "" if category == "custom" else f"{category} "
        return f"outcome {prefix}{quote(c.outcome_predicate)}"
    word = "all" if c.combine == "all_of" else "any"
    return f"{word}(" + " ".join(_termination(s) for s in c.conditions) + ")"


class Formatter:
    def __init__(self, graph: RecipeGraph):
        self.g = graph
        self.interjected = {e.src: e for e in graph.edges if e.kind == "interjection"}

    def inputs(self, node_id, role="input") -> List[str]:
        return [e.src for e in self.g.edges
                if e.dst == node_id and e.kind == "material" and e.role == role]

    def render(self) -> str:
        g = self.g
        out = []
        if g.name:
            out.append(f"recipe {quote(g.name)}")
        name, version = g.lexicon_requirement
        out.append(f"lexicon {name}@{version}")
        for key in sorted(g.metadata):
            out.append(f"meta {key} {quote(g.metadata[key])}")
        if g.environments:
            out.append("")
            for env_name, env in g.environments.items():
                out.append(self.environment(env_name, env))
        ingredients = [n for n in g.nodes.values() if isinstance(n, IngredientRoot)]
        if ingredients:
            out.append("")
            out.extend(self.ingredient(n) for n in ingredients)
        for node in g.nodes.values():
            if isinstance(node, IngredientRoot):
                continue
            out.append("")
            edge = self.interjected.get(node.id)
            if edge is not None:
                out.append(self.interjection(edge, node))
            else:
                out.append(self.action(node))
        orders = [e for e in g.edges if e.kind == "precedence"]
        if orders:
            out.append("")
            out.extend(f"order {e.src} -> {e.dst}" for e in orders)
        return "\n".join(out).lstrip("\n") + "\n"

    def environment(self, name, env) -> str:
        fields = [f"container {quote(env.container)}", f"location {quote(env.location)}"]
        if env.geometry is not None:
            geo = f"geometry pose {quote(env.geometry.pose)}"
            if env.geometry.tilt_degrees is not None:
                geo += f" tilt {num(env.geometry.tilt_degrees)}"
            fields.append(geo)
        if env.namespace:
            fields.append(f"namespace {quote(env.namespace)}")
        return f"env {name} {{ " + "; ".join(fields) + " }"

    def ingredient(self, node: IngredientRoot) -> str:
        ing = node.ingredient
        head = f"ingredient {node.id}"
        if ing.instance_tag:
            head += f" tag {ing.instance_tag}"
        fields = [f"qty {num(ing.quantity)} {ing.unit}"]
        if ing.form is not None:
            fields.append(f"form {quote(ing.form)}")
        if ing.modifiers:
            fields.append("modifiers " + " ".join(quote(m) for m in ing.modifiers))
        if node.environment:
            fields.append(f"in {node.environment}")
        return head + " { " + "; ".join(fields) + " }"

    def interjection(self, edge: Edge, node: ActionNode) -> str:
        if edge.offset_fraction is not None:
            at = f"{num(round(edge.offset_fraction * 100, 9))}%"
        else:
            at = duration(edge.offset_seconds)
        behavior = edge.behavior
        if behavior == "repeating":
            behavior += f" every {duration(edge.repeat_every_seconds)}"
        inner = self.action(node).replace("\n", "\n" + INDENT)
        return f"interject {edge.dst} at {at} {behavior} {{\n{INDENT}{inner}\n}}"

    def action(self, node: ActionNode) -> str:
        p = node.payload
        if isinstance(p, TransferPayload):
            fields = [f"from {s}" for s in self.inputs(node.id, "from")]
            if isinstance(p.destination, PPCRef):
                fields.append(f"to {p.destination.producing_node}")
            else:
                fields.append(f"to env {p.destination}")
            fields.append(f"mode {p.mode}")
            if p.scope != "whole":
                fields.append(f"scope {p.scope}")
            if p.portion is not None:
                if p.portion.fraction is not None:
                    fields.append(f"portion {num(p.portion.fraction)}")
                else:
                    fields.append(f"portion {num(p.portion.quantity)} {p.portion.unit}")
            return f"transfer {node.id} {{ " + "; ".join(fields) + " }"
        if isinstance(p, ProcessPayload):
            lines = []
            inputs = self.inputs(node.id)
            if inputs:
                lines.append("input " + " ".join(inputs))
            tech = p.technique
            text = f"technique {tech.lexicon_id}"
            if tech.lexicon_version != self.g.lexicon_requirement[1]:
                text += f"@{tech.lexicon_version}"
            if tech.params:
                text += " { " + "; ".join(f"{k} = {_word(tech.params[k])}" for k in sorted(tech.params)) + " }"
            lines.append(text)
            if p.tool is not None:
                lines.append(f"tool {quote(p.tool)}")
            if p.temperature is not None:
                lines.append(_temperature(p.temperature))
            if p.termination is not None:
                lines.append(f"until {_termination(p.termination)}")
            if p.expected_duration_seconds is not None:
                lines.append(f"expect {duration(p.expected_duration_seconds)}")
            if p.modifiers:
                lines.append("modifiers " + " ".join(quote(m) for m in p.modifiers))
            body = "".join(f"\n{INDENT}{line}" for line in lines)
            return f"process {node.id} {{{body}\n}}"
        if isinstance(p, PlatePayload):
            fields = []
            components = self.inputs(node.id)
            if components:
                fields.append("components " + " ".join(components))
            if p.arrangement_notes:
                fields.append("notes " + " ".join(quote(n) for n in p.arrangement_notes))
            return f"plate {node.id} {{ " + "; ".join(fields) + " }"
        if isinstance(p, PluginPayload):
            text = f"plugin {node.id} = import {quote(p.recipe_ref)}"
            for host, inner in p.env_map:
                text += f" uses env {host} as {inner}"
            return text
        raise TypeError(f"cannot format payload {p!r}")


def format_graph(graph: RecipeGraph) -> str:
    """Canonical `.rag` text for `graph`; parse(format_graph(g)) is isomorphic to g."""
    return Formatter(graph).render()
