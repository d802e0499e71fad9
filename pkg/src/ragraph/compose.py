"""Plugin recipes: import one as a single node, later splice it into the host."""

from __future__ import annotations

import os
from dataclasses import replace
from typing import Iterable, Optional, Tuple, Union

from .diagnostics import PluginError, error
from .graph import (
    ActionNode, Edge, IngredientRoot, PluginPayload, PPCRef, RecipeGraph, TransferPayload,
    ValidatedGraph,
)
from .lexicon import TechniqueLexicon, default_lexicon
from .validator import load_plugin, resolve_plugin_path, sinks


def _host_dir(graph: RecipeGraph) -> str:
    return os.path.dirname(graph.source_path) if graph.source_path else os.getcwd()


def _load(host: RecipeGraph, ref: str, include_dirs, lexicon, span=None) -> Tuple[str, RecipeGraph]:
    path = resolve_plugin_path(host, ref, include_dirs)
    if path is None:
        raise PluginError([error("C001", f"plugin recipe {ref!r} not found", span,
                                 hint="check the path or pass --include-dir")])
    stack = [host.source_path] if host.source_path else []
    if path in stack:
        raise PluginError([error("C002", f"import cycle: {os.path.basename(path)} imports itself", span)])
    sub, diags = load_plugin(path, lexicon, list(include_dirs), stack, {})
    if sub is None:
        nested = [d for d in diags if d.severity == "error"]
        cycle = [d for d in nested if "[C002]" in d.message]
        head = (error("C002", f"import cycle through {os.path.basename(path)}: {cycle[0].message}", span)
                if cycle else error("C001", f"plugin {os.path.basename(path)} does not validate", span))
        raise PluginError([head] + nested)
    return path, sub


def import_plugin(host: RecipeGraph, path: str, alias: Optional[str] = None, *,
                  env_map: Iterable[Tuple[str, str]] = (), include_dirs: Iterable[str] = (),
                  lexicon: Optional[TechniqueLexicon] = None) -> str:
    """Add a plugin node for the recipe at `path`; the host is untouched on failure."""
    lexicon = lexicon or default_lexicon()
    _load(host, path, include_dirs, lexicon)
    alias = alias or os.path.splitext(os.path.basename(path))[0]
    for h, _ in env_map:
        if h not in host.environments:
            raise PluginError([error("C001", f"unknown host environment {h!r}")])
    host.add_node(ActionNode(alias, PluginPayload(path, False, tuple(env_map))))
    return alias


def expand(host: Union[ValidatedGraph, RecipeGraph], plugin_node: str, *,
           include_dirs: Iterable[str] = (), lexicon: Optional[TechniqueLexicon] = None) -> RecipeGraph:
    """Splice the plugin's recipe into a copy of the host. Re-validate the result.

    Sub-recipe ids become `<plugin>.<id>`; environments not mapped with
    `uses env` get the same prefix and the plugin name as namespace.
    """
    graph = host.graph if isinstance(host, ValidatedGraph) else host
    lexicon = lexicon or default_lexicon()
    if plugin_node in graph.expanded_plugins:
        raise PluginError([error("C004", f"plugin {plugin_node!r} is already expanded")])
    node = graph.nodes.get(plugin_node)
    if node is None or node.kind != "plugin":
        raise PluginError([error("C001", f"{plugin_node!r} is not a plugin node")])
    if node.payload.expanded:
        raise PluginError([error("C004", f"plugin {plugin_node!r} is already expanded", node.span)])
    path, sub = _load(graph, node.payload.recipe_ref, include_dirs, lexicon, node.span)

    alias = plugin_node
    mapped = {inner: h for h, inner in node.payload.env_map}
    env_name = {n: mapped.get(n, f"{alias}.{n}") for n in sub.environments}
    node_name = {n: f"{alias}.{n}" for n in sub.nodes}
    clashes = sorted(n for n in list(node_name.values()) + [env_name[e] for e in sub.environments if e not in mapped]
                     if n in graph.nodes or n in graph.environments)
    if clashes:
        raise PluginError([error("C003", f"expanding {alias!r} would reuse names: {', '.join(clashes)}",
                                 node.span)])

    out = graph.copy()
    out.nodes = {}
    sub_dir = os.path.dirname(path)
    spliced = []
    for sid, snode in sub.nodes.items():
        if isinstance(snode, IngredientRoot):
            env = env_name[snode.environment] if snode.environment else None
            ing = snode.ingredient
            if ing.name == sid:
                ing = replace(ing, name=node_name[sid])
            spliced.append(replace(snode, id=node_name[sid], ingredient=ing, environment=env))
            continue
        p = snode.payload
        if isinstance(p, TransferPayload):
            dest = (PPCRef(node_name[p.destination.producing_node]) if isinstance(p.destination, PPCRef)
                    else env_name[p.destination])
            p = replace(p, destination=dest)
        elif isinstance(p, PluginPayload):
            ref = p.recipe_ref if os.path.isabs(p.recipe_ref) else os.path.join(sub_dir, p.recipe_ref)
            ref = os.path.relpath(ref, _host_dir(graph))
            p = replace(p, recipe_ref=ref, env_map=tuple((env_name[h], i) for h, i in p.env_map))
        spliced.append(ActionNode(node_name[sid], p, snode.span))
    for nid, n in graph.nodes.items():
        if nid == plugin_node:
            for s in spliced:
                out.nodes[s.id] = s
        else:
            out.nodes[nid] = n
    for name, env in sub.environments.items():
        if name not in mapped:
            out.environments[env_name[name]] = replace(env, namespace=env.namespace or alias)

    (sink,) = sinks(sub)
    sink = node_name[sink]
    # actions that wait on no other action; host orderings into the plugin land here
    after_action = {e.dst for e in sub.node_edges() if not isinstance(sub.nodes[e.src], IngredientRoot)}
    firsts = sorted(node_name[n] for n, sn in sub.nodes.items()
                    if not isinstance(sn, IngredientRoot) and n not in after_action)
    edges = []
    for e in graph.edges:
        if e.src == plugin_node:
            edges.append(replace(e, src=sink))
        elif e.dst == plugin_node:
            edges.extend(replace(e, dst=f) for f in firsts)
        else:
            edges.append(e)
    for e in sub.edges:
        src = env_name[e.src] if e.src in sub.environments else node_name[e.src]
        edges.append(replace(e, src=src, dst=node_name[e.dst]))
    out.edges = edges
    for nid, n in list(out.nodes.items()):
        if isinstance(n, ActionNode) and isinstance(n.payload, TransferPayload) \
                and n.payload.destination == PPCRef(plugin_node):
            out.nodes[nid] = replace(n, payload=replace(n.payload, destination=PPCRef(sink)))
    out.expanded_plugins.add(plugin_node)
    return out


def expand_all(host: Union[ValidatedGraph, RecipeGraph], *, include_dirs: Iterable[str] = (),
               lexicon: Optional[TechniqueLexicon] = None) -> RecipeGraph:
    """Expand every plugin, including plugins revealed by earlier expansions."""
    graph = host.graph if isinstance(host, ValidatedGraph) else host
    while True:
        pending = sorted(n for n in graph.ids_of_kind("plugin") if not graph.nodes[n].payload.expanded)
        if not pending:
            return graph
        graph = expand(graph, pending[0], include_dirs=include_dirs, lexicon=lexicon)
