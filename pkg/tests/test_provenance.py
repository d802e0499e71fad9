import json
import os
import textwrap
from collections import deque

import pytest

from conftest import GOLDEN
from generators import random_graph
from ragraph import PHI, PPCRef, backward, environment_history, environment_of, forward, parse, validate
from ragraph.graph import UnvalidatedGraphError
from ragraph.provenance import NotARootError, primary_lineage


def naive_reach(graph, start):
    """Plain BFS over the raw edge list, material and interjection edges only."""
    seen, queue = set(), deque([start])
    while queue:
        n = queue.popleft()
        for e in graph.edges:
            if e.src == n and e.kind in ("material", "interjection") and e.dst not in seen:
                seen.add(e.dst)
                queue.append(e.dst)
    return seen


def test_sausage_lineage(sausage):
    tree = backward(sausage, PPCRef("p1"))
    assert tree.ingredients == ["sausages"]
    assert tree.labels["sausages"] == "sausages [A]"
    assert tree.nodes == {"p1", "t1", "sausages"}
    assert tree.leaves["sausages"].fraction == 1.0


def test_plate_leaves_are_all_ingredients(breakfast):
    manifest = json.load(open(os.path.join(GOLDEN, "english_breakfast.manifest.json"), encoding="utf-8"))
    tree = backward(breakfast, "breakfast")
    assert tree.ingredients == manifest["ingredients"]
    assert sorted(n for n, leaf in tree.leaves.items() if leaf.opaque) == manifest["plugins"]


def test_root_adjacent_transfer_has_depth_one(sausage):
    assert backward(sausage, "t1").depth == 1
    assert backward(sausage, "p1").depth == 2


def test_forward_examples(sausage, breakfast):
    assert forward(sausage, "sausages") == {"t1", "p1"}
    reached = forward(breakfast, "sausages")
    assert {"sausages_in", "fry_sausages", "sausages_out", "hold_sausages", "breakfast"} <= reached
    for root in breakfast.graph.ids_of_kind("ingredient", "plugin"):
        assert forward(breakfast, root) == naive_reach(breakfast.graph, root)


def test_forward_rejects_non_roots(sausage):
    with pytest.raises(NotARootError):
        forward(sausage, "p1")
    with pytest.raises(NotARootError):
        forward(sausage, "nowhere")


def test_queries_need_validation(sausage):
    with pytest.raises(UnvalidatedGraphError):
        backward(sausage.graph, "p1")
    with pytest.raises(UnvalidatedGraphError):
        forward(sausage.graph, "sausages")


def test_sausage_environment_history(sausage):
    hist = environment_history(sausage, PPCRef("p1"))
    assert [(n, e.label) for n, e in hist] == [("sausages", "φ"), ("t1", "frying pan@stove")]


def test_re_entry_history():
    v = validate(parse(textwrap.dedent("""\
        env pan { container "pan"; location "stove" }
        env board { container "board"; location "counter" }
        ingredient steak { qty 1 count; in pan }
        process sear { input steak; technique grill; until 3 min }
        transfer rest { from sear; to env board }
        process wait { input rest; technique keep_warm; until 5 min }
        transfer back { from wait; to env pan }
        process finish { input back; technique baste; until 1 min }
        """)))
    hist = environment_history(v, "finish")
    assert [n for n, _ in hist] == ["steak", "rest", "back"]
    assert [e.container for _, e in hist] == ["pan", "board", "pan"]


def test_bacon_history_matches_manifest(breakfast):
    manifest = json.load(open(os.path.join(GOLDEN, "english_breakfast.manifest.json"), encoding="utf-8"))
    hist = environment_history(breakfast, "bacon_out")
    assert [[n, e.label] for n, e in hist] == manifest["bacon_history"]


def test_primary_lineage_follows_the_moved_item(breakfast):
    # eggs_in moves eggs onto the oil; the lineage follows the eggs
    assert primary_lineage(breakfast.graph, "fry_eggs") == ["eggs", "eggs_in", "fry_eggs"]


FRACTIONS = textwrap.dedent("""\
    env bowl { container "bowl"; location "counter" }
    env pot { container "pot"; location "stove" }
    ingredient stock { qty 1 l }
    ingredient fat { qty 50 g }
    transfer half { from stock; to env bowl; scope partial; portion 50% }
    transfer quarter { from half; to env pot; scope partial; portion 50% }
    transfer some { from fat; to env pot; scope partial; portion 100 g }
    process mix_all { input quarter; technique mix; until 1 min }
    transfer dregs { from some; to mix_all; scope residual_only }
    process combine { input dregs; technique mix; until 1 min }
    """)


def test_fraction_bookkeeping():
    v = validate(parse(FRACTIONS))
    leaves = backward(v, "combine").leaves
    assert leaves["stock"].fraction == pytest.approx(0.25)
    assert not leaves["stock"].residual
    assert leaves["fat"].fraction is None and leaves["fat"].residual
    rendered = backward(v, "combine").render()
    assert "fraction unknown" in rendered and "residual" in rendered


@pytest.mark.parametrize("seed", range(60))
def test_random_graph_tree_properties(seed):
    v = validate(random_graph(seed))
    g = v.graph
    edge_set = set(g.edges)
    whole_only = all(g.nodes[t].payload.scope == "whole" for t in g.ids_of_kind("transfer"))
    for p in g.ids_of_kind("process", "transfer", "plate"):
        tree = backward(v, p)
        assert set(tree.edges) <= edge_set
        assert tree.nodes <= set(g.nodes)
        if whole_only:
            assert all(leaf.fraction == 1.0 for leaf in tree.leaves.values())
        if g.kind_of(p) != "plate":
            hist = environment_history(v, p)
            assert hist[-1][1] == environment_of(v, PPCRef(p))
            assert hist[0][1] == (g.environments[g.nodes[hist[0][0]].environment]
                                  if g.nodes[hist[0][0]].environment else PHI)


def test_tree_serializes(breakfast):
    doc = backward(breakfast, "breakfast").to_dict()
    assert doc["target"] == "breakfast"
    assert json.loads(json.dumps(doc)) == doc
