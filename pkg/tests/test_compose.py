import textwrap

import pytest

from conftest import fixture_path
from ragraph import (
    PluginError, backward, expand, expand_all, format_graph, import_plugin, parse, parse_file, validate,
)
from ragraph.validator import CHECKS, run_checks

SAUTE = textwrap.dedent("""\
    recipe "saute with pesto"
    env pan { container "frying pan"; location "stove" }
    ingredient courgette { qty 1 count; form "sliced" }
    transfer courgette_in { from courgette; to env pan }
    process saute_it { input courgette_in; technique saute; until 6 min }
    """)


def host(tmp_path, text=SAUTE, name="host.rag"):
    path = tmp_path / name
    path.write_text(text)
    return parse_file(path)


def pesto_copy(tmp_path):
    (tmp_path / "pesto.rag").write_text(open(fixture_path("pesto.rag"), encoding="utf-8").read())


def test_imported_plugin_feeds_a_process(tmp_path):
    pesto_copy(tmp_path)
    g = host(tmp_path)
    node = import_plugin(g, "pesto.rag")
    assert node == "pesto" and g.kind_of("pesto") == "plugin"
    text = format_graph(g) + "process finish { input saute_it pesto; technique mix; until 1 min }\n"
    (tmp_path / "host.rag").write_text(text)
    v = validate(parse_file(tmp_path / "host.rag"))
    assert sorted(v.proof) == sorted(CHECKS)


def test_failed_import_leaves_host_untouched(tmp_path):
    (tmp_path / "broken.rag").write_text('ingredient x { qty 1 g }\nprocess p { input x; technique levitate; '
                                         'until 1 min }\n')
    g = host(tmp_path)
    before = g.structure()
    with pytest.raises(PluginError) as info:
        import_plugin(g, "broken.rag")
    codes = info.value.codes
    assert codes[0] == "C001" and "V002" in codes
    assert g.structure() == before
    with pytest.raises(PluginError) as info:
        import_plugin(g, "nowhere.rag")
    assert info.value.codes == ["C001"]
    assert g.structure() == before


def test_import_cycle_names_the_chain(tmp_path):
    (tmp_path / "a.rag").write_text('ingredient x { qty 1 g }\nplugin b = import "b.rag"\n'
                                   'process p { input x b; technique mix; until 1 min }\n')
    (tmp_path / "b.rag").write_text('ingredient y { qty 1 g }\nplugin a = import "a.rag"\n'
                                   'process q { input y a; technique mix; until 1 min }\n')
    g = host(tmp_path)
    with pytest.raises(PluginError) as info:
        import_plugin(g, "a.rag")
    head = info.value.diagnostics[0]
    assert head.code == "C002"
    assert "a.rag" in head.message and "b.rag" in head.message


def test_expand_fixture(breakfast):
    plugin = parse_file(fixture_path("pesto.rag"))
    expanded = expand(breakfast, "pesto")
    assert len(expanded.nodes) == len(breakfast.graph.nodes) + len(plugin.nodes) - 1
    assert "pesto" not in expanded.nodes and "pesto.crush" in expanded.nodes
    v = validate(expanded)
    assert sorted(v.proof) == sorted(CHECKS) and list(v.warnings) == []
    # the host graph is a snapshot and must not change
    assert "pesto" in breakfast.graph.nodes


def test_double_expansion(breakfast):
    once = expand(breakfast, "pesto")
    with pytest.raises(PluginError) as info:
        expand(once, "pesto")
    assert info.value.codes == ["C004"]


def test_expand_non_plugin(breakfast):
    with pytest.raises(PluginError) as info:
        expand(breakfast, "fry_bacon")
    assert info.value.codes == ["C001"]


def test_namespace_collision(tmp_path):
    pesto_copy(tmp_path)
    g = host(tmp_path, SAUTE + textwrap.dedent("""\
        ingredient pesto.basil { qty 1 g }
        plugin pesto = import "pesto.rag"
        process finish { input saute_it pesto pesto.basil; technique mix; until 1 min }
        """))
    with pytest.raises(PluginError) as info:
        expand(g, "pesto")
    assert info.value.codes == ["C003"]
    assert "pesto.basil" in info.value.diagnostics[0].message


def test_provenance_agrees_across_expansion(breakfast):
    before = backward(breakfast, "pesto_in")
    assert before.leaves["pesto"].opaque
    after = backward(validate(expand(breakfast, "pesto")), "pesto_in")
    # the plugin's place in the lineage is now taken by its sink
    assert any(e.src == "pesto.loosen" and e.dst == "pesto_in" for e in after.edges)
    assert set(after.ingredients) == {"pesto.basil", "pesto.garlic", "pesto.pine_nuts", "pesto.parmesan",
                                      "pesto.olive_oil"}
    assert {n for n in before.nodes if n != "pesto"} <= after.nodes


def test_plugin_envs_stay_separate(breakfast):
    expanded = expand(breakfast, "pesto")
    assert "pesto.mortar" in expanded.environments
    assert expanded.environments["pesto.mortar"].namespace == "pesto"
    assert not [d for d in run_checks(expanded) if d.code == "V007"]


def test_env_mapping(tmp_path):
    pesto_copy(tmp_path)
    g = host(tmp_path, SAUTE + textwrap.dedent("""\
        env board { container "board"; location "counter" }
        plugin pesto = import "pesto.rag" uses env board as mortar
        process finish { input saute_it pesto; technique mix; until 1 min }
        """))
    expanded = expand(validate(g), "pesto")
    assert "pesto.mortar" not in expanded.environments
    assert expanded.nodes["pesto.basil"].environment == "board"
    validate(expanded)


TWO = textwrap.dedent("""\
    recipe "two pestos"
    ingredient bread { qty 2 slice }
    plugin green = import "pesto.rag"
    plugin red = import "pesto.rag"
    process spread_both { input bread green red; technique spread; until 1 min }
    """)


def test_expansion_order_does_not_matter(tmp_path):
    pesto_copy(tmp_path)
    v = validate(host(tmp_path, TWO))
    ab = expand(expand(v, "green"), "red")
    ba = expand(expand(v, "red"), "green")
    assert ab.isomorphic(ba)
    assert expand_all(v).isomorphic(ab)
    validate(ab)


def test_expanded_graph_round_trips(tmp_path, breakfast):
    expanded = expand(breakfast, "pesto")
    again = parse(format_graph(expanded), file=breakfast.graph.source_path)
    assert again.isomorphic(expanded)
