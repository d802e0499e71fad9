import textwrap

import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_path
from ragraph import RecipeSyntaxError, default_temperature_table, parse, parse_file
from ragraph.parser import levenshtein, suggest

SAUSAGE = fixture_path("sausage.rag")


def src(text):
    return textwrap.dedent(text)


def errors_of(text):
    with pytest.raises(RecipeSyntaxError) as info:
        parse(src(text))
    return info.value.diagnostics


def test_sausage_excerpt_structure():
    g = parse_file(SAUSAGE)
    kinds = sorted(g.kind_of(n) for n in g.nodes)
    assert kinds == ["ingredient", "process", "transfer"]
    assert len(g.edges) == 3 and all(e.kind == "material" for e in g.edges)
    assert sorted(e.role for e in g.edges) == ["from", "input", "to"]


def test_sausage_payload_fields():
    g = parse_file(SAUSAGE)
    root = g.nodes["sausages"]
    assert root.ingredient.instance_tag == "A" and root.ingredient.quantity == 4
    p = g.nodes["p1"].payload
    assert p.technique.lexicon_id == "dry_fry"
    assert p.technique.params == {"agitation_frequency": "frequent"}
    assert (p.temperature.low_c, p.temperature.high_c, p.temperature.source_phrase) == (150, 180, "medium heat")
    assert p.expected_duration_seconds == 720
    assert p.termination.combine == "all_of"
    assert g.nodes["t1"].payload.destination == "pan_stove"


def test_misspelled_reference_gets_hint():
    diags = errors_of("""\
        ingredient bacon { qty 2 rasher }
        process p { input bcon; technique dry_fry; until 5 min }
        """)
    (d,) = diags
    assert d.code == "E005"
    assert d.hint == "did you mean 'bacon'?"
    assert d.span.line_start == 2


def test_no_hint_beyond_distance_two():
    (d,) = errors_of("""\
        ingredient bacon { qty 2 rasher }
        process p { input xxxxx; technique dry_fry; until 5 min }
        """)
    assert d.code == "E005" and d.hint is None


def test_duplicate_block_name():
    diags = errors_of("""\
        ingredient eggs { qty 2 count }
        ingredient eggs { qty 3 count }
        """)
    assert [d.code for d in diags] == ["E004"]


def test_recovers_at_block_boundaries():
    diags = errors_of("""\
        ingredient a { qty }
        ingredient b { qty 1 g }
        process p { input b technique }
        transfer t { from b to }
        ingredient c { qty 1 g; form }
        """)
    assert len([d for d in diags if d.code == "E003"]) >= 4


def test_bad_duration_unit():
    diags = errors_of("""\
        ingredient a { qty 1 g }
        process p { input a; technique mix; until 5 fortnights }
        """)
    assert "E006" in [d.code for d in diags]


def test_unknown_character_surfaces_from_parse():
    diags = errors_of("ingredient a { qty 1 g } ¤\n")
    assert diags[0].code == "E001"


def test_durations_normalize_to_seconds():
    g = parse(src("""\
        ingredient a { qty 1 g }
        process p { input a; technique simmer; until 1 h }
        process q { input p; technique simmer; until 90 s }
        process r { input q; technique simmer; until 2 min }
        """))
    assert [g.nodes[n].payload.termination.duration_seconds for n in "pqr"] == [3600, 90, 120]


def test_generated_ids_follow_kind_and_ordinal():
    g = parse(src("""\
        ingredient a { qty 1 g }
        env bowl { container "bowl"; location "counter" }
        transfer { from a; to env bowl }
        process { input transfer_1; technique mix; until 1 min }
        """))
    assert {"transfer_1", "process_1"} <= set(g.nodes)


PHRASED = """\
    ingredient a { qty 1 g }
    process p { input a; technique dry_fry; temp TEMP C from "PHRASE"; until 1 min }
    """


@pytest.mark.parametrize("temp,phrase,codes", [
    ("range 300..320", "medium heat", ["W001"]),
    ("165", "medium heat", []),
    ("range 150..180", "medium heat", []),
    ("165", "thermonuclear", ["W001"]),
])
def test_temperature_phrase_is_checked_against_the_table(temp, phrase, codes):
    text = src(PHRASED).replace("TEMP", temp).replace("PHRASE", phrase)
    g = parse(text, temperatures=default_temperature_table())
    assert [d.code for d in g.warnings] == codes
    assert [d.severity for d in g.warnings] == ["warning"] * len(codes)


def test_without_a_table_phrases_are_not_checked():
    g = parse(src(PHRASED).replace("TEMP", "999").replace("PHRASE", "thermonuclear"))
    assert list(g.warnings) == []


def test_only_celsius():
    diags = errors_of("""\
        ingredient a { qty 1 g }
        process p { input a; technique bake; temp 212 F; until 1 min }
        """)
    (d,) = diags
    assert d.code == "E006" and "C" in d.hint


def test_interjection_offsets():
    g = parse(src("""\
        env pot { container "pot"; location "stove" }
        ingredient a { qty 1 l; in pot }
        ingredient b { qty 1 g }
        ingredient c { qty 1 g }
        process p { input a; technique simmer; until 10 min }
        interject p at 50% breaking { transfer b_in { from b; to env pot } }
        interject p at 2 min repeating every 1 min { transfer c_in { from c; to env pot } }
        """))
    by_src = {e.src: e for e in g.edges if e.kind == "interjection"}
    assert by_src["b_in"].offset_fraction == 0.5 and by_src["b_in"].behavior == "breaking"
    assert (by_src["c_in"].offset_seconds, by_src["c_in"].repeat_every_seconds) == (120, 60)
    assert all(e.dst == "p" for e in by_src.values())


def test_plugin_env_mapping_and_order():
    g = parse(src("""\
        env pan { container "pan"; location "stove" }
        ingredient a { qty 1 g }
        plugin pesto = import "pesto.rag" uses env pan as mortar
        process p { input a pesto; technique mix; until 1 min }
        """))
    payload = g.nodes["pesto"].payload
    assert payload.recipe_ref == "pesto.rag" and payload.env_map == (("pan", "mortar"),)


def test_every_node_and_edge_has_a_span_inside_the_document():
    text = open(fixture_path("english_breakfast.rag"), encoding="utf-8").read()
    g = parse_file(fixture_path("english_breakfast.rag"))
    n_lines = text.count("\n") + 1
    for item in list(g.nodes.values()) + list(g.edges):
        assert item.span is not None
        assert 1 <= item.span.line_start <= item.span.line_end <= n_lines


@pytest.mark.parametrize("a,b,d", [("bacon", "bcon", 1), ("", "abc", 3), ("kitten", "sitting", 3), ("x", "x", 0)])
def test_levenshtein(a, b, d):
    assert levenshtein(a, b) == d == levenshtein(b, a)


def test_suggest_prefers_closest():
    assert suggest("bcon", ["bacon", "beacon", "eggs"]) == "bacon"
    assert suggest("zzz", ["bacon"]) is None


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="ingredt{}qy 1g;procesuapkh\n#\"", max_size=80))
def test_parse_reports_or_returns(text):
    try:
        g = parse(text)
    except RecipeSyntaxError as exc:
        assert exc.diagnostics and all(d.severity == "error" or d.code.startswith("W") for d in exc.diagnostics)
    else:
        assert g is not None
