import json
import os
import re

import jsonschema
import pytest

from conftest import GOLDEN, clean_fixtures, fixture_path
from generators import random_graph
from ragraph import export_dot, export_json, import_json, parse_file, validate
from ragraph.export import IR_SCHEMA, THEME, DotOptions, IRError, to_document
from ragraph.graph import UnvalidatedGraphError


def golden(name):
    with open(os.path.join(GOLDEN, name), encoding="utf-8") as fh:
        return fh.read()


def test_json_matches_golden(breakfast):
    assert export_json(breakfast) == golden("english_breakfast.json")


def test_dot_matches_golden(breakfast, sausage):
    assert export_dot(breakfast) == golden("english_breakfast.dot")
    assert export_dot(sausage) == golden("sausage.dot")


def test_json_is_deterministic(breakfast):
    fresh = validate(parse_file(fixture_path("english_breakfast.rag")))
    assert export_json(breakfast) == export_json(fresh)


def test_json_schema_and_shape(breakfast):
    doc = json.loads(export_json(breakfast))
    jsonschema.validate(doc, IR_SCHEMA)
    assert doc["schema_version"] == "1"
    assert [n["id"] for n in doc["nodes"]] == sorted(n["id"] for n in doc["nodes"])
    assert sorted(doc["validation"]["proof"]) == [f"V00{i}" for i in range(1, 10)]
    assert "source_path" not in json.dumps(doc)


@pytest.mark.parametrize("name", clean_fixtures())
def test_json_fixed_point(name):
    v = validate(parse_file(fixture_path(name)))
    text = export_json(v)
    back = import_json(text, source_path=v.graph.source_path)
    assert back.isomorphic(v.graph)
    assert export_json(validate(back)) == text


@pytest.mark.parametrize("seed", range(25))
def test_json_round_trip_random(seed):
    v = validate(random_graph(seed))
    back = import_json(export_json(v))
    assert back.isomorphic(v.graph)


def test_export_requires_validation(breakfast):
    with pytest.raises(UnvalidatedGraphError):
        export_json(breakfast.graph)
    with pytest.raises(UnvalidatedGraphError):
        export_dot(breakfast.graph)
    assert to_document(breakfast.graph)["nodes"]


def test_import_rejects_bad_documents(breakfast):
    with pytest.raises(IRError):
        import_json("{not json")
    doc = json.loads(export_json(breakfast))
    doc["schema_version"] = "99"
    with pytest.raises(IRError):
        import_json(doc)
    doc = json.loads(export_json(breakfast))
    doc["edges"][0]["kind"] = "teleport"
    with pytest.raises(IRError):
        import_json(doc)


def test_dot_from_to_labels(sausage):
    dot = export_dot(sausage)
    assert re.search(r'"sausages" -> "t1" \[label="from"\]', dot)
    assert re.search(r'"env:pan_stove" -> "t1" \[[^\]]*label="to"', dot)


def test_dot_plugin_is_a_circle(breakfast):
    line = next(l for l in export_dot(breakfast).splitlines() if l.strip().startswith('"pesto" ['))
    assert 'shape="circle"' in line
    assert THEME["plugin"]["shape"] == "circle"


def test_dot_interjection_and_order_edges(breakfast):
    dot = export_dot(breakfast)
    inter = next(l for l in dot.splitlines() if '"pesto_in" -> "saute_veg"' in l)
    assert "dashed" in inter and "50%" in inter
    assert re.search(r'"sausages_out" -> "bacon_in" \[[^\]]*label="then"', dot)


def test_dot_without_params(sausage):
    full = export_dot(sausage)
    bare = export_dot(sausage, DotOptions(show_params=False))
    assert "agitation_frequency" in full and "agitation_frequency" not in bare
    assert "env:pan_stove" not in export_dot(sausage, DotOptions(show_environments=False))


def test_dot_escapes_quotes(sausage):
    dot = export_dot(sausage)
    assert '\\"browned\\"' in dot
    for line in dot.splitlines():
        assert line.count('"') % 2 == 0 or '\\"' in line
