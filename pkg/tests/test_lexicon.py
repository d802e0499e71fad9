import copy
import json
from importlib import resources

import pytest

from ragraph import LexiconError, TechniqueRef, default_lexicon, default_temperature_table, load_lexicon, resolve
from ragraph.graph import OUTCOME_CATEGORIES
from ragraph.lexicon import (
    TechniqueError, TemperatureNotFound, lexicon_from_dict, load_temperature_table, normalize_temperature,
)


def shipped(name):
    return json.loads(resources.files("ragraph").joinpath("data", name).read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def lex():
    return default_lexicon()


def minimal(**entry):
    base = {"id": "stir", "version": "1.0.0", "definition": "move it", "params": [], "postconditions": ["mixed"]}
    base.update(entry)
    return {"name": "techniques", "version": "1.0.0", "entries": [base]}


def test_default_lexicon_loads(lex):
    assert len(lex) >= 12
    assert {"dry_fry", "saute", "poach", "baste", "toast", "grill", "simmer"} <= set(lex.ids())
    assert len(lex) == len(shipped("techniques.lex.json")["entries"])


def test_param_without_type_names_the_param():
    doc = minimal(params=[{"name": "speed", "required": True}])
    with pytest.raises(LexiconError) as info:
        lexicon_from_dict(doc)
    (d,) = info.value.diagnostics
    assert d.code == "L001"
    assert "'speed'" in d.message and "type" in d.message


def test_duplicate_entry_rejected():
    doc = minimal()
    doc["entries"].append(copy.deepcopy(doc["entries"][0]))
    with pytest.raises(LexiconError) as info:
        lexicon_from_dict(doc)
    assert [d.code for d in info.value.diagnostics] == ["L002"]


def test_bad_version_string():
    with pytest.raises(LexiconError) as info:
        lexicon_from_dict(minimal(version="one"))
    assert "L003" in info.value.codes


def test_unreadable_file(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    with pytest.raises(LexiconError):
        load_lexicon(bad)


def test_dry_fry_occasional(lex):
    r = resolve(TechniqueRef("dry_fry", "^1.0", {"agitation_frequency": "occasional"}), lex)
    assert "browned" in r.postconditions
    assert r.param_dict()["agitation_frequency"] == "occasional"


def test_dry_fry_defaults(lex):
    r = resolve(TechniqueRef("dry_fry"), lex)
    raw = [e for e in shipped("techniques.lex.json")["entries"] if e["id"] == "dry_fry"]
    newest_1x = max((e for e in raw if e["version"].startswith("1.")), key=lambda e: e["version"])
    defaults = {p["name"]: p["default"] for p in newest_1x["params"] if "default" in p}
    assert r.param_dict() == defaults
    assert r.entry.version == newest_1x["version"]


@pytest.mark.parametrize("ref,code", [
    (TechniqueRef("dry_fry", "^1.0", {"agitation_frequency": "violently"}), "L007"),
    (TechniqueRef("levitate"), "L004"),
    (TechniqueRef("dry_fry", "^9.0"), "L005"),
    (TechniqueRef("dry_fry", "^1.0", {"colour": "red"}), "L006"),
])
def test_resolution_errors(lex, ref, code):
    with pytest.raises(TechniqueError) as info:
        resolve(ref, lex)
    assert info.value.code == code


def test_missing_required_param():
    lex = lexicon_from_dict(minimal(params=[{"name": "speed", "type": "decimal", "required": True}]))
    with pytest.raises(TechniqueError) as info:
        resolve(TechniqueRef("stir"), lex)
    assert info.value.code == "L008"
    assert resolve(TechniqueRef("stir", "^1", {"speed": 2}), lex).param_dict() == {"speed": 2}


def test_caret_and_tilde_ranges():
    doc = minimal()
    doc["entries"] += [dict(doc["entries"][0], version=v) for v in ("1.2.0", "1.3.1", "2.0.0")]
    lex = lexicon_from_dict(doc)
    pick = lambda rng: resolve(TechniqueRef("stir", rng), lex).entry.version  # noqa: E731
    assert pick("^1.0") == "1.3.1"
    assert pick("~1.2") == "1.2.0"
    assert pick("1.0") == "1.3.1"
    assert pick(">=2.0.0") == "2.0.0"


def test_resolve_is_deterministic_and_idempotent(lex):
    first = resolve(TechniqueRef("dry_fry"), lex)
    again = resolve(TechniqueRef("dry_fry", "^1.0", first.param_dict()), lex)
    assert first == resolve(TechniqueRef("dry_fry"), lex)
    assert again.params == first.params


def test_postconditions_are_in_outcome_vocabulary(lex):
    for entry in lex.entries.values():
        for post in entry.postconditions:
            assert lex.outcomes.get(post) in OUTCOME_CATEGORIES, (entry.id, post)


def test_medium_heat_matches_shipped_table():
    table = default_temperature_table()
    expected = tuple(shipped("temps.table.json")["entries"]["medium heat"])
    assert normalize_temperature("medium heat", table) == expected
    assert normalize_temperature("MEDIUM HEAT", table) == expected
    with pytest.raises(TemperatureNotFound):
        normalize_temperature("thermonuclear", table)


def test_inverted_table_entry(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"entries": {"odd": [200, 100]}}))
    with pytest.raises(LexiconError) as info:
        load_temperature_table(p)
    assert info.value.codes == ["L001"]
