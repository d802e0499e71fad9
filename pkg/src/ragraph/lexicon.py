"""Versioned technique lexicon, unit table, and temperature-phrase table.

The shipped `techniques.lex.json` and `temps.table.json` are sample data.
Nothing here makes claims about culinary truth, only about loading and
resolving references.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

import jsonschema
import semantic_version

from .diagnostics import LexiconError, RecipeError, error
from .graph import BASE_UNITS, OUTCOME_CATEGORIES, TechniqueRef

PARAM_TYPE_SCHEMA = {
    "oneOf": [
        {"enum": ["decimal", "duration"]},
        {"type": "object", "required": ["enum"], "additionalProperties": False,
         "properties": {"enum": {"type": "array", "minItems": 1, "items": {"type": "string"}}}},
    ]
}

LEXICON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "technique lexicon",
    "type": "object",
    "required": ["name", "version", "entries"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "version": {"type": "string"},
        "description": {"type": "string"},
        "units": {"type": "array", "items": {"type": "string", "minLength": 1}},
        "outcomes": {"type": "object", "additionalProperties": {"enum": list(OUTCOME_CATEGORIES)}},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "version", "definition", "params", "postconditions"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                    "version": {"type": "string"},
                    "definition": {"type": "string"},
                    "params": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "type"],
                            "additionalProperties": False,
                            "properties": {
                                "name": {"type": "string", "minLength": 1},
                                "type": PARAM_TYPE_SCHEMA,
                                "default": {"type": ["string", "number"]},
                                "required": {"type": "boolean"},
                            },
                        },
                    },
                    "preconditions": {"type": "array", "items": {"type": "string"}},
                    "postconditions": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "expected_duration_default": {"type": "integer", "exclusiveMinimum": 0},
                },
            },
        },
    },
}

TEMPERATURE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "temperature phrase table",
    "type": "object",
    "required": ["entries"],
    "properties": {
        "name": {"type": "string"},
        "version": {"type": "string"},
        "description": {"type": "string"},
        "entries": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "number"},
                                     "minItems": 2, "maxItems": 2},
        },
    },
}


class TechniqueError(RecipeError):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


class TemperatureNotFound(KeyError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: object  # "decimal", "duration", or a tuple of enum values
    default: object = None
    required: bool = False

    @property
    def enum_values(self) -> Optional[Tuple[str, ...]]:
        return self.type if isinstance(self.type, tuple) else None


@dataclass(frozen=True)
class TechniqueEntry:
    id: str
    version: str
    definition: str
    params: Tuple[ParamSpec, ...]
    preconditions: Tuple[str, ...]
    postconditions: Tuple[str, ...]
    expected_duration_default: Optional[int] = None

    def param(self, name) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None


@dataclass
class TechniqueLexicon:
    name: str
    version: str
    entries: Dict[Tuple[str, str], TechniqueEntry] = field(default_factory=dict)
    units: Tuple[str, ...] = BASE_UNITS
    outcomes: Dict[str, str] = field(default_factory=dict)
    path: Optional[str] = None

    def versions(self, technique_id) -> List[semantic_version.Version]:
        return sorted(semantic_version.Version(v) for (i, v) in self.entries if i == technique_id)

    def ids(self) -> List[str]:
        return sorted({i for i, _ in self.entries})

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class ResolvedTechnique:
    entry: TechniqueEntry
    params: Tuple[Tuple[str, object], ...]

    @property
    def postconditions(self):
        return set(self.entry.postconditions)

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass
class TemperatureTable:
    entries: Dict[str, Tuple[float, float]]


def parse_version(text: str) -> semantic_version.Version:
    try:
        return semantic_version.Version(text)
    except ValueError as exc:
        raise TechniqueError("L003", f"bad version string {text!r}") from exc


def version_spec(range_text: str) -> semantic_version.NpmSpec:
    """Caret semantics unless the range says otherwise (`~1.2`, `>=1.0.0`, ...)."""
    text = range_text.strip()
    if text[:1].isdigit():
        text = "^" + text
    try:
        return semantic_version.NpmSpec(text)
    except ValueError as exc:
        raise TechniqueError("L003", f"bad version range {range_text!r}") from exc


def _where(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out.lstrip(".") or "<document>"


def _schema_diagnostics(doc, schema, source) -> list:
    validator = jsonschema.Draft202012Validator(schema)
    diags = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        path = list(err.absolute_path)
        message = f"{_where(path)}: {err.message}"
        # name the offending param/entry so authors can find it
        node = doc
        names = []
        for part in path:
            try:
                node = node[part]
            except (KeyError, IndexError, TypeError):
                break
            if isinstance(node, dict) and isinstance(node.get("name") or node.get("id"), str):
                names.append(node.get("name") or node.get("id"))
        if names:
            message += f" (in {' / '.join(repr(n) for n in names)})"
        diags.append(error("L001", message, hint=source))
    return diags


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise LexiconError([error("L001", f"cannot read {path}: {exc}")]) from exc


def lexicon_from_dict(doc: dict, source: str = "<dict>") -> TechniqueLexicon:
    diags = _schema_diagnostics(doc, LEXICON_SCHEMA, source)
    if diags:
        raise LexiconError(diags)
    outcomes = dict(doc.get("outcomes", {}))
    lex = TechniqueLexicon(doc["name"], doc["version"],
                           units=tuple(dict.fromkeys(BASE_UNITS + tuple(doc.get("units", ())))),
                           outcomes=outcomes, path=source)
    for text in [doc["version"]] + [e["version"] for e in doc["entries"]]:
        try:
            parse_version(text)
        except TechniqueError as exc:
            diags.append(error(exc.code, str(exc), hint=source))
    for i, raw in enumerate(doc["entries"]):
        params = []
        for p in raw["params"]:
            ptype = tuple(p["type"]["enum"]) if isinstance(p["type"], dict) else p["type"]
            spec = ParamSpec(p["name"], ptype, p.get("default"), p.get("required", False))
            if spec.default is not None and _check_value(spec, spec.default) is not None:
                diags.append(error("L001", f"entries[{i}].params: default of {spec.name!r} is outside its type",
                                   hint=source))
            params.append(spec)
        missing = [c for c in raw["postconditions"] if outcomes and c not in outcomes]
        if missing:
            diags.append(error("L001", f"entries[{i}] ({raw['id']!r}): postconditions {missing} "
                                       f"are not in the outcome vocabulary", hint=source))
        entry = TechniqueEntry(raw["id"], raw["version"], raw["definition"], tuple(params),
                               tuple(raw.get("preconditions", ())), tuple(raw["postconditions"]),
                               raw.get("expected_duration_default"))
        key = (entry.id, entry.version)
        if key in lex.entries:
            diags.append(error("L002", f"duplicate entry ({entry.id}, {entry.version})", hint=source))
            continue
        lex.entries[key] = entry
    if diags:
        raise LexiconError(diags)
    return lex


def load_lexicon(path) -> TechniqueLexicon:
    """Load a technique lexicon JSON file; raises LexiconError with every problem found."""
    return lexicon_from_dict(_load_json(path), str(path))


def load_temperature_table(path) -> TemperatureTable:
    doc = _load_json(path)
    diags = _schema_diagnostics(doc, TEMPERATURE_SCHEMA, str(path))
    entries = {}
    for phrase, (low, high) in doc.get("entries", {}).items() if not diags else ():
        if low > high:
            diags.append(error("L001", f"entries.{phrase}: low {low} above high {high}", hint=str(path)))
        entries[" ".join(phrase.lower().split())] = (low, high)
    if diags:
        raise LexiconError(diags)
    return TemperatureTable(entries)


def _data_path(name):
    return resources.files("ragraph").joinpath("data").joinpath(name)


def default_lexicon() -> TechniqueLexicon:
    with resources.as_file(_data_path("techniques.lex.json")) as p:
        return load_lexicon(p)


def default_temperature_table() -> TemperatureTable:
    with resources.as_file(_data_path("temps.table.json")) as p:
        return load_temperature_table(p)


def normalize_temperature(phrase: str, table: TemperatureTable) -> Tuple[float, float]:
    key = " ".join(phrase.lower().split())
    try:
        return table.entries[key]
    except KeyError:
        raise TemperatureNotFound(phrase) from None


def _check_value(spec: ParamSpec, value) -> Optional[str]:
    if spec.enum_values is not None:
        if value not in spec.enum_values:
            return f"{value!r} is not one of {list(spec.enum_values)}"
    elif isinstance(value, bool) or not isinstance(value, (int, float)):
        return f"{spec.type} parameter needs a number, got {value!r}"
    elif spec.type == "duration" and value < 0:
        return "durations cannot be negative"
    return None


def resolve(ref: TechniqueRef, lexicon: TechniqueLexicon) -> ResolvedTechnique:
    """Match `ref` to the newest entry in its version range and fill parameter defaults."""
    versions = lexicon.versions(ref.lexicon_id)
    if not versions:
        raise TechniqueError("L004", f"unknown technique {ref.lexicon_id!r}")
    chosen = version_spec(ref.lexicon_version).select(versions)
    if chosen is None:
        raise TechniqueError("L005", f"no version of {ref.lexicon_id!r} matches {ref.lexicon_version!r} "
                                     f"(have {', '.join(map(str, versions))})")
    entry = lexicon.entries[(ref.lexicon_id, str(chosen))]
    for name in sorted(ref.params):
        if entry.param(name) is None:
            raise TechniqueError("L006", f"{entry.id} has no parameter {name!r}")
    effective = {}
    for spec in entry.params:
        if spec.name in ref.params:
            value = ref.params[spec.name]
            problem = _check_value(spec, value)
            if problem:
                raise TechniqueError("L007", f"{entry.id}.{spec.name}: {problem}")
            effective[spec.name] = value
        elif spec.default is not None:
            effective[spec.name] = spec.default
        elif spec.required:
            raise TechniqueError("L008", f"{entry.id} requires parameter {spec.name!r}")
    return ResolvedTechnique(entry, tuple(sorted(effective.items())))


def check_requirement(requirement, lexicon: TechniqueLexicon) -> None:
    name, range_text = requirement
    if name != lexicon.name:
        raise TechniqueError("L009", f"recipe needs lexicon {name!r} but {lexicon.name!r} is loaded")
    if not version_spec(range_text).match(parse_version(lexicon.version)):
        raise TechniqueError("L009", f"lexicon {lexicon.name} {lexicon.version} does not satisfy {range_text}")
