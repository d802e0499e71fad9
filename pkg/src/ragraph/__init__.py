"""Recipe action-graph compiler.

    graph = parse_file("breakfast.rag")
    checked = validate(graph)
    plan = schedule(checked, workers=2)
"""

from .compose import expand, expand_all, import_plugin
from .diagnostics import (
    Diagnostic, LexiconError, PluginError, RecipeError, RecipeSyntaxError, SourceSpan, ValidationError,
)
from .export import export_dot, export_json, import_json
from .formatter import format_graph
from .graph import (
    PHI, ActionNode, Edge, Environment, EnvironmentResolver, Geometry, Ingredient, IngredientRoot,
    PlatePayload, PluginPayload, Portion, PPCRef, ProcessPayload, RecipeGraph, TechniqueRef,
    TemperatureSpec, TerminationCondition, TransferPayload, ValidatedGraph, environment_of,
)
from .lexer import tokenize
from .lexicon import (
    TechniqueLexicon, default_lexicon, default_temperature_table, load_lexicon, load_temperature_table,
    normalize_temperature, resolve,
)
from .parser import parse, parse_file
from .planner import (
    DurationPolicy, Schedule, brute_force_plans, contention_report, linearizations, schedule,
    verify_schedule,
)
from .provenance import backward, environment_history, forward
from .validator import explain, validate

__all__ = [name for name in dir() if not name.startswith("_")]
