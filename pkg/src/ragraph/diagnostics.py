"""Source spans, diagnostics, and the exceptions that carry them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

ERROR = "error"
WARNING = "warning"

# Stable diagnostic codes. docs/diagnostics.md mirrors this table.
CODES = {
    # lexer / parser
    "E001": "unknown character",
    "E002": "unterminated string",
    "E003": "syntax error",
    "E004": "duplicate name",
    "E005": "unresolved reference",
    "E006": "invalid literal",
    "W001": "temperature phrase not in table or range mismatch",
    # lexicon
    "L001": "lexicon schema violation",
    "L002": "duplicate lexicon entry",
    "L003": "bad version string",
    "L004": "unknown technique",
    "L005": "no technique version in range",
    "L006": "unknown technique parameter",
    "L007": "parameter value out of domain",
    "L008": "missing required parameter",
    "L009": "lexicon requirement not satisfied",
    # validator
    "V001": "cycle in action graph",
    "V002": "type error",
    "V003": "recipe must have exactly one final output",
    "V004": "only ingredients may be graph roots",
    "V005": "malformed transfer",
    "V006": "environment not computable",
    "V007": "shared environment used without ordering",
    "V008": "invalid interjection",
    "V009": "plugin does not resolve to a valid recipe",
    # compose
    "C001": "plugin failed to load",
    "C002": "import cycle",
    "C003": "namespace collision",
    "C004": "plugin already expanded",
}


@dataclass(frozen=True, order=True)
class SourceSpan:
    file: str
    line_start: int
    col_start: int
    line_end: int
    col_end: int

    def __post_init__(self):
        if (self.line_start, self.col_start) > (self.line_end, self.col_end):
            raise ValueError(f"span start after end: {self}")

    def to(self, other: "SourceSpan") -> "SourceSpan":
        return SourceSpan(self.file, self.line_start, self.col_start, other.line_end, other.col_end)

    def __str__(self):
        return f"{self.file}:{self.line_start}:{self.col_start}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Optional[SourceSpan] = None
    hint: Optional[str] = None
    nodes: tuple = ()

    def sort_key(self):
        span = self.span or SourceSpan("", 0, 0, 0, 0)
        return (self.code, span.file, span.line_start, span.col_start, self.message)

    def render(self) -> str:
        where = f"{self.span}: " if self.span else ""
        text = f"{where}{self.severity}[{self.code}]: {self.message}"
        if self.hint:
            text += f"\n  hint: {self.hint}"
        return text

    def to_dict(self) -> dict:
        out = {"severity": self.severity, "code": self.code, "message": self.message}
        if self.span:
            out["span"] = {
                "file": self.span.file,
                "line_start": self.span.line_start,
                "col_start": self.span.col_start,
                "line_end": self.span.line_end,
                "col_end": self.span.col_end,
            }
        if self.hint:
            out["hint"] = self.hint
        if self.nodes:
            out["nodes"] = list(self.nodes)
        return out


def error(code, message, span=None, hint=None, nodes=()) -> Diagnostic:
    return Diagnostic(ERROR, code, message, span, hint, tuple(nodes))


def warning(code, message, span=None, hint=None, nodes=()) -> Diagnostic:
    return Diagnostic(WARNING, code, message, span, hint, tuple(nodes))


def sort_diagnostics(diags: Iterable[Diagnostic]) -> list:
    return sorted(diags, key=Diagnostic.sort_key)


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)


def render_all(diags: Iterable[Diagnostic], fmt: str = "text") -> str:
    diags = list(diags)
    if fmt == "json":
        return json.dumps([d.to_dict() for d in diags], indent=2, sort_keys=True)
    return "\n".join(d.render() for d in diags)


class RecipeError(Exception):
    """Base class for every error raised by this package."""


@dataclass
class DiagnosticError(RecipeError):
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        super().__init__(render_all(self.diagnostics))

    @property
    def codes(self) -> list:
        return [d.code for d in self.diagnostics]

    def __str__(self):
        return render_all(self.diagnostics)


class RecipeSyntaxError(DiagnosticError):
    pass


class LexiconError(DiagnosticError):
    pass


class ValidationError(DiagnosticError):
    pass


class PluginError(DiagnosticError):
    pass
