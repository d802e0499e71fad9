"""Recursive-descent parser from `.rag` text to an unvalidated RecipeGraph.

The grammar is in docs/grammar.ebnf. Statements are keyword-led blocks;
a syntax error abandons the current statement and parsing resumes at the
next top-level keyword, so one run reports every independent error.
References between blocks may point forward; they are resolved after the
whole document has been read.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Optional

from . import lexer as L
from .diagnostics import Diagnostic, RecipeSyntaxError, SourceSpan, error, has_errors, warning
from .graph import (
    ActionNode, DuplicateIdError, Edge, Environment, Geometry, Ingredient, IngredientRoot,
    PlatePayload, PluginPayload, Portion, PPCRef, ProcessPayload, RecipeGraph, TechniqueRef,
    TemperatureSpec, TerminationCondition, TransferPayload, OUTCOME_CATEGORIES, TRANSFER_MODES,
    TRANSFER_SCOPES,
)

TOP_LEVEL = ("recipe", "lexicon", "meta", "ingredient", "env", "transfer", "process",
             "interject", "plate", "plugin", "order")
ACTION_KEYWORDS = ("transfer", "process", "plate", "plugin")
FIELD_KEYWORDS = (
    "tag", "qty", "form", "modifiers", "in", "container", "location", "geometry", "from", "to",
    "mode", "scope", "portion", "input", "technique", "tool", "temp", "until", "expect",
    "components", "notes", "uses", "at", "every", "import", "namespace",
)
RESERVED = frozenset(TOP_LEVEL + FIELD_KEYWORDS)

DURATION_UNITS = {"s": 1, "sec": 1, "min": 60, "h": 3600}


class _Abort(Exception):
    """Unwinds the current statement after a syntax error has been recorded."""


@dataclass
class _Ref:
    name: str
    span: SourceSpan


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggest(name: str, candidates) -> Optional[str]:
    scored = sorted((levenshtein(name, c), c) for c in candidates)
    if scored and scored[0][0] <= 2:
        return scored[0][1]
    return None


class Parser:
    def __init__(self, text: str, file: str = "<string>", temperatures=None):
        self.file = file
        self.tokens, self.diagnostics = L.tokenize(text, file)
        self.tokens = [t for t in self.tokens if t.kind != L.ERROR]
        end = self.tokens[-1].span if self.tokens else SourceSpan(file, 1, 1, 1, 1)
        self.tokens.append(L.Token(L.EOF, "", SourceSpan(file, end.line_end, end.col_end,
                                                        end.line_end, end.col_end)))
        self.pos = 0
        self.temperatures = temperatures
        source_path = os.path.abspath(file) if file and not file.startswith("<") else None
        self.graph = RecipeGraph(source_path=source_path)
        self.pending: List[tuple] = []  # (edge factory, refs to resolve)
        self.ordinals = {}

    # token helpers

    @property
    def tok(self) -> L.Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> L.Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, kind, text=None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_keyword(self, *words) -> bool:
        return self.tok.kind == L.IDENT and self.tok.text in words

    def next(self) -> L.Token:
        t = self.tok
        if t.kind != L.EOF:
            self.pos += 1
        return t

    def fail(self, message, token=None, hint=None):
        token = token or self.tok
        found = "end of file" if token.kind == L.EOF else repr(token.text)
        self.diagnostics.append(error("E003", f"{message}, found {found}", token.span, hint))
        raise _Abort

    def expect(self, kind, what=None) -> L.Token:
        if self.tok.kind != kind:
            self.fail(f"expected {what or kind.lower()}")
        return self.next()

    def expect_keyword(self, word) -> L.Token:
        if not self.at_keyword(word):
            self.fail(f"expected '{word}'")
        return self.next()

    def skip_semis(self):
        while self.at(L.SEMI):
            self.next()

    def name(self, what="identifier") -> L.Token:
        t = self.expect(L.IDENT, what)
        if t.text in RESERVED:
            article = "an" if what[0] in "aeiou" else "a"
            self.fail(f"'{t.text}' is a reserved word and cannot be used as {article} {what}", t)
        return t

    def ref(self) -> _Ref:
        t = self.name("reference")
        return _Ref(t.text, t.span)

    def refs(self) -> List[_Ref]:
        out = [self.ref()]
        while self.at(L.IDENT) and self.tok.text not in RESERVED:
            out.append(self.ref())
        return out

    def text_value(self, what="string") -> str:
        if self.at(L.STRING) or self.at(L.IDENT):
            return self.next().value
        self.fail(f"expected {what}")

    def strings(self) -> List[str]:
        out = [self.expect(L.STRING, "string").value]
        while self.at(L.STRING):
            out.append(self.next().value)
        return out

    def number(self, what="number"):
        return self.expect(L.NUMBER, what).value

    def duration(self) -> int:
        start = self.tok
        value = self.number("duration")
        unit = self.expect(L.IDENT, "duration unit (s, min, h)")
        if unit.text not in DURATION_UNITS:
            self.diagnostics.append(error("E006", f"unknown duration unit {unit.text!r}", unit.span,
                                          "use s, min or h"))
            raise _Abort
        seconds = value * DURATION_UNITS[unit.text]
        if seconds != int(seconds):
            self.diagnostics.append(error("E006", "durations must be whole seconds", start.span.to(unit.span)))
            raise _Abort
        return int(seconds)

    def at_duration(self) -> bool:
        return (self.at(L.NUMBER) and self.peek().kind == L.IDENT
                and self.peek().text in DURATION_UNITS)

    def span_from(self, start: L.Token) -> SourceSpan:
        last = self.tokens[max(self.pos - 1, 0)]
        return start.span.to(last.span)

    def gen_id(self, kind: str) -> str:
        while True:
            self.ordinals[kind] = self.ordinals.get(kind, 0) + 1
            candidate = f"{kind}_{self.ordinals[kind]}"
            if candidate not in self.graph.nodes:
                return candidate

    def add_node(self, node, name_token):
        try:
            self.graph.add_node(node)
        except DuplicateIdError:
            self.diagnostics.append(error("E004", f"duplicate name {node.id!r}", name_token.span))

    def later(self, factory, *refs):
        self.pending.append((factory, refs))

    # statements

    def parse(self) -> RecipeGraph:
        while not self.at(L.EOF):
            start = self.pos
            try:
                self.statement()
            except _Abort:
                self.synchronize(start)
        self.resolve()
        return self.graph

    def synchronize(self, start):
        depth = 0
        for t in self.tokens[start:self.pos]:
            depth += (t.kind == L.LBRACE) - (t.kind == L.RBRACE)
        if self.pos == start:
            self.next()
        while not self.at(L.EOF):
            if depth <= 0 and self.at_keyword(*TOP_LEVEL):
                return
            t = self.next()
            depth += (t.kind == L.LBRACE) - (t.kind == L.RBRACE)

    def statement(self):
        self.skip_semis()
        if self.at(L.EOF):
            return
        if not self.at_keyword(*TOP_LEVEL):
            self.fail("expected a statement", hint="statements start with one of: " + ", ".join(TOP_LEVEL))
        word = self.tok.text
        getattr(self, f"stmt_{word}")()

    def stmt_recipe(self):
        self.next()
        self.graph.name = self.expect(L.STRING, "recipe name").value

    def stmt_lexicon(self):
        self.next()
        name = self.name("lexicon name").text
        self.expect(L.AT, "'@'")
        if self.at(L.VERSION):
            version = self.next().value
        elif self.at(L.NUMBER):
            version = self.next().text
        else:
            self.fail("expected a version range")
        self.graph.lexicon_requirement = (name, version)

    def stmt_meta(self):
        self.next()
        key = self.expect(L.IDENT, "metadata key").text
        self.graph.metadata[key] = self.expect(L.STRING, "metadata value").value

    def stmt_ingredient(self):
        start = self.next()
        name = self.name("ingredient")
        tag = None
        if self.at_keyword("tag"):
            self.next()
            tag = self.expect(L.IDENT, "instance tag").text
        qty, unit, form, modifiers, env_ref = 0, "unspecified", None, (), None
        self.expect(L.LBRACE, "'{'")
        while not self.at(L.RBRACE):
            self.skip_semis()
            if self.at(L.RBRACE):
                break
            if self.at_keyword("qty"):
                self.next()
                qty = self.number("quantity")
                if self.at(L.IDENT) and self.tok.text not in RESERVED:
                    unit = self.next().text
            elif self.at_keyword("form"):
                self.next()
                form = self.expect(L.STRING, "form").value
            elif self.at_keyword("modifiers"):
                self.next()
                modifiers = tuple(self.strings())
            elif self.at_keyword("in"):
                self.next()
                env_ref = self.ref()
            else:
                self.fail("expected ingredient field (qty, form, modifiers, in)")
        self.next()
        ingredient = Ingredient(name.text, qty, unit, form, modifiers, tag)
        root = IngredientRoot(name.text, ingredient, env_ref.name if env_ref else None,
                              self.span_from(start))
        self.add_node(root, name)
        if env_ref:
            self.later(None, ("env", env_ref))

    def stmt_env(self):
        start = self.next()
        name = self.name("environment")
        container = location = None
        geometry = None
        namespace = ""
        self.expect(L.LBRACE, "'{'")
        while not self.at(L.RBRACE):
            self.skip_semis()
            if self.at(L.RBRACE):
                break
            if self.at_keyword("container"):
                self.next()
                container = self.text_value("container")
            elif self.at_keyword("location"):
                self.next()
                location = self.text_value("location")
            elif self.at_keyword("geometry"):
                self.next()
                self.expect_keyword("pose")
                pose = self.text_value("pose")
                tilt = None
                if self.at_keyword("tilt"):
                    self.next()
                    tilt = self.number("tilt degrees")
                geometry = Geometry(pose, tilt)
            elif self.at_keyword("namespace"):
                self.next()
                namespace = self.text_value("namespace")
            else:
                self.fail("expected environment field (container, location, geometry, namespace)")
        close = self.next()
        if container is None or location is None:
            self.diagnostics.append(error("E003", f"environment {name.text!r} needs container and location",
                                          start.span.to(close.span)))
            return
        try:
            self.graph.add_environment(name.text, Environment(container, location, geometry, namespace),
                                       self.span_from(start))
        except DuplicateIdError:
            self.diagnostics.append(error("E004", f"duplicate name {name.text!r}", name.span))

    def action_header(self, kind):
        start = self.next()
        if self.at(L.IDENT) and self.tok.text not in RESERVED:
            name_tok = self.next()
            return start, name_tok.text, name_tok
        return start, self.gen_id(kind), start

    def stmt_transfer(self):
        start, node_id, name_tok = self.action_header("transfer")
        srcs: List[_Ref] = []
        dest_env = dest_ppc = None
        mode, scope, portion = "place", "whole", None
        self.expect(L.LBRACE, "'{'")
        while not self.at(L.RBRACE):
            self.skip_semis()
            if self.at(L.RBRACE):
                break
            if self.at_keyword("from"):
                self.next()
                srcs.append(self.ref())
            elif self.at_keyword("to"):
                self.next()
                if self.at_keyword("env"):
                    self.next()
                    dest_env = self.ref()
                else:
                    dest_ppc = self.ref()
            elif self.at_keyword("mode"):
                self.next()
                mode = self.choice(TRANSFER_MODES, "transfer mode")
            elif self.at_keyword("scope"):
                self.next()
                scope = self.choice(TRANSFER_SCOPES, "transfer scope")
            elif self.at_keyword("portion"):
                self.next()
                value = self.number("portion")
                if self.at(L.PERCENT):
                    self.next()
                    portion = Portion(fraction=value / 100)
                elif self.at(L.IDENT) and self.tok.text not in RESERVED:
                    portion = Portion(quantity=value, unit=self.next().text)
                else:
                    portion = Portion(fraction=value)
            else:
                self.fail("expected transfer field (from, to, mode, scope, portion)")
        self.next()
        span = self.span_from(start)
        if not srcs or (dest_env is None and dest_ppc is None):
            self.diagnostics.append(error("E003", f"transfer {node_id!r} needs 'from' and 'to'", span))
            return None
        destination = dest_env.name if dest_env else PPCRef(dest_ppc.name)
        self.add_node(ActionNode(node_id, TransferPayload(destination, mode, scope, portion), span), name_tok)
        for src in srcs:
            self.later(lambda s, _id=node_id: Edge.material(s.name, _id, "from", s.span), ("node", src))
        dest = dest_env or dest_ppc
        self.later(lambda d, _id=node_id: Edge.material(d.name, _id, "to", d.span),
                   ("env" if dest_env else "node", dest))
        return node_id

    def choice(self, options, what):
        t = self.expect(L.IDENT, what)
        if t.text not in options:
            self.diagnostics.append(error("E006", f"unknown {what} {t.text!r}", t.span,
                                          "expected one of: " + ", ".join(options)))
            raise _Abort
        return t.text

    def stmt_process(self):
        start, node_id, name_tok = self.action_header("process")
        inputs: List[_Ref] = []
        technique = tool = temperature = termination = expected = None
        modifiers = ()
        self.expect(L.LBRACE, "'{'")
        while not self.at(L.RBRACE):
            self.skip_semis()
            if self.at(L.RBRACE):
                break
            if self.at_keyword("input"):
                self.next()
                inputs.extend(self.refs())
            elif self.at_keyword("technique"):
                self.next()
                technique = self.technique()
            elif self.at_keyword("tool"):
                self.next()
                tool = self.text_value("tool")
            elif self.at_keyword("temp"):
                self.next()
                temperature = self.temperature()
            elif self.at_keyword("until"):
                self.next()
                termination = self.termination()
            elif self.at_keyword("expect"):
                self.next()
                expected = self.duration()
            elif self.at_keyword("modifiers"):
                self.next()
                modifiers = tuple(self.strings())
            else:
                self.fail("expected process field (input, technique, tool, temp, until, expect, modifiers)")
        self.next()
        span = self.span_from(start)
        if technique is None:
            self.diagnostics.append(error("E003", f"process {node_id!r} needs a technique", span))
            return None
        payload = ProcessPayload(technique, tool, temperature, termination, modifiers, expected)
        self.add_node(ActionNode(node_id, payload, span), name_tok)
        for r in inputs:
            self.later(lambda s, _id=node_id: Edge.material(s.name, _id, "input", s.span), ("node", r))
        return node_id

    def technique(self) -> TechniqueRef:
        tid = self.expect(L.IDENT, "technique name").text
        version = self.graph.lexicon_requirement[1]
        if self.at(L.AT):
            self.next()
            if self.at(L.VERSION):
                version = self.next().value
            else:
                version = self.expect(L.NUMBER, "version range").text
        params = {}
        if self.at(L.LBRACE):
            self.next()
            while not self.at(L.RBRACE):
                self.skip_semis()
                if self.at(L.RBRACE):
                    break
                key = self.expect(L.IDENT, "parameter name")
                self.expect(L.EQ, "'='")
                if self.at_duration():
                    params[key.text] = self.duration()
                elif self.at(L.NUMBER) or self.at(L.STRING) or self.at(L.IDENT):
                    params[key.text] = self.next().value
                else:
                    self.fail("expected parameter value")
            self.next()
        return TechniqueRef(tid, version, params)

    def celsius(self):
        unit = self.expect(L.IDENT, "temperature unit")
        if unit.text != "C":
            self.diagnostics.append(error("E006", f"unsupported temperature unit {unit.text!r}", unit.span,
                                          "temperatures are written in degrees Celsius: C"))
            raise _Abort

    def temperature(self) -> TemperatureSpec:
        first = self.tok
        if self.at_keyword("range"):
            self.next()
            low = self.number("low temperature")
            self.expect(L.DOTDOT, "'..'")
            high = self.number("high temperature")
            self.celsius()
            kind, points = "range", ()
        elif self.at_keyword("ramp"):
            self.next()
            points = []
            while self.at(L.LPAREN):
                self.next()
                offset = self.duration()
                temp = self.number("temperature")
                self.celsius()
                self.expect(L.RPAREN, "')'")
                points.append((offset, temp))
            if not points:
                self.fail("expected ramp points like (0 s 20 C)")
            low, high = min(p[1] for p in points), max(p[1] for p in points)
            kind, points = "ramp", tuple(points)
        else:
            low = high = self.number("temperature")
            self.celsius()
            kind, points = "constant", ()
        phrase = None
        if self.at_keyword("from"):
            self.next()
            phrase_tok = self.expect(L.STRING, "qualitative phrase")
            phrase = phrase_tok.value
            self.check_phrase(phrase, low, high, first.span.to(phrase_tok.span))
        return TemperatureSpec(kind, low, high, points, phrase)

    def check_phrase(self, phrase, low, high, span):
        if self.temperatures is None:
            return
        from .lexicon import TemperatureNotFound, normalize_temperature
        try:
            expected = normalize_temperature(phrase, self.temperatures)
        except TemperatureNotFound:
            self.diagnostics.append(warning("W001", f"temperature phrase {phrase!r} is not in the table", span))
            return
        if not expected[0] <= low <= high <= expected[1]:
            self.diagnostics.append(warning(
                "W001", f"{low}..{high} C falls outside the table entry for {phrase!r}", span,
                hint=f"table says {expected[0]}..{expected[1]} C"))

    def termination(self) -> TerminationCondition:
        if self.at_keyword("outcome"):
            self.next()
            category = "custom"
            if self.at(L.IDENT):
                category = self.choice(OUTCOME_CATEGORIES, "outcome category")
            return TerminationCondition.outcome(self.expect(L.STRING, "outcome predicate").value, category)
        if self.at_keyword("all", "any"):
            combine = "all_of" if self.next().text == "all" else "any_of"
            self.expect(L.LPAREN, "'('")
            conditions = []
            while not self.at(L.RPAREN):
                conditions.append(self.termination())
            self.next()
            return TerminationCondition.compound(combine, *conditions)
        if self.at(L.NUMBER):
            return TerminationCondition.after(self.duration())
        self.fail("expected a termination condition (outcome, duration, all(...), any(...))")

    def stmt_plate(self):
        start, node_id, name_tok = self.action_header("plate")
        components: List[_Ref] = []
        notes = ()
        self.expect(L.LBRACE, "'{'")
        while not self.at(L.RBRACE):
            self.skip_semis()
            if self.at(L.RBRACE):
                break
            if self.at_keyword("components"):
                self.next()
                components.extend(self.refs())
            elif self.at_keyword("notes"):
                self.next()
                notes = tuple(self.strings())
            else:
                self.fail("expected plate field (components, notes)")
        self.next()
        self.add_node(ActionNode(node_id, PlatePayload(notes), self.span_from(start)), name_tok)
        for r in components:
            self.later(lambda s, _id=node_id: Edge.material(s.name, _id, "input", s.span), ("node", r))
        return node_id

    def stmt_plugin(self):
        start = self.next()
        name_tok = self.name("plugin")
        self.expect(L.EQ, "'='")
        self.expect_keyword("import")
        path = self.expect(L.STRING, "recipe path").value
        env_map = []
        while self.at_keyword("uses"):
            self.next()
            self.expect_keyword("env")
            host = self.ref()
            self.expect_keyword("as")
            inner = self.expect(L.IDENT, "plugin environment name").text
            env_map.append((host.name, inner))
            self.later(None, ("env", host))
        payload = PluginPayload(path, False, tuple(env_map))
        self.add_node(ActionNode(name_tok.text, payload, self.span_from(start)), name_tok)
        return name_tok.text

    def stmt_interject(self):
        self.next()
        parent = self.ref()
        self.expect_keyword("at")
        fraction = seconds = None
        if self.at(L.NUMBER) and self.peek().kind == L.PERCENT:
            fraction = self.next().value / 100
            self.next()
        else:
            seconds = self.duration()
        behavior = self.choice(("breaking", "repeating", "overlay"), "interjection behavior")
        every = None
        if behavior == "repeating":
            self.expect_keyword("every")
            every = self.duration()
        self.expect(L.LBRACE, "'{'")
        self.skip_semis()
        if not self.at_keyword(*ACTION_KEYWORDS):
            self.fail("expected an interjected action (transfer, process, plate, plugin)")
        child = getattr(self, f"stmt_{self.tok.text}")()
        self.skip_semis()
        self.expect(L.RBRACE, "'}'")
        if child is None:
            return
        self.later(lambda p, _c=child: Edge.interjection(_c, p.name, fraction=fraction, seconds=seconds,
                                                         behavior=behavior, every=every, span=p.span),
                   ("node", parent))

    def stmt_order(self):
        self.next()
        chain = [self.ref()]
        while self.at(L.ARROW):
            self.next()
            chain.append(self.ref())
        if len(chain) < 2:
            self.fail("expected '->' in order statement")
        for a, b in zip(chain, chain[1:]):
            self.later(lambda x, y: Edge.precedence(x.name, y.name, x.span.to(y.span)),
                       ("node", a), ("node", b))

    # reference resolution

    def resolve(self):
        g = self.graph
        for factory, refs in self.pending:
            ok = True
            for space, r in refs:
                names = g.environments if space == "env" else g.nodes
                if r.name not in names:
                    ok = False
                    close = suggest(r.name, names)
                    what = "environment" if space == "env" else "item or action"
                    self.diagnostics.append(error(
                        "E005", f"unresolved reference to {what} {r.name!r}", r.span,
                        hint=f"did you mean {close!r}?" if close else None))
            if ok and factory is not None:
                edge = factory(*(r for _, r in refs))
                try:
                    g.add_edge(edge)
                except Exception as exc:
                    self.diagnostics.append(error("E003", str(exc), edge.span))


def parse(text: str, file: str = "<string>", temperatures=None) -> RecipeGraph:
    """Parse `.rag` source into an unvalidated graph.

    Raises RecipeSyntaxError carrying every error diagnostic. Warnings are kept
    on `graph.warnings`.
    """
    parser = Parser(text, file, temperatures)
    graph = parser.parse()
    if has_errors(parser.diagnostics):
        raise RecipeSyntaxError(sorted(parser.diagnostics, key=Diagnostic.sort_key))
    graph.warnings = [d for d in parser.diagnostics]
    return graph


def parse_file(path, temperatures=None) -> RecipeGraph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse(text, str(path), temperatures)
