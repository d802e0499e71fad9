"""Tokenizer for `.rag` recipe documents.

Commas are treated as whitespace, so `input a, b` and `input a b` lex the
same. `#` starts a comment that runs to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Tuple

from .diagnostics import Diagnostic, SourceSpan, error

IDENT = "IDENT"
STRING = "STRING"
NUMBER = "NUMBER"
VERSION = "VERSION"
ARROW = "ARROW"
DOTDOT = "DOTDOT"
LBRACE = "LBRACE"
RBRACE = "RBRACE"
LPAREN = "LPAREN"
RPAREN = "RPAREN"
SEMI = "SEMI"
EQ = "EQ"
AT = "AT"
PERCENT = "PERCENT"
ERROR = "ERROR"
EOF = "EOF"

_PUNCT = {
    "->": ARROW, "..": DOTDOT, "{": LBRACE, "}": RBRACE, "(": LPAREN, ")": RPAREN,
    ";": SEMI, "=": EQ, "@": AT, "%": PERCENT,
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n,]+)
  | (?P<comment>\#[^\n]*)
  | (?P<version>[\^~]\d+(?:\.\d+){0,2}|\d+\.\d+\.\d+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"(?:[^"\\\n]|\\.)*)
  | (?P<punct>->|\.\.|[{}();=@%])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan
    value: object = None

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


def tokenize(text: str, file: str = "<string>") -> Tuple[List[Token], List[Diagnostic]]:
    """Split `text` into tokens. Never raises; bad input yields ERROR tokens plus diagnostics."""
    tokens: List[Token] = []
    diags: List[Diagnostic] = []
    line, col = 1, 1
    pos = 0
    n = len(text)

    def advance(chunk):
        nonlocal line, col
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)

    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        start_line, start_col = line, col
        if m is None:
            ch = text[pos]
            span = SourceSpan(file, line, col, line, col + 1)
            tokens.append(Token(ERROR, ch, span))
            diags.append(error("E001", f"unknown character {ch!r}", span))
            advance(ch)
            pos += 1
            continue
        chunk = m.group(0)
        group = m.lastgroup
        advance(chunk)
        pos = m.end()
        if group in ("ws", "comment"):
            continue
        span = SourceSpan(file, start_line, start_col, line, col)
        if group == "version":
            tokens.append(Token(VERSION, chunk, span, chunk))
        elif group == "number":
            value = float(chunk) if "." in chunk else int(chunk)
            tokens.append(Token(NUMBER, chunk, span, value))
        elif group == "ident":
            tokens.append(Token(IDENT, chunk, span, chunk))
        elif group == "string":
            tokens.append(Token(STRING, chunk, span, _unescape(chunk[1:-1])))
        elif group == "badstring":
            tokens.append(Token(ERROR, chunk, span))
            diags.append(error("E002", "unterminated string", span, hint='close the string with "'))
        else:
            tokens.append(Token(_PUNCT[chunk], chunk, span))
    return tokens, diags
