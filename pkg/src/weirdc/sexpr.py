"""Position-tracking S-expression reader shared by the language front ends."""

from __future__ import annotations

from dataclasses import dataclass


class ParseError(Exception):
    """Syntax error carrying a 1-based line/column."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int

    def __str__(self):
        return self.text


class SList(list):
    """A parenthesised list that remembers where it opened."""

    def __init__(self, items=(), line: int = 0, col: int = 0):
        super().__init__(items)
        self.line = line
        self.col = col


def read_all(text: str) -> list:
    """Read every top-level datum in ``text``. ``;`` starts a line comment."""
    stack: list[SList] = [SList()]
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch in "([":
            stack.append(SList(line=line, col=col))
            i, col = i + 1, col + 1
            continue
        if ch in ")]":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].append(done)
            i, col = i + 1, col + 1
            continue
        start, scol = i, col
        while i < n and not text[i].isspace() and text[i] not in "()[];":
            i += 1
            col += 1
        stack[-1].append(Atom(text[start:i], line, scol))
    if len(stack) != 1:
        opened = stack[-1]
        raise ParseError("unclosed '('", opened.line, opened.col)
    return list(stack[0])


def read_one(text: str):
    data = read_all(text)
    if len(data) != 1:
        raise ParseError(f"expected exactly one form, found {len(data)}", 1, 1)
    return data[0]


def where(node) -> tuple[int, int]:
    return (getattr(node, "line", 0), getattr(node, "col", 0))


def fail(node, message: str):
    line, col = where(node)
    raise ParseError(message, line, col)


def head(node) -> str | None:
    if isinstance(node, SList) and node and isinstance(node[0], Atom):
        return node[0].text
    return None


def as_int(node) -> int | None:
    if isinstance(node, Atom):
        try:
            return int(node.text)
        except ValueError:
            return None
    return None


def symbol(node, what: str = "symbol") -> str:
    if not isinstance(node, Atom) or as_int(node) is not None:
        fail(node, f"expected {what}")
    return node.text


def expect_len(node, n: int, form: str):
    if len(node) != n:
        fail(node, f"'{form}' takes {n - 1} argument(s), got {len(node) - 1}")
