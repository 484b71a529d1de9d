"""Closed guard and postcondition grammars shared by rules and templates."""

from __future__ import annotations

import re
from dataclasses import dataclass

_GUARD_RE = re.compile(
    r"""^\s*(?:
        has_prop\(\s*(?P<hp>[^\s(),]+)\s*\)
      | prop_eq\(\s*(?P<pe>[^\s(),]+)\s*,\s*(?:"(?P<peq>[^"]*)"|(?P<pev>[^\s()"]*))\s*\)
      | confidence_at_least\(\s*(?P<cl>high|low)\s*\)
      | child_count_le\(\s*(?P<cc>\d+)\s*\)
    )\s*$""",
    re.VERBOSE,
)
_POST_RE = re.compile(
    r"""^\s*(?:(?P<ne>nonempty)|(?P<bd>balanced_delims)|contains\((?P<ct>.*)\))\s*$""", re.DOTALL)


@dataclass(frozen=True)
class Guard:
    op: str
    name: str = ""
    value: str = ""
    number: int = 0

    def __str__(self) -> str:
        if self.op == "has_prop":
            return f"has_prop({self.name})"
        if self.op == "prop_eq":
            value = self.value if re.fullmatch(r'[^\s()",]+', self.value) else f'"{self.value}"'
            return f"prop_eq({self.name}, {value})"
        if self.op == "confidence_at_least":
            return f"confidence_at_least({self.value})"
        return f"child_count_le({self.number})"

    def evaluate(self, props: dict, confidence: str = "high", child_count: int = 0) -> bool:
        if self.op == "has_prop":
            return self.name in props
        if self.op == "prop_eq":
            return props.get(self.name) == self.value
        if self.op == "confidence_at_least":
            return _CONF_RANK.get(confidence, 0) >= _CONF_RANK[self.value]
        return child_count <= self.number

    @property
    def prop_names(self) -> tuple[str, ...]:
        return (self.name,) if self.op in ("has_prop", "prop_eq") else ()


_CONF_RANK = {"low": 0, "high": 1}


def parse_guard(text: str) -> Guard:
    m = _GUARD_RE.match(text)
    if not m:
        raise ValueError(f"unknown guard {text!r}")
    if m.group("hp"):
        return Guard("has_prop", name=m.group("hp"))
    if m.group("pe"):
        value = m.group("peq") if m.group("peq") is not None else m.group("pev")
        return Guard("prop_eq", name=m.group("pe"), value=value)
    if m.group("cl"):
        return Guard("confidence_at_least", value=m.group("cl"))
    return Guard("child_count_le", number=int(m.group("cc")))


@dataclass(frozen=True)
class PostCheck:
    op: str
    text: str = ""

    def __str__(self) -> str:
        return f"contains({self.text})" if self.op == "contains" else self.op

    def check(self, output: str) -> bool:
        if self.op == "nonempty":
            return bool(output.strip())
        if self.op == "contains":
            return self.text in output
        return delimiters_balanced(output)


def parse_post(text: str) -> PostCheck:
    m = _POST_RE.match(text)
    if not m:
        raise ValueError(f"unknown postcondition {text!r}")
    if m.group("ne"):
        return PostCheck("nonempty")
    if m.group("bd"):
        return PostCheck("balanced_delims")
    return PostCheck("contains", m.group("ct"))


_PAIRS = {")": "(", "]": "[", "}": "{"}


def delimiters_balanced(text: str) -> bool:
    """Check (), [] and {} nesting, skipping string literals and comments."""
    stack = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in "\"'`":
            i += 1
            while i < n and text[i] != c:
                if text[i] == "\\":
                    i += 1
                elif text[i] == "\n" and c != "`":
                    return False
                i += 1
            if i >= n:
                return False
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                return False
            i = end + 1
        elif text.startswith("//", i):
            end = text.find("\n", i)
            i = n if end == -1 else end
            continue
        elif c in "([{":
            stack.append(c)
        elif c in ")]}":
            if not stack or stack.pop() != _PAIRS[c]:
                return False
        i += 1
    return not stack
