"""Categorized regular-expression library applied by sequential voting.

Categories are tried in a fixed order; the first category with any matching
rule decides the label. A snippet that no category matches is left for the
machine-learned stage.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

ABSOLUTE_POSITIVE = "AbsolutePositive"
CANCELING = "Canceling"
GENERAL_POSITIVE = "GeneralPositive"
NEUTRAL = "Neutral"
CATEGORY_ORDER = (ABSOLUTE_POSITIVE, CANCELING, GENERAL_POSITIVE, NEUTRAL)
POSITIVE_CATEGORIES = frozenset({ABSOLUTE_POSITIVE, GENERAL_POSITIVE})

POSITIVE = "Positive"
NEGATIVE = "Negative"

# constructs outside the portable subset shared by mainstream engines
_UNPORTABLE = re.compile(r"\\[1-9]|\(\?[=!<P]|\(\?<[=!]")

try:
    import re2 as _engine  # linear-time automaton, roughly 20x faster here
except ImportError:  # pragma: no cover
    _engine = None


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class PatternRule:
    rule_id: str
    category: str
    pattern: str


@dataclass(frozen=True)
class RuleVerdict:
    label: str
    matched_rule: str
    matched_category: str


def _compile_source(pattern: str):
    if _engine is not None:
        return _engine.compile("(?i)" + pattern)
    return re.compile(pattern, re.IGNORECASE)


def _build_set(rules):
    if _engine is None or not rules:
        return None
    options = _engine.Options()
    options.case_sensitive = False
    rule_set = _engine.Set.SearchSet(options)
    for rule in rules:
        rule_set.Add(rule.pattern)
    rule_set.Compile()
    return rule_set


def _compile(rule: PatternRule):
    bad = _UNPORTABLE.search(rule.pattern)
    if bad:
        raise RuleError(
            f"rule {rule.rule_id}: unsupported construct {bad.group(0)!r} at position {bad.start()}"
        )
    try:
        re.compile(rule.pattern, re.IGNORECASE)
    except re.error as exc:
        raise RuleError(f"rule {rule.rule_id}: invalid pattern at position {exc.pos}: {exc.msg}") from exc
    try:
        return _compile_source(rule.pattern)
    except Exception as exc:
        raise RuleError(f"rule {rule.rule_id}: pattern outside the portable regex subset: {exc}") from exc


class RuleLibrary:
    """Compiled rules grouped by category, file order kept within a category."""

    def __init__(self, rules):
        self._build(list(rules))

    def __getstate__(self):
        return {"rules": self.rules}

    def __setstate__(self, state):
        self._build(list(state["rules"]))

    def _build(self, rules):
        ids = set()
        for rule in rules:
            if rule.category not in CATEGORY_ORDER:
                raise RuleError(f"rule {rule.rule_id}: unknown category {rule.category!r}")
            if rule.rule_id in ids:
                raise RuleError(f"duplicate rule id {rule.rule_id!r}")
            ids.add(rule.rule_id)
        self.rules = tuple(rules)
        self._compiled = {c: [] for c in CATEGORY_ORDER}
        for rule in rules:
            self._compiled[rule.category].append((rule, _compile(rule)))
        self._ordered = [r for c in CATEGORY_ORDER for r, _ in self._compiled[c]]
        # re2 can report every matching rule in one scan; index order is evaluation order
        self._set = _build_set(self._ordered)
        # stdlib path: one alternation per category gives a fast category-level test
        self._combined = {}
        for category, items in self._compiled.items():
            if items:
                self._combined[category] = _compile_source("|".join(f"(?:{r.pattern})" for r, _ in items))

    def __len__(self):
        return len(self.rules)

    def __repr__(self):
        sizes = ", ".join(f"{c}={len(self._compiled[c])}" for c in CATEGORY_ORDER)
        return f"RuleLibrary({sizes})"

    def category(self, name: str) -> tuple[PatternRule, ...]:
        return tuple(r for r, _ in self._compiled[name])

    def first_match(self, text: str):
        if self._set is not None:
            hits = self._set.Match(text)
            return self._ordered[min(hits)] if hits else None
        for category in CATEGORY_ORDER:
            combined = self._combined.get(category)
            if combined is None or combined.search(text) is None:
                continue
            for rule, rx in self._compiled[category]:
                if rx.search(text):
                    return rule
        return None

    def all_matches(self, text: str) -> list[PatternRule]:
        if self._set is not None:
            return [self._ordered[i] for i in sorted(self._set.Match(text) or ())]
        return [
            rule
            for category in CATEGORY_ORDER
            for rule, rx in self._compiled[category]
            if rx.search(text)
        ]


def parse_rules(text: str, source: str = "<rules>") -> list[PatternRule]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise RuleError(f"{source}:{lineno}: expected 'rule_id<TAB>category<TAB>pattern'")
        rules.append(PatternRule(parts[0].strip(), parts[1].strip(), parts[2]))
    return rules


def load_rule_library(path=None) -> RuleLibrary:
    """Load a ``rules.tsv`` file; defaults to the bundled starter library."""
    if path is None:
        text = resources.files("opioid_nlp").joinpath("data/rules.tsv").read_text(encoding="utf-8")
        source = "<bundled rules.tsv>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    return RuleLibrary(parse_rules(text, source))


def classify_by_rules(text: str, library: RuleLibrary) -> RuleVerdict | None:
    """Sequential vote; ``None`` means no category matched."""
    rule = library.first_match(text)
    if rule is None:
        return None
    label = POSITIVE if rule.category in POSITIVE_CATEGORIES else NEGATIVE
    return RuleVerdict(label, rule.rule_id, rule.category)


def explain_rules(text: str, library: RuleLibrary) -> list[PatternRule]:
    """Every matching rule, in evaluation order."""
    return library.all_matches(text)
