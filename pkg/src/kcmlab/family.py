"""Update families: parsing, validation, serialization and the built-in catalog.

A family is a finite list of rules; each rule is a finite set of nonzero
lattice offsets.  A site ``x`` becomes infected when ``X + x`` is entirely
infected for some rule ``X``.

File format::

    # comment
    name: duarte
    rule: -1,0 0,1
    rule: -1,0 0,-1
    rule: 0,1 0,-1
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

MAX_RADIUS = 64

Offset = tuple[int, int]


class FamilyError(ValueError):
    """Invalid family definition or family file."""


def _check_offset(off: Offset) -> Offset:
    dx, dy = int(off[0]), int(off[1])
    if dx == 0 and dy == 0:
        raise FamilyError("offset at origin")
    if abs(dx) > MAX_RADIUS or abs(dy) > MAX_RADIUS:
        raise FamilyError(f"offset {(dx, dy)} exceeds maximum radius {MAX_RADIUS}")
    return (dx, dy)


@dataclass(frozen=True)
class UpdateFamily:
    """Immutable update family with canonically sorted rules."""

    name: str
    rules: tuple[tuple[Offset, ...], ...]

    def __post_init__(self):
        if not self.rules:
            raise FamilyError("family has no rules")
        canon = []
        for rule in self.rules:
            offs = [_check_offset(o) for o in rule]
            if not offs:
                raise FamilyError("empty rule")
            if len(set(offs)) != len(offs):
                raise FamilyError(f"duplicate offset in rule {rule}")
            canon.append(tuple(sorted(offs)))
        if len(set(canon)) != len(canon):
            raise FamilyError("duplicate rule")
        object.__setattr__(self, "rules", tuple(sorted(canon)))

    @classmethod
    def from_rules(cls, rules: Iterable[Iterable[Offset]], name: str = "family"):
        return cls(name, tuple(tuple(tuple(o) for o in r) for r in rules))

    @property
    def radius(self) -> int:
        return max(max(abs(dx), abs(dy)) for r in self.rules for dx, dy in r)

    @property
    def offsets(self) -> list[Offset]:
        return sorted({o for r in self.rules for o in r})

    def negated(self) -> "UpdateFamily":
        """The family reflected through the origin."""
        return UpdateFamily.from_rules(
            [[(-dx, -dy) for dx, dy in r] for r in self.rules], self.name + "-neg"
        )

    def __eq__(self, other):
        if not isinstance(other, UpdateFamily):
            return NotImplemented
        return self.rules == other.rules

    def __hash__(self):
        return hash(self.rules)

    def __len__(self):
        return len(self.rules)


def serialize(family: UpdateFamily) -> str:
    lines = [f"name: {family.name}"]
    for rule in family.rules:
        lines.append("rule: " + " ".join(f"{dx},{dy}" for dx, dy in rule))
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> UpdateFamily:
    """Parse family-file text; errors carry the offending line number."""
    name = "family"
    rules = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep:
            raise FamilyError(f"line {lineno}: expected 'name:' or 'rule:'")
        if key == "name":
            name = value.strip() or name
            continue
        if key != "rule":
            raise FamilyError(f"line {lineno}: unknown key {key!r}")
        tokens = value.replace(", ", ",").split()
        if not tokens:
            raise FamilyError(f"line {lineno}: empty rule")
        offs = []
        for tok in tokens:
            parts = tok.split(",")
            if len(parts) != 2:
                raise FamilyError(f"line {lineno}: malformed offset {tok!r}")
            try:
                off = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise FamilyError(f"line {lineno}: malformed offset {tok!r}") from None
            try:
                offs.append(_check_offset(off))
            except FamilyError as exc:
                raise FamilyError(f"line {lineno}: {exc}") from None
        if len(set(offs)) != len(offs):
            raise FamilyError(f"line {lineno}: duplicate offset in rule")
        key_rule = tuple(sorted(offs))
        if key_rule in seen:
            raise FamilyError(f"line {lineno}: duplicate rule")
        seen.add(key_rule)
        rules.append(key_rule)
    if not rules:
        raise FamilyError("family file defines no rules")
    return UpdateFamily(name, tuple(rules))


_NN = [(1, 0), (-1, 0), (0, 1), (0, -1)]

_BUILTINS = {
    "east1d-embedded": lambda: [[(-1, 0)]],
    "east2d": lambda: [[(-1, 0)], [(0, -1)]],
    "fa1f": lambda: [[o] for o in _NN],
    "fa2f": lambda: [list(c) for c in combinations(_NN, 2)],
    "duarte": lambda: [[(-1, 0), (0, 1)], [(-1, 0), (0, -1)], [(0, 1), (0, -1)]],
    "anisotropic": lambda: [
        list(c)
        for c in combinations([(-2, 0), (-1, 0), (1, 0), (2, 0), (0, 1), (0, -1)], 3)
    ],
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str) -> UpdateFamily:
    try:
        rules = _BUILTINS[name]()
    except KeyError:
        raise LookupError(
            f"unknown family {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        ) from None
    return UpdateFamily.from_rules(rules, name)
