"""Parser for the .dgdl game-description format and .lvl level maps.

A game document is line oriented.  It starts with two header directives,

    game <Name>
    time_limit <ticks>

followed by the four sections ``Sprites``, ``Interactions``, ``Termination``
and ``LevelMapping``, each introduced by its bare name on a line of its own.
``#`` starts a comment; blank lines are ignored.  The full grammar lives in
``docs/dgdl.md`` together with a golden corpus under ``corpus/``.

Parsing is pure and deterministic: the same bytes always produce the same
`GameSpec`, and every malformed document raises `ParseError` (never anything
else).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional


class Role(enum.Enum):
    AVATAR = "Avatar"
    WALL = "Wall"
    IMMOVABLE = "Immovable"
    RESOURCE = "Resource"
    GROWABLE = "Growable"
    SPAWNER = "Spawner"
    TIMED_TRADER = "TimedTrader"
    EXIT = "Exit"


# Keys each role must carry, exactly.  Validated at parse time.
ROLE_PARAMS: dict[Role, tuple[str, ...]] = {
    Role.AVATAR: (),
    Role.WALL: (),
    Role.IMMOVABLE: (),
    Role.RESOURCE: ("value", "limit"),
    Role.GROWABLE: ("grow_period", "max_value"),
    Role.SPAWNER: ("drop_period",),
    Role.TIMED_TRADER: ("cost", "payout", "delay_ticks"),
    Role.EXIT: (),
}

# Params that must be strictly positive (delays, periods, limits).
_POSITIVE_PARAMS = frozenset(
    {"limit", "grow_period", "max_value", "drop_period", "delay_ticks"}
)


class Effect(enum.Enum):
    COLLECT_SCORE = "CollectScore"
    KILL_ACTOR = "KillActor"
    KILL_REACTOR = "KillReactor"
    BLOCK_MOVE = "BlockMove"
    FILL_RESOURCE = "FillResource"
    LOSE_GAME = "LoseGame"
    INVEST_TRIGGER = "InvestTrigger"
    FORCED_CONSUME = "ForcedConsume"


class ParseError(Exception):
    """Raised for any malformed game or level document.

    `kind` is a stable machine-readable tag: one of ``syntax``,
    ``unknown_role``, ``unknown_effect``, ``missing_param``,
    ``unexpected_param``, ``duplicate_sprite``, ``no_avatar``,
    ``unbound_name``, ``bad_value``, ``ragged_rows``, ``unmapped_char``,
    ``avatar_count``.
    """

    def __init__(self, kind: str, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.kind = kind
        self.line = line
        self.col = col


@dataclass(frozen=True)
class SpriteClass:
    name: str
    role: Role
    params: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Guard:
    """Predicate over the avatar's resource gauges: ``gauge(resource) op limit``."""

    resource: str
    op: str  # "<" or ">="

    def holds(self, gauge: int, limit: int) -> bool:
        return gauge < limit if self.op == "<" else gauge >= limit


@dataclass(frozen=True)
class InteractionRule:
    actor: str
    reactor: str
    effect: Effect
    score_delta: int = 0
    guard: Optional[Guard] = None


@dataclass(frozen=True)
class TerminationRule:
    kind: str  # "timeout" or "contact"
    outcome: str  # "win" or "lose"
    sprite: Optional[str] = None  # reactor class for "contact"


@dataclass(frozen=True)
class GameSpec:
    name: str
    sprite_classes: tuple[SpriteClass, ...]
    interactions: tuple[InteractionRule, ...]
    terminations: tuple[TerminationRule, ...]
    level_mapping: Mapping[str, tuple[str, ...]]
    time_limit: int

    def sprite_class(self, name: str) -> SpriteClass:
        for sc in self.sprite_classes:
            if sc.name == name:
                return sc
        raise KeyError(name)

    @property
    def avatar_class(self) -> SpriteClass:
        return next(sc for sc in self.sprite_classes if sc.role is Role.AVATAR)

    def resource_classes(self) -> tuple[SpriteClass, ...]:
        return tuple(sc for sc in self.sprite_classes if sc.role is Role.RESOURCE)


@dataclass(frozen=True)
class LevelMap:
    width: int
    height: int
    rows: tuple[str, ...]


_SECTIONS = ("Sprites", "Interactions", "Termination", "LevelMapping")
_BLANK_CHAR = " "


def _strip(line: str) -> str:
    hash_pos = line.find("#")
    if hash_pos >= 0:
        line = line[:hash_pos]
    return line.rstrip()


def _parse_int(token: str, line_no: int) -> int:
    if token.lstrip("-").isdigit() and token.count("-") <= (1 if token.startswith("-") else 0):
        return int(token)
    raise ParseError("bad_value", f"expected a decimal integer, got {token!r}", line_no)


def _parse_params(tokens: list[str], line_no: int) -> dict[str, int]:
    params: dict[str, int] = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError("syntax", f"expected key=value, got {tok!r}", line_no)
        key, _, raw = tok.partition("=")
        if not key:
            raise ParseError("syntax", f"empty param key in {tok!r}", line_no)
        params[key] = _parse_int(raw, line_no)
    return params


def _parse_guard(raw: str, line_no: int) -> Guard:
    for op in (">=", "<"):
        if op in raw:
            name, _, rhs = raw.partition(op)
            if rhs != "limit" or not name:
                raise ParseError(
                    "syntax", f"guard must be <resource>{op}limit, got {raw!r}", line_no
                )
            return Guard(name, op)
    raise ParseError("syntax", f"unsupported guard {raw!r}", line_no)


def parse_game(text: str) -> GameSpec:
    """Parse a .dgdl document into a validated `GameSpec`.

    Raises `ParseError` on any malformed input; see the class docstring for
    the error kinds.
    """
    name: Optional[str] = None
    time_limit: Optional[int] = None
    sections: dict[str, list[tuple[int, str]]] = {}
    current: Optional[str] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head in _SECTIONS:
            if len(tokens) != 1:
                raise ParseError("syntax", f"junk after section header {head}", line_no)
            if head in sections:
                raise ParseError("syntax", f"duplicate section {head}", line_no)
            sections[head] = []
            current = head
        elif current is not None:
            sections[current].append((line_no, line))
        elif head == "game":
            if name is not None or len(tokens) != 2:
                raise ParseError("syntax", "expected a single 'game <Name>' header", line_no)
            name = tokens[1]
        elif head == "time_limit":
            if time_limit is not None or len(tokens) != 2:
                raise ParseError("syntax", "expected a single 'time_limit <n>' header", line_no)
            time_limit = _parse_int(tokens[1], line_no)
        else:
            raise ParseError("syntax", f"unexpected directive {head!r}", line_no)

    if name is None:
        raise ParseError("syntax", "missing 'game <Name>' header")
    if time_limit is None:
        raise ParseError("syntax", "missing 'time_limit <n>' header")
    if time_limit < 1:
        raise ParseError("bad_value", f"time_limit must be >= 1, got {time_limit}")
    for section in _SECTIONS:
        if section not in sections:
            raise ParseError("syntax", f"missing section {section}")

    sprites = _parse_sprites(sections["Sprites"])
    by_name = {sc.name: sc for sc in sprites}
    interactions = _parse_interactions(sections["Interactions"], by_name)
    terminations = _parse_terminations(sections["Termination"], by_name)
    mapping = _parse_mapping(sections["LevelMapping"], by_name)

    if sum(1 for sc in sprites if sc.role is Role.AVATAR) != 1:
        raise ParseError("no_avatar", "exactly one sprite class must have role Avatar")
    _validate_spawners(sprites)

    return GameSpec(
        name=name,
        sprite_classes=tuple(sprites),
        interactions=tuple(interactions),
        terminations=tuple(terminations),
        level_mapping=mapping,
        time_limit=time_limit,
    )


def _parse_sprites(lines: list[tuple[int, str]]) -> list[SpriteClass]:
    sprites: list[SpriteClass] = []
    seen: set[str] = set()
    for line_no, line in lines:
        tokens = line.split()
        if len(tokens) < 2:
            raise ParseError("syntax", f"expected '<name> <Role> [k=v ...]', got {line!r}", line_no)
        sprite_name, role_name = tokens[0], tokens[1]
        if sprite_name in seen:
            raise ParseError("duplicate_sprite", f"sprite {sprite_name!r} declared twice", line_no)
        seen.add(sprite_name)
        try:
            role = Role(role_name)
        except ValueError:
            raise ParseError("unknown_role", f"unknown role {role_name!r}", line_no) from None
        params = _parse_params(tokens[2:], line_no)
        required = ROLE_PARAMS[role]
        for key in required:
            if key not in params:
                raise ParseError(
                    "missing_param", f"role {role.value} requires param {key!r}", line_no
                )
        for key, value in params.items():
            if key not in required:
                raise ParseError(
                    "unexpected_param", f"role {role.value} does not take param {key!r}", line_no
                )
            if key in _POSITIVE_PARAMS and value < 1:
                raise ParseError("bad_value", f"param {key!r} must be >= 1", line_no)
        sprites.append(SpriteClass(sprite_name, role, params))
    return sprites


def _require_class(name: str, by_name: dict[str, SpriteClass], line_no: int) -> None:
    if name not in by_name:
        raise ParseError("unbound_name", f"sprite {name!r} is never declared", line_no)


def _parse_interactions(
    lines: list[tuple[int, str]], by_name: dict[str, SpriteClass]
) -> list[InteractionRule]:
    rules: list[InteractionRule] = []
    for line_no, line in lines:
        tokens = line.split()
        if len(tokens) < 3:
            raise ParseError(
                "syntax", f"expected '<actor> <reactor> <Effect> [...]', got {line!r}", line_no
            )
        actor, reactor, effect_name = tokens[0], tokens[1], tokens[2]
        _require_class(actor, by_name, line_no)
        _require_class(reactor, by_name, line_no)
        try:
            effect = Effect(effect_name)
        except ValueError:
            raise ParseError("unknown_effect", f"unknown effect {effect_name!r}", line_no) from None
        score_delta = 0
        guard: Optional[Guard] = None
        for tok in tokens[3:]:
            key, _, raw = tok.partition("=")
            if key == "score":
                score_delta = _parse_int(raw, line_no)
            elif key == "guard":
                if guard is not None:
                    raise ParseError("syntax", "at most one guard per rule", line_no)
                guard = _parse_guard(raw, line_no)
                _require_class(guard.resource, by_name, line_no)
                if by_name[guard.resource].role is not Role.RESOURCE:
                    raise ParseError(
                        "bad_value", f"guard must reference a Resource class, not {guard.resource!r}", line_no
                    )
            else:
                raise ParseError("syntax", f"unknown rule option {tok!r}", line_no)
        rules.append(InteractionRule(actor, reactor, effect, score_delta, guard))
    return rules


def _parse_terminations(
    lines: list[tuple[int, str]], by_name: dict[str, SpriteClass]
) -> list[TerminationRule]:
    rules: list[TerminationRule] = []
    for line_no, line in lines:
        tokens = line.split()
        if tokens[0] == "timeout" and len(tokens) == 2:
            kind, sprite, outcome = "timeout", None, tokens[1]
        elif tokens[0] == "contact" and len(tokens) == 3:
            kind, sprite, outcome = "contact", tokens[1], tokens[2]
            _require_class(sprite, by_name, line_no)
        else:
            raise ParseError(
                "syntax",
                f"expected 'timeout win|lose' or 'contact <class> win|lose', got {line!r}",
                line_no,
            )
        if outcome not in ("win", "lose"):
            raise ParseError("bad_value", f"outcome must be win or lose, got {outcome!r}", line_no)
        rules.append(TerminationRule(kind, outcome, sprite))
    return rules


def _parse_mapping(
    lines: list[tuple[int, str]], by_name: dict[str, SpriteClass]
) -> dict[str, tuple[str, ...]]:
    mapping: dict[str, tuple[str, ...]] = {}
    for line_no, line in lines:
        tokens = line.split()
        if len(tokens) < 2 or len(tokens[0]) != 1:
            raise ParseError(
                "syntax", f"expected '<char> <class> [<class> ...]', got {line!r}", line_no
            )
        char = tokens[0]
        if char == _BLANK_CHAR:
            raise ParseError("syntax", "the blank character cannot be remapped", line_no)
        if char in mapping:
            raise ParseError("syntax", f"character {char!r} mapped twice", line_no)
        for cls in tokens[1:]:
            _require_class(cls, by_name, line_no)
        mapping[char] = tuple(tokens[1:])
    return mapping


def _validate_spawners(sprites: list[SpriteClass]) -> None:
    # A Spawner drops instances of the game's Resource class, so it needs
    # exactly one Resource class to be declared.
    if any(sc.role is Role.SPAWNER for sc in sprites):
        resources = [sc for sc in sprites if sc.role is Role.RESOURCE]
        if len(resources) != 1:
            raise ParseError(
                "unbound_name",
                "a Spawner requires exactly one Resource class to drop",
            )


def parse_level(text: str, spec: GameSpec) -> LevelMap:
    """Parse a .lvl map against `spec`'s level mapping.

    Rows must all have the same length (no padding), every non-blank
    character must be mapped, and exactly one avatar placement must appear.
    """
    rows = text.splitlines()
    while rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise ParseError("syntax", "empty level")
    width = len(rows[0])
    avatar_chars = {
        char
        for char, classes in spec.level_mapping.items()
        if any(spec.sprite_class(c).role is Role.AVATAR for c in classes)
    }
    avatar_count = 0
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                "ragged_rows", f"row {y} has length {len(row)}, expected {width}", y + 1
            )
        for x, char in enumerate(row):
            if char == _BLANK_CHAR:
                continue
            if char not in spec.level_mapping:
                raise ParseError(
                    "unmapped_char", f"character {char!r} at row {y}, col {x} is not mapped",
                    y + 1, x,
                )
            if char in avatar_chars:
                avatar_count += 1
    if avatar_count != 1:
        raise ParseError(
            "avatar_count", f"expected exactly 1 avatar placement, found {avatar_count}"
        )
    return LevelMap(width=width, height=len(rows), rows=tuple(rows))


def pretty_print(spec: GameSpec) -> str:
    """Render `spec` back to canonical .dgdl text; reparsing yields an equal value."""
    out = [f"game {spec.name}", f"time_limit {spec.time_limit}", ""]
    out.append("Sprites")
    for sc in spec.sprite_classes:
        params = " ".join(f"{k}={v}" for k, v in sc.params.items())
        out.append(f"{sc.name} {sc.role.value}" + (f" {params}" if params else ""))
    out.append("")
    out.append("Interactions")
    for rule in spec.interactions:
        parts = [rule.actor, rule.reactor, rule.effect.value]
        if rule.score_delta:
            parts.append(f"score={rule.score_delta}")
        if rule.guard is not None:
            parts.append(f"guard={rule.guard.resource}{rule.guard.op}limit")
        out.append(" ".join(parts))
    out.append("")
    out.append("Termination")
    for term in spec.terminations:
        if term.kind == "timeout":
            out.append(f"timeout {term.outcome}")
        else:
            out.append(f"contact {term.sprite} {term.outcome}")
    out.append("")
    out.append("LevelMapping")
    for char, classes in spec.level_mapping.items():
        out.append(f"{char} {' '.join(classes)}")
    out.append("")
    return "\n".join(out)
