"""Deceptive grid games: DSL, engine, agents, and benchmark harness."""

from .engine import (
    Action,
    GameState,
    Observation,
    Status,
    StepOutcome,
    advance,
    clone_for_planning,
    init,
    observe,
    serialize,
)
from .gdl import (
    Effect,
    GameSpec,
    InteractionRule,
    LevelMap,
    ParseError,
    Role,
    SpriteClass,
    TerminationRule,
    parse_game,
    parse_level,
    pretty_print,
)

__version__ = "0.1.0"
