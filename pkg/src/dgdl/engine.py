"""Deterministic tick-based simulation of a parsed game.

Each `advance` call executes one tick in a fixed phase order:

1. avatar move (blocked moves consume the tick),
2. contact rules at the avatar's cell, in declaration order,
3. NPC updates (spawners random-walk and schedule drops),
4. due scheduled events fire (trader returns, drops), then contact rules
   re-run for sprites that just landed in the avatar's cell,
5. growable value updates,
6. termination rules,
7. tick+1.

States are values: `advance` returns a fresh state and never touches its
argument.  All randomness flows through a serializable SplitMix64 stream
stored inside the state, so any (seed, action sequence) replays exactly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gdl import Effect, GameSpec, LevelMap, Role

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

SERIAL_VERSION = 1


class SplitMix64:
    """Counter-based 64-bit PRNG; the whole stream state is one integer."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n

    def split(self, key: int = 0) -> "SplitMix64":
        return SplitMix64(self.next_u64() ^ (key & _MASK64))


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    NIL = 4


ACTIONS = tuple(Action)
_DELTAS = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.NIL: (0, 0),
}


class Status(enum.IntEnum):
    ONGOING = 0
    WIN = 1
    LOSS = 2


# Scheduled events are plain tuples so they copy for free:
#   ("trader_return", due, seq, cls, payout, x, y)
#   ("spawn_drop",    due, seq, cls, 0,      x, y)
EVENT_TRADER = "trader_return"
EVENT_DROP = "spawn_drop"


@dataclass(slots=True)
class Sprite:
    id: int
    cls: str
    x: int
    y: int
    alive: bool = True
    value: int = 0  # growable current value
    next_grow: int = -1  # next tick the value increments; -1 while dormant

    def copy(self) -> "Sprite":
        return Sprite(self.id, self.cls, self.x, self.y, self.alive, self.value, self.next_grow)


class CompiledSpec:
    """Lookup tables derived from a GameSpec, shared by all its states."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.role_of = {sc.name: sc.role for sc in spec.sprite_classes}
        self.params_of = {sc.name: dict(sc.params) for sc in spec.sprite_classes}
        self.avatar_cls = spec.avatar_class.name
        self.class_order = tuple(sc.name for sc in spec.sprite_classes)
        self.channel_index = {name: i for i, name in enumerate(self.class_order)}
        self.resource_order = tuple(sc.name for sc in spec.resource_classes())
        self.wall_classes = frozenset(
            sc.name for sc in spec.sprite_classes if sc.role is Role.WALL
        )
        # Contact rules by reactor class, declaration order preserved.
        self.contact_rules: dict[str, list] = {}
        self.block_rules: dict[str, list] = {}
        for rule in spec.interactions:
            if rule.actor != self.avatar_cls:
                continue
            target = self.block_rules if rule.effect is Effect.BLOCK_MOVE else self.contact_rules
            target.setdefault(rule.reactor, []).append(rule)
        self.has_timeout_rule = any(t.kind == "timeout" for t in spec.terminations)
        self.spawn_cls = self.resource_order[0] if self.resource_order else None


@dataclass(slots=True)
class StepOutcome:
    reward: int
    status: Status
    events_fired: tuple[str, ...]


@dataclass(slots=True)
class Observation:
    grid_channels: np.ndarray  # (classes, height, width) uint8 occupancy
    gauges: np.ndarray  # per-Resource-class integers, declaration order
    score: int
    tick: int

    def key(self) -> bytes:
        """Canonical hash key over the spatial layout and gauges."""
        return self.grid_channels.tobytes() + self.gauges.tobytes()


class GameState:
    __slots__ = (
        "defn", "level", "tick", "score", "status", "avatar_x", "avatar_y",
        "gauges", "sprites", "grid", "events", "rng", "next_id", "next_seq",
        "spawner_ids", "growable_ids",
    )

    def __init__(self, defn: CompiledSpec, level: LevelMap):
        self.defn = defn
        self.level = level
        self.tick = 0
        self.score = 0
        self.status = Status.ONGOING
        self.avatar_x = 0
        self.avatar_y = 0
        self.gauges: dict[str, int] = {}
        self.sprites: dict[int, Sprite] = {}
        self.grid: dict[tuple[int, int], list[int]] = {}
        self.events: list[tuple] = []
        self.rng = SplitMix64(0)
        self.next_id = 0
        self.next_seq = 0
        self.spawner_ids: list[int] = []
        self.growable_ids: list[int] = []

    @property
    def spec(self) -> GameSpec:
        return self.defn.spec

    def clone(self) -> "GameState":
        other = GameState.__new__(GameState)
        other.defn = self.defn
        other.level = self.level
        other.tick = self.tick
        other.score = self.score
        other.status = self.status
        other.avatar_x = self.avatar_x
        other.avatar_y = self.avatar_y
        other.gauges = dict(self.gauges)
        other.sprites = {sid: sp.copy() for sid, sp in self.sprites.items()}
        other.grid = {pos: list(ids) for pos, ids in self.grid.items()}
        other.events = list(self.events)
        other.rng = SplitMix64(self.rng.state)
        other.next_id = self.next_id
        other.next_seq = self.next_seq
        other.spawner_ids = list(self.spawner_ids)
        other.growable_ids = list(self.growable_ids)
        return other

    # -- sprite bookkeeping ------------------------------------------------

    def _add_sprite(self, cls: str, x: int, y: int) -> Sprite:
        sprite = Sprite(self.next_id, cls, x, y)
        self.next_id += 1
        self.sprites[sprite.id] = sprite
        self.grid.setdefault((x, y), []).append(sprite.id)
        role = self.defn.role_of[cls]
        if role is Role.SPAWNER:
            self.spawner_ids.append(sprite.id)
        elif role is Role.GROWABLE:
            self.growable_ids.append(sprite.id)
        return sprite

    def _kill_sprite(self, sprite: Sprite) -> None:
        sprite.alive = False
        cell = self.grid.get((sprite.x, sprite.y))
        if cell and sprite.id in cell:
            cell.remove(sprite.id)
        del self.sprites[sprite.id]
        role = self.defn.role_of[sprite.cls]
        if role is Role.SPAWNER:
            self.spawner_ids.remove(sprite.id)
        elif role is Role.GROWABLE:
            self.growable_ids.remove(sprite.id)

    def _move_sprite(self, sprite: Sprite, x: int, y: int) -> None:
        self.grid[(sprite.x, sprite.y)].remove(sprite.id)
        sprite.x, sprite.y = x, y
        self.grid.setdefault((x, y), []).append(sprite.id)

    def sprites_at(self, x: int, y: int) -> list[Sprite]:
        return [self.sprites[i] for i in self.grid.get((x, y), ())]

    def class_at(self, x: int, y: int, cls: str) -> Optional[Sprite]:
        for i in self.grid.get((x, y), ()):
            if self.sprites[i].cls == cls:
                return self.sprites[i]
        return None

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.level.width and 0 <= y < self.level.height


def init(spec: GameSpec, level: LevelMap, seed: int) -> GameState:
    """Build the starting state: tick 0, score 0, empty gauges, seeded rng."""
    defn = CompiledSpec(spec)
    state = GameState(defn, level)
    state.rng = SplitMix64(seed)
    state.gauges = {name: 0 for name in defn.resource_order}
    for y, row in enumerate(level.rows):
        for x, char in enumerate(row):
            if char == " ":
                continue
            for cls in spec.level_mapping[char]:
                if defn.role_of[cls] is Role.AVATAR:
                    state.avatar_x, state.avatar_y = x, y
                else:
                    state._add_sprite(cls, x, y)
    return state


def clone_for_planning(state: GameState, planning_seed: int) -> GameState:
    """Copy `state` with its rng reseeded, leaving the original untouched."""
    other = state.clone()
    other.rng = SplitMix64(planning_seed)
    return other


def advance(state: GameState, action: Action) -> tuple[GameState, StepOutcome]:
    """Pure forward model: one tick applied to a copy of `state`."""
    nxt = state.clone()
    outcome = advance_inplace(nxt, action)
    return nxt, outcome


def advance_inplace(state: GameState, action: Action) -> StepOutcome:
    """In-place variant of `advance` for rollouts that own their state."""
    if state.status is not Status.ONGOING:
        return StepOutcome(0, state.status, ())

    score_before = state.score
    events: list[str] = []

    # Phase 1: avatar movement.
    dx, dy = _DELTAS[action]
    if dx or dy:
        tx, ty = state.avatar_x + dx, state.avatar_y + dy
        if move_allowed(state, tx, ty):
            state.avatar_x, state.avatar_y = tx, ty
        else:
            events.append("blocked")

    # Phase 2: contact rules where the avatar now stands.
    _run_contacts(state, state.sprites_at(state.avatar_x, state.avatar_y), events)

    if state.status is Status.ONGOING:
        _npc_updates(state, events)  # phase 3
    recheck: list[Sprite] = []
    if state.status is Status.ONGOING:
        _fire_due_events(state, events, recheck)  # phase 4
    if state.status is Status.ONGOING and recheck:
        _run_contacts(state, recheck, events)  # phase 4 -> 2' re-check
    if state.status is Status.ONGOING:
        _grow_updates(state)  # phase 5
    if state.status is Status.ONGOING:
        _check_termination(state, events)  # phase 6

    state.tick += 1  # phase 7
    return StepOutcome(state.score - score_before, state.status, tuple(events))


def move_allowed(state: GameState, x: int, y: int) -> bool:
    if not state.in_bounds(x, y):
        return False
    defn = state.defn
    for sprite in state.sprites_at(x, y):
        if sprite.cls in defn.wall_classes:
            return False
        for rule in defn.block_rules.get(sprite.cls, ()):
            if _guard_holds(state, rule.guard):
                return False
    return True


def _guard_holds(state, guard) -> bool:
    if guard is None:
        return True
    limit = state.defn.params_of[guard.resource]["limit"]
    return guard.holds(state.gauges[guard.resource], limit)


def _run_contacts(state: GameState, sprites: list[Sprite], events: list[str]) -> None:
    defn = state.defn
    for sprite in sprites:
        if not sprite.alive or (sprite.x, sprite.y) != (state.avatar_x, state.avatar_y):
            continue
        for rule in defn.contact_rules.get(sprite.cls, ()):
            if not _guard_holds(state, rule.guard):
                continue
            if rule.effect is Effect.INVEST_TRIGGER:
                cost = defn.params_of[sprite.cls]["cost"]
                if state.score < cost:
                    continue  # unaffordable: rule does not match
            _apply_effect(state, rule, sprite, events)
            break  # first matching rule wins for this pair
        if state.status is not Status.ONGOING:
            return


def _apply_effect(state: GameState, rule, sprite: Sprite, events: list[str]) -> None:
    defn = state.defn
    effect = rule.effect
    cls = sprite.cls
    at = f"{cls}@{sprite.x},{sprite.y}"

    if effect in (Effect.COLLECT_SCORE, Effect.FORCED_CONSUME):
        if defn.role_of[cls] is Role.GROWABLE:
            gained = sprite.value + rule.score_delta
            state.score += gained
            sprite.value = 0
            sprite.next_grow = -1  # regrowth waits until the avatar leaves
            events.append(f"collect:{at}:{gained:+d}")
        else:
            state.score += rule.score_delta
            if defn.role_of[cls] is Role.RESOURCE:
                limit = defn.params_of[cls]["limit"]
                gain = defn.params_of[cls]["value"]
                state.gauges[cls] = min(state.gauges[cls] + gain, limit)
            state._kill_sprite(sprite)
            events.append(f"collect:{at}:{rule.score_delta:+d}")
    elif effect is Effect.KILL_REACTOR:
        state.score += rule.score_delta
        state._kill_sprite(sprite)
        events.append(f"kill:{at}:{rule.score_delta:+d}")
    elif effect is Effect.KILL_ACTOR:
        state.score += rule.score_delta
        state.status = Status.LOSS
        events.append(f"avatar_killed:{at}:{rule.score_delta:+d}")
    elif effect is Effect.FILL_RESOURCE:
        state.score += rule.score_delta
        limit = defn.params_of[cls]["limit"]
        gain = defn.params_of[cls]["value"]
        state.gauges[cls] = min(state.gauges[cls] + gain, limit)
        state._kill_sprite(sprite)
        events.append(f"fill:{at}")
    elif effect is Effect.LOSE_GAME:
        state.score += rule.score_delta
        state.status = Status.LOSS
        events.append(f"lose:{at}:{rule.score_delta:+d}")
    elif effect is Effect.INVEST_TRIGGER:
        params = defn.params_of[cls]
        state.score -= params["cost"]
        state.events.append((
            EVENT_TRADER, state.tick + params["delay_ticks"], state.next_seq,
            cls, params["payout"], sprite.x, sprite.y,
        ))
        state.next_seq += 1
        state._kill_sprite(sprite)
        events.append(f"invest:{at}:-{params['cost']}")


def _npc_updates(state: GameState, events: list[str]) -> None:
    if not state.spawner_ids:
        return
    defn = state.defn
    for sprite_id in sorted(state.spawner_ids):
        sprite = state.sprites[sprite_id]
        direction = state.rng.randrange(4)
        dx, dy = _DELTAS[Action(direction)]
        tx, ty = sprite.x + dx, sprite.y + dy
        if state.in_bounds(tx, ty) and not any(
            s.cls in defn.wall_classes for s in state.sprites_at(tx, ty)
        ):
            state._move_sprite(sprite, tx, ty)
        period = defn.params_of[sprite.cls]["drop_period"]
        if (state.tick + 1) % period == 0:
            state.events.append((
                EVENT_DROP, state.tick + 1, state.next_seq,
                defn.spawn_cls, 0, sprite.x, sprite.y,
            ))
            state.next_seq += 1


def _fire_due_events(state: GameState, events: list[str], recheck: list[Sprite]) -> None:
    if not state.events:
        return
    due = [ev for ev in state.events if ev[1] <= state.tick]
    if not due:
        return
    state.events = [ev for ev in state.events if ev[1] > state.tick]
    due.sort(key=lambda ev: (ev[1], ev[2]))
    avatar_pos = (state.avatar_x, state.avatar_y)
    for kind, _due, _seq, cls, payout, x, y in due:
        if kind == EVENT_TRADER:
            state.score += payout
            sprite = state._add_sprite(cls, x, y)
            events.append(f"trader_return:{cls}@{x},{y}:+{payout}")
            if (x, y) == avatar_pos:
                recheck.append(sprite)
        else:  # EVENT_DROP
            if state.class_at(x, y, cls) is None:
                sprite = state._add_sprite(cls, x, y)
                events.append(f"drop:{cls}@{x},{y}")
                if (x, y) == avatar_pos:
                    recheck.append(sprite)


def _grow_updates(state: GameState) -> None:
    if not state.growable_ids:
        return
    defn = state.defn
    avatar_pos = (state.avatar_x, state.avatar_y)
    for sprite_id in state.growable_ids:
        sprite = state.sprites[sprite_id]
        if (sprite.x, sprite.y) == avatar_pos:
            continue  # growth is paused while the avatar occupies the bed
        params = defn.params_of[sprite.cls]
        if sprite.next_grow < 0:
            sprite.next_grow = state.tick + params["grow_period"]
        elif sprite.value < params["max_value"] and state.tick >= sprite.next_grow:
            sprite.value += 1
            sprite.next_grow = state.tick + params["grow_period"]


def _check_termination(state: GameState, events: list[str]) -> None:
    defn = state.defn
    timed_out = state.tick + 1 >= defn.spec.time_limit
    for rule in defn.spec.terminations:
        if rule.kind == "timeout":
            if timed_out:
                state.status = Status.WIN if rule.outcome == "win" else Status.LOSS
                events.append(f"timeout:{rule.outcome}")
                return
        else:  # contact
            if state.class_at(state.avatar_x, state.avatar_y, rule.sprite) is not None:
                state.status = Status.WIN if rule.outcome == "win" else Status.LOSS
                events.append(f"contact:{rule.sprite}:{rule.outcome}")
                return
    if timed_out and not defn.has_timeout_rule:
        state.status = Status.LOSS
        events.append("timeout:lose")


def observe(state: GameState) -> Observation:
    """Project the state into fixed-shape per-class occupancy planes."""
    defn = state.defn
    channels = np.zeros(
        (len(defn.class_order), state.level.height, state.level.width), dtype=np.uint8
    )
    for sprite in state.sprites.values():
        channels[defn.channel_index[sprite.cls], sprite.y, sprite.x] = 1
    channels[defn.channel_index[defn.avatar_cls], state.avatar_y, state.avatar_x] = 1
    gauges = np.array([state.gauges[name] for name in defn.resource_order], dtype=np.int64)
    return Observation(channels, gauges, state.score, state.tick)


def serialize(state: GameState) -> bytes:
    """Canonical, versioned byte form; equal states serialize identically."""
    doc = {
        "format": "dgdl-state",
        "version": SERIAL_VERSION,
        "game": state.spec.name,
        "tick": state.tick,
        "score": state.score,
        "status": int(state.status),
        "avatar": [state.avatar_x, state.avatar_y],
        "gauges": {k: state.gauges[k] for k in sorted(state.gauges)},
        "sprites": sorted(
            [s.id, s.cls, s.x, s.y, int(s.alive), s.value, s.next_grow]
            for s in state.sprites.values()
        ),
        "events": sorted(state.events, key=lambda ev: (ev[1], ev[2])),
        "rng": state.rng.state,
        "next_id": state.next_id,
        "next_seq": state.next_seq,
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode()
