"""Scripted reference policies for the shipped games.

`oracle_policy` returns the play the game was designed around (take the
richer corridor, harvest flowers only at full value, bank repeatedly, eat
mints only near the end); `naive_policy` chases the nearest immediate
reward, which is exactly the behavior the games punish.  Both read the live
state directly and never touch the forward model.
"""

from __future__ import annotations

from collections import deque

from ..engine import ACTIONS, Action, GameState, move_allowed
from ..gdl import Effect, GameSpec, Role

_MOVES = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)
_DELTAS = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}


def _collect_classes(spec: GameSpec) -> set[str]:
    """Reactor classes whose pickup scores immediately (coins, mints)."""
    return {
        rule.reactor
        for rule in spec.interactions
        if rule.effect in (Effect.COLLECT_SCORE, Effect.FORCED_CONSUME)
        and rule.score_delta > 0
    }


def _classes_with_role(spec: GameSpec, role: Role) -> set[str]:
    return {sc.name for sc in spec.sprite_classes if sc.role is role}


def _positions_of(state: GameState, classes: set[str]) -> list[tuple[int, int]]:
    return sorted(
        (s.x, s.y) for s in state.sprites.values() if s.cls in classes
    )


def _bfs_step(state, targets, avoid=()):
    """First action of a shortest walk from the avatar to any target cell.

    `avoid` cells are never entered unless they are targets themselves.
    Returns None when no target is reachable.
    """
    if not targets:
        return None
    targets = set(targets)
    blocked = set(avoid) - targets
    start = (state.avatar_x, state.avatar_y)
    if start in targets:
        return Action.NIL
    seen = {start}
    queue = deque([(start, None)])
    while queue:
        pos, first = queue.popleft()
        for action in _MOVES:
            dx, dy = _DELTAS[action]
            nxt = (pos[0] + dx, pos[1] + dy)
            if nxt in seen or nxt in blocked or not move_allowed(state, *nxt):
                continue
            step = first if first is not None else action
            if nxt in targets:
                return step
            seen.add(nxt)
            queue.append((nxt, step))
    return None


def _manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class DeceptiCoinsOracle:
    """Commit to the corridor holding the most coins, sweep it, then exit."""

    name = "oracle"

    def act(self, state: GameState, fm=None, budget=None, rng=None) -> Action:
        spec = state.spec
        coins = _collect_classes(spec)
        latch_classes = _classes_with_role(spec, Role.RESOURCE)
        latch_cls = next(iter(latch_classes))
        if state.gauges[latch_cls] == 0:
            target = self._richest_latch(state, latch_classes, coins)
            others = set(_positions_of(state, latch_classes)) - {target}
            step = _bfs_step(state, {target}, avoid=others)
            return step if step is not None else Action.NIL
        step = _bfs_step(state, _positions_of(state, coins))
        if step is None:
            step = _bfs_step(state, _positions_of(state, _classes_with_role(spec, Role.EXIT)))
        return step if step is not None else Action.NIL

    def _richest_latch(self, state, latch_classes, coins):
        # Flood-fill behind each latch as if already committed (gauge at
        # limit blocks every other latch) and count the coins in reach.
        latched = state.clone()
        for name in latch_classes:
            latched.gauges[name] = latched.defn.params_of[name]["limit"]
        best_pos, best_count = None, -1
        for pos in _positions_of(state, latch_classes):
            seen = {pos}
            queue = deque([pos])
            count = 0
            while queue:
                x, y = queue.popleft()
                if any(s.cls in coins for s in state.sprites_at(x, y)):
                    count += 1
                for dx, dy in _DELTAS.values():
                    nxt = (x + dx, y + dy)
                    if nxt not in seen and move_allowed(latched, *nxt):
                        seen.add(nxt)
                        queue.append(nxt)
            if count > best_count:
                best_pos, best_count = pos, count
        return best_pos


class FlowerOracle:
    """Stand clear while beds grow; harvest only beds at full value."""

    name = "oracle"

    def act(self, state: GameState, fm=None, budget=None, rng=None) -> Action:
        growables = _classes_with_role(state.spec, Role.GROWABLE)
        beds = [s for s in state.sprites.values() if s.cls in growables]
        ripe = sorted(
            (s.x, s.y) for s in beds
            if s.value >= state.defn.params_of[s.cls]["max_value"]
        )
        if ripe:
            unripe = {(s.x, s.y) for s in beds} - set(ripe)
            step = _bfs_step(state, ripe, avoid=unripe)
            if step is not None:
                return step
        here = (state.avatar_x, state.avatar_y)
        if any((s.x, s.y) == here for s in beds):
            # Step off the bed so it can start regrowing.
            bed_cells = {(s.x, s.y) for s in beds}
            for action in _MOVES:
                dx, dy = _DELTAS[action]
                nxt = (here[0] + dx, here[1] + dy)
                if nxt not in bed_cells and move_allowed(state, *nxt):
                    return action
        return Action.NIL


class MintsOracle:
    """Dodge mints and the waiter, then eat up to the gauge limit late."""

    name = "oracle"

    # Generous per-mint travel allowance used to size the endgame window.
    TICKS_PER_MINT = 18
    WINDOW_SLACK = 30

    def act(self, state: GameState, fm=None, budget=None, rng=None) -> Action:
        spec = state.spec
        mint_cls = next(iter(_classes_with_role(spec, Role.RESOURCE)))
        limit = state.defn.params_of[mint_cls]["limit"]
        need = limit - state.gauges[mint_cls]
        remaining = spec.time_limit - state.tick
        if need > 0 and remaining <= self.TICKS_PER_MINT * need + self.WINDOW_SLACK:
            step = _bfs_step(state, _positions_of(state, {mint_cls}))
            if step is not None:
                return step
        return self._keep_distance(state, mint_cls, limit)

    def _keep_distance(self, state, mint_cls, limit):
        gauge = state.gauges[mint_cls]
        waiters = _positions_of(state, _classes_with_role(state.spec, Role.SPAWNER))
        here = (state.avatar_x, state.avatar_y)
        # Drops already scheduled land after our next move; with a full gauge
        # those cells are as lethal as the mints themselves.
        imminent = {
            (ev[5], ev[6])
            for ev in state.events
            if ev[0] == "spawn_drop" and ev[1] <= state.tick
        }

        def clearance(pos):
            if not waiters:
                return 9
            return min(4, min(_manhattan(pos, w) for w in waiters))

        best_action, best_key = None, None
        for action in (Action.NIL,) + _MOVES:
            if action is Action.NIL:
                nxt = here
            else:
                dx, dy = _DELTAS[action]
                nxt = (here[0] + dx, here[1] + dy)
                if not move_allowed(state, *nxt):
                    continue
            on_mint = state.class_at(nxt[0], nxt[1], mint_cls) is not None
            if gauge >= limit and (on_mint or nxt in imminent):
                continue
            key = (clearance(nxt), 0 if on_mint else 1)
            if best_key is None or key > best_key:
                best_action, best_key = action, key
        return best_action if best_action is not None else Action.NIL


class InvestOracle:
    """Bank the coins, then keep every affordable banker busy."""

    name = "oracle"

    def act(self, state: GameState, fm=None, budget=None, rng=None) -> Action:
        spec = state.spec
        coins = _positions_of(state, _collect_classes(spec))
        if coins:
            step = _bfs_step(state, coins)
            if step is not None:
                return step
        traders = [
            s for s in state.sprites.values()
            if state.defn.role_of[s.cls] is Role.TIMED_TRADER
        ]
        open_for_business = sorted(
            (s.x, s.y) for s in traders
            if state.score >= state.defn.params_of[s.cls]["cost"]
            and state.tick + state.defn.params_of[s.cls]["delay_ticks"] <= spec.time_limit - 1
        )
        step = _bfs_step(state, open_for_business)
        return step if step is not None else Action.NIL


class NaivePolicy:
    """Walk to the nearest thing that scores right now; exit when done."""

    name = "naive"

    def act(self, state: GameState, fm=None, budget=None, rng=None) -> Action:
        spec = state.spec
        targets = _collect_classes(spec) | _classes_with_role(spec, Role.GROWABLE)
        step = _bfs_step(state, _positions_of(state, targets))
        if step is None:
            step = _bfs_step(state, _positions_of(state, _classes_with_role(spec, Role.EXIT)))
        return step if step is not None else Action.NIL


def oracle_policy(game_id: str):
    """The scripted optimal-strategy policy for a catalog game."""
    if game_id.startswith("DC"):
        return DeceptiCoinsOracle()
    if game_id == "Mints":
        return MintsOracle()
    if game_id == "Flower":
        return FlowerOracle()
    if game_id == "Invest":
        return InvestOracle()
    raise KeyError(f"no oracle for game id {game_id!r}")


def naive_policy(game_id: str):
    """The immediate-reward chaser every shipped game is built to punish."""
    if game_id not in ("DC1", "DC2", "DC3", "Mints", "Flower", "Invest"):
        raise KeyError(f"no naive policy for game id {game_id!r}")
    return NaivePolicy()
