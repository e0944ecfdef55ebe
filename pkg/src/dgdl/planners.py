"""Forward-model planning agents: greedy best-first, A*, and sample MCTS.

Every planner works through a forward-model handle rather than the engine
directly, so the same search code runs both on real game states and on the
synthetic game trees the test suite uses as oracles.  A handle provides:

    actions                     -- the fixed action tuple
    step(state, a)              -- pure: fresh successor, reward, status
    step_owned(state, a)        -- like step, but may recycle `state`
    copy(state, seed)           -- independent planning clone

Budgets are counted in forward-model advances for greedy/A* and in whole
iterations for MCTS; a 40 ms wall-clock mode mirrors real-time play but is
kept out of the tests for determinism.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Optional, Protocol

from .engine import (
    ACTIONS,
    Action,
    GameState,
    Status,
    advance_inplace,
    clone_for_planning,
)
from .gdl import Effect, Role

_STATUS_RANK = {Status.WIN: 2, Status.ONGOING: 1, Status.LOSS: 0}


@dataclass(frozen=True)
class Budget:
    """Per-move search allowance: forward-model iterations or wall-clock ms."""

    mode: str  # "iterations" or "millis"
    amount: int

    def __post_init__(self):
        if self.mode not in ("iterations", "millis"):
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if self.amount < 1:
            raise ValueError("budget amount must be >= 1")

    @classmethod
    def iterations(cls, n: int) -> "Budget":
        return cls("iterations", n)

    @classmethod
    def wall_clock_ms(cls, t: int = 40) -> "Budget":
        return cls("millis", t)


class _Meter:
    """Counts down a Budget; `spend` returns False once exhausted."""

    def __init__(self, budget: Budget):
        self._left = budget.amount if budget.mode == "iterations" else None
        self._deadline = (
            time.monotonic() + budget.amount / 1000.0 if budget.mode == "millis" else None
        )

    def spend(self) -> bool:
        if self._left is not None:
            if self._left <= 0:
                return False
            self._left -= 1
            return True
        return time.monotonic() < self._deadline

    def remainder(self) -> Optional[Budget]:
        """Unspent part of an iterations budget, or None when used up."""
        if self._left is not None:
            return Budget.iterations(self._left) if self._left > 0 else None
        ms_left = int((self._deadline - time.monotonic()) * 1000)
        return Budget.wall_clock_ms(ms_left) if ms_left > 0 else None


@dataclass
class MctsParams:
    exploration_c: float = math.sqrt(2)
    rollout_depth: int = 10
    # Initial (min, max) return bounds for value normalization; they keep
    # widening as returns are observed.  None starts from the data alone.
    score_normalization: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.rollout_depth < 1:
            raise ValueError("rollout_depth must be >= 1")
        if self.exploration_c < 0:
            raise ValueError("exploration_c must be >= 0")


class ForwardModel(Protocol):
    actions: tuple

    def step(self, state, action): ...

    def step_owned(self, state, action): ...

    def copy(self, state, seed: int): ...


class EngineModel:
    """Forward-model handle over engine states."""

    actions = ACTIONS

    def step(self, state: GameState, action: Action):
        nxt = state.clone()
        outcome = advance_inplace(nxt, action)
        return nxt, outcome.reward, outcome.status

    def step_owned(self, state: GameState, action: Action):
        outcome = advance_inplace(state, action)
        return state, outcome.reward, outcome.status

    def copy(self, state: GameState, seed: int) -> GameState:
        return clone_for_planning(state, seed)


class CountingModel:
    """Wraps a forward model and counts advances; used by the budget tests."""

    def __init__(self, inner):
        self.inner = inner
        self.actions = inner.actions
        self.advances = 0

    def step(self, state, action):
        self.advances += 1
        return self.inner.step(state, action)

    def step_owned(self, state, action):
        self.advances += 1
        return self.inner.step_owned(state, action)

    def copy(self, state, seed):
        return self.inner.copy(state, seed)


def greedy_best_first(state, fm, budget: Budget, rng) -> Action:
    """Expand successors best-first by (score, win>ongoing>loss); return the
    first action toward the best state found.

    Node ids break remaining ties: children are created in fixed action order, so the
    lowest id is the earliest (Up-first) discovery.
    """
    meter = _Meter(budget)
    root = fm.copy(state, rng.getrandbits(63))
    # heap entries: (-score, -status_rank, node_id); parallel node storage
    frontier: list[tuple[int, int, int]] = []
    first_action: dict[int, Action] = {}
    states = {0: root}
    scores = {0: 0}
    heapq.heappush(frontier, (0, -_STATUS_RANK[Status.ONGOING], 0))
    next_id = 1
    best_key: Optional[tuple[int, int, int]] = None
    best_id = None

    while frontier:
        neg_score, neg_rank, node_id = heapq.heappop(frontier)
        node_state = states.pop(node_id)
        for action in fm.actions:
            if not meter.spend():
                return _best_or_default(best_id, first_action)
            child, reward, status = fm.step(node_state, action)
            child_id = next_id
            next_id += 1
            child_score = scores[node_id] + reward
            first_action[child_id] = first_action.get(node_id, action)
            key = (-child_score, -_STATUS_RANK[status], child_id)
            if best_key is None or key < best_key:
                best_key, best_id = key, child_id
            if status is Status.ONGOING:
                scores[child_id] = child_score
                states[child_id] = child
                heapq.heappush(frontier, key)
    return _best_or_default(best_id, first_action)


def _best_or_default(best_id, first_action) -> Action:
    if best_id is None:
        return Action.NIL
    return first_action[best_id]


def _reward_targets(state: GameState) -> set[tuple[int, int]]:
    """Cells holding sprites worth walking to: immediate positive pickups
    plus growables (worth zero now, positive later)."""
    spec = state.spec
    positive = {
        rule.reactor
        for rule in spec.interactions
        if rule.effect in (Effect.COLLECT_SCORE, Effect.FORCED_CONSUME)
        and rule.score_delta > 0
    }
    growable = {sc.name for sc in spec.sprite_classes if sc.role is Role.GROWABLE}
    wanted = positive | growable
    return {(s.x, s.y) for s in state.sprites.values() if s.cls in wanted}


def a_star_plan(state, fm, budget: Budget, rng) -> Action:
    """A* over avatar positions toward the nearest positive-reward sprite.

    Heuristic is Manhattan distance, edge cost 1, replanned from scratch on
    every call.  Falls back to greedy best-first when the board offers no
    positive-reward sprite at all.
    """
    targets = _reward_targets(state)
    if not targets:
        return greedy_best_first(state, fm, budget, rng)
    meter = _Meter(budget)
    root = fm.copy(state, rng.getrandbits(63))

    def h(x, y):
        return min(abs(x - tx) + abs(y - ty) for tx, ty in targets)

    start = (root.avatar_x, root.avatar_y)
    if start in targets:
        targets = targets - {start}
        if not targets:
            return Action.NIL
    counter = 0
    open_heap = [(h(*start), 0, counter, start, None, root)]
    visited = {start}
    best_h, best_action = h(*start), None
    moves = tuple(a for a in fm.actions if a is not Action.NIL)

    while open_heap:
        f, g, _, pos, first, node_state = heapq.heappop(open_heap)
        if pos in targets:
            return first if first is not None else Action.NIL
        for action in moves:
            if not meter.spend():
                return best_action if best_action is not None else Action.NIL
            child, reward, status = fm.step(node_state, action)
            cpos = (child.avatar_x, child.avatar_y)
            if cpos in visited:
                continue
            visited.add(cpos)
            step = first if first is not None else action
            if cpos in targets:
                return step
            ch = h(*cpos)
            if ch < best_h:
                best_h, best_action = ch, step
            if status is Status.ONGOING:
                counter += 1
                heapq.heappush(open_heap, (g + 1 + ch, g + 1, counter, cpos, step, child))
    # Search space exhausted without reaching a target: the remaining
    # sprites are walled off, so hand the leftover budget to greedy search.
    leftover = meter.remainder()
    if leftover is not None:
        return greedy_best_first(state, fm, leftover, rng)
    return best_action if best_action is not None else Action.NIL


class _Node:
    __slots__ = ("state", "reward", "status", "children", "untried", "visits", "total")

    def __init__(self, state, reward, status, n_actions):
        self.state = state
        self.reward = reward  # edge reward from the parent
        self.status = status
        self.children: list[Optional[_Node]] = []
        self.untried = list(range(n_actions)) if status is Status.ONGOING else []
        self.visits = 0
        self.total = 0.0


def mcts_select(state, fm, params: MctsParams, budget: Budget, rng) -> Action:
    """UCT: UCB1 selection over normalized values, one expansion per
    iteration, uniform random rollout, most-visited root action."""
    meter = _Meter(budget)
    actions = fm.actions
    n_actions = len(actions)
    root = _Node(fm.copy(state, rng.getrandbits(63)), 0, Status.ONGOING, n_actions)
    if params.score_normalization is not None:
        lo, hi = params.score_normalization
    else:
        lo, hi = math.inf, -math.inf
    c = params.exploration_c
    depth_limit = params.rollout_depth

    while meter.spend():
        node = root
        path = [root]
        ret = 0.0
        # Selection: descend fully expanded nodes by UCB1.
        while not node.untried and node.children and node.status is Status.ONGOING:
            span = hi - lo if hi > lo else 1.0
            log_n = math.log(node.visits + 1)
            best, best_val = None, -math.inf
            for child in node.children:
                exploit = ((child.total / child.visits) - (lo if hi > lo else 0.0)) / span
                val = exploit + c * math.sqrt(log_n / child.visits)
                if val > best_val:
                    best, best_val = child, val
            node = best
            path.append(node)
            ret += node.reward
        # Expansion.
        if node.untried and node.status is Status.ONGOING:
            action_idx = node.untried.pop(0)
            child_state, reward, status = fm.step(node.state, actions[action_idx])
            child = _Node(child_state, reward, status, n_actions)
            node.children.append(child)
            node = child
            path.append(node)
            ret += reward
        # Rollout.
        if node.status is Status.ONGOING:
            roll_state, first = node.state, True
            status = node.status
            for _ in range(depth_limit):
                action = actions[rng.randrange(n_actions)]
                if first:
                    roll_state, reward, status = fm.step(roll_state, action)
                    first = False
                else:
                    roll_state, reward, status = fm.step_owned(roll_state, action)
                ret += reward
                if status is not Status.ONGOING:
                    break
        # Backpropagation of the normalized return (bounds updated first).
        lo = min(lo, ret)
        hi = max(hi, ret)
        for visited in path:
            visited.visits += 1
            visited.total += ret

    if not root.children:
        return Action.NIL
    best_idx = max(range(len(root.children)), key=lambda i: root.children[i].visits)
    return actions[best_idx]


class PlannerPolicy:
    """Uniform act() wrapper around one of the search functions."""

    def __init__(self, name: str, budget: Budget, params: Optional[MctsParams] = None):
        if name not in ("greedy", "astar", "mcts"):
            raise KeyError(f"unknown planner {name!r}")
        self.name = name
        self.budget = budget
        self.params = params or MctsParams()
        self._fm = EngineModel()

    def act(self, state, fm=None, budget=None, rng=None) -> Action:
        fm = fm if fm is not None else self._fm
        budget = budget if budget is not None else self.budget
        if self.name == "greedy":
            return greedy_best_first(state, fm, budget, rng)
        if self.name == "astar":
            return a_star_plan(state, fm, budget, rng)
        return mcts_select(state, fm, self.params, budget, rng)
