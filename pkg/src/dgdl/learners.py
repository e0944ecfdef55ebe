"""Model-free learners: tabular Q-learning and an n-step advantage
actor-critic on linear features.

Q-learning keys its table on the observation's spatial layout and gauges
(tick and score are left out so states recur across an episode).  The
actor-critic keeps a softmax policy matrix and a value vector over the
flattened observation planes plus gauges and normalized tick.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import ACTIONS, Action, Observation, Status, advance_inplace, init, observe
from .engine import SplitMix64
from .games import load_game

N_ACTIONS = len(ACTIONS)

DEFAULT_HYPERPARAMS = {
    "alpha": 0.5,
    "gamma": 0.9,
    "eps_start": 1.0,
    "eps_end": 0.05,
    "eps_frac": 0.5,  # fraction of episodes over which epsilon decays
    "n_steps": 5,
    "learning_rate": 0.007,
}

_ZERO_ROW = np.zeros(N_ACTIONS)
_ZERO_ROW.flags.writeable = False


@dataclass
class QTable:
    alpha: float = 0.5
    gamma: float = 0.9
    values: dict[bytes, np.ndarray] = field(default_factory=dict)

    def row(self, key: bytes) -> np.ndarray:
        """Action values for a state key; missing keys read as zeros."""
        return self.values.get(key, _ZERO_ROW)


def q_update(table: QTable, s: bytes, a: int, r: float, s2: bytes, terminal: bool) -> QTable:
    """One-step Q-learning backup, in place."""
    bootstrap = 0.0 if terminal else table.gamma * float(np.max(table.row(s2)))
    row = table.values.get(s)
    if row is None:
        row = np.zeros(N_ACTIONS)
        table.values[s] = row
    row[a] += table.alpha * (r + bootstrap - row[a])
    return table


# Constant feature scale.  Occupancy planes switch on dozens of shared
# features at once (walls most of all); scaling keeps one lucky reward from
# swinging the softmax logits across every state simultaneously.
FEATURE_SCALE = 0.15


def encode_features(obs: Observation, time_limit: int = 2000) -> np.ndarray:
    """Flattened occupancy planes + gauges + normalized tick, at a fixed scale."""
    return FEATURE_SCALE * np.concatenate([
        obs.grid_channels.reshape(-1).astype(np.float64),
        obs.gauges.astype(np.float64),
        [obs.tick / time_limit],
    ])


def softmax_probs(policy_weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    z = x @ policy_weights
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def grad_log_policy(policy_weights: np.ndarray, x: np.ndarray, a: int) -> np.ndarray:
    """d log softmax(xW)[a] / dW, shape (dim, actions)."""
    probs = softmax_probs(policy_weights, x)
    indicator = -probs
    indicator[a] += 1.0
    return np.outer(x, indicator)


@dataclass
class ACModel:
    policy_weights: np.ndarray  # (feature_dim, actions)
    value_weights: np.ndarray  # (feature_dim,)
    n_steps: int = 5
    learning_rate: float = 0.007
    workers: int = 1  # kept for API parity; collection is single-threaded

    @classmethod
    def zeros(cls, dim: int, n_steps: int = 5, learning_rate: float = 0.007) -> "ACModel":
        return cls(np.zeros((dim, N_ACTIONS)), np.zeros(dim), n_steps, learning_rate)

    def value(self, x: np.ndarray) -> float:
        return float(self.value_weights @ x)


def n_step_returns(rewards: list[float], gamma: float, bootstrap: float) -> list[float]:
    """Bootstrapped returns for every offset of a trajectory segment."""
    returns = [0.0] * len(rewards)
    acc = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        returns[t] = acc
    return returns


def ac_update(
    model: ACModel,
    features: list[np.ndarray],
    actions: list[int],
    rewards: list[float],
    gamma: float,
    bootstrap: float,
) -> ACModel:
    """Shared-rate update over one segment of <= n_steps transitions.

    Ascends log-policy weighted by the advantage and descends the squared
    return error of the value head; `bootstrap` is V(s_end), already zeroed
    by the caller on terminal segments.
    """
    returns = n_step_returns(rewards, gamma, bootstrap)
    policy_grad = np.zeros_like(model.policy_weights)
    value_grad = np.zeros_like(model.value_weights)
    for x, a, ret in zip(features, actions, returns):
        advantage = ret - model.value(x)
        policy_grad += grad_log_policy(model.policy_weights, x, a) * advantage
        value_grad += 2.0 * (ret - model.value(x)) * x
    model.policy_weights += model.learning_rate * policy_grad
    model.value_weights += model.learning_rate * value_grad
    return model


@dataclass
class LearningCurve:
    entries: list[tuple[int, float, int]] = field(default_factory=list)  # (episode, return, length)
    window: int = 100

    def returns(self) -> np.ndarray:
        return np.array([r for _, r, _ in self.entries])

    def rolling_mean(self, window: Optional[int] = None) -> np.ndarray:
        w = window or self.window
        rets = self.returns()
        if len(rets) < w:
            return np.array([])
        kernel = np.ones(w) / w
        return np.convolve(rets, kernel, mode="valid")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("episode,return,length\n")
            for episode, ret, length in self.entries:
                handle.write(f"{episode},{ret},{length}\n")

    @classmethod
    def from_csv(cls, path) -> "LearningCurve":
        curve = cls()
        with open(path, encoding="utf-8") as handle:
            next(handle)
            for line in handle:
                episode, ret, length = line.strip().split(",")
                curve.entries.append((int(episode), float(ret), int(length)))
        return curve


class QPolicy:
    """Greedy policy over a learned Q table."""

    name = "q-policy"

    def __init__(self, table: QTable):
        self.table = table

    def act(self, state, fm=None, budget=None, rng=None) -> Action:
        key = observe(state).key()
        return Action(int(np.argmax(self.table.row(key))))


class ACPolicy:
    """Argmax policy over a trained actor-critic model."""

    name = "ac-policy"

    def __init__(self, model: ACModel, time_limit: int):
        self.model = model
        self.time_limit = time_limit

    def act(self, state, fm=None, budget=None, rng=None) -> Action:
        x = encode_features(observe(state), self.time_limit)
        return Action(int(np.argmax(softmax_probs(self.model.policy_weights, x))))


def train(
    game_id: str,
    learner_kind: str,
    episodes: int,
    seed: int,
    hyperparams: Optional[dict] = None,
):
    """Episodic training loop; returns (greedy policy, learning curve).

    Fully reproducible: environment seeds derive from `seed` via a SplitMix
    stream and exploration uses a numpy generator seeded with `seed`.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if learner_kind not in ("q", "ac"):
        raise KeyError(f"unknown learner {learner_kind!r}; use 'q' or 'ac'")
    hp = {**DEFAULT_HYPERPARAMS, **(hyperparams or {})}
    spec, level = load_game(game_id)
    env_seeds = SplitMix64(seed)
    rng = np.random.default_rng(seed)
    if learner_kind == "q":
        return _train_q(spec, level, episodes, env_seeds, rng, hp)
    return _train_ac(spec, level, episodes, env_seeds, rng, hp)


def _train_q(spec, level, episodes, env_seeds, rng, hp):
    table = QTable(alpha=hp["alpha"], gamma=hp["gamma"])
    curve = LearningCurve()
    decay_span = max(1, int(hp["eps_frac"] * episodes))
    for episode in range(episodes):
        eps = hp["eps_start"] + (hp["eps_end"] - hp["eps_start"]) * min(
            1.0, episode / decay_span
        )
        state = init(spec, level, env_seeds.next_u64())
        key = observe(state).key()
        ep_return, length = 0.0, 0
        while state.status is Status.ONGOING:
            if rng.random() < eps:
                a = int(rng.integers(N_ACTIONS))
            else:
                a = int(np.argmax(table.row(key)))
            out = advance_inplace(state, ACTIONS[a])
            key2 = observe(state).key()
            terminal = state.status is not Status.ONGOING
            q_update(table, key, a, out.reward, key2, terminal)
            key = key2
            ep_return += out.reward
            length += 1
        curve.entries.append((episode, ep_return, length))
    return QPolicy(table), curve


def _train_ac(spec, level, episodes, env_seeds, rng, hp):
    probe = observe(init(spec, level, 0))
    dim = len(encode_features(probe, spec.time_limit))
    model = ACModel.zeros(dim, n_steps=int(hp["n_steps"]), learning_rate=hp["learning_rate"])
    gamma = hp["gamma"]
    curve = LearningCurve()
    action_ids = np.arange(N_ACTIONS)
    for episode in range(episodes):
        state = init(spec, level, env_seeds.next_u64())
        x = encode_features(observe(state), spec.time_limit)
        ep_return, length = 0.0, 0
        seg_x, seg_a, seg_r = [], [], []
        while state.status is Status.ONGOING:
            probs = softmax_probs(model.policy_weights, x)
            a = int(rng.choice(action_ids, p=probs))
            out = advance_inplace(state, ACTIONS[a])
            x_next = encode_features(observe(state), spec.time_limit)
            terminal = state.status is not Status.ONGOING
            seg_x.append(x)
            seg_a.append(a)
            seg_r.append(float(out.reward))
            if terminal or len(seg_r) >= model.n_steps:
                bootstrap = 0.0 if terminal else model.value(x_next)
                ac_update(model, seg_x, seg_a, seg_r, gamma, bootstrap)
                seg_x, seg_a, seg_r = [], [], []
            x = x_next
            ep_return += out.reward
            length += 1
        curve.entries.append((episode, ep_return, length))
    return ACPolicy(model, spec.time_limit), curve


POLICY_FORMAT = "dgdl-policy"
POLICY_VERSION = 1


def save_policy(policy, path) -> None:
    """Serialize a learned policy to a versioned JSON file."""
    if isinstance(policy, QPolicy):
        doc = {
            "format": POLICY_FORMAT,
            "version": POLICY_VERSION,
            "kind": "q",
            "alpha": policy.table.alpha,
            "gamma": policy.table.gamma,
            "entries": {
                key.hex(): [float(v) for v in row]
                for key, row in policy.table.values.items()
            },
        }
    elif isinstance(policy, ACPolicy):
        doc = {
            "format": POLICY_FORMAT,
            "version": POLICY_VERSION,
            "kind": "ac",
            "n_steps": policy.model.n_steps,
            "learning_rate": policy.model.learning_rate,
            "time_limit": policy.time_limit,
            "policy_weights": policy.model.policy_weights.tolist(),
            "value_weights": policy.model.value_weights.tolist(),
        }
    else:
        raise TypeError(f"cannot serialize policy of type {type(policy).__name__}")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle)


def load_policy(path):
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    if doc.get("format") != POLICY_FORMAT or doc.get("version") != POLICY_VERSION:
        raise ValueError(f"not a compatible policy file: {path}")
    if doc["kind"] == "q":
        table = QTable(alpha=doc["alpha"], gamma=doc["gamma"])
        table.values = {
            bytes.fromhex(key): np.array(row) for key, row in doc["entries"].items()
        }
        return QPolicy(table)
    if doc["kind"] == "ac":
        model = ACModel(
            np.array(doc["policy_weights"]),
            np.array(doc["value_weights"]),
            n_steps=doc["n_steps"],
            learning_rate=doc["learning_rate"],
        )
        return ACPolicy(model, doc["time_limit"])
    raise ValueError(f"unknown policy kind {doc['kind']!r}")
