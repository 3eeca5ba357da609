"""Exponential weights with constant learning rates, as a Markov chain on profiles.

Weights are kept as cumulative log-weights ``log w0_i(a) + eta_i * sum_k u_i(a, a^k_{-i})``
and normalised with a max-shift when read, so long horizons never overflow.

Random numbers: every trajectory owns one ``numpy.random.Generator`` seeded
from ``EWConfig.seed``.  Stage ``t`` consumes the uniforms ``t*n .. t*n + n-1``
of that stream, one per player in player order, and player ``i`` plays the
first action whose cumulative probability exceeds its uniform.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import _kernel
from .game import Game, MixedProfile, PureProfile, strict_nash_equilibria

DEFAULT_HORIZON = 10**6
DEFAULT_EPS = 1e-4
_NO_LIMIT = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class EWConfig:
    game: Game
    learning_rates: tuple[float, ...]
    initial_profile: MixedProfile
    seed: int = 0

    def __post_init__(self):
        rates = np.broadcast_to(
            np.asarray(self.learning_rates, dtype=float), (self.game.num_players,)
        )
        if not np.all(rates > 0) or not np.all(np.isfinite(rates)):
            raise ValueError("learning rates must be positive and finite")
        object.__setattr__(self, "learning_rates", tuple(float(r) for r in rates))
        self.initial_profile.check_game(self.game)
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", seed)

    @classmethod
    def create(cls, game: Game, eta=0.1, p0: MixedProfile | None = None, seed: int = 0):
        return cls(game, eta, p0 if p0 is not None else MixedProfile.uniform(game), seed)

    def with_seed(self, seed: int) -> "EWConfig":
        return EWConfig(self.game, self.learning_rates, self.initial_profile, seed)

    def digest(self) -> str:
        doc = {
            "game": self.game.to_dict(),
            "learning_rates": [repr(r) for r in self.learning_rates],
            "initial_profile": [[repr(x) for x in q] for q in self.initial_profile.tolist()],
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class EWState:
    config: EWConfig
    log_weights: tuple[np.ndarray, ...]
    t: int = 0

    @classmethod
    def initial(cls, config: EWConfig) -> "EWState":
        with np.errstate(divide="ignore"):
            logw = tuple(np.log(q) for q in config.initial_profile.probs)
        return cls(config, logw, 0)

    @property
    def game(self) -> Game:
        return self.config.game


def _softmax(logw: np.ndarray) -> np.ndarray:
    e = np.exp(logw - logw.max())
    return e / e.sum()


def mixed_profile(state: EWState) -> MixedProfile:
    """Current mixed profile: each player's normalised exponential weights."""
    return MixedProfile(tuple(_softmax(lw) for lw in state.log_weights))


def _sample(q: np.ndarray, u: float) -> int:
    c = np.cumsum(q)
    k = int(np.count_nonzero(c <= u))
    if k >= q.size or q[k] == 0.0:
        k = int(np.flatnonzero(q > 0)[-1])
    return k


def payoff_vectors(game: Game, a: Sequence[int]) -> list[np.ndarray]:
    """For each player ``i`` the vector ``b -> u_i(b, a_{-i})``."""
    out = []
    for i in range(game.num_players):
        idx = list(a)
        idx[i] = slice(None)
        out.append(game.payoffs[(i, *idx)])
    return out


def step(state: EWState, rng: np.random.Generator) -> tuple[PureProfile, EWState]:
    """Sample ``a^t ~ p^t`` and apply the weight update.

    Draws one uniform per player, in player order.
    """
    game = state.game
    p = mixed_profile(state)
    u = rng.random(game.num_players)
    a = tuple(_sample(q, x) for q, x in zip(p.probs, u))
    return a, apply_actions(state, a)


def apply_actions(state: EWState, a: Sequence[int]) -> EWState:
    """Deterministic part of a step: update the log-weights after observing ``a``."""
    game = state.game
    a = game.check_profile(a)
    rates = state.config.learning_rates
    new = tuple(
        lw + eta * v
        for lw, eta, v in zip(state.log_weights, rates, payoff_vectors(game, a))
    )
    return EWState(state.config, new, state.t + 1)


def closed_form_profile(config: EWConfig, history: Sequence[Sequence[int]]) -> MixedProfile:
    """Profile after ``history`` computed directly from ``p0`` and summed payoff gaps.

    ``p_i(a) = p0_i(a) / sum_b p0_i(b) exp(eta_i * sum_k [u_i(b, a^k_{-i}) - u_i(a, a^k_{-i})])``
    """
    game = config.game
    totals = [np.zeros(m) for m in game.action_counts]
    for a in history:
        for tot, v in zip(totals, payoff_vectors(game, game.check_profile(a))):
            tot += v
    probs = []
    for p0, eta, tot in zip(config.initial_profile.probs, config.learning_rates, totals):
        gaps = tot[None, :] - tot[:, None]  # gaps[a, b] = S(b) - S(a)
        with np.errstate(over="ignore"):
            denom = (p0[None, :] * np.exp(eta * gaps)).sum(axis=1)
        q = np.where(p0 > 0, p0 / np.where(p0 > 0, denom, 1.0), 0.0)
        probs.append(q)
    return MixedProfile(tuple(probs))


# --- simulation --------------------------------------------------------------


@dataclass(frozen=True)
class StoppingRule:
    """Stop at ``horizon`` stages, or earlier on absorption / approach to Z.

    ``absorb_eps``: stop once the sup-norm distance from ``p^t`` to some strict
    NE drops below it.  ``z_eps``: stop once ``p^t(SNE)`` drops below it.
    ``horizon=None`` means no cap.
    """

    horizon: int | None = DEFAULT_HORIZON
    absorb_eps: float | None = None
    z_eps: float | None = None

    @classmethod
    def fixed(cls, horizon: int) -> "StoppingRule":
        return cls(horizon=horizon)

    @classmethod
    def absorption(cls, eps: float = DEFAULT_EPS, horizon: int | None = DEFAULT_HORIZON,
                   z_eps: float | None = None) -> "StoppingRule":
        return cls(horizon=horizon, absorb_eps=eps, z_eps=z_eps)


@dataclass(frozen=True)
class StopReason:
    kind: str  # "absorbed", "horizon", "near_Z" or "stationary"
    t: int
    equilibrium: PureProfile | None = None

    def format(self, game: Game) -> str:
        if self.kind == "absorbed":
            return f"absorbed{game.format_profile(self.equilibrium)} at t={self.t}"
        return f"{self.kind} at t={self.t}"


@lru_cache(maxsize=64)
def _arrays(game: Game):
    counts = np.array(game.action_counts, dtype=np.int64)
    strides = np.ones(game.num_players, dtype=np.int64)
    for i in range(game.num_players - 2, -1, -1):
        strides[i] = strides[i + 1] * counts[i + 1]
    flat = np.ascontiguousarray(game.payoffs.reshape(game.num_players, -1))
    sne = np.array(strict_nash_equilibria(game), dtype=np.int64).reshape(-1, game.num_players)
    return counts, strides, flat, sne


def _padded_log(config: EWConfig) -> np.ndarray:
    game = config.game
    logw = np.full((game.num_players, max(game.action_counts)), -np.inf)
    with np.errstate(divide="ignore"):
        for i, q in enumerate(config.initial_profile.probs):
            logw[i, : q.size] = np.log(q)
    return logw


def _check_rule(game: Game, stop: StoppingRule, sne) -> int:
    if stop.absorb_eps is not None and stop.absorb_eps <= 0:
        raise ValueError("absorption tolerance must be positive")
    if stop.horizon is None:
        if stop.absorb_eps is None:
            raise ValueError("a stopping rule needs a horizon or an absorption test")
        if len(sne) == 0 and stop.z_eps is None:
            raise ValueError("game has no strict NE to absorb into and the rule has no horizon")
        return _NO_LIMIT
    if stop.horizon < 0:
        raise ValueError("horizon must be non-negative")
    return int(stop.horizon)


def _drive(config: EWConfig, stop: StoppingRule, record: bool):
    game = config.game
    counts, strides, flat, sne = _arrays(game)
    horizon = _check_rule(game, stop, sne)
    rates = np.array(config.learning_rates)
    logw = _padded_log(config)
    n, maxa = logw.shape
    absorb = float(stop.absorb_eps or 0.0)
    z_eps = float(stop.z_eps or 0.0)
    probs_chunks, act_chunks = [], []

    p0 = config.initial_profile
    if absorb > 0 and p0.is_vertex() and not any(
        all(p0[i][s[i]] == 1.0 for i in range(n)) for s in sne
    ):
        # A pure profile that is not a strict NE is a fixed point of the chain.
        if record:
            probs_chunks.append(np.exp(logw)[None])
        return StopReason("stationary", 0), np.exp(logw), probs_chunks, act_chunks

    rng = np.random.default_rng(config.seed)
    t = 0
    block = 256
    while True:
        nb = int(min(block, horizon - t))
        uni = rng.random((nb, n))
        rec_p = np.empty((nb + 1, n, maxa) if record else (1, n, maxa))
        rec_a = np.empty((nb, n) if record else (1, n), dtype=np.int64)
        status, t, idx, used = _kernel.advance(
            logw, counts, rates, flat, strides, sne, uni, t, horizon,
            absorb, z_eps, rec_p, rec_a, record,
        )
        if record:
            probs_chunks.append(rec_p[:used].copy())
            act_chunks.append(rec_a[: used if status == _kernel.RUNNING else used - 1].copy())
        if status != _kernel.RUNNING:
            break
        block = min(2 * block, 1 << 16)

    terminal = np.zeros((n, maxa))
    _kernel.softmax_rows(logw, counts, terminal)
    if status == _kernel.ABSORBED:
        reason = StopReason("absorbed", t, tuple(int(x) for x in sne[idx]))
    elif status == _kernel.NEAR_Z:
        reason = StopReason("near_Z", t)
    else:
        reason = StopReason("horizon", t)
    return reason, terminal, probs_chunks, act_chunks


def _unpad(game: Game, rows: np.ndarray) -> MixedProfile:
    return MixedProfile(tuple(rows[i, :m] for i, m in enumerate(game.action_counts)))


@dataclass(frozen=True, eq=False)
class RunOutcome:
    """Result of an unrecorded run."""

    config: EWConfig
    stop: StopReason
    terminal: MixedProfile


def run(config: EWConfig, stop: StoppingRule) -> RunOutcome:
    """Simulate without recording the path; only the stop reason and ``p^T``."""
    reason, terminal, _, _ = _drive(config, stop, record=False)
    return RunOutcome(config, reason, _unpad(config.game, terminal))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded path: ``profiles[t]`` is ``p^t`` (zero-padded), ``actions[t]`` is ``a^t``."""

    config: EWConfig
    profiles: np.ndarray
    actions: np.ndarray
    stop: StopReason = field(default=None)

    @property
    def game(self) -> Game:
        return self.config.game

    def __len__(self) -> int:
        return len(self.actions)

    def profile(self, t: int) -> MixedProfile:
        return _unpad(self.game, self.profiles[t])

    @property
    def terminal(self) -> MixedProfile:
        return self.profile(len(self.profiles) - 1)

    def history(self) -> list[PureProfile]:
        return [tuple(int(x) for x in a) for a in self.actions]

    def write_csv(self, out: str | Path | TextIO) -> None:
        """CSV with one row per stage: ``t``, every ``p_{i,a}``, realised labels."""
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        game = self.game
        out.write(f"# config_digest={self.config.digest()} seed={self.config.seed}"
                  f" stop={self.stop.kind} stop_t={self.stop.t}\n")
        w = csv.writer(out, lineterminator="\n")
        header = ["t"]
        for i, labels in enumerate(game.labels):
            header += [f"p{i + 1}_{lab}" for lab in labels]
        header += [f"a{i + 1}" for i in range(game.num_players)]
        w.writerow(header)
        for t in range(len(self.profiles)):
            row = [t]
            for i, m in enumerate(game.action_counts):
                row += [f"{x:.17g}" for x in self.profiles[t, i, :m]]
            if t < len(self.actions):
                row += [game.labels[i][a] for i, a in enumerate(self.actions[t])]
            else:
                row += [""] * game.num_players
            w.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def simulate(config: EWConfig, stop: StoppingRule | None = None) -> Trajectory:
    """Run the chain from ``config`` and record every ``(p^t, a^t)``.

    Deterministic in ``config`` (the seed included).  The default rule is the
    absorption rule with ``eps=1e-4`` and a ``10**6`` stage cap.
    """
    stop = stop or StoppingRule.absorption()
    reason, _, pchunks, achunks = _drive(config, stop, record=True)
    profiles = np.concatenate(pchunks)
    actions = (
        np.concatenate(achunks) if achunks else np.empty((0, config.game.num_players), np.int64)
    )
    return Trajectory(config, profiles, actions, reason)
