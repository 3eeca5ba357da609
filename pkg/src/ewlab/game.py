"""Finite normal-form games, mixed profiles and equilibrium notions.

A game with ``n`` players stores its payoffs as a dense array of shape
``(n, |A_1|, ..., |A_n|)`` so that ``payoffs[i][a]`` is player ``i``'s payoff
at the pure profile ``a``.  Pure profiles are plain tuples of action indices.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PureProfile = tuple[int, ...]

FIXTURES = (
    "ex1111",
    "exa1",
    "exa2",
    "exa3",
    "exa7",
    "exa18",
    "coord3",
    "matching_pennies",
    "chicken",
)

DEFAULT_TOL = 1e-9


class GameFormatError(ValueError):
    """Raised when a game document is malformed."""


@dataclass(frozen=True, eq=False)
class Game:
    payoffs: np.ndarray
    labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        u = np.array(self.payoffs, dtype=float)
        if u.ndim < 2 or u.shape[0] != u.ndim - 1:
            raise ValueError(
                f"payoff array must have shape (n, A_1, ..., A_n), got {u.shape}"
            )
        if not np.all(np.isfinite(u)):
            raise ValueError("payoffs must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "payoffs", u)
        if self.labels is None:
            labels = tuple(
                tuple(f"a{k}" for k in range(m)) for m in self.action_counts
            )
        else:
            labels = tuple(tuple(str(s) for s in row) for row in self.labels)
            if tuple(len(row) for row in labels) != self.action_counts:
                raise ValueError("action labels do not match the payoff shape")
        object.__setattr__(self, "labels", labels)

    @property
    def num_players(self) -> int:
        return self.payoffs.shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(self.payoffs.shape[1:])

    def profiles(self) -> Iterable[PureProfile]:
        """All pure profiles in lexicographic order."""
        return itertools.product(*(range(m) for m in self.action_counts))

    def payoff(self, player: int, a: Sequence[int]) -> float:
        return float(self.payoffs[(player, *a)])

    def check_profile(self, a: Sequence[int]) -> PureProfile:
        a = tuple(int(x) for x in a)
        if len(a) != self.num_players:
            raise ValueError(f"profile {a} has wrong length for {self.num_players} players")
        for i, (x, m) in enumerate(zip(a, self.action_counts)):
            if not 0 <= x < m:
                raise ValueError(f"action {x} out of range for player {i + 1}")
        return a

    def format_profile(self, a: Sequence[int]) -> str:
        return "(" + ",".join(self.labels[i][x] for i, x in enumerate(a)) + ")"

    def parse_profile(self, text: str) -> PureProfile:
        """Parse ``"T,L"`` (labels or integer indices) into a pure profile."""
        parts = [s.strip() for s in text.strip().strip("()").split(",")]
        if len(parts) != self.num_players:
            raise ValueError(f"expected {self.num_players} actions in {text!r}")
        out = []
        for i, s in enumerate(parts):
            if s in self.labels[i]:
                out.append(self.labels[i].index(s))
            elif s.isdigit():
                out.append(int(s))
            else:
                raise ValueError(f"unknown action {s!r} for player {i + 1}")
        return self.check_profile(out)

    def to_dict(self) -> dict:
        nested = np.moveaxis(self.payoffs, 0, -1).tolist()
        return {
            "players": self.num_players,
            "actions": [list(row) for row in self.labels],
            "payoffs": nested,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Game":
        for key in ("players", "actions", "payoffs"):
            if key not in doc:
                raise GameFormatError(f"missing field '{key}'")
        n = doc["players"]
        if not isinstance(n, int) or n < 1:
            raise GameFormatError(f"field 'players': expected positive integer, got {n!r}")
        actions = doc["actions"]
        if not isinstance(actions, list) or len(actions) != n:
            raise GameFormatError(f"field 'actions': expected {n} lists of labels")
        for i, row in enumerate(actions):
            if not isinstance(row, list) or not row:
                raise GameFormatError(f"field 'actions[{i}]': expected nonempty list")
        counts = [len(row) for row in actions]
        _check_nested(doc["payoffs"], counts, n, "payoffs")
        u = np.moveaxis(np.array(doc["payoffs"], dtype=float), -1, 0)
        return cls(u, tuple(tuple(map(str, row)) for row in actions))


def _check_nested(node, counts, n, path):
    if not counts:
        if not isinstance(node, list) or len(node) != n:
            raise GameFormatError(f"field '{path}': expected {n} payoffs")
        for k, v in enumerate(node):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                raise GameFormatError(f"field '{path}[{k}]': expected a finite number, got {v!r}")
        return
    if not isinstance(node, list) or len(node) != counts[0]:
        raise GameFormatError(f"field '{path}': expected a list of length {counts[0]}")
    for k, child in enumerate(node):
        _check_nested(child, counts[1:], n, f"{path}[{k}]")


def load_game(source: str | Path) -> Game:
    """Load a game from a JSON file, or a bundled fixture by name.

    ``fixtures/exa1``, ``exa1`` and ``exa1.json`` all resolve to the bundled
    fixture when no such file exists on disk.
    """
    path = Path(source)
    candidates = [path, path.with_name(path.name + ".json")]
    for cand in candidates:
        if cand.is_file():
            text = cand.read_text()
            break
    else:
        name = path.name.removesuffix(".json")
        if name not in FIXTURES:
            raise FileNotFoundError(f"no game file or fixture named {str(source)!r}")
        text = resources.files("ewlab.fixtures").joinpath(f"{name}.json").read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise GameFormatError("top level must be an object")
    return Game.from_dict(doc)


def fixture(name: str) -> Game:
    if name not in FIXTURES:
        raise KeyError(name)
    return load_game(name)


def save_game(game: Game, path: str | Path) -> None:
    Path(path).write_text(json.dumps(game.to_dict(), indent=1) + "\n")


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """One probability vector per player; ``p(a)`` is the product probability."""

    probs: tuple[np.ndarray, ...]
    tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        probs = []
        for i, q in enumerate(self.probs):
            q = np.array(q, dtype=float).reshape(-1)
            if q.size == 0 or not np.all(np.isfinite(q)):
                raise ValueError(f"player {i + 1}: probabilities must be finite")
            if np.any(q < 0) or np.any(q > 1):
                raise ValueError(f"player {i + 1}: probabilities must lie in [0, 1]")
            if abs(q.sum() - 1.0) > self.tol:
                raise ValueError(f"player {i + 1}: probabilities sum to {q.sum()!r}")
            q.setflags(write=False)
            probs.append(q)
        object.__setattr__(self, "probs", tuple(probs))

    @classmethod
    def uniform(cls, game: Game) -> "MixedProfile":
        return cls(tuple(np.full(m, 1.0 / m) for m in game.action_counts))

    @classmethod
    def dirac(cls, game: Game, a: Sequence[int]) -> "MixedProfile":
        a = game.check_profile(a)
        return cls(tuple(np.eye(m)[x] for m, x in zip(game.action_counts, a)))

    @classmethod
    def from_2x2(cls, x: float, y: float) -> "MixedProfile":
        """Profile ``(xT + (1-x)B, yL + (1-y)R)`` of a 2x2 game."""
        return cls((np.array([x, 1.0 - x]), np.array([y, 1.0 - y])))

    @property
    def num_players(self) -> int:
        return len(self.probs)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(q.size for q in self.probs)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.probs[i]

    def prob(self, a: Sequence[int]) -> float:
        return float(np.prod([q[x] for q, x in zip(self.probs, a)]))

    def prob_of(self, profiles: Iterable[Sequence[int]]) -> float:
        return float(sum(self.prob(a) for a in profiles))

    def support(self, i: int, tol: float = DEFAULT_TOL) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.probs[i] > tol))

    def is_vertex(self, tol: float = 0.0) -> bool:
        return all(q.max() >= 1.0 - tol for q in self.probs)

    def distance(self, other: "MixedProfile") -> float:
        """Sup-norm distance on the product of simplices."""
        return max(float(np.max(np.abs(p - q))) for p, q in zip(self.probs, other.probs))

    def tolist(self) -> list[list[float]]:
        return [q.tolist() for q in self.probs]

    def check_game(self, game: Game) -> None:
        if self.action_counts != game.action_counts:
            raise ValueError(
                f"profile shape {self.action_counts} does not match game {game.action_counts}"
            )


def expected_payoff(game: Game, p: MixedProfile, player: int) -> float:
    """Expected payoff ``sum_a p(a) u_i(a)`` of ``player`` under ``p``."""
    p.check_game(game)
    u = game.payoffs[player]
    for q in reversed(p.probs):
        u = u @ q
    return float(u)


def action_values(game: Game, p: MixedProfile, player: int) -> np.ndarray:
    """Payoffs ``u_i(b, p_{-i})`` of each pure action ``b`` of ``player``."""
    p.check_game(game)
    u = np.moveaxis(game.payoffs[player], player, 0)
    for j in reversed(range(game.num_players)):
        if j != player:
            u = u @ p[j]
    return np.asarray(u, dtype=float)


def strict_nash_equilibria(game: Game) -> list[PureProfile]:
    """Pure profiles where every unilateral deviation strictly loses, sorted."""
    strict = np.ones(game.action_counts, dtype=bool)
    for i, m in enumerate(game.action_counts):
        u = game.payoffs[i]
        if m == 1:
            continue
        srt = np.sort(u, axis=i)
        top = np.take(srt, [-1], axis=i)
        second = np.take(srt, [-2], axis=i)
        strict &= (u == top) & (top > second)
    return [tuple(int(x) for x in a) for a in np.argwhere(strict)]


def is_nash(game: Game, p: MixedProfile, tol: float = DEFAULT_TOL) -> bool:
    for i in range(game.num_players):
        vals = action_values(game, p, i)
        if vals.max() - float(vals @ p[i]) > tol:
            return False
    return True


def is_equalizing(game: Game, p: MixedProfile, tol: float = DEFAULT_TOL) -> bool:
    """Support actions of each player earn identical payoffs against every support profile."""
    supports = [p.support(i, tol) for i in range(game.num_players)]
    for i in range(game.num_players):
        block = game.payoffs[i][np.ix_(*supports)]
        spread = block.max(axis=i) - block.min(axis=i)
        if spread.size and spread.max() > tol:
            return False
    return True


def is_neep(game: Game, p: MixedProfile, tol: float = DEFAULT_TOL) -> bool:
    """Nash equilibrium with equalizing payoffs; supports are ``{a: p_i(a) > tol}``."""
    p.check_game(game)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return is_nash(game, p, tol) and is_equalizing(game, p, tol)


def is_strong_coordination(game: Game) -> bool:
    counts = game.action_counts
    if len(set(counts)) != 1:
        return False
    for a in game.profiles():
        u = game.payoffs[(slice(None), *a)]
        if len(set(a)) == 1:
            if np.any(u <= 0):
                return False
        elif np.any(u != 0):
            return False
    return True


# --- two-player NEEP enumeration -------------------------------------------


@dataclass(frozen=True, eq=False)
class NeepFactor:
    """One player's share of a NEEP component.

    The set is ``{q in simplex : q = 0 off support, constraints @ q[support] <= tol}``,
    with ``vertices`` listing its extreme points in full action coordinates.
    """

    player: int
    num_actions: int
    support: tuple[int, ...]
    constraints: np.ndarray
    vertices: np.ndarray

    @property
    def dim(self) -> int:
        if len(self.vertices) <= 1:
            return 0
        return int(np.linalg.matrix_rank(self.vertices[1:] - self.vertices[0], tol=1e-10))

    def contains(self, q: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
        off = np.setdiff1d(np.arange(self.num_actions), self.support)
        if off.size and np.any(q[off] > tol):
            return False
        if self.constraints.size == 0:
            return True
        return bool(np.all(self.constraints @ q[list(self.support)] <= tol))


@dataclass(frozen=True, eq=False)
class NeepComponent:
    """Closure of the NEEP set with a fixed support pair: a product of two polytopes."""

    factors: tuple[NeepFactor, NeepFactor]

    @property
    def supports(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(f.support for f in self.factors)

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def kind(self) -> str:
        return {0: "point", 1: "segment"}.get(self.dim, "polytope")

    def contains(self, p: MixedProfile, tol: float = DEFAULT_TOL) -> bool:
        return all(f.contains(p[f.player], tol) for f in self.factors)

    def endpoints(self) -> tuple[MixedProfile, MixedProfile]:
        """Endpoints of a segment (or the point twice)."""
        if self.dim > 1:
            raise ValueError("component is not a point or a segment")
        ends = []
        for pick in (0, -1):
            ends.append(
                MixedProfile(tuple(f.vertices[pick if f.dim else 0] for f in self.factors))
            )
        return ends[0], ends[1]

    def sample(self, k: int, rng: np.random.Generator | None = None) -> list[MixedProfile]:
        """``k`` profiles from the component, evenly spaced along segments."""
        if self.dim <= 1:
            lo, hi = self.endpoints()
            ts = np.linspace(0.0, 1.0, k)
            return [
                MixedProfile(tuple((1 - t) * a + t * b for a, b in zip(lo.probs, hi.probs)))
                for t in ts
            ]
        rng = rng or np.random.default_rng(0)
        out = []
        for _ in range(k):
            qs = []
            for f in self.factors:
                w = rng.dirichlet(np.ones(len(f.vertices)))
                q = w @ f.vertices
                qs.append(q / q.sum())
            out.append(MixedProfile(tuple(qs)))
        return out

    def describe(self, game: Game) -> str:
        parts = []
        for f in self.factors:
            labels = game.labels[f.player]
            verts = ["+".join(
                f"{v[k]:.4g}{labels[k]}" if v[k] != 1 else labels[k]
                for k in np.flatnonzero(v > 1e-12)
            ) for v in f.vertices]
            parts.append(verts[0] if len(verts) == 1 else "[" + " .. ".join(verts) + "]")
        return f"{self.kind}: (" + ", ".join(parts) + ")"


def _simplex_vertices(G: np.ndarray, tol: float) -> np.ndarray:
    # Extreme points of {q >= 0, sum q = 1, G q <= 0} by brute-force active sets.
    d = G.shape[1]
    rows = [g for g in G] + [-np.eye(d)[k] for k in range(d)]
    found: list[np.ndarray] = []
    for active in itertools.combinations(range(len(rows)), d - 1):
        A = np.vstack([np.ones(d)] + [rows[r] for r in active]) if active else np.ones((1, d))
        rhs = np.zeros(A.shape[0])
        rhs[0] = 1.0
        if np.linalg.matrix_rank(A) < d:
            continue
        q = np.linalg.solve(A, rhs)
        if np.any(q < -1e-12) or (G.size and np.any(G @ q > tol)):
            continue
        q = np.clip(q, 0.0, None)
        q /= q.sum()
        if not any(np.allclose(q, v, atol=1e-12) for v in found):
            found.append(q)
    found.sort(key=lambda v: tuple(-v))
    return np.array(found).reshape(len(found), d)


def _factor(game: Game, player: int, supports, tol: float) -> NeepFactor | None:
    # Constraints on `player`'s mixture come from the opponent's Nash conditions.
    other = 1 - player
    S, T = supports[player], supports[other]
    u = np.moveaxis(game.payoffs[other], other, 0)  # u[b_other, a_player]
    ref = T[0]
    G = np.array(
        [u[b, list(S)] - u[ref, list(S)] for b in range(game.action_counts[other]) if b not in T]
    ).reshape(-1, len(S))
    verts = _simplex_vertices(G, tol)
    if len(verts) == 0:
        return None
    full = np.zeros((len(verts), game.action_counts[player]))
    full[:, list(S)] = verts
    G.setflags(write=False)
    full.setflags(write=False)
    return NeepFactor(player, game.action_counts[player], tuple(S), G, full)


def _equalizing_supports(game: Game, supports, tol: float) -> bool:
    for i in range(2):
        block = game.payoffs[i][np.ix_(*supports)]
        spread = block.max(axis=i) - block.min(axis=i)
        if spread.max() > tol:
            return False
    return True


def _nonempty_subsets(m: int):
    for r in range(1, m + 1):
        yield from itertools.combinations(range(m), r)


def enumerate_neep_2p(game: Game, tol: float = DEFAULT_TOL) -> list[NeepComponent]:
    """All NEEP of a two-player game as maximal closed components.

    Each support pair passing the equalizing test contributes the product of
    two polytopes cut out by the opponents' Nash inequalities; components
    contained in another one are dropped.
    """
    if game.num_players != 2:
        raise ValueError("NEEP enumeration supports two-player games only")
    comps: list[NeepComponent] = []
    m1, m2 = game.action_counts
    for S1 in _nonempty_subsets(m1):
        for S2 in _nonempty_subsets(m2):
            supports = (S1, S2)
            if not _equalizing_supports(game, supports, tol):
                continue
            f1 = _factor(game, 0, supports, tol)
            f2 = _factor(game, 1, supports, tol)
            if f1 is None or f2 is None:
                continue
            comps.append(NeepComponent((f1, f2)))

    def inside(c: NeepComponent, d: NeepComponent) -> bool:
        return all(
            all(fd.contains(v, tol) for v in fc.vertices)
            for fc, fd in zip(c.factors, d.factors)
        )

    kept = []
    for k, c in enumerate(comps):
        dominated = any(
            j != k and inside(c, d) and not (inside(d, c) and j > k)
            for j, d in enumerate(comps)
        )
        if not dominated:
            kept.append(c)
    return kept


def is_maximal_support_neep(game: Game, p: MixedProfile, tol: float = DEFAULT_TOL) -> bool:
    """NEEP such that no NEEP has a strictly larger support (two players)."""
    if not is_neep(game, p, tol):
        return False
    supp = [set(p.support(i, tol)) for i in range(2)]
    m1, m2 = game.action_counts
    for S1 in _nonempty_subsets(m1):
        for S2 in _nonempty_subsets(m2):
            bigger = [set(S1), set(S2)]
            if not (supp[0] <= bigger[0] and supp[1] <= bigger[1]) or bigger == supp:
                continue
            if not _equalizing_supports(game, (S1, S2), tol):
                continue
            f1 = _factor(game, 0, (S1, S2), tol)
            f2 = _factor(game, 1, (S1, S2), tol)
            if f1 is None or f2 is None:
                continue
            # The relative interior has exactly this support iff the barycentre does.
            if all(
                np.all(f.vertices.mean(axis=0)[list(f.support)] > tol) for f in (f1, f2)
            ):
                return False
    return True
