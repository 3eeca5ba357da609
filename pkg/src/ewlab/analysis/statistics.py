"""Trajectory statistics: probability of strict NE play, the set Z, verdicts."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..engine import Trajectory
from ..game import (
    Game,
    MixedProfile,
    PureProfile,
    is_neep,
    strict_nash_equilibria,
)


def L_statistic(game: Game, p: MixedProfile) -> float:
    """Probability under ``p`` of playing some strict NE (0 if there is none)."""
    return float(sum(p.prob(a) for a in strict_nash_equilibria(game)))


def _face_distance(q: np.ndarray, zero: set[int]) -> float:
    # Sup-norm distance from q to {r in simplex : r_b = 0 for b in zero}.
    if not zero:
        return 0.0
    if len(zero) == q.size:
        return np.inf
    idx = list(zero)
    mass = float(q[idx].sum())
    return max(float(q[idx].max()), mass / (q.size - len(idx)))


def distance_to_Z(game: Game, p: MixedProfile, max_patterns: int = 10**6) -> float:
    """Sup-norm distance from ``p`` to ``Z = {q : q(a) = 0 for every strict NE a}``.

    A product distribution gives ``a`` probability zero iff some player ``i``
    puts zero on ``a_i``, so Z is the union, over the ways of assigning each
    strict NE to one such player, of faces of the product of simplices.  The
    distance to each face has a closed form; the union is enumerated exactly.
    """
    p.check_game(game)
    sne = strict_nash_equilibria(game)
    if not sne:
        return 0.0
    n = game.num_players
    if n ** len(sne) > max_patterns:
        raise ValueError(
            f"{n}^{len(sne)} assignment patterns exceed the enumeration cap {max_patterns}"
        )
    best = np.inf
    for choice in itertools.product(range(n), repeat=len(sne)):
        zeros: list[set[int]] = [set() for _ in range(n)]
        for a, i in zip(sne, choice):
            zeros[i].add(a[i])
        d = max(_face_distance(p[i], zeros[i]) for i in range(n))
        best = min(best, d)
    return float(best)


def _set_prob(profiles: np.ndarray, B: Sequence[PureProfile]) -> np.ndarray:
    out = np.zeros(len(profiles))
    for b in B:
        term = np.ones(len(profiles))
        for i, x in enumerate(b):
            term = term * profiles[:, i, x]
        out += term
    return out


def levy_average(traj: Trajectory, B: Iterable[Sequence[int]]) -> np.ndarray:
    """``s_t = (1/t) sum_{k<t} (1[a^k in B] - p^k(B))`` for ``t = 1..T``."""
    T = len(traj)
    if T == 0:
        raise ValueError("trajectory has no recorded actions")
    B = [tuple(int(x) for x in b) for b in B]
    Bset = set(B)
    hits = np.array([tuple(int(x) for x in a) in Bset for a in traj.actions], dtype=float)
    probs = _set_prob(traj.profiles[:T], B)
    return np.cumsum(hits - probs) / np.arange(1, T + 1)


@dataclass(frozen=True, eq=False)
class ConvergenceVerdict:
    kind: str  # "absorbed", "approaching_Z", "converged_to" or "undecided"
    L_terminal: float
    distance_to_Z: float
    equilibrium: PureProfile | None = None
    candidate: MixedProfile | None = None
    candidate_is_neep: bool | None = None

    def label(self, game: Game) -> str:
        if self.kind == "absorbed":
            return f"absorbed{game.format_profile(self.equilibrium)}"
        return self.kind

    def summary(self, game: Game) -> str:
        lines = [
            f"verdict      {self.label(game)}",
            f"L_T          {self.L_terminal:.4g}",
            f"d(p_T, Z)    {self.distance_to_Z:.4g}",
        ]
        if self.candidate is not None:
            lines.append("candidate    " + " x ".join(
                "[" + ",".join(f"{x:.4g}" for x in q) + "]" for q in self.candidate.probs))
            lines.append(f"is_neep      {self.candidate_is_neep}")
        return "\n".join(lines)

    def row(self, game: Game) -> dict:
        return {
            "verdict": self.label(game),
            "L_T": f"{self.L_terminal:.17g}",
            "distance_to_Z": f"{self.distance_to_Z:.17g}",
            "candidate_is_neep": "" if self.candidate_is_neep is None else str(self.candidate_is_neep),
        }


def trailing_window(length: int) -> int:
    """1000 stages or 10% of the trajectory, whichever is smaller."""
    return min(1000, length // 10)


def classify_trajectory(game: Game, traj: Trajectory, tol: float = 1e-4) -> ConvergenceVerdict:
    """Finite-sample verdict on where a recorded run is heading.

    Checked in order: absorbed at a strict NE (constant actions over the
    trailing window and ``p^T`` within ``tol``), approaching Z, stabilised at
    a non-vertex profile (annotated with the NEEP test), undecided.
    """
    T = len(traj)
    pT = traj.terminal
    L = L_statistic(game, pT)
    dZ = distance_to_Z(game, pT)
    w = trailing_window(T)
    tail_actions = traj.actions[T - w:T]
    for a in strict_nash_equilibria(game):
        if np.all(tail_actions == np.array(a)) and pT.distance(MixedProfile.dirac(game, a)) < tol:
            return ConvergenceVerdict("absorbed", L, dZ, equilibrium=a)
    if strict_nash_equilibria(game) and L < tol and dZ < tol:
        return ConvergenceVerdict("approaching_Z", L, dZ)
    if w > 0:
        window = traj.profiles[len(traj.profiles) - 1 - w:]
        variation = float(np.max(np.abs(window - window[-1])))
        if variation < tol and not pT.is_vertex(tol):
            return ConvergenceVerdict(
                "converged_to", L, dZ, candidate=pT, candidate_is_neep=is_neep(game, pT, tol)
            )
    return ConvergenceVerdict("undecided", L, dZ)
