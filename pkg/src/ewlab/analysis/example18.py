"""The counting chain of the 2x2 game with a single (-1, -1) cell at (B, R).

Under EW the mixed profile depends only on ``B_t`` (number of B plays by
player 1) and ``R_t`` (number of R plays by player 2):

    p_1^t(T) = x / (x + (1-x) exp(-eta_1 R_t)),
    p_2^t(L) = y / (y + (1-y) exp(-eta_2 B_t)),

so ``(B_t, R_t)`` is a Markov chain on N^2 with conditionally independent
unit increments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import EWConfig, StoppingRule, simulate
from ..game import Game, MixedProfile, fixture
from .products import Enclosure, enclose_product


def _check_interior(x: float, y: float) -> None:
    if not (0 < x < 1 and 0 < y < 1):
        raise ValueError("x and y must lie strictly between 0 and 1")


def stay_probabilities(x, y, eta1, eta2, B, R):
    """``(P(B_{t+1} = B_t), P(R_{t+1} = R_t))`` given the current counts."""
    B = np.asarray(B, float)
    R = np.asarray(R, float)
    pT = x / (x + (1 - x) * np.exp(-eta1 * R))
    pL = y / (y + (1 - y) * np.exp(-eta2 * B))
    return pT, pL


@dataclass(frozen=True, eq=False)
class CountingChain:
    """Paths of ``(B_t, R_t)`` for ``t = 0..horizon``; arrays of shape ``(runs, horizon + 1)``."""

    x: float
    y: float
    eta1: float
    eta2: float
    seed: int
    B: np.ndarray
    R: np.ndarray

    @property
    def runs(self) -> int:
        return self.B.shape[0]

    def never_R(self) -> np.ndarray:
        """Runs in which player 2 played L at every simulated stage."""
        return self.R[:, -1] == 0

    def never_B(self) -> np.ndarray:
        return self.B[:, -1] == 0


def example18_chain(x: float, y: float, eta1: float, eta2: float, seed: int,
                    horizon: int = 1000, runs: int = 1) -> CountingChain:
    """Simulate ``runs`` independent copies of the counting chain.

    Stage ``t`` draws a ``(runs, 2)`` block of uniforms; column 0 drives B,
    column 1 drives R.
    """
    _check_interior(x, y)
    if eta1 <= 0 or eta2 <= 0:
        raise ValueError("learning rates must be positive")
    rng = np.random.default_rng(seed)
    B = np.zeros((runs, horizon + 1), dtype=np.int64)
    R = np.zeros((runs, horizon + 1), dtype=np.int64)
    b = np.zeros(runs, dtype=np.int64)
    r = np.zeros(runs, dtype=np.int64)
    for t in range(horizon):
        stayB, stayR = stay_probabilities(x, y, eta1, eta2, b, r)
        u = rng.random((runs, 2))
        b = b + (u[:, 0] >= stayB)
        r = r + (u[:, 1] >= stayR)
        B[:, t + 1] = b
        R[:, t + 1] = r
    return CountingChain(x, y, eta1, eta2, seed, B, R)


def jump_probabilities(x, y, eta1, eta2, B, R):
    """Transition probabilities of the chain observed only when it moves.

    Returns ``(P(+(1,0)), P(+(0,1)), P(+(1,1)))``.
    """
    B = np.asarray(B, float)
    R = np.asarray(R, float)
    e1 = np.exp(-eta1 * R)
    e2 = np.exp(-eta2 * B)
    w10 = y * (1 - x) * e1
    w01 = x * (1 - y) * e2
    w11 = (1 - x) * (1 - y) * e1 * e2
    s = w10 + w01 + w11
    return w10 / s, w01 / s, w11 / s


def always_L_probability(x: float, y: float, eta2: float, tol: float = 1e-10) -> Enclosure:
    """Enclose ``P(a^2_t = L for all t) = prod_t 1 / (1 + (1-y)/(y(1-x)) exp(-eta_2 t))``."""
    _check_interior(x, y)
    return enclose_product([[(1 - y) / (y * (1 - x))]], [[eta2]], tol)


def always_T_probability(x: float, y: float, eta1: float, tol: float = 1e-10) -> Enclosure:
    """Enclose ``P(a^1_t = T for all t) = prod_t 1 / (1 + (1-x)/(x(1-y)) exp(-eta_1 t))``."""
    _check_interior(x, y)
    return enclose_product([[(1 - x) / (x * (1 - y))]], [[eta1]], tol)


def counts_from_ew(x: float, y: float, eta1: float, eta2: float, checkpoints,
                   seeds, game: Game | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(B_t, R_t)`` at ``checkpoints`` read off full EW runs, one row per seed."""
    game = game or fixture("exa18")
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    horizon = int(checkpoints.max())
    p0 = MixedProfile.from_2x2(x, y)
    stop = StoppingRule.fixed(horizon)
    Bs = np.empty((len(seeds), len(checkpoints)), dtype=np.int64)
    Rs = np.empty_like(Bs)
    for j, s in enumerate(seeds):
        traj = simulate(EWConfig(game, (eta1, eta2), p0, int(s)), stop)
        cb = np.concatenate([[0], np.cumsum(traj.actions[:, 0] == 1)])
        cr = np.concatenate([[0], np.cumsum(traj.actions[:, 1] == 1)])
        Bs[j] = cb[checkpoints]
        Rs[j] = cr[checkpoints]
    return Bs, Rs


def ecdf_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    from scipy.stats import ks_2samp

    return float(ks_2samp(a, b).statistic)
