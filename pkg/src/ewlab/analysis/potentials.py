"""Coordination potentials and their exact one-step expectations.

For a strong coordination game with common action set ``S`` (size ``m``)

    Z_t(k) = 1 / prod_i p_i^t(k),        Z_t = min_k Z_t(k),

and ``E(Z_{t+1}(k) | F_t) = X_t * Z_t(k)`` where ``X_t`` is an average over
the realised profile of per-player normalisers.  ``X_t`` is computed here
twice: by brute-force enumeration of the ``m^n`` profiles, and by the
case expansion in the constants ``alpha_i(k) = exp(eta_i u_i(k,...,k)) - 1``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..engine import EWState, mixed_profile
from ..game import Game, MixedProfile, is_strong_coordination

DEFAULT_ENUMERATION_CAP = 10**6


def _require_coordination(game: Game) -> None:
    if not is_strong_coordination(game):
        raise ValueError("game is not a strong coordination game")


def _diagonal_products(p: MixedProfile) -> np.ndarray:
    return np.prod(np.vstack(p.probs), axis=0)


def potential_Z(game: Game, p: MixedProfile) -> float:
    """``min_k 1 / prod_i p_i(k)``; ``inf`` when every diagonal product vanishes."""
    _require_coordination(game)
    p.check_game(game)
    best = float(_diagonal_products(p).max())
    return math.inf if best == 0.0 else 1.0 / best


def argmin_Z(p: MixedProfile) -> int:
    """Diagonal action achieving ``Z`` (smallest index on ties)."""
    return int(np.argmax(_diagonal_products(p)))


def alphas(game: Game, learning_rates) -> np.ndarray:
    """``alpha[i, k] = exp(eta_i u_i(k,...,k)) - 1``."""
    _require_coordination(game)
    n, m = game.num_players, game.action_counts[0]
    eta = np.broadcast_to(np.asarray(learning_rates, float), (n,))
    diag = np.array([[game.payoffs[(i,) + (k,) * n] for k in range(m)] for i in range(n)])
    return np.expm1(eta[:, None] * diag)


def _log_normalisers(game: Game, P: np.ndarray, eta: np.ndarray, k: int) -> list[np.ndarray]:
    # For each player i a tensor over the opponents' actions (player i's axis
    # kept with length 1) holding log(1 / p_i^{t+1}(k)) = log sum_b p_i(b) e^{eta_i(u_i(b,.) - u_i(k,.))}.
    n = game.num_players
    out = []
    for i in range(n):
        U = np.moveaxis(game.payoffs[i], i, -1)
        gaps = eta[i] * (U - U[..., k:k + 1])
        shift = gaps.max(axis=-1, keepdims=True)
        val = shift[..., 0] + np.log(np.exp(gaps - shift) @ P[i])
        out.append(np.expand_dims(val, i))
    return out


def enumerate_X(game: Game, p: MixedProfile, learning_rates, k: int,
                cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """``X_t = E(prod_i p_i^t(k) / p_i^{t+1}(k))`` by enumerating every realised profile."""
    _require_coordination(game)
    n, m = game.num_players, game.action_counts[0]
    if m ** n > cap:
        raise ValueError(f"{m}^{n} profiles exceed the enumeration cap {cap}")
    eta = np.broadcast_to(np.asarray(learning_rates, float), (n,))
    P = [np.asarray(q, float) for q in p.probs]
    log_ratio = sum(_log_normalisers(game, P, eta, k))
    weight = P[0]
    for i in range(1, n):
        weight = np.multiply.outer(weight, P[i])
    return float(np.sum(weight * np.exp(log_ratio)))


def X_formula(game: Game, p: MixedProfile, learning_rates, k: int) -> float:
    """``X_t`` from the case expansion with reference action ``k``.

    For ``n >= 3`` this is the aggregated five-term sum.  For two players the
    cases "``n-1`` players agree" and "all but one agree" overlap, so the
    per-profile factors are summed directly: player ``i`` contributes
    ``(1 + p_i(k) alpha_i(k)) / (1 + alpha_i(k))`` when the opponent plays
    ``k`` and ``1 + p_i(c) alpha_i(c)`` when the opponent plays ``c != k``.
    """
    _require_coordination(game)
    al = alphas(game, learning_rates)
    n, m = al.shape
    P = np.vstack(p.probs)
    ref = (1 + P[:, k] * al[:, k]) / (1 + al[:, k])
    boost = 1 + P * al  # boost[i, c] = 1 + p_i(c) alpha_i(c)
    if n == 2:
        F = boost.copy()
        F[:, k] = ref
        # sum_{a,b} p_1(a) p_2(b) F_1(b) F_2(a)
        return float((P[0] * F[1]).sum() * (P[1] * F[0]).sum())
    others = [c for c in range(m) if c != k]
    prod_all = P.prod(axis=0)  # prod_i p_i(c)
    prod_excl = np.array([[np.prod(np.delete(P[:, c], i)) for c in range(m)] for i in range(n)])
    t_ref = prod_all[k] * ref.prod()
    t_diag = sum(prod_all[c] * boost[:, c].prod() for c in others)
    t_dev_ref = sum(prod_excl[i, k] * P[i, c] * ref[i] for c in others for i in range(n))
    t_dev = sum(prod_excl[i, c] * (1 - P[i, c]) * boost[i, c] for c in others for i in range(n))
    covered = (
        prod_all[k]
        + sum(prod_all[c] for c in others)
        + sum(prod_excl[i, k] * P[i, c] for c in others for i in range(n))
        + sum(prod_excl[i, c] * (1 - P[i, c]) for c in others for i in range(n))
    )
    gamma = 1.0 - covered
    return float(gamma + t_ref + t_diag + t_dev_ref + t_dev)


class SupermartingaleConstants(NamedTuple):
    C: float
    D: float
    M0: float


def supermartingale_constants(game: Game, learning_rates) -> SupermartingaleConstants:
    """Constants with ``X_t - 1 <= C/Z_t - D n Z_t^{-(n-1)/n}`` and ``M0 = (C/(D n))^n``.

    ``C`` is taken literally, including the term
    ``sum_i alpha_i(1)/(1+alpha_i(1))`` that appears twice; a tighter constant
    may exist.  Both constants are the worst case over which diagonal action
    plays the reference role, so ``M0`` does not depend on the state.
    """
    al = alphas(game, learning_rates)
    n, m = al.shape
    Cs, Ds = [], []
    for r in range(m):
        others = [c for c in range(m) if c != r]
        ratio = al[:, r] / (1 + al[:, r])
        C = (-m + 1
             + sum(np.prod(1 + al[:, c]) for c in others)
             + 2 * ratio.sum()
             + sum(al[:, c].sum() for c in others))
        Cs.append(C)
        Ds.append(ratio.min())
    C, D = float(max(Cs)), float(min(Ds))
    return SupermartingaleConstants(C, D, (C / (D * n)) ** n)


def X_bound(constants: SupermartingaleConstants, Z: float, n: int) -> float:
    """Right-hand side ``1 + C/Z - D n Z^{-(n-1)/n}`` of the bound on ``X_t``."""
    return 1.0 + constants.C / Z - constants.D * n * Z ** (-(n - 1) / n)


@dataclass(frozen=True)
class PotentialReport:
    value: float
    reference: int
    expectation: float
    X_enumerated: float
    X_formula: float
    X_bound: float
    constants: SupermartingaleConstants
    expectation_of_min: float = field(default=math.nan)

    @property
    def supermartingale_step(self) -> bool:
        return self.expectation <= self.value

    def summary(self) -> str:
        C, D, M0 = self.constants
        return "\n".join([
            f"Z_t              {self.value:.4g}  (reference action {self.reference})",
            f"E[Z_t+1(k)|F_t]  {self.expectation:.4g}",
            f"E[Z_t+1|F_t]     {self.expectation_of_min:.4g}",
            f"X_t enumerated   {self.X_enumerated:.4g}",
            f"X_t formula      {self.X_formula:.4g}",
            f"X_t bound        {self.X_bound:.4g}",
            f"C, D, M0         {C:.4g}, {D:.4g}, {M0:.4g}",
            f"Z_t >= M0        {self.value >= M0}",
        ])

    def row(self) -> dict:
        d = {
            "Z": self.value, "reference": self.reference, "expectation": self.expectation,
            "expectation_of_min": self.expectation_of_min, "X_enumerated": self.X_enumerated,
            "X_formula": self.X_formula, "X_bound": self.X_bound,
            "C": self.constants.C, "D": self.constants.D, "M0": self.constants.M0,
        }
        return {k: (v if isinstance(v, int) else f"{v:.17g}") for k, v in d.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        row = self.row()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow(row)
        return buf.getvalue()


def one_step_expected_potential(game: Game, state: EWState, k: int | None = None,
                                cap: int = DEFAULT_ENUMERATION_CAP) -> PotentialReport:
    """Exact ``E(Z_{t+1}(k) | F_t)`` together with the analytic ``X_t`` and bound.

    ``k`` defaults to the action achieving ``Z_t``.  The expectation of the
    potential itself, ``E(min_k Z_{t+1}(k) | F_t)``, is also reported.
    """
    _require_coordination(game)
    if state.game is not game and state.game.to_dict() != game.to_dict():
        raise ValueError("state belongs to a different game")
    p = mixed_profile(state)
    rates = state.config.learning_rates
    n, m = game.num_players, game.action_counts[0]
    if m ** n > cap:
        raise ValueError(f"{m}^{n} profiles exceed the enumeration cap {cap}")
    if k is None:
        k = argmin_Z(p)
    Zk = 1.0 / float(_diagonal_products(p)[k]) if _diagonal_products(p)[k] > 0 else math.inf
    Xe = enumerate_X(game, p, rates, k, cap)
    Xf = X_formula(game, p, rates, k)
    consts = supermartingale_constants(game, rates)
    return PotentialReport(
        value=Zk,
        reference=k,
        expectation=Xe * Zk,
        X_enumerated=Xe,
        X_formula=Xf,
        X_bound=X_bound(consts, Zk, n),
        constants=consts,
        expectation_of_min=expected_next_potential(game, p, rates),
    )


def expected_next_potential(game: Game, p: MixedProfile, learning_rates) -> float:
    """``E(Z_{t+1} | F_t)`` with ``Z_{t+1} = min_k Z_{t+1}(k)``, by enumeration."""
    n, m = game.num_players, game.action_counts[0]
    eta = np.broadcast_to(np.asarray(learning_rates, float), (n,))
    P = [np.asarray(q, float) for q in p.probs]
    weight = P[0]
    for i in range(1, n):
        weight = np.multiply.outer(weight, P[i])
    with np.errstate(divide="ignore"):
        logs = []
        for k in range(m):
            logd = sum(np.log(P[i][k]) for i in range(n))
            logs.append(sum(_log_normalisers(game, P, eta, k)) - logd)
        Znext = np.exp(np.min(np.stack(logs), axis=0))
    mask = weight > 0
    return float(np.sum(weight[mask] * Znext[mask]))


# --- the 3x3 variant with an off-diagonal (1/2, 1/2) entry ---

def _check_3x3(p: MixedProfile) -> tuple[np.ndarray, np.ndarray]:
    if p.num_players != 2 or p.action_counts != (3, 3):
        raise ValueError("expected a two-player profile with three actions each")
    return np.asarray(p[0], float), np.asarray(p[1], float)


def _zprime(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # x, y: (..., 3) arrays
    d = np.stack([
        x[..., 0] * y[..., 0],
        y[..., 1] * (x[..., 1] + x[..., 2]),
        x[..., 2] * (y[..., 1] + y[..., 2]),
    ])
    with np.errstate(divide="ignore"):
        return 1.0 / d.max(axis=0)


def potential_Zprime(p: MixedProfile) -> float:
    """``min{1/(x1 y1), 1/(y2 (x2 + x3)), 1/(x3 (y2 + y3))}`` for ``p = (x, y)``."""
    x, y = _check_3x3(p)
    return float(_zprime(x, y))


def expected_next_Zprime(game: Game, p: MixedProfile, learning_rates) -> float:
    """``E(Z'_{t+1} | F_t)`` by enumerating the nine realised profiles."""
    x, y = _check_3x3(p)
    eta = np.broadcast_to(np.asarray(learning_rates, float), (2,))
    U1, U2 = game.payoffs[0], game.payoffs[1]
    # Next x given player 2 played column c: rows c; next y given player 1 played row r.
    wx = x[None, :] * np.exp(eta[0] * U1.T)  # (c, a)
    wy = y[None, :] * np.exp(eta[1] * U2)    # (r, b)
    xn = wx / wx.sum(axis=1, keepdims=True)
    yn = wy / wy.sum(axis=1, keepdims=True)
    Zn = _zprime(xn[None, :, :], yn[:, None, :])  # (r, c)
    weight = np.outer(x, y)
    mask = weight > 0
    return float(np.sum(weight[mask] * Zn[mask]))


@dataclass(frozen=True)
class ZprimeCalibration:
    M0: float
    worst_violation: float
    samples: int
    violations: int


def random_interior_profiles(rng: np.random.Generator, shape: tuple[int, ...], count: int,
                             concentration=(0.05, 2.0)) -> list[MixedProfile]:
    """Random interior profiles with per-sample Dirichlet concentration drawn log-uniformly."""
    lo, hi = np.log(concentration[0]), np.log(concentration[1])
    out = []
    for _ in range(count):
        c = np.exp(rng.uniform(lo, hi))
        probs = []
        for m in shape:
            q = rng.dirichlet(np.full(m, c))
            q = np.maximum(q, 1e-300)
            probs.append(q / q.sum())
        out.append(MixedProfile(tuple(probs)))
    return out


def calibrate_zprime_threshold(game: Game, learning_rates, samples: int = 20000,
                               seed: int = 0, margin: float = 2.0) -> ZprimeCalibration:
    """Empirical ``M0'``: ``margin`` times the largest ``Z'`` at which a sampled
    state violates ``E(Z'_{t+1}) <= Z'_t``.
    """
    rng = np.random.default_rng(seed)
    worst = 1.0
    violations = 0
    for p in random_interior_profiles(rng, (3, 3), samples):
        z = potential_Zprime(p)
        if not np.isfinite(z):
            continue
        if expected_next_Zprime(game, p, learning_rates) > z * (1 + 1e-12):
            violations += 1
            worst = max(worst, z)
    return ZprimeCalibration(margin * worst, worst, samples, violations)
