"""Rigorous enclosures of infinite products ``prod_t prod_j 1/(1 + sum_k c_jk exp(-r_jk t))``.

With ``S_j(t) = sum_k c_jk exp(-r_jk t)`` and ``log(1 + s) <= s``, the log of the
factors dropped after truncating at ``T`` terms is at most

    R(T) = sum_jk c_jk exp(-r_jk T) / (1 - exp(-r_jk)),

so the product lies in ``[P_T exp(-R(T)), P_T]``.  ``P_T`` is evaluated in
interval arithmetic, so rounding is covered as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from mpmath import iv

from ..game import Game, MixedProfile, PureProfile, strict_nash_equilibria

iv.dps = 30


@dataclass(frozen=True)
class Enclosure:
    lo: float
    hi: float
    terms: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def format(self, digits: int = 17) -> str:
        return f"[{self.lo:.{digits}g}, {self.hi:.{digits}g}] ({self.width:.{min(digits, 4)}g})"

    def __str__(self) -> str:
        return self.format()


def _tail_bound(c: np.ndarray, r: np.ndarray, T: int) -> float:
    return float(np.sum(c * np.exp(-r * T) / -np.expm1(-r)))


def enclose_product(coeffs: Sequence[Sequence[float]], rates: Sequence[Sequence[float]],
                    tol: float) -> Enclosure:
    """Enclose ``prod_{t>=0} prod_j 1/(1 + sum_k coeffs[j][k] exp(-rates[j][k] t))``.

    All coefficients must be non-negative and all rates positive.  Returns an
    enclosure of width at most ``tol``; the truncation tail is kept below
    ``tol / 2``.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    groups = [(np.asarray(c, float).ravel(), np.asarray(r, float).ravel())
              for c, r in zip(coeffs, rates)]
    groups = [(c[c > 0], r[c > 0]) for c, r in groups]
    c_all = np.concatenate([c for c, _ in groups]) if groups else np.empty(0)
    r_all = np.concatenate([r for _, r in groups]) if groups else np.empty(0)
    if np.any(c_all < 0) or not np.all(np.isfinite(c_all)):
        raise ValueError("coefficients must be finite and non-negative")
    if np.any(r_all <= 0):
        raise ValueError("rates must be positive; the product diverges otherwise")
    if c_all.size == 0:
        return Enclosure(1.0, 1.0, 0)

    target = tol / 2
    hi_T = 1
    while _tail_bound(c_all, r_all, hi_T) > target:
        hi_T *= 2
    lo_T = hi_T // 2
    while hi_T - lo_T > 1:
        mid = (lo_T + hi_T) // 2
        if _tail_bound(c_all, r_all, mid) > target:
            lo_T = mid
        else:
            hi_T = mid
    T = hi_T

    log_sum = iv.mpf(0)
    tail = iv.mpf(0)
    for c, r in groups:
        ci = [iv.mpf(float(x)) for x in c]
        ri = [iv.mpf(float(x)) for x in r]
        for t in range(T):
            s = iv.mpf(0)
            for cc, rr in zip(ci, ri):
                s += cc * iv.exp(-rr * t)
            log_sum += iv.log(1 + s)
        for cc, rr in zip(ci, ri):
            tail += cc * iv.exp(-rr * T) / (1 - iv.exp(-rr))
    upper = iv.exp(-log_sum)
    lower = iv.exp(-log_sum - tail)
    lo = math.nextafter(float(lower.a), -math.inf)
    hi = math.nextafter(float(upper.b), math.inf)
    return Enclosure(max(lo, 0.0), min(hi, 1.0), T)


@dataclass(frozen=True, eq=False)
class AbsorptionQuery:
    """Probability of playing the strict NE ``equilibrium`` at every stage from ``p0``."""

    game: Game
    equilibrium: PureProfile
    initial_profile: MixedProfile
    learning_rates: Sequence[float] | float
    tol: float = 1e-10


def always_play_factors(game: Game, a: PureProfile, p0: MixedProfile, learning_rates):
    """Per-player ``(coeffs, rates)`` of the product for "always play ``a``"."""
    rates_eta = np.broadcast_to(np.asarray(learning_rates, float), (game.num_players,))
    coeffs, rates = [], []
    for i in range(game.num_players):
        idx = list(a)
        idx[i] = slice(None)
        u = game.payoffs[(i, *idx)]
        others = [b for b in range(u.size) if b != a[i]]
        gaps = u[a[i]] - u[others]
        coeffs.append(p0[i][others] / p0[i][a[i]])
        rates.append(rates_eta[i] * gaps)
    return coeffs, rates


def prob_always_play(q: AbsorptionQuery) -> Enclosure:
    """Enclose ``P(a^t = a for all t >= 0)`` for a strict NE ``a``.

    Raises ``ValueError`` if ``a`` is not strict: the product then vanishes on
    the interior and is discontinuous, so there is nothing to enclose.
    """
    game = q.game
    a = game.check_profile(q.equilibrium)
    if not q.tol > 0:
        raise ValueError("tolerance must be positive")
    if a not in strict_nash_equilibria(game):
        raise ValueError(f"{game.format_profile(a)} is not a strict Nash equilibrium")
    p0 = q.initial_profile
    p0.check_game(game)
    if p0.prob(a) == 0.0:
        return Enclosure(0.0, 0.0, 0)
    coeffs, rates = always_play_factors(game, a, p0, q.learning_rates)
    return enclose_product(coeffs, rates, q.tol)


def direct_partial_product(game: Game, a: PureProfile, p0: MixedProfile, learning_rates,
                           terms: int) -> float:
    """Plain floating-point partial product over ``terms`` stages (no tail)."""
    coeffs, rates = always_play_factors(game, a, p0, learning_rates)
    t = np.arange(terms)[:, None]
    log_p = 0.0
    for c, r in zip(coeffs, rates):
        if c.size:
            log_p -= np.log1p((c[None, :] * np.exp(-r[None, :] * t)).sum(axis=1)).sum()
    return float(np.exp(log_p))
