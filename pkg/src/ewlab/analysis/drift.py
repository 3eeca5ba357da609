"""One-step drift of the common payoff in the 2x2 pure coordination game."""
from __future__ import annotations

import numpy as np

from ..engine import EWConfig, EWState, apply_actions, mixed_profile
from ..game import Game, MixedProfile, expected_payoff


def drift_2x2(a: float, b: float, x: float, y: float) -> float:
    """``f_{a,b}(x, y) = E(u(p^1)) - u(p^0)`` with ``u(p) = xy + (1-x)(1-y)``.

    ``a = exp(eta_1) - 1`` and ``b = exp(eta_2) - 1``; ``(x, y)`` are the
    probabilities of T and L.  Evaluated with the five-term expansion over
    the common denominator ``D``.
    """
    if a <= -1 or b <= -1:
        raise ValueError("a and b must exceed -1")
    if not (0 <= x <= 1 and 0 <= y <= 1):
        raise ValueError("x and y must lie in [0, 1]")
    xb, yb = 1 - x, 1 - y
    u = x * y + xb * yb
    D = (1 + a * x) * (1 + b * y) * (1 + a * xb) * (1 + b * yb)
    if D == 0:
        raise ZeroDivisionError("degenerate denominator")
    num = (
        -u * D
        + x * y * (u + x * y * (a + b + a * b)) * (1 + a * xb) * (1 + b * yb)
        + x * yb * (u + a * xb * yb + b * x * y) * (1 + a * x) * (1 + b * yb)
        + xb * y * (u + a * x * y + b * xb * yb) * (1 + b * y) * (1 + a * xb)
        + xb * yb * (u + xb * yb * (a + b + a * b)) * (1 + a * x) * (1 + b * y)
    )
    return num / D


def coordination_2x2() -> Game:
    payoffs = np.zeros((2, 2, 2))
    payoffs[:, 0, 0] = payoffs[:, 1, 1] = 1.0
    return Game(payoffs, (("T", "B"), ("L", "R")))


def drift_by_enumeration(a: float, b: float, x: float, y: float) -> float:
    """The same drift from the four realised profiles, each pushed through the EW update."""
    game = coordination_2x2()
    p0 = MixedProfile.from_2x2(x, y)
    cfg = EWConfig(game, (float(np.log1p(a)), float(np.log1p(b))), p0)
    state = EWState.initial(cfg)
    u0 = expected_payoff(game, p0, 0)
    total = 0.0
    for prof in game.profiles():
        w = p0.prob(prof)
        if w > 0:
            total += w * expected_payoff(game, mixed_profile(apply_actions(state, prof)), 0)
    return total - u0
