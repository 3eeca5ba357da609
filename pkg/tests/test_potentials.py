import math

import numpy as np
import pytest

from ewlab.analysis import (
    X_formula,
    alphas,
    calibrate_zprime_threshold,
    enumerate_X,
    expected_next_potential,
    expected_next_Zprime,
    one_step_expected_potential,
    potential_Z,
    potential_Zprime,
    random_interior_profiles,
    supermartingale_constants,
)
from ewlab.engine import EWConfig, EWState, apply_actions, mixed_profile
from ewlab.game import Game, MixedProfile, fixture


def coordination_game(rng, n, m, lo=0.01, hi=2.0):
    P = np.zeros((n,) + (m,) * n)
    for i in range(n):
        for k in range(m):
            P[(i,) + (k,) * n] = rng.uniform(lo, hi)
    return Game(P)


def state(game, eta, p):
    return EWState.initial(EWConfig(game, eta, p))


def engine_expectation(game, eta, p, k):
    # Oracle: push every realised profile through the engine's update.
    s = state(game, eta, p)
    total = 0.0
    for a in game.profiles():
        w = p.prob(a)
        if w == 0:
            continue
        q = mixed_profile(apply_actions(s, a))
        total += w / np.prod([q[i][k] for i in range(game.num_players)])
    return total


def test_potential_Z_examples():
    c = fixture("coord3")
    assert potential_Z(c, MixedProfile.uniform(c)) == pytest.approx(9.0)
    assert potential_Z(c, MixedProfile.dirac(c, (2, 2))) == 1.0
    P = np.zeros((3, 2, 2, 2))
    P[:, 0, 0, 0] = P[:, 1, 1, 1] = 1.0
    g3 = Game(P)
    p = MixedProfile(tuple(np.array([0.8, 0.2]) for _ in range(3)))
    assert potential_Z(g3, p) == pytest.approx(1.953125)
    assert potential_Z(c, MixedProfile.dirac(c, (0, 1))) == math.inf
    with pytest.raises(ValueError):
        potential_Z(fixture("exa7"), MixedProfile.uniform(fixture("exa7")))


def test_potential_Z_permutation_equivariant():
    rng = np.random.default_rng(0)
    g = coordination_game(rng, 2, 3)
    perm = [2, 0, 1]
    P = np.zeros_like(g.payoffs)
    for i in range(2):
        for k in range(3):
            P[i, perm[k], perm[k]] = g.payoffs[i, k, k]
    h = Game(P)
    for _ in range(10):
        p = MixedProfile((rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))))
        q = np.empty(3), np.empty(3)
        for i in range(2):
            q[i][perm] = p[i]
        assert potential_Z(g, p) == pytest.approx(potential_Z(h, MixedProfile(q)))


def test_enumeration_matches_engine_oracle():
    rng = np.random.default_rng(1)
    for n, m in [(2, 2), (2, 3), (3, 2), (3, 3)]:
        g = coordination_game(rng, n, m)
        eta = tuple(rng.uniform(0.05, 1, n))
        for _ in range(5):
            p = MixedProfile(tuple(rng.dirichlet(np.ones(m)) for _ in range(n)))
            for k in range(m):
                Zk = 1 / np.prod([p[i][k] for i in range(n)])
                want = engine_expectation(g, eta, p, k)
                assert enumerate_X(g, p, eta, k) * Zk == pytest.approx(want, rel=1e-11)


def test_coord3_uniform_formula_equals_enumeration():
    c = fixture("coord3")
    p = MixedProfile.uniform(c)
    rep = one_step_expected_potential(c, state(c, 0.1, p))
    assert rep.X_formula == pytest.approx(rep.X_enumerated, rel=1e-12)
    # Symmetric state: all references give the same X.
    xs = [X_formula(c, p, 0.1, k) for k in range(3)]
    assert np.ptp(xs) < 1e-14


def test_dirac_state_expectation_is_one():
    c = fixture("coord3")
    p = MixedProfile.dirac(c, (1, 1))
    rep = one_step_expected_potential(c, state(c, 0.3, p), 1)
    assert rep.value == 1.0
    assert rep.expectation == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2)])
def test_formula_equals_enumeration_random(n, m):
    rng = np.random.default_rng(10 * n + m)
    g = coordination_game(rng, n, m)
    eta = tuple(rng.uniform(0.01, 1, n))
    for _ in range(200):
        p = MixedProfile(tuple(rng.dirichlet(np.full(m, 0.5)) for _ in range(n)))
        k = int(rng.integers(m))
        assert X_formula(g, p, eta, k) == pytest.approx(enumerate_X(g, p, eta, k), rel=1e-10)


def test_constants_symmetric_coord3():
    c = fixture("coord3")
    al = alphas(c, 0.1)
    assert np.allclose(al, np.expm1(0.1))
    C, D, M0 = supermartingale_constants(c, 0.1)
    a = np.expm1(0.1)
    # oracle: direct evaluation of the displayed formula with m = 3, n = 2
    C_ref = -3 + 1 + 2 * (1 + a) ** 2 + 2 * 2 * a / (1 + a) + 2 * 2 * a
    assert C == pytest.approx(C_ref, rel=1e-14)
    assert D == pytest.approx(-np.expm1(-0.1), rel=1e-14)
    assert M0 == pytest.approx((C_ref / (2 * D)) ** 2, rel=1e-14)


def test_D_identity_random():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = coordination_game(rng, 3, 3)
        eta = rng.uniform(0.1, 1, 3)
        diag = np.array([[g.payoffs[(i, k, k, k)] for k in range(3)] for i in range(3)])
        _, D, _ = supermartingale_constants(g, eta)
        assert D == pytest.approx(np.min(-np.expm1(-eta[:, None] * diag)), rel=1e-12)


def test_non_coordination_rejected():
    with pytest.raises(ValueError):
        supermartingale_constants(fixture("exa7"), 0.1)
    e7 = fixture("exa7")
    with pytest.raises(ValueError):
        one_step_expected_potential(e7, state(e7, 0.1, MixedProfile.uniform(e7)))


def test_enumeration_cap():
    c = fixture("coord3")
    with pytest.raises(ValueError):
        one_step_expected_potential(c, state(c, 0.1, MixedProfile.uniform(c)), cap=8)


def test_expected_next_potential_is_below_reference_expectation():
    rng = np.random.default_rng(3)
    c = fixture("coord3")
    for _ in range(20):
        p = MixedProfile((rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))))
        rep = one_step_expected_potential(c, state(c, 0.4, p))
        assert rep.expectation_of_min <= rep.expectation + 1e-12


def test_report_output():
    c = fixture("coord3")
    rep = one_step_expected_potential(c, state(c, 0.1, MixedProfile.uniform(c)))
    text = rep.summary()
    assert "C, D, M0" in text and "Z_t              9" in text
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0].startswith("Z,reference,expectation")


# --- Z' on the 3x3 variant ----------------------------------------------------


def test_zprime_examples():
    e7 = fixture("exa7")
    assert potential_Zprime(MixedProfile.uniform(e7)) == pytest.approx(4.5)
    assert potential_Zprime(MixedProfile.dirac(e7, (0, 0))) == 1.0
    with pytest.raises(ValueError):
        potential_Zprime(MixedProfile.uniform(fixture("exa1")))


def test_zprime_expectation_matches_engine():
    e7 = fixture("exa7")
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = MixedProfile((rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))))
        s = state(e7, 0.1, p)
        want = sum(p.prob(a) * potential_Zprime(mixed_profile(apply_actions(s, a)))
                   for a in e7.profiles())
        assert expected_next_Zprime(e7, p, 0.1) == pytest.approx(want, rel=1e-12)


def test_zprime_calibration_deterministic():
    e7 = fixture("exa7")
    a = calibrate_zprime_threshold(e7, 0.1, 2000, seed=1)
    b = calibrate_zprime_threshold(e7, 0.1, 2000, seed=1)
    assert a == b
    assert a.M0 >= 1.0


def test_plain_Z_fails_on_exa7():
    # For any threshold there are states above it where Z increases in expectation.
    e7 = fixture("exa7")
    for eps in [1e-2, 1e-4, 1e-6, 1e-8]:
        p = MixedProfile((np.array([eps, 0.0, 1 - eps]), np.array([eps, 1 - eps, 0.0])))
        Z = 1 / np.max(p[0] * p[1])
        assert Z >= 1 / eps**2 * (1 - 1e-12)
        assert expected_next_potential(e7, p, 0.1) > 1.1 * Z


def test_random_interior_profiles_shape():
    rng = np.random.default_rng(5)
    ps = random_interior_profiles(rng, (2, 3), 4)
    assert len(ps) == 4 and ps[0].action_counts == (2, 3)
    assert all(np.all(q > 0) for p in ps for q in p.probs)
