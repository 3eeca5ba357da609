import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewlab.game import (
    FIXTURES,
    Game,
    GameFormatError,
    MixedProfile,
    action_values,
    enumerate_neep_2p,
    expected_payoff,
    fixture,
    is_maximal_support_neep,
    is_nash,
    is_neep,
    is_strong_coordination,
    load_game,
    save_game,
    strict_nash_equilibria,
)


def random_game(rng, counts, scale=2.0):
    n = len(counts)
    return Game(rng.uniform(-scale, scale, (n, *counts)))


def random_profile(rng, counts):
    return MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in counts))


def brute_expected(game, p, i):
    return sum(p.prob(a) * game.payoff(i, a) for a in game.profiles())


# --- loading -----------------------------------------------------------------


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_load_and_roundtrip(name, tmp_path):
    g = fixture(name)
    save_game(g, tmp_path / "g.json")
    h = load_game(tmp_path / "g.json")
    assert np.array_equal(g.payoffs, h.payoffs)
    assert g.labels == h.labels


def test_load_resolves_fixture_paths():
    a = load_game("fixtures/exa1")
    b = load_game("exa1.json")
    assert np.array_equal(a.payoffs, b.payoffs)


def test_load_reports_json_position(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"players": 2,\n "actions": [["T"], ["L"]]\n "payoffs": []}')
    with pytest.raises(GameFormatError, match="line 3"):
        load_game(f)


def test_load_reports_field_path(tmp_path):
    f = tmp_path / "bad.json"
    doc = {"players": 2, "actions": [["T", "B"], ["L", "R"]],
           "payoffs": [[[1, 1], [0, 0]], [[0, 0], [1, "x"]]]}
    f.write_text(json.dumps(doc))
    with pytest.raises(GameFormatError, match=r"payoffs\[1\]\[1\]"):
        load_game(f)


def test_unknown_game():
    with pytest.raises(FileNotFoundError):
        load_game("no_such_game")


def test_game_rejects_non_finite():
    with pytest.raises(ValueError):
        Game(np.array([[[np.nan]]]))


# --- profiles ----------------------------------------------------------------


def test_mixed_profile_validation():
    with pytest.raises(ValueError):
        MixedProfile((np.array([0.5, 0.6]),))
    with pytest.raises(ValueError):
        MixedProfile((np.array([1.5, -0.5]),))
    p = MixedProfile((np.array([0.3, 0.7]), np.array([0.25, 0.75])))
    assert p.prob((0, 1)) == pytest.approx(0.3 * 0.75)


def test_parse_profile():
    g = fixture("exa2")
    assert g.parse_profile("T,M") == (0, 1)
    assert g.parse_profile("(B,R)") == (1, 2)
    with pytest.raises(ValueError):
        g.parse_profile("T")


# --- expected payoff -----------------------------------------------------------


def test_expected_payoff_examples():
    g = fixture("ex1111")
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert expected_payoff(g, random_profile(rng, (2, 2)), 0) == pytest.approx(1.0)
    mp = fixture("matching_pennies")
    assert expected_payoff(mp, MixedProfile.uniform(mp), 0) == 0.0
    g3 = random_game(rng, (2, 3, 2))
    for a in g3.profiles():
        for i in range(3):
            assert expected_payoff(g3, MixedProfile.dirac(g3, a), i) == pytest.approx(g3.payoff(i, a))


def test_expected_payoff_matches_enumeration():
    rng = np.random.default_rng(1)
    for counts in [(2, 2), (3, 2), (2, 3, 4), (2, 2, 2, 2)]:
        g = random_game(rng, counts)
        p = random_profile(rng, counts)
        for i in range(len(counts)):
            assert expected_payoff(g, p, i) == pytest.approx(brute_expected(g, p, i), abs=1e-12)


def test_expected_payoff_shape_mismatch():
    with pytest.raises(ValueError):
        expected_payoff(fixture("exa1"), MixedProfile.uniform(fixture("exa2")), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1), st.floats(0, 1))
def test_expected_payoff_affine_in_each_player(seed, s, t):
    rng = np.random.default_rng(seed)
    counts = (2, 3, 2)
    g = random_game(rng, counts)
    p = random_profile(rng, counts)
    i = int(rng.integers(3))
    q0, q1 = rng.dirichlet(np.ones(counts[i])), rng.dirichlet(np.ones(counts[i]))

    def val(lam):
        probs = list(p.probs)
        probs[i] = (1 - lam) * q0 + lam * q1
        return expected_payoff(g, MixedProfile(tuple(probs)), 0)

    v0, v1, vs = val(0.0), val(1.0), val(s)
    assert vs == pytest.approx((1 - s) * v0 + s * v1, abs=1e-10)


def test_action_values_consistent():
    rng = np.random.default_rng(2)
    g = random_game(rng, (3, 2, 2))
    p = random_profile(rng, (3, 2, 2))
    for i in range(3):
        v = action_values(g, p, i)
        assert float(v @ p[i]) == pytest.approx(expected_payoff(g, p, i), abs=1e-12)


# --- strict NE -----------------------------------------------------------------


def brute_strict(game):
    out = []
    for a in game.profiles():
        ok = True
        for i in range(game.num_players):
            for b in range(game.action_counts[i]):
                if b != a[i]:
                    dev = list(a)
                    dev[i] = b
                    if game.payoff(i, dev) >= game.payoff(i, a):
                        ok = False
        if ok:
            out.append(a)
    return out


def test_strict_ne_examples():
    assert strict_nash_equilibria(fixture("exa1")) == [(0, 0), (1, 1)]
    assert strict_nash_equilibria(fixture("exa3")) == [(0, 0)]
    assert strict_nash_equilibria(fixture("matching_pennies")) == []
    assert strict_nash_equilibria(fixture("coord3")) == [(0, 0), (1, 1), (2, 2)]


def test_strict_ne_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(30):
        counts = tuple(rng.integers(1, 4, size=rng.integers(2, 4)))
        g = Game(rng.integers(-2, 3, (len(counts), *counts)).astype(float))
        assert strict_nash_equilibria(g) == brute_strict(g)


def test_strict_ne_pass_neep_with_zero_tol():
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = random_game(rng, (3, 3))
        for a in strict_nash_equilibria(g):
            assert is_neep(g, MixedProfile.dirac(g, a), 0.0)


# --- NEEP ----------------------------------------------------------------------


def test_is_neep_examples():
    g = fixture("ex1111")
    assert is_neep(g, MixedProfile((np.array([0.3, 0.7]), np.array([0.0, 1.0]))))
    assert not is_neep(g, MixedProfile((np.array([0.7, 0.3]), np.array([0.0, 1.0]))))
    mp = fixture("matching_pennies")
    assert is_nash(mp, MixedProfile.uniform(mp))
    assert not is_neep(mp, MixedProfile.uniform(mp))
    ch = fixture("chicken")
    # Mixed NE of chicken: each player plays the first action with probability 1/3.
    mixed = MixedProfile((np.array([1 / 3, 2 / 3]), np.array([1 / 3, 2 / 3])))
    assert is_nash(ch, mixed, 1e-12)
    assert not is_neep(ch, mixed)
    assert is_neep(ch, MixedProfile.dirac(ch, (0, 1)))
    assert is_neep(ch, MixedProfile.dirac(ch, (1, 0)))


def _segments(game):
    out = []
    for c in enumerate_neep_2p(game):
        lo, hi = c.endpoints()
        out.append((c.kind, lo.tolist(), hi.tolist()))
    return out


def test_neep_ex1111_segments():
    comps = _segments(fixture("ex1111"))
    assert len(comps) == 2
    expected = [
        ("segment", [[1, 0], [1, 0]], [[0.5, 0.5], [1, 0]]),
        ("segment", [[0.5, 0.5], [0, 1]], [[0, 1], [0, 1]]),
    ]
    for (k, lo, hi), (ek, elo, ehi) in zip(comps, expected):
        assert k == ek
        assert np.allclose(lo, elo) and np.allclose(hi, ehi)


def test_neep_exa18_faces():
    g = fixture("exa18")
    comps = enumerate_neep_2p(g)
    assert [c.supports for c in comps] == [((0,), (0, 1)), ((0, 1), (0,))]
    rng = np.random.default_rng(5)
    for _ in range(50):
        y = rng.uniform()
        assert is_neep(g, MixedProfile.from_2x2(1.0, y))
        assert is_neep(g, MixedProfile.from_2x2(y, 1.0))
    assert not is_neep(g, MixedProfile.from_2x2(0.5, 0.5))


def test_neep_empty_and_points():
    assert enumerate_neep_2p(fixture("matching_pennies")) == []
    ch = enumerate_neep_2p(fixture("chicken"))
    assert sorted(c.supports for c in ch) == [((0,), (1,)), ((1,), (0,))]
    assert all(c.kind == "point" for c in ch)


def test_neep_exa2():
    comps = enumerate_neep_2p(fixture("exa2"))
    kinds = sorted(c.kind for c in comps)
    assert kinds == ["point", "point", "segment"]
    seg = next(c for c in comps if c.kind == "segment")
    lo, hi = seg.endpoints()
    assert np.allclose(sorted([lo[0][0], hi[0][0]]), [1 / 3, 2 / 3])
    assert np.allclose(lo[1], [0, 0, 1])


@pytest.mark.parametrize("name", ["ex1111", "exa18", "chicken", "exa2", "exa1", "coord3"])
def test_neep_samples_pass_is_neep(name):
    g = fixture(name)
    for c in enumerate_neep_2p(g):
        for p in c.sample(100):
            assert is_neep(g, p, 1e-9)


def test_neep_enumeration_random_games_sound():
    rng = np.random.default_rng(6)
    for _ in range(30):
        g = Game(rng.integers(-1, 2, (2, 3, 3)).astype(float))
        for c in enumerate_neep_2p(g):
            for p in c.sample(10):
                assert is_neep(g, p, 1e-9)


def test_neep_requires_two_players():
    with pytest.raises(ValueError):
        enumerate_neep_2p(Game(np.zeros((3, 2, 2, 2))))


def test_maximal_support_exa18():
    g = fixture("exa18")
    assert is_maximal_support_neep(g, MixedProfile.from_2x2(1.0, 0.4))
    assert not is_maximal_support_neep(g, MixedProfile.from_2x2(1.0, 1.0))


# --- strong coordination -----------------------------------------------------------


def test_strong_coordination():
    assert is_strong_coordination(fixture("exa1"))
    assert is_strong_coordination(fixture("coord3"))
    assert not is_strong_coordination(fixture("exa7"))
    assert not is_strong_coordination(fixture("exa2"))


def test_strong_coordination_strict_ne_are_diagonal():
    rng = np.random.default_rng(7)
    for n, m in itertools.product([2, 3], [2, 3, 4]):
        P = np.zeros((n,) + (m,) * n)
        for i in range(n):
            for k in range(m):
                P[(i,) + (k,) * n] = rng.uniform(0.1, 2)
        g = Game(P)
        assert is_strong_coordination(g)
        assert strict_nash_equilibria(g) == [(k,) * n for k in range(m)]
