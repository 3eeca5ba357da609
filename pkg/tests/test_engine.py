import io

import numpy as np
import pytest

from ewlab.engine import (
    EWConfig,
    EWState,
    StoppingRule,
    apply_actions,
    closed_form_profile,
    mixed_profile,
    run,
    simulate,
    step,
)
from ewlab.game import Game, MixedProfile, fixture


def random_setup(rng, counts, eta=None):
    g = Game(rng.uniform(-1, 1, (len(counts), *counts)))
    p0 = MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in counts))
    eta = eta if eta is not None else tuple(rng.uniform(0.05, 1.0, len(counts)))
    return EWConfig(g, eta, p0, int(rng.integers(2**63)))


def eq2_update(p, game, etas, a):
    # p^{t+1}_i(b) = p_i(b) / sum_c p_i(c) exp(eta_i (u_i(c, a_-i) - u_i(b, a_-i)))
    out = []
    for i, q in enumerate(p.probs):
        u = np.array([game.payoff(i, a[:i] + (b,) + a[i + 1:]) for b in range(q.size)])
        new = np.array([q[b] / np.sum(q * np.exp(etas[i] * (u - u[b]))) for b in range(q.size)])
        out.append(new)
    return out


def test_mixed_profile_softmax():
    g = fixture("exa1")
    cfg = EWConfig.create(g)
    s = EWState(cfg, (np.array([np.log(2), 0.0]), np.array([5.0, 5.0])))
    p = mixed_profile(s)
    assert np.allclose(p[0], [2 / 3, 1 / 3])
    assert np.allclose(p[1], [0.5, 0.5])


def test_mixed_profile_shift_invariant_and_large():
    g = fixture("exa1")
    s = EWState(EWConfig.create(g), (np.array([1e6, 1e6 - 1]), np.array([-3.0, 2.0])))
    p = mixed_profile(s)
    assert np.all(np.isfinite(p[0]))
    s2 = EWState(s.config, (s.log_weights[0] - 1e6, s.log_weights[1] + 7))
    assert np.allclose(mixed_profile(s2)[0], p[0])
    assert np.allclose(mixed_profile(s2)[1], p[1])


def test_step_example_update():
    g = fixture("exa1")
    cfg = EWConfig(g, (np.log(2), np.log(2)), MixedProfile.uniform(g))
    s = apply_actions(EWState.initial(cfg), (0, 0))
    assert np.allclose(mixed_profile(s)[0], [2 / 3, 1 / 3])


def test_step_constant_payoff_player_stays():
    g = fixture("ex1111")
    cfg = EWConfig.create(g, 0.7, MixedProfile((np.array([0.3, 0.7]), np.array([0.5, 0.5]))), 9)
    rng = np.random.default_rng(cfg.seed)
    s = EWState.initial(cfg)
    for _ in range(50):
        _, s = step(s, rng)
        assert np.allclose(mixed_profile(s)[0], [0.3, 0.7], atol=1e-14)


def test_step_matches_eq2():
    rng = np.random.default_rng(0)
    for _ in range(20):
        cfg = random_setup(rng, (3, 2, 2))
        s = EWState.initial(cfg)
        for _ in range(5):
            a = tuple(int(rng.integers(m)) for m in cfg.game.action_counts)
            want = eq2_update(mixed_profile(s), cfg.game, cfg.learning_rates, a)
            s = apply_actions(s, a)
            for q, w in zip(mixed_profile(s).probs, want):
                assert np.allclose(q, w, atol=1e-12)


def test_zero_probability_stays_zero():
    g = fixture("exa2")
    p0 = MixedProfile((np.array([0.5, 0.5]), np.array([0.0, 0.5, 0.5])))
    traj = simulate(EWConfig(g, 0.5, p0, 3), StoppingRule.fixed(200))
    assert np.all(traj.profiles[:, 1, 0] == 0.0)
    assert np.all(traj.actions[:, 1] != 0)
    assert np.all(traj.profiles[:, 1, 1:3] > 0)


def test_closed_form_empty_and_ex1111_walk():
    g = fixture("ex1111")
    cfg = EWConfig(g, (0.3, 0.8), MixedProfile.uniform(g))
    assert np.allclose(closed_form_profile(cfg, [])[1], [0.5, 0.5])
    rng = np.random.default_rng(1)
    hist = [(int(rng.integers(2)), int(rng.integers(2))) for _ in range(40)]
    Z = sum(1 if a[0] == 1 else -1 for a in hist)
    p = closed_form_profile(cfg, hist)
    assert p[1][0] == pytest.approx(1 / (1 + np.exp(0.8 * Z)), rel=1e-12)


def test_closed_form_matches_replay_three_players():
    rng = np.random.default_rng(2)
    cfg = random_setup(rng, (2, 3, 2))
    hist = [tuple(int(rng.integers(m)) for m in cfg.game.action_counts) for _ in range(50)]
    s = EWState.initial(cfg)
    for a in hist:
        s = apply_actions(s, a)
    cf = closed_form_profile(cfg, hist)
    assert cf.distance(mixed_profile(s)) < 1e-10


def test_translation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(10):
        cfg = random_setup(rng, (2, 3))
        shift = rng.uniform(-5, 5, 2)
        P = cfg.game.payoffs + shift[:, None, None]
        cfg2 = EWConfig(Game(P), cfg.learning_rates, cfg.initial_profile)
        hist = [(int(rng.integers(2)), int(rng.integers(3))) for _ in range(30)]
        assert closed_form_profile(cfg, hist).distance(closed_form_profile(cfg2, hist)) < 1e-10


def test_simulate_replay_identity_and_determinism():
    rng = np.random.default_rng(4)
    cfg = random_setup(rng, (3, 3))
    traj = simulate(cfg, StoppingRule.fixed(300))
    assert len(traj) == 300 and traj.profiles.shape[0] == 301
    hist = traj.history()
    for t in (0, 1, 17, 150, 300):
        assert closed_form_profile(cfg, hist[:t]).distance(traj.profile(t)) < 1e-10
    again = simulate(cfg, StoppingRule.fixed(300))
    assert np.array_equal(traj.profiles, again.profiles)
    assert np.array_equal(traj.actions, again.actions)


def test_simulate_matches_python_step_loop():
    # The compiled driver consumes the same uniforms as step().
    g = fixture("exa2")
    cfg = EWConfig.create(g, 0.3, seed=11)
    traj = simulate(cfg, StoppingRule.fixed(2000))
    rng = np.random.default_rng(cfg.seed)
    s = EWState.initial(cfg)
    for t in range(2000):
        a, s = step(s, rng)
        assert a == tuple(traj.actions[t])
    assert mixed_profile(s).distance(traj.terminal) < 1e-10


def test_block_boundaries_do_not_change_stream():
    # Runs of different lengths share their common prefix.
    cfg = EWConfig.create(fixture("matching_pennies"), 0.1, seed=5)
    long = simulate(cfg, StoppingRule.fixed(1000))
    short = simulate(cfg, StoppingRule.fixed(300))
    assert np.array_equal(long.actions[:300], short.actions)


def test_absorption_at_dirac_start():
    g = fixture("exa1")
    traj = simulate(EWConfig(g, 0.1, MixedProfile.dirac(g, (0, 0))))
    assert traj.stop.kind == "absorbed" and traj.stop.t == 0 and traj.stop.equilibrium == (0, 0)
    assert len(traj) == 0


def test_absorption_rule_on_exa1():
    g = fixture("exa1")
    traj = simulate(EWConfig.create(g, 0.1, seed=3))
    assert traj.stop.kind == "absorbed"
    a = traj.stop.equilibrium
    assert traj.terminal.distance(MixedProfile.dirac(g, a)) < 1e-4
    assert traj.profile(len(traj) - 1).distance(MixedProfile.dirac(g, a)) >= 1e-4


def test_stationary_pure_non_strict_start():
    g = fixture("ex1111")
    out = run(EWConfig(g, 0.1, MixedProfile.dirac(g, (0, 0))), StoppingRule.absorption())
    assert out.stop.kind == "stationary"


def test_no_strict_ne_needs_horizon():
    g = fixture("matching_pennies")
    cfg = EWConfig.create(g, 0.1)
    with pytest.raises(ValueError):
        simulate(cfg, StoppingRule.absorption(horizon=None))
    traj = simulate(cfg, StoppingRule.absorption(horizon=500))
    assert traj.stop.kind == "horizon" and len(traj) == 500


def test_near_z_stop():
    g = fixture("exa3")
    out = run(EWConfig.create(g, 0.1, seed=1), StoppingRule.absorption(z_eps=1e-8))
    assert out.stop.kind == "near_Z"
    assert out.terminal[0][0] * out.terminal[1][0] < 1e-8


def test_config_validation():
    g = fixture("exa1")
    with pytest.raises(ValueError):
        EWConfig(g, 0.0, MixedProfile.uniform(g))
    with pytest.raises(ValueError):
        EWConfig(g, 0.1, MixedProfile.uniform(fixture("exa2")))
    with pytest.raises(ValueError):
        EWConfig(g, 0.1, MixedProfile.uniform(g), -1)


def test_trajectory_csv():
    g = fixture("exa1")
    cfg = EWConfig.create(g, 0.1, seed=2)
    traj = simulate(cfg, StoppingRule.fixed(5))
    text = traj.to_csv()
    lines = text.splitlines()
    assert lines[0] == f"# config_digest={cfg.digest()} seed=2 stop=horizon stop_t=5"
    assert lines[1] == "t,p1_T,p1_B,p2_L,p2_R,a1,a2"
    assert len(lines) == 2 + 6
    assert lines[2].startswith("0,0.5,0.5,0.5,0.5,")
    buf = io.StringIO()
    traj.write_csv(buf)
    assert buf.getvalue() == text
    assert cfg.digest() == cfg.with_seed(9).digest()
