"""Command-line entry point: ``ewlab <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis as an
from .engine import DEFAULT_EPS, DEFAULT_HORIZON, EWConfig, EWState, StoppingRule, simulate
from .game import (
    Game,
    GameFormatError,
    MixedProfile,
    enumerate_neep_2p,
    is_maximal_support_neep,
    is_neep,
    is_strong_coordination,
    load_game,
    strict_nash_equilibria,
)
from .harness import (
    ExperimentSpec,
    absorption_time_stats,
    default_threads,
    run_grid,
    solve_basin_fixed_point,
)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_initial_profile(game: Game, text: str) -> MixedProfile:
    """``uniform``, ``dirac:<labels>`` or ``[0.3,0.7]x[0.25,0.75]``."""
    text = text.strip()
    if text == "uniform":
        return MixedProfile.uniform(game)
    if text.startswith("dirac:"):
        return MixedProfile.dirac(game, game.parse_profile(text[len("dirac:"):]))
    parts = re.findall(r"\[([^\]]*)\]", text)
    if not parts or re.sub(r"\[[^\]]*\]", "", text).replace("x", "").strip():
        raise UsageError(f"cannot parse initial profile {text!r}")
    try:
        probs = tuple(np.array([float(v) for v in p.split(",")]) for p in parts)
    except ValueError as exc:
        raise UsageError(f"cannot parse initial profile {text!r}: {exc}") from None
    p = MixedProfile(probs)
    p.check_game(game)
    return p


def _rates(game: Game, eta: Sequence[float]) -> tuple[float, ...]:
    if len(eta) == 1:
        return (eta[0],) * game.num_players
    if len(eta) != game.num_players:
        raise UsageError(f"--eta takes 1 or {game.num_players} values")
    return tuple(eta)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _fmt_profile(p: MixedProfile) -> str:
    return "x".join("[" + ",".join(f"{v:.4g}" for v in q) + "]" for q in p.probs)


# --- subcommands -------------------------------------------------------------


def cmd_strict_ne(args) -> int:
    game = load_game(args.game)
    sne = strict_nash_equilibria(game)
    print(", ".join(game.format_profile(a) for a in sne) if sne else "{}")
    return 0


def cmd_neep(args) -> int:
    game = load_game(args.game)
    if args.verify:
        p = parse_initial_profile(game, args.verify)
        ok = is_neep(game, p, args.tol)
        line = f"{_fmt_profile(p)} is_neep={ok}"
        if ok and game.num_players == 2:
            line += f" maximal_support={is_maximal_support_neep(game, p, args.tol)}"
        print(line)
        return 0
    if game.num_players != 2:
        raise UsageError("enumeration needs a two-player game; use --verify for n players")
    comps = enumerate_neep_2p(game, args.tol)
    if not comps:
        print("{}")
    for c in comps:
        print(c.describe(game))
    return 0


def cmd_simulate(args) -> int:
    game = load_game(args.game)
    cfg = EWConfig(game, _rates(game, args.eta), parse_initial_profile(game, args.p0), args.seed)
    horizon = args.horizon if args.horizon > 0 else None
    if args.fixed:
        stop = StoppingRule.fixed(args.horizon)
    else:
        stop = StoppingRule.absorption(args.eps, horizon, args.z_eps)
    traj = simulate(cfg, stop)
    if args.out:
        traj.write_csv(args.out)
    verdict = an.classify_trajectory(game, traj, args.tol)
    print(f"stop         {traj.stop.format(game)}")
    print(f"terminal     {_fmt_profile(traj.terminal)}")
    print(verdict.summary(game))
    return 0


def cmd_analyze(args) -> int:
    game = load_game(args.game)
    p = parse_initial_profile(game, args.p0)
    rates = _rates(game, args.eta)
    print(f"profile            {_fmt_profile(p)}")
    print(f"L                  {an.L_statistic(game, p):.4g}")
    print(f"distance_to_Z      {an.distance_to_Z(game, p):.4g}")
    print(f"is_neep            {is_neep(game, p, args.tol)}")
    for a in strict_nash_equilibria(game):
        enc = an.prob_always_play(an.AbsorptionQuery(game, a, p, rates, args.precision))
        print(f"P(always {game.format_profile(a)})".ljust(19) + enc.format())
    return 0


def cmd_potential(args) -> int:
    game = load_game(args.game)
    p = parse_initial_profile(game, args.p0)
    rates = _rates(game, args.eta)
    if is_strong_coordination(game):
        state = EWState.initial(EWConfig(game, rates, p))
        rep = an.one_step_expected_potential(game, state, args.k)
        print(rep.summary())
        if args.out:
            Path(args.out).write_text(rep.to_csv())
        return 0
    if game.num_players == 2 and game.action_counts == (3, 3):
        z = an.potential_Zprime(p)
        e = an.expected_next_Zprime(game, p, rates)
        cal = an.calibrate_zprime_threshold(game, rates, args.samples, args.seed)
        print(f"Z'_t               {z:.4g}")
        print(f"E[Z'_t+1|F_t]      {e:.4g}")
        print(f"M0' (calibrated)   {cal.M0:.4g}  ({cal.violations} violations in {cal.samples} samples)")
        print(f"Z'_t >= M0'        {z >= cal.M0}")
        if args.out:
            Path(args.out).write_text(
                "Zprime,expectation,M0prime,worst_violation,samples,violations\n"
                f"{z:.17g},{e:.17g},{cal.M0:.17g},{cal.worst_violation:.17g},"
                f"{cal.samples},{cal.violations}\n"
            )
        return 0
    raise UsageError("potential needs a strong coordination game or a two-player 3x3 game")


def cmd_drift(args) -> int:
    xs = np.linspace(0, 1, args.grid)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x\\y"] + [f"{y:.17g}" for y in xs])
        for x in xs:
            w.writerow([f"{x:.17g}"] + [f"{an.drift_2x2(args.a, args.b, x, y):.17g}" for y in xs])
    finally:
        if close:
            fh.close()
    return 0


def cmd_grid(args) -> int:
    game = load_game(args.game)
    xs = np.round(np.linspace(0, 1, args.grid), 12)
    spec = ExperimentSpec.grid_2x2(
        game, xs, xs, runs=args.runs, learning_rates=_rates(game, args.eta), eps=args.eps,
        horizon=args.horizon if args.horizon > 0 else None, master_seed=args.seed,
    )
    res = run_grid(spec, args.threads)
    fh, close = _open_out(args.out)
    try:
        eq = game.parse_profile(args.equilibrium) if args.equilibrium else 0
        res.write_table_csv(fh, eq)
    finally:
        if close:
            fh.close()
    if args.log:
        res.write_run_log(args.log)
    return 0


def cmd_times(args) -> int:
    game = load_game(args.game)
    spec = ExperimentSpec.single(
        game, parse_initial_profile(game, args.p0), runs=args.runs,
        learning_rates=_rates(game, args.eta), eps=args.eps,
        horizon=args.horizon if args.horizon > 0 else None, master_seed=args.seed,
    )
    print(absorption_time_stats(spec, args.threads).summary())
    return 0


def cmd_solve_f(args) -> int:
    a = args.a if args.a is not None else float(np.expm1(args.eta))
    b = args.b if args.b is not None else a
    grid = solve_basin_fixed_point(a, b, args.resolution, args.max_iter, args.tol)
    nodes = np.round(np.linspace(0, 1, args.nodes), 12)
    fh, close = _open_out(args.out)
    try:
        grid.write_csv(fh, nodes, nodes)
    finally:
        if close:
            fh.close()
    if not grid.converged:
        raise NumericalFailure(
            f"no convergence after {grid.iterations} sweeps (residual {grid.residual:.4g})"
        )
    return 0


def cmd_ex18(args) -> int:
    L = an.always_L_probability(args.x, args.y, args.eta2, args.precision)
    T = an.always_T_probability(args.x, args.y, args.eta1, args.precision)
    print(f"P(always L)        {L.format()}")
    print(f"P(always T)        {T.format()}")
    if args.runs > 0:
        ch = an.example18_chain(args.x, args.y, args.eta1, args.eta2, args.seed,
                                args.horizon, args.runs)
        fL, fT = ch.never_R().mean(), ch.never_B().mean()
        print(f"chain never R      {fL:.4g} +- {np.sqrt(fL * (1 - fL) / args.runs):.4g}")
        print(f"chain never B      {fT:.4g} +- {np.sqrt(fT * (1 - fT) / args.runs):.4g}")
    if args.crosscheck > 0:
        cps = [c for c in (10, 100, 1000) if c <= args.horizon]
        Bs, Rs = an.counts_from_ew(args.x, args.y, args.eta1, args.eta2, cps,
                                   range(args.crosscheck))
        ch = an.example18_chain(args.x, args.y, args.eta1, args.eta2, args.seed + 1,
                                max(cps), args.crosscheck)
        for j, c in enumerate(cps):
            print(f"KS t={c:<5d}        B {an.ecdf_distance(Bs[:, j], ch.B[:, c]):.4g}"
                  f"  R {an.ecdf_distance(Rs[:, j], ch.R[:, c]):.4g}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="ewlab", description="Exponential-weights dynamics in finite games.",
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    def game_arg(p):
        p.add_argument("game", help="game JSON file or bundled fixture name (e.g. exa1)")

    def eta_arg(p):
        p.add_argument("--eta", type=float, nargs="+", default=[0.1],
                       help="learning rate, shared or one per player")

    def p0_arg(p, default="uniform"):
        p.add_argument("--p0", default=default,
                       help="initial profile: uniform, dirac:T,L or [0.3,0.7]x[0.25,0.75]")

    def threads_arg(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $EWLAB_THREADS, else the CPU count)")

    p = add("strict-ne", cmd_strict_ne, "list strict Nash equilibria")
    game_arg(p)

    p = add("neep", cmd_neep, "enumerate NEEP components (2 players) or verify a profile")
    game_arg(p)
    p.add_argument("--verify", metavar="P0", help="check one profile instead of enumerating")
    p.add_argument("--tol", type=float, default=1e-9, help="support and Nash tolerance")

    p = add("simulate", cmd_simulate, "simulate one trajectory and classify it")
    game_arg(p)
    eta_arg(p)
    p0_arg(p)
    p.add_argument("--seed", type=int, default=0, help="trajectory seed")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="stage cap (0: none)")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="absorption distance")
    p.add_argument("--z-eps", type=float, default=None, help="stop once p(SNE) drops below")
    p.add_argument("--fixed", action="store_true", help="run exactly --horizon stages")
    p.add_argument("--tol", type=float, default=1e-4, help="verdict tolerance")
    p.add_argument("--out", help="trajectory CSV path")

    p = add("analyze", cmd_analyze, "always-play probabilities, L and distance to Z at a profile")
    game_arg(p)
    eta_arg(p)
    p0_arg(p)
    p.add_argument("--precision", type=float, default=1e-10, help="enclosure width")
    p.add_argument("--tol", type=float, default=1e-9, help="NEEP tolerance")

    p = add("potential", cmd_potential, "coordination potential report at a profile")
    game_arg(p)
    eta_arg(p)
    p0_arg(p)
    p.add_argument("--k", type=int, default=None, help="reference diagonal action (default: argmin)")
    p.add_argument("--samples", type=int, default=20000, help="states used to calibrate M0'")
    p.add_argument("--seed", type=int, default=0, help="calibration seed")
    p.add_argument("--out", help="CSV report path")

    p = add("drift", cmd_drift, "one-step common-payoff drift of the 2x2 coordination game")
    p.add_argument("--a", type=float, default=float(np.expm1(0.1)), help="exp(eta_1) - 1")
    p.add_argument("--b", type=float, default=float(np.expm1(0.1)), help="exp(eta_2) - 1")
    p.add_argument("--grid", type=int, default=11, help="points per axis")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = add("grid", cmd_grid, "basin-frequency experiment on a grid of 2x2 initial profiles")
    game_arg(p)
    eta_arg(p)
    p.add_argument("--runs", type=int, default=500, help="runs per cell")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="absorption distance")
    p.add_argument("--grid", type=int, default=11, help="points per axis")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="stage cap (0: none)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--equilibrium", default=None, help="tabulated strict NE (default: first)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--log", help="per-run log CSV path")
    threads_arg(p)

    p = add("times", cmd_times, "absorption-time distribution from one initial profile")
    game_arg(p)
    eta_arg(p)
    p0_arg(p)
    p.add_argument("--runs", type=int, default=1000, help="runs")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="absorption distance")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="stage cap (0: none)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    threads_arg(p)

    p = add("solve-f", cmd_solve_f, "fixed point of the basin function on a grid")
    p.add_argument("--eta", type=float, default=0.1, help="sets a = b = exp(eta) - 1")
    p.add_argument("--a", type=float, default=None, help="override a")
    p.add_argument("--b", type=float, default=None, help="override b (default: a)")
    p.add_argument("--resolution", type=int, default=201, help="solver grid points per axis")
    p.add_argument("--max-iter", type=int, default=200000, help="sweep cap")
    p.add_argument("--tol", type=float, default=1e-12, help="sup-norm change to stop")
    p.add_argument("--nodes", type=int, default=11, help="output nodes per axis")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = add("ex18", cmd_ex18, "counting chain of the game with one (-1,-1) cell")
    p.add_argument("--x", type=float, default=0.5, help="p0(T)")
    p.add_argument("--y", type=float, default=0.5, help="p0(L)")
    p.add_argument("--eta1", type=float, default=1.0, help="player 1 learning rate")
    p.add_argument("--eta2", type=float, default=1.0, help="player 2 learning rate")
    p.add_argument("--precision", type=float, default=1e-10, help="enclosure width")
    p.add_argument("--runs", type=int, default=0, help="chain runs for empirical frequencies")
    p.add_argument("--horizon", type=int, default=200, help="chain stages")
    p.add_argument("--crosscheck", type=int, default=0, help="samples for the EW cross-check")
    p.add_argument("--seed", type=int, default=0, help="chain seed")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        return args.func(args)
    except (UsageError, GameFormatError, FileNotFoundError, ValueError) as exc:
        print(f"ewlab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"ewlab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
