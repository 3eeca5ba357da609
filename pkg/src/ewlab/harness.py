"""Seeded Monte Carlo experiments over grids of initial profiles.

Every run has its own seed, derived from ``(master_seed, ix, iy, r)`` with
``numpy.random.SeedSequence``, so a single run can be replayed in isolation
and results do not depend on how cells are spread over worker threads.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .engine import DEFAULT_EPS, DEFAULT_HORIZON, EWConfig, StoppingRule, run
from .game import Game, MixedProfile, strict_nash_equilibria

HORIZON_CODE = -1
STATIONARY_CODE = -2


@dataclass(frozen=True)
class Cell:
    ix: int
    iy: int
    profile: MixedProfile


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    game: Game
    cells: tuple[Cell, ...]
    runs: int = 500
    learning_rates: float | tuple[float, ...] = 0.1
    eps: float = DEFAULT_EPS
    horizon: int | None = DEFAULT_HORIZON
    master_seed: int = 0
    xs: tuple[float, ...] | None = None
    ys: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.cells:
            raise ValueError("the grid is empty")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        for c in self.cells:
            c.profile.check_game(self.game)

    @classmethod
    def grid_2x2(cls, game: Game, xs: Sequence[float], ys: Sequence[float], **kw) -> "ExperimentSpec":
        """Cells ``(x, y)`` = probabilities of each player's first action."""
        if game.action_counts != (2, 2):
            raise ValueError("grid_2x2 needs a two-player game with two actions each")
        xs = tuple(float(x) for x in xs)
        ys = tuple(float(y) for y in ys)
        cells = tuple(
            Cell(i, j, MixedProfile.from_2x2(x, y))
            for i, x in enumerate(xs) for j, y in enumerate(ys)
        )
        return cls(game, cells, xs=xs, ys=ys, **kw)

    @classmethod
    def single(cls, game: Game, profile: MixedProfile, **kw) -> "ExperimentSpec":
        return cls(game, (Cell(0, 0, profile),), **kw)

    def stopping_rule(self) -> StoppingRule:
        return StoppingRule.absorption(self.eps, self.horizon)


def run_seed(master_seed: int, ix: int, iy: int, r: int) -> int:
    """64-bit seed of run ``r`` in cell ``(ix, iy)``."""
    ss = np.random.SeedSequence([int(master_seed), ix, iy, r])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Per-run outcomes; ``outcomes[c, r]`` is a strict NE index, -1 (horizon) or -2 (stationary)."""

    spec: ExperimentSpec
    equilibria: tuple[tuple[int, ...], ...]
    seeds: np.ndarray
    outcomes: np.ndarray
    times: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        """``(cells, K + 1)`` counts: one column per strict NE, then the non-absorbed runs."""
        K = len(self.equilibria)
        out = np.zeros((len(self.spec.cells), K + 1), dtype=np.int64)
        for k in range(K):
            out[:, k] = (self.outcomes == k).sum(axis=1)
        out[:, K] = (self.outcomes < 0).sum(axis=1)
        return out

    @property
    def capped(self) -> np.ndarray:
        return (self.outcomes == HORIZON_CODE).sum(axis=1)

    def frequencies(self, equilibrium: Sequence[int] | int = 0) -> np.ndarray:
        k = equilibrium if isinstance(equilibrium, (int, np.integer)) else \
            self.equilibria.index(tuple(equilibrium))
        return (self.outcomes == k).mean(axis=1)

    def mean_time(self) -> np.ndarray:
        return self.times.mean(axis=1)

    def max_time(self) -> np.ndarray:
        return self.times.max(axis=1)

    def table(self, equilibrium: Sequence[int] | int = 0) -> np.ndarray:
        """Frequency matrix with rows indexed by ``xs`` and columns by ``ys``."""
        spec = self.spec
        if spec.xs is None:
            raise ValueError("not a 2x2 grid experiment")
        out = np.full((len(spec.xs), len(spec.ys)), np.nan)
        for c, f in zip(spec.cells, self.frequencies(equilibrium)):
            out[c.ix, c.iy] = f
        return out

    def write_table_csv(self, out: str | Path | TextIO, equilibrium: Sequence[int] | int = 0) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_table_csv(fh, equilibrium)
            return
        spec = self.spec
        labels = spec.game.labels
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"p0({labels[0][0]})\\p0({labels[1][0]})"] + [f"{y:.17g}" for y in spec.ys])
        for x, row in zip(spec.xs, self.table(equilibrium)):
            w.writerow([f"{x:.17g}"] + [f"{v:.17g}" for v in row])

    def table_csv(self, equilibrium: Sequence[int] | int = 0) -> str:
        buf = io.StringIO()
        self.write_table_csv(buf, equilibrium)
        return buf.getvalue()

    def verdict_label(self, code: int) -> str:
        if code >= 0:
            return "absorbed" + self.spec.game.format_profile(self.equilibria[code])
        return "horizon" if code == HORIZON_CODE else "stationary"

    def write_run_log(self, out: str | Path | TextIO) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_run_log(fh)
            return
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["ix", "iy", "run", "seed", "verdict", "time"])
        for c, cell in enumerate(self.spec.cells):
            for r in range(self.spec.runs):
                w.writerow([cell.ix, cell.iy, r, int(self.seeds[c, r]),
                            self.verdict_label(int(self.outcomes[c, r])), int(self.times[c, r])])

    def run_log_csv(self) -> str:
        buf = io.StringIO()
        self.write_run_log(buf)
        return buf.getvalue()


def default_threads() -> int:
    env = os.environ.get("EWLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_cell(spec: ExperimentSpec, c: int, index: dict, stop: StoppingRule):
    cell = spec.cells[c]
    seeds = np.empty(spec.runs, dtype=np.uint64)
    outcomes = np.empty(spec.runs, dtype=np.int64)
    times = np.empty(spec.runs, dtype=np.int64)
    base = EWConfig(spec.game, spec.learning_rates, cell.profile, 0)
    for r in range(spec.runs):
        s = run_seed(spec.master_seed, cell.ix, cell.iy, r)
        out = run(base.with_seed(s), stop)
        seeds[r] = s
        times[r] = out.stop.t
        if out.stop.kind == "absorbed":
            outcomes[r] = index[out.stop.equilibrium]
        elif out.stop.kind == "stationary":
            outcomes[r] = STATIONARY_CODE
        else:
            outcomes[r] = HORIZON_CODE
    return c, seeds, outcomes, times


def _execute(spec: ExperimentSpec, threads: int | None) -> ExperimentResult:
    sne = tuple(strict_nash_equilibria(spec.game))
    index = {a: k for k, a in enumerate(sne)}
    stop = spec.stopping_rule()
    C, R = len(spec.cells), spec.runs
    seeds = np.empty((C, R), dtype=np.uint64)
    outcomes = np.empty((C, R), dtype=np.int64)
    times = np.empty((C, R), dtype=np.int64)
    threads = threads or default_threads()

    def store(res):
        c, s, o, t = res
        seeds[c], outcomes[c], times[c] = s, o, t

    if threads <= 1:
        for c in range(C):
            store(_run_cell(spec, c, index, stop))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for res in pool.map(lambda c: _run_cell(spec, c, index, stop), range(C)):
                store(res)
    return ExperimentResult(spec, sne, seeds, outcomes, times)


def run_grid(spec: ExperimentSpec, threads: int | None = None) -> ExperimentResult:
    """Run every cell ``spec.runs`` times under the absorption rule.

    Output is identical for any ``threads``; each cell's runs are written to
    fixed slots of the result arrays.
    """
    if not strict_nash_equilibria(spec.game):
        raise ValueError("the game has no strict Nash equilibrium")
    return _execute(spec, threads)


@dataclass(frozen=True)
class AbsorptionTimeSummary:
    runs: int
    absorbed: int
    capped_fraction: float
    mean: float
    max: int
    quantiles: dict

    def summary(self) -> str:
        q = "  ".join(f"q{int(100 * k)}={v:.4g}" for k, v in self.quantiles.items())
        return (f"runs {self.runs}  absorbed {self.absorbed}  capped {self.capped_fraction:.4g}\n"
                f"mean {self.mean:.4g}  max {self.max}  {q}")


def absorption_time_stats(spec: ExperimentSpec, threads: int | None = None,
                          levels: Sequence[float] = (0.5, 0.9, 0.99)) -> AbsorptionTimeSummary:
    """Distribution of the absorption stage over all runs of ``spec``."""
    res = _execute(spec, threads)
    absorbed = res.outcomes >= 0
    t = res.times[absorbed]
    total = res.outcomes.size
    if t.size:
        quant = {float(q): float(np.quantile(t, q)) for q in levels}
        mean, mx = float(t.mean()), int(t.max())
    else:
        quant = {float(q): float("nan") for q in levels}
        mean, mx = float("nan"), 0
    return AbsorptionTimeSummary(
        total, int(absorbed.sum()), float((res.outcomes == HORIZON_CODE).sum() / total), mean, mx, quant
    )


# --- basin function fixed point ---------------------------------------------


@dataclass(frozen=True, eq=False)
class BasinGrid:
    """``values[i, j]`` approximates ``f(nodes[i], nodes[j])``, ``f`` = P(absorb at the first diagonal cell)."""

    a: float
    b: float
    nodes: np.ndarray
    values: np.ndarray
    iterations: int
    residual: float
    residuals: np.ndarray = field(repr=False)
    converged: bool = True

    @property
    def resolution(self) -> int:
        return self.nodes.size

    def __call__(self, x: float, y: float) -> float:
        M = _interp_matrix(self.nodes, np.array([x]), np.array([y]))
        return float((M @ self.values.ravel())[0])

    def at(self, xs: Sequence[float], ys: Sequence[float]) -> np.ndarray:
        X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        M = _interp_matrix(self.nodes, X.ravel(), Y.ravel())
        return (M @ self.values.ravel()).reshape(X.shape)

    def write_csv(self, out: str | Path | TextIO, xs=None, ys=None) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh, xs, ys)
            return
        xs = self.nodes if xs is None else np.asarray(xs, float)
        ys = self.nodes if ys is None else np.asarray(ys, float)
        vals = self.at(xs, ys)
        out.write(f"# a={self.a!r} b={self.b!r} resolution={self.resolution}"
                  f" iterations={self.iterations} residual={self.residual:.17g}"
                  f" converged={self.converged}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x\\y"] + [f"{y:.17g}" for y in ys])
        for x, row in zip(xs, vals):
            w.writerow([f"{x:.17g}"] + [f"{v:.17g}" for v in row])

    def to_csv(self, xs=None, ys=None) -> str:
        buf = io.StringIO()
        self.write_csv(buf, xs, ys)
        return buf.getvalue()


def _interp_matrix(nodes: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> sp.csr_matrix:
    """Sparse bilinear interpolation from the ``nodes x nodes`` grid to query points."""
    n = nodes.size
    h = nodes[1] - nodes[0]

    def locate(q):
        i = np.clip(np.floor((q - nodes[0]) / h).astype(np.int64), 0, n - 2)
        w = np.clip((q - nodes[i]) / h, 0.0, 1.0)
        return i, w

    i, wx = locate(xq)
    j, wy = locate(yq)
    rows = np.repeat(np.arange(xq.size), 4)
    cols = np.stack([i * n + j, i * n + j + 1, (i + 1) * n + j, (i + 1) * n + j + 1], axis=1).ravel()
    vals = np.stack([(1 - wx) * (1 - wy), (1 - wx) * wy, wx * (1 - wy), wx * wy], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(xq.size, n * n))


def solve_basin_fixed_point(a: float, b: float, resolution: int = 201, max_iter: int = 200000,
                            tol: float = 1e-12) -> BasinGrid:
    """Fixed point of the one-step map of the 2x2 pure coordination game.

    ``f(x, y) = xy f(u_a x, u_b y) + x(1-y) f(d_a x, u_b y) + (1-x)y f(u_a x, d_b y)
    + (1-x)(1-y) f(d_a x, d_b y)`` with ``u_a x = x(1+a)/(1+ax)`` and
    ``d_a x = x/(1+a(1-x))``.  The whole boundary is pinned: ``f = 1`` on
    ``x = 1`` and on ``y = 1`` (except the corners ``(1,0)`` and ``(0,1)``),
    ``f = 0`` on ``x = 0`` and on ``y = 0``.  Iterates until the sup-norm
    change drops below ``tol``; the returned grid records whether it did.
    """
    if resolution < 11:
        raise ValueError("resolution must be at least 11")
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    nodes = np.linspace(0.0, 1.0, resolution)
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    ux, dx = x * (1 + a) / (1 + a * x), x / (1 + a * (1 - x))
    uy, dy = y * (1 + b) / (1 + b * y), y / (1 + b * (1 - y))
    M = (
        sp.diags(x * y) @ _interp_matrix(nodes, ux, uy)
        + sp.diags(x * (1 - y)) @ _interp_matrix(nodes, dx, uy)
        + sp.diags((1 - x) * y) @ _interp_matrix(nodes, ux, dy)
        + sp.diags((1 - x) * (1 - y)) @ _interp_matrix(nodes, dx, dy)
    ).tocsr()

    boundary = (x == 0) | (y == 0) | (x == 1) | (y == 1)
    pinned = np.where(boundary & (x > 0) & (y > 0), 1.0, 0.0)
    interior = ~boundary
    M = sp.diags(interior.astype(float)) @ M
    f = pinned + interior * (x * y)  # start from the product guess
    residuals = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = M @ f + pinned
        r = float(np.max(np.abs(g - f)))
        residuals.append(r)
        f = g
        if r < tol:
            converged = True
            break
    return BasinGrid(a, b, nodes, f.reshape(resolution, resolution), it,
                     residuals[-1] if residuals else 0.0, np.array(residuals), converged)
