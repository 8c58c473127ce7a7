"""Penalty-constant calibration: rank paths over a constant grid and the slope heuristic."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NoRankJump

__all__ = [
    "RankPath",
    "SlopeSelection",
    "sqrt_shape",
    "default_constant_grid",
    "compute_rank_path",
    "select_constant",
]


def sqrt_shape(rank):
    """Default penalty shape ``sqrt(rank)``."""
    return math.sqrt(rank)


@dataclass(frozen=True)
class RankPath:
    """Selected rank (and achieved objective) for each constant of a grid.

    ``constants`` is strictly increasing; ``ranks[i]`` is the rank selected at
    ``constants[i]`` and ``objectives[i]`` the corresponding penalized
    objective (or fit objective, for paths built from per-constant solves).
    """

    constants: np.ndarray
    ranks: np.ndarray
    objectives: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.constants, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("a rank path needs at least two grid constants")
        if np.any(np.diff(c) <= 0):
            raise ValueError("grid constants must be strictly increasing")
        if len(self.ranks) != c.size or len(self.objectives) != c.size:
            raise ValueError("constants, ranks and objectives must share a length")

    def __len__(self):
        return len(self.constants)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["c", "rank", "objective"])
            for c, r, o in zip(self.constants, self.ranks, self.objectives):
                writer.writerow([str(float(c)), int(r), str(float(o))])


@dataclass(frozen=True)
class SlopeSelection:
    """Outcome of the slope heuristic on a rank path."""

    c_star: float
    working_constant: float
    index: int
    rank_before: int
    rank_after: int


def default_constant_grid(risk_by_rank, shape=sqrt_shape, n_points=200):
    """Geometric grid spanning the plausible range of penalty constants.

    The span is ``[risk_range / (shape(r_max) * 1e3), risk_range * 10]`` where
    ``risk_range`` is the spread of the risks across candidate ranks. A flat
    risk table yields a degenerate span, which is widened to a token interval
    so the path machinery can still run (and then report the absence of a
    jump).
    """
    if n_points < 2:
        raise ValueError("the grid needs at least two points")
    risks = np.asarray([risk_by_rank[r] for r in sorted(risk_by_rank)], dtype=float)
    if risks.size < 2:
        raise ValueError("at least two candidate ranks are required")
    r_max = max(risk_by_rank)
    risk_range = float(risks.max() - risks.min())
    if risk_range <= 0:
        risk_range = max(abs(float(risks.max())), 1.0) * 1e-12
    lo = risk_range / (shape(r_max) * 1e3)
    hi = risk_range * 10.0
    return np.geomspace(lo, hi, n_points)


def compute_rank_path(risk_by_rank, grid=None, shape=sqrt_shape, n_points=200):
    """Rank selected by ``risk(r) + C * shape(r)`` for every grid constant C.

    Parameters
    ----------
    risk_by_rank : mapping int -> float
        Fit risk for each candidate rank.
    grid : array_like, optional
        Strictly increasing penalty constants; defaults to
        :func:`default_constant_grid`.
    shape : callable
        Penalty shape; defaults to the square root.

    Returns
    -------
    RankPath
        Ties within a constant resolve to the smaller rank, which makes the
        selected rank nonincreasing along the grid.
    """
    ranks = np.asarray(sorted(risk_by_rank), dtype=int)
    if ranks.size < 2:
        raise ValueError("at least two candidate ranks are required")
    if ranks[0] < 0:
        raise ValueError("candidate ranks must be nonnegative")
    risks = np.asarray([risk_by_rank[int(r)] for r in ranks], dtype=float)
    if not np.all(np.isfinite(risks)):
        raise ValueError("risks must be finite")
    shapes = np.asarray([shape(int(r)) for r in ranks], dtype=float)
    grid = (
        default_constant_grid(risk_by_rank, shape=shape, n_points=n_points)
        if grid is None
        else np.asarray(grid, dtype=float)
    )
    objective = risks[None, :] + grid[:, None] * shapes[None, :]
    # argmin returns the first minimizer; ranks are ascending, so ties break small.
    pick = np.argmin(objective, axis=1)
    return RankPath(
        constants=grid,
        ranks=ranks[pick],
        objectives=objective[np.arange(grid.size), pick],
    )


def select_constant(path):
    """Calibrate the penalty constant from the largest jump of a rank path.

    Finds the consecutive grid pair with the maximal drop in selected rank;
    ``c_star`` is the constant at which the drop completes (the larger of the
    pair, the earliest such pair among ties) and the working constant is
    ``2 * c_star``.

    Raises
    ------
    NoRankJump
        If the selected rank never drops along the grid.
    """
    ranks = np.asarray(path.ranks, dtype=int)
    drops = ranks[:-1] - ranks[1:]
    if drops.size == 0 or drops.max() <= 0:
        raise NoRankJump(
            "the selected rank never drops along the constant grid; "
            "widen the grid before calibrating"
        )
    i = int(np.argmax(drops))
    c_star = float(path.constants[i + 1])
    return SlopeSelection(
        c_star=c_star,
        working_constant=2.0 * c_star,
        index=i + 1,
        rank_before=int(ranks[i]),
        rank_after=int(ranks[i + 1]),
    )
