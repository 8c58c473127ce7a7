"""Loss functions, empirical and excess prediction risk, and the rank penalty apparatus."""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_pairs, check_square_matrix, check_trajectory
from .exceptions import SampleTooSmall

__all__ = [
    "LOSS_KINDS",
    "Loss",
    "empirical_risk",
    "empirical_pair_risk",
    "excess_risk",
    "PenaltyConstants",
    "theoretical_penalty",
    "max_admissible_rank",
    "check_assumption4",
]

LOSS_KINDS = ("squared-euclidean", "euclidean", "max-norm", "quantile")


@dataclass(frozen=True)
class Loss:
    """Per-step prediction loss applied to residual vectors.

    Kinds
    -----
    squared-euclidean
        ``||r||^2``. Only Lipschitz on bounded sets; flagged accordingly.
    euclidean
        ``||r||``, 1-Lipschitz.
    max-norm
        ``max_j |r_j|``, 1-Lipschitz.
    quantile
        Sum of per-coordinate pinball losses at level(s) ``alpha`` divided by
        sqrt(dimension), which makes it 1-Lipschitz for the euclidean norm.
    """

    kind: str = "squared-euclidean"
    alpha: float | tuple = 0.5

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        if self.kind == "quantile":
            a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
            if np.any(a <= 0) or np.any(a >= 1):
                raise ValueError("quantile levels must lie strictly in (0, 1)")

    @classmethod
    def from_spec(cls, spec):
        """Coerce a string, mapping, or Loss instance into a Loss."""
        if isinstance(spec, cls):
            return spec
        if isinstance(spec, str):
            return cls(kind=spec)
        if isinstance(spec, dict):
            unknown = set(spec) - {"kind", "alpha"}
            if unknown:
                raise ValueError(f"unknown loss fields: {sorted(unknown)}")
            alpha = spec.get("alpha", 0.5)
            if isinstance(alpha, list):
                alpha = tuple(alpha)
            return cls(kind=spec["kind"], alpha=alpha)
        raise TypeError(f"cannot build a loss from {spec!r}")

    @property
    def is_lipschitz(self):
        """True when the loss is globally 1-Lipschitz (not just on bounded sets)."""
        return self.kind != "squared-euclidean"

    def _alphas(self, dim):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.size == 1:
            return np.full(dim, a[0])
        if a.size != dim:
            raise ValueError(f"quantile needs 1 or {dim} levels, got {a.size}")
        return a

    def per_pair(self, residuals):
        """Loss value for each residual row of a (k, dim) array."""
        r = np.atleast_2d(np.asarray(residuals, dtype=float))
        if self.kind == "squared-euclidean":
            return np.sum(r * r, axis=1)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(r * r, axis=1))
        if self.kind == "max-norm":
            return np.max(np.abs(r), axis=1)
        a = self._alphas(r.shape[1])
        pinball = np.maximum(a * r, (a - 1.0) * r)
        return np.sum(pinball, axis=1) / math.sqrt(r.shape[1])

    def subgradient(self, residuals):
        """A subgradient of the loss at each residual row, same shape as input."""
        r = np.atleast_2d(np.asarray(residuals, dtype=float))
        if self.kind == "squared-euclidean":
            return 2.0 * r
        if self.kind == "euclidean":
            norms = np.sqrt(np.sum(r * r, axis=1, keepdims=True))
            with np.errstate(invalid="ignore", divide="ignore"):
                g = np.where(norms > 0, r / norms, 0.0)
            return g
        if self.kind == "max-norm":
            g = np.zeros_like(r)
            idx = np.argmax(np.abs(r), axis=1)
            rows = np.arange(r.shape[0])
            g[rows, idx] = np.sign(r[rows, idx])
            return g
        a = self._alphas(r.shape[1])
        return (a - (r < 0)) / math.sqrt(r.shape[1])


def _mean_loss(matrix, regressors, targets, loss):
    residuals = targets - regressors @ matrix.T
    return float(np.mean(loss.per_pair(residuals)))


def empirical_risk(matrix, trajectory, loss="squared-euclidean"):
    """Average one-step prediction loss of ``matrix`` along a trajectory.

    The trajectory is (n_steps, dimension) with rows as time; the risk
    averages the loss of ``X_t - matrix @ X_{t-1}`` over the n_steps - 1
    consecutive pairs.
    """
    loss = Loss.from_spec(loss)
    traj = check_trajectory(trajectory)
    q = check_square_matrix(matrix)
    if q.shape[0] != traj.shape[1]:
        raise ValueError("matrix dimension must match the trajectory dimension")
    return _mean_loss(q, traj[:-1], traj[1:], loss)


def empirical_pair_risk(matrix, regressors, targets, loss="squared-euclidean"):
    """Average prediction loss over explicit (regressor, target) rows."""
    loss = Loss.from_spec(loss)
    z, y = check_pairs(regressors, targets)
    q = check_square_matrix(matrix)
    if q.shape[0] != z.shape[1]:
        raise ValueError("matrix dimension must match the data dimension")
    return _mean_loss(q, z, y, loss)


def excess_risk(fitted, truth, fresh_trajectory, loss="squared-euclidean"):
    """Risk of ``fitted`` minus risk of ``truth`` on an independent trajectory."""
    return empirical_risk(fitted, fresh_trajectory, loss) - empirical_risk(
        truth, fresh_trajectory, loss
    )


@dataclass(frozen=True)
class PenaltyConstants:
    """Constants feeding the theoretical rank penalty.

    ``c`` bounds the noise coordinates, ``d`` their distribution constant, and
    ``rho`` is the contraction level, which must be strictly below 1 here.
    The derived quantities are properties, so they can never drift from the
    stored fields.
    """

    c: float = 1.0
    d: float = math.e
    rho: float = 0.99

    def __post_init__(self):
        if self.c <= 0 or self.d <= 0:
            raise ValueError("c and d must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie strictly in (0, 1)")

    @property
    def v0(self):
        return 8.0 * math.e * self.c**2 * self.d * (2.0 - self.rho) / (1.0 - self.rho) ** 3

    @property
    def delta0(self):
        return 2.0 * self.c / (1.0 - self.rho)


def theoretical_penalty(rank, dimension, n_steps, constants=None):
    """Theoretical rank penalty at the given rank for an (M, n) problem.

    ``2 (1 + rho) sqrt(4 v0 M^2 r log(9 r n) / (n - 1))`` with the natural log.
    """
    constants = constants if constants is not None else PenaltyConstants()
    if not 1 <= rank <= dimension:
        raise ValueError("rank must lie in [1, dimension]")
    if n_steps < 2:
        raise SampleTooSmall("the penalty needs at least 2 time steps")
    inner = (
        4.0
        * constants.v0
        * dimension**2
        * rank
        * math.log(9.0 * rank * n_steps)
        / (n_steps - 1)
    )
    return 2.0 * (1.0 + constants.rho) * math.sqrt(inner)


def _rank_admissible(rank, n_steps, constants, with_dimension_factor, dimension=1):
    factor = dimension if with_dimension_factor else 1
    bound = 1.0 + 16.0 * constants.delta0**2 * factor * rank * math.log(
        9.0 * rank * n_steps
    ) / constants.v0
    return n_steps >= bound


def max_admissible_rank(dimension, n_steps, constants=None):
    """Largest rank the sample length supports for the penalized criterion.

    Scans for the largest ``r <= dimension`` with
    ``n >= 1 + 16 delta0^2 r log(9 r n) / v0``.

    Raises
    ------
    SampleTooSmall
        If even rank 1 fails; the message names the minimal adequate length.
    """
    constants = constants if constants is not None else PenaltyConstants()
    if dimension < 1:
        raise ValueError("dimension must be positive")
    if n_steps < 2:
        raise SampleTooSmall("rank selection needs at least 2 time steps")
    best = 0
    for r in range(1, dimension + 1):
        if _rank_admissible(r, n_steps, constants, with_dimension_factor=False):
            best = r
        else:
            break
    if best == 0:
        n_min = n_steps
        while not _rank_admissible(1, n_min, constants, with_dimension_factor=False):
            n_min = max(n_min + 1, int(n_min * 1.5))
        while n_min > 2 and _rank_admissible(1, n_min - 1, constants, with_dimension_factor=False):
            n_min -= 1
        raise SampleTooSmall(
            f"sample length {n_steps} supports no rank at all; "
            f"at least {n_min} time steps are required"
        )
    return best


def check_assumption4(rank, dimension, n_steps, constants=None):
    """Whether the sample-length condition with the extra dimension factor holds.

    This is the stricter variant ``n >= 1 + 16 delta0^2 M r log(9 r n) / v0``.
    It is deliberately exposed separately from :func:`max_admissible_rank`,
    which omits the dimension factor; the two bounds do not agree and both are
    kept available.
    """
    constants = constants if constants is not None else PenaltyConstants()
    if not 1 <= rank <= dimension:
        raise ValueError("rank must lie in [1, dimension]")
    return _rank_admissible(
        rank, n_steps, constants, with_dimension_factor=True, dimension=dimension
    )
