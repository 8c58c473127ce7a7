"""Rank-constrained VAR(1) processes: transition sampling, stationary law, simulation."""

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from scipy.stats import norm

from ._validation import as_float_array, check_square_matrix, check_trajectory
from .exceptions import ContractionViolation, DataError
from .linalg import spectral_norm

__all__ = [
    "NOISE_FAMILIES",
    "TransitionSpec",
    "NoiseSpec",
    "generate_transition",
    "stationary_covariance",
    "simulate",
    "save_trajectory_csv",
    "load_trajectory_csv",
]

NOISE_FAMILIES = ("truncated-gaussian", "gaussian")


@dataclass(frozen=True)
class TransitionSpec:
    """Sampling law for a random transition matrix of a given rank.

    The matrix is ``u @ diag(d) @ v.T`` where ``u`` and ``v`` are
    orthonormalized uniform factors and the ``d`` entries are
    ``spectral_bound`` times independent Beta(``singular_law``, 1) draws, so
    the spectral norm never exceeds ``spectral_bound``.
    """

    dimension: int
    true_rank: int
    singular_law: float = 1.0
    spectral_bound: float = 1.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not 1 <= self.true_rank <= self.dimension:
            raise ValueError("true_rank must lie in [1, dimension]")
        if self.singular_law <= 0:
            raise ValueError("singular_law must be positive")
        if not 0 < self.spectral_bound <= 1:
            raise ValueError("spectral_bound must lie in (0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation law: centered i.i.d. coordinates, optionally truncated.

    ``sigma`` is the scale of the underlying normal before truncation;
    ``bound`` is the truncation half-width (ignored for the plain family).
    """

    family: str = "truncated-gaussian"
    sigma: float = 1.0
    bound: float = 10.0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"family must be one of {NOISE_FAMILIES}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.family == "truncated-gaussian" and self.bound <= 0:
            raise ValueError("bound must be positive")

    def coordinate_variance(self):
        """Exact per-coordinate variance, including the truncation correction."""
        if self.family == "gaussian":
            return self.sigma**2
        kappa = self.bound / self.sigma
        mass = 2.0 * norm.cdf(kappa) - 1.0
        return self.sigma**2 * (1.0 - 2.0 * kappa * norm.pdf(kappa) / mass)

    def covariance(self, dimension):
        return self.coordinate_variance() * np.eye(dimension)


def _uniform_orthonormal(rng, rows, cols):
    # QR of a uniform[0,1] factor, with the sign convention diag(r) >= 0 so
    # the draw is a deterministic function of the generator state.
    q, r = np.linalg.qr(rng.uniform(size=(rows, cols)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def generate_transition(spec, random_state=None):
    """Draw a random transition matrix according to ``spec``.

    Returns a ``dimension x dimension`` matrix of rank ``true_rank`` (almost
    surely) with spectral norm at most ``spec.spectral_bound``.
    """
    rng = np.random.default_rng(random_state)
    u = _uniform_orthonormal(rng, spec.dimension, spec.true_rank)
    v = _uniform_orthonormal(rng, spec.dimension, spec.true_rank)
    d = spec.spectral_bound * rng.beta(spec.singular_law, 1.0, size=spec.true_rank)
    return (u * d) @ v.T


def stationary_covariance(a, noise_cov):
    """Covariance of the stationary law of ``X_t = a X_{t-1} + xi_t``.

    Solves the discrete Lyapunov equation ``S = a S a.T + noise_cov``, which
    the empirical covariance of a long simulated trajectory converges to.

    Raises
    ------
    ContractionViolation
        If the spectral norm of ``a`` is not strictly below 1.
    """
    a = check_square_matrix(a, "transition matrix")
    q = check_square_matrix(np.atleast_2d(noise_cov), "noise covariance")
    if q.shape[0] != a.shape[0]:
        raise ValueError("noise covariance dimension must match the transition matrix")
    if not np.allclose(q, q.T, atol=1e-10):
        raise ValueError("noise covariance must be symmetric")
    s1 = spectral_norm(a)
    if s1 >= 1.0:
        raise ContractionViolation(
            f"stationary law requires spectral norm < 1, got {s1:.6g}"
        )
    return solve_discrete_lyapunov(a, q)


def _draw_noise(rng, noise, steps, dimension):
    draws = rng.normal(0.0, noise.sigma, size=(steps, dimension))
    if noise.family == "truncated-gaussian":
        # Rejection sampling: redraw coordinates outside the support.
        bad = np.abs(draws) > noise.bound
        while bad.any():
            draws[bad] = rng.normal(0.0, noise.sigma, size=int(bad.sum()))
            bad = np.abs(draws) > noise.bound
    return draws


def simulate(a, noise, n_steps, random_state=None, burn_in=1000, initial=None):
    """Simulate a VAR(1) trajectory, discarding an initial burn-in.

    Parameters
    ----------
    a : array_like
        Square transition matrix with spectral norm at most 1. A norm of
        exactly 1 is allowed with a warning; anything above fails.
    noise : NoiseSpec
        Innovation law.
    n_steps : int
        Number of retained time steps (rows of the result).
    random_state : seed or numpy Generator, optional
    burn_in : int
        Steps simulated from the zero state and discarded before recording.
    initial : array_like, optional
        Starting state; defaults to the origin.

    Returns
    -------
    ndarray of shape (n_steps, dimension)
    """
    a = check_square_matrix(a, "transition matrix")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    s1 = spectral_norm(a)
    if s1 > 1.0 + 1e-10:
        raise ContractionViolation(
            f"transition spectral norm {s1:.6g} exceeds 1; the process explodes"
        )
    if s1 >= 1.0 - 1e-12:
        warnings.warn(
            "transition spectral norm is 1 within tolerance; "
            "the trajectory may be borderline nonstationary",
            RuntimeWarning,
            stacklevel=2,
        )
    dim = a.shape[0]
    rng = np.random.default_rng(random_state)
    x = np.zeros(dim) if initial is None else as_float_array(initial, "initial").reshape(dim)
    total = burn_in + n_steps
    draws = _draw_noise(rng, noise, total, dim)
    out = np.empty((n_steps, dim))
    for t in range(total):
        x = a @ x + draws[t]
        if t >= burn_in:
            out[t - burn_in] = x
    return out


def save_trajectory_csv(path, trajectory):
    """Write a trajectory as CSV with header ``t,x1,...,xM`` and one row per step.

    Floats are written with round-trip precision, so a load reproduces the
    array bit for bit.
    """
    traj = check_trajectory(trajectory, min_steps=1)
    dim = traj.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{j + 1}" for j in range(dim)])
        for t, row in enumerate(traj):
            writer.writerow([t] + [f"{v:.17g}" for v in row])


def load_trajectory_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty trajectory file") from None
        if not header or header[0] != "t":
            raise DataError(f"{path}: expected a trajectory header starting with 't'")
        dim = len(header) - 1
        if dim < 1 or header[1:] != [f"x{j + 1}" for j in range(dim)]:
            raise DataError(f"{path}: malformed trajectory header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DataError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    if not rows:
        raise DataError(f"{path}: trajectory file has no data rows")
    return np.asarray(rows, dtype=float)
