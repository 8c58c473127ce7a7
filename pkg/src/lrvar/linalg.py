"""Dense matrix primitives: SVD, Schatten norms, spectral projection, singular value thresholding."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import check_matrix
from .exceptions import NumericalFailure

__all__ = [
    "RANK_RTOL",
    "SvdDecomposition",
    "LowRankFactorization",
    "svd",
    "singular_values",
    "schatten_norm",
    "spectral_norm",
    "numerical_rank",
    "project_spectral_ball",
    "singular_value_threshold",
]

# Relative cutoff defining the numerical rank throughout the package.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class SvdDecomposition:
    """Thin SVD ``u @ diag(singular_values) @ v.T`` with orthonormal columns."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.v.T


@dataclass(frozen=True)
class LowRankFactorization:
    """A matrix stored as ``b @ c.T`` with both factors of width ``rank_bound``."""

    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.b.ndim != 2 or self.c.ndim != 2 or self.b.shape[1] != self.c.shape[1]:
            raise ValueError("factors must be 2-d with a common inner dimension")

    @property
    def rank_bound(self):
        return self.b.shape[1]

    def matrix(self):
        return self.b @ self.c.T


def _svd_or_fail(a, compute_uv=True):
    # LAPACK's divide-and-conquer driver (gesdd) occasionally fails to
    # converge on valid finite matrices; retry with the slower but more
    # robust QR-iteration driver (gesvd) before giving up.
    try:
        return np.linalg.svd(a, full_matrices=False, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.svd(
            a, full_matrices=False, compute_uv=compute_uv, lapack_driver="gesvd"
        )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalFailure(
            f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc


def svd(m, rank=None):
    """Thin singular value decomposition, optionally truncated.

    Parameters
    ----------
    m : array_like
        Matrix to decompose; all entries must be finite.
    rank : int, optional
        Keep only the leading ``rank`` singular triplets.

    Returns
    -------
    SvdDecomposition
        Singular values are nonincreasing and nonnegative; ``reconstruct()``
        returns ``m`` exactly (up to floating point) when ``rank`` is None.
    """
    a = check_matrix(m)
    u, s, vt = _svd_or_fail(a)
    if rank is not None:
        if rank < 0:
            raise ValueError("rank must be nonnegative")
        k = min(int(rank), s.size)
        u, s, vt = u[:, :k], s[:k], vt[:k]
    return SvdDecomposition(u=u, singular_values=s, v=vt.T)


def singular_values(m):
    return _svd_or_fail(check_matrix(m), compute_uv=False)


def schatten_norm(m, p):
    """Schatten p-norm: the l^p norm of the singular value vector.

    ``p`` must be >= 1 or ``numpy.inf``. p=1 is the nuclear norm, p=2 the
    Frobenius norm, p=inf the spectral (operator) norm.
    """
    s = singular_values(m)
    if np.isinf(p):
        return float(s[0]) if s.size else 0.0
    if p < 1:
        raise ValueError("Schatten norms require p >= 1")
    if p == 1:
        return float(s.sum())
    if p == 2:
        return float(np.sqrt(np.sum(s * s)))
    return float(np.sum(s**p) ** (1.0 / p))


def spectral_norm(m):
    return schatten_norm(m, np.inf)


def numerical_rank(m, rtol=RANK_RTOL):
    """Number of singular values above ``rtol`` times the largest one."""
    s = singular_values(m)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def project_spectral_ball(m, radius):
    """Frobenius projection onto ``{q : ||q||_Sinf <= radius}``.

    Clips singular values at ``radius``. Matrices already inside the ball are
    returned unchanged, so the projection acts as the identity there.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    a = check_matrix(m)
    u, s, vt = _svd_or_fail(a)
    if s.size == 0 or s[0] <= radius:
        return a
    return (u * np.minimum(s, radius)) @ vt


def singular_value_threshold(m, threshold):
    """Soft-threshold the singular values of ``m`` by ``threshold``.

    This is the proximal operator of ``threshold * ||.||_S1`` at ``m``: the
    unique minimizer of ``0.5 * ||x - m||_F^2 + threshold * ||x||_S1``.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    a = check_matrix(m)
    u, s, vt = _svd_or_fail(a)
    s = np.maximum(s - threshold, 0.0)
    return (u * s) @ vt
