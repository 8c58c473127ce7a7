"""Transition-matrix estimators with a scikit-learn style fit/predict surface.

All estimators accept either a trajectory ``fit(X)`` with rows as time steps,
in which case the n - 1 consecutive pairs are the regression data, or explicit
``fit(X, y)`` regressor/target rows (used, for instance, by the second stage
of the diagonal-plus-low-rank model). After fitting, ``coef_`` holds the
transition matrix and ``predict`` maps current states to one-step predictions.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError

from ._validation import check_matrix, check_pairs, check_trajectory
from .linalg import (
    LowRankFactorization,
    numerical_rank,
    project_spectral_ball,
    spectral_norm,
    svd,
)
from .risk import Loss, PenaltyConstants, max_admissible_rank, theoretical_penalty
from .selection import RankPath, compute_rank_path, select_constant, sqrt_shape

__all__ = [
    "FitResult",
    "FullRankVAR",
    "FixedRankVAR",
    "RankPenalizedVAR",
    "NuclearNormVAR",
    "ConstantTrend",
    "IndependentAR1",
    "DiagonalPlusLowRankVAR",
    "predict_one_step",
]


def predict_one_step(matrix, state):
    """One-step prediction ``matrix @ state`` (row-wise for stacked states)."""
    m = np.asarray(matrix, dtype=float)
    x = np.asarray(state, dtype=float)
    if x.ndim == 1:
        return m @ x
    return x @ m.T


@dataclass
class FitResult:
    """Serializable summary of a fit."""

    estimator: str
    params: dict
    matrix: np.ndarray
    selected_rank: int
    empirical_risk: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    wall_ms: float | None = None
    seed: int | None = None

    def to_dict(self, include_matrix=True):
        doc = {
            "estimator": self.estimator,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "selected_rank": int(self.selected_rank),
            "empirical_risk": float(self.empirical_risk),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "objective_trace": [float(v) for v in self.objective_trace],
            "deviations": list(self.deviations),
        }
        if include_matrix:
            doc["matrix"] = np.asarray(self.matrix, dtype=float).tolist()
        if self.wall_ms is not None:
            doc["wall_ms"] = float(self.wall_ms)
        if self.seed is not None:
            doc["seed"] = int(self.seed)
        return doc


def _jsonable(v):
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    return repr(v)


class _Stats:
    """Sufficient statistics of the regression pairs, plus the raw pairs."""

    def __init__(self, z, y):
        self.z = z
        self.y = y
        self.count = z.shape[0]
        self.dim = z.shape[1]
        self.s = z.T @ z
        self.h = y.T @ z
        self.c0 = float(np.sum(y * y))
        self._cho = None
        self._jittered = False
        self._eigmax = None
        self._ls = None

    def _solver(self):
        if self._cho is None:
            w = np.linalg.eigvalsh(self.s)
            s_eff = self.s
            if w[0] <= max(w[-1], 0.0) * 1e-12:
                # Singular second-moment matrix: standard ridge jitter.
                scale = np.trace(self.s) / self.dim
                s_eff = self.s + (1e-10 * (scale if scale > 0 else 1.0)) * np.eye(self.dim)
                self._jittered = True
            self._eigmax = float(max(w[-1], 0.0))
            self._cho = cho_factor(s_eff)
        return self._cho

    def solve(self, rhs):
        return cho_solve(self._solver(), rhs)

    @property
    def eigmax(self):
        self._solver()
        return self._eigmax

    @property
    def jittered(self):
        self._solver()
        return self._jittered

    def least_squares(self):
        if self._ls is None:
            self._ls = self.solve(self.h.T).T
        return self._ls

    def quad_risk_matrix(self, q):
        return (
            self.c0 - 2.0 * float(np.sum(q * self.h)) + float(np.sum((q @ self.s) * q))
        ) / self.count

    def quad_risk_factors(self, b, c):
        hc = self.h @ c
        w = c.T @ (self.s @ c)
        return (
            self.c0 - 2.0 * float(np.sum(b * hc)) + float(np.sum((b.T @ b) * w))
        ) / self.count

    def loss_risk(self, q, loss):
        residuals = self.y - self.z @ q.T
        return float(np.mean(loss.per_pair(residuals)))

    def loss_subgradient_full(self, q, loss):
        residuals = self.y - self.z @ q.T
        g = loss.subgradient(residuals)
        return -(g.T @ self.z) / self.count


def _svt_with_values(m, threshold):
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - threshold, 0.0)
    return (u * s) @ vt, s


def _spectral_init(stats, rank, rho):
    d = svd(stats.least_squares(), rank=rank)
    b = d.u * np.minimum(d.singular_values, rho)
    return b, d.v.copy()


def _random_init(rng, dim, rank, rho):
    def semi_orth(scale):
        q, r = np.linalg.qr(rng.standard_normal((dim, rank)))
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return q * signs * scale

    return semi_orth(0.5 * rho), semi_orth(0.5)


def _alternating_quadratic(stats, rank, rho, tol, max_iter, inits):
    """Alternating exact block solves with spectral clips, best init kept.

    Each block minimization is exact under the quadratic loss; factors are
    clipped to their spectral balls after every solve and only objective-
    improving iterates are accepted, so the recorded trace is nonincreasing.
    """
    best = None
    for b0, c0 in inits:
        b, c = np.array(b0, dtype=float), np.array(c0, dtype=float)
        obj = stats.quad_risk_factors(b, c)
        run_best = (obj, b, c)
        trace = [obj]
        prev_accepted = obj
        stall = 0
        converged = False
        iters = 0
        for it in range(max_iter):
            iters = it + 1
            w = c.T @ (stats.s @ c)
            b = (stats.h @ c) @ np.linalg.pinv(w, hermitian=True)
            b = project_spectral_ball(b, rho)
            g = b.T @ b
            c = stats.solve(stats.h.T @ b) @ np.linalg.pinv(g, hermitian=True)
            c = project_spectral_ball(c, 1.0)
            obj = stats.quad_risk_factors(b, c)
            if obj <= run_best[0]:
                rel = (prev_accepted - obj) / max(1.0, abs(prev_accepted))
                run_best = (obj, b, c)
                trace.append(obj)
                prev_accepted = obj
                stall = 0
                if rel <= tol:
                    converged = True
                    break
            else:
                stall += 1
                if stall >= 5:
                    converged = True
                    break
        candidate = (run_best[0], run_best[1], run_best[2], trace, iters, converged)
        if best is None or candidate[0] < best[0]:
            best = candidate
    return best


def _alternating_subgradient(stats, rank, rho, loss, tol, max_iter, inits):
    """Projected subgradient descent on both factors; no convergence guarantee."""
    scale = math.sqrt(max(stats.eigmax / stats.count, 1e-12))
    best = None
    for b0, c0 in inits:
        b, c = np.array(b0, dtype=float), np.array(c0, dtype=float)

        def objective(bm, cm):
            return stats.loss_risk(bm @ cm.T, loss)

        obj = objective(b, c)
        run_best = (obj, b.copy(), c.copy())
        trace = [obj]
        step0 = 1.0 / scale
        for it in range(max_iter):
            residuals = stats.y - stats.z @ (b @ c.T).T
            g = loss.subgradient(residuals)
            grad_b = -(g.T @ (stats.z @ c)) / stats.count
            grad_c = -(stats.z.T @ g @ b) / stats.count
            step = step0 / math.sqrt(it + 1.0)
            b = project_spectral_ball(b - step * grad_b, rho)
            c = project_spectral_ball(c - step * grad_c, 1.0)
            obj = objective(b, c)
            if obj <= run_best[0]:
                run_best = (obj, b.copy(), c.copy())
                trace.append(obj)
        improved = trace[0] - run_best[0]
        converged = improved <= tol * max(1.0, abs(trace[0])) or (
            len(trace) > 2 and (trace[-2] - trace[-1]) <= tol * max(1.0, abs(trace[-2]))
        )
        candidate = (run_best[0], run_best[1], run_best[2], trace, max_iter, converged)
        if best is None or candidate[0] < best[0]:
            best = candidate
    return best


def _fista_nuclear(stats, c_nuc, tol, max_iter, q_init=None):
    """Accelerated proximal gradient for the nuclear-penalized quadratic risk.

    Constant step 1 / L with L the gradient Lipschitz constant, singular value
    thresholding as the proximal step, and momentum restart whenever the
    objective increases. Returns the best iterate seen.
    """
    dim = stats.dim
    lip = 2.0 * stats.eigmax / stats.count
    if lip <= 0:
        zero = np.zeros((dim, dim))
        return zero, [stats.quad_risk_matrix(zero)], 0, True
    q = np.zeros((dim, dim)) if q_init is None else np.array(q_init, dtype=float)
    yk = q.copy()
    t = 1.0
    prev_obj = stats.quad_risk_matrix(q) + c_nuc * float(
        np.linalg.svd(q, compute_uv=False).sum()
    )
    best_obj, best_q = prev_obj, q.copy()
    trace = [prev_obj]
    converged = False
    iters = 0
    for k in range(max_iter):
        iters = k + 1
        grad = (2.0 / stats.count) * (yk @ stats.s - stats.h)
        q_next, sv = _svt_with_values(yk - grad / lip, c_nuc / lip)
        obj = stats.quad_risk_matrix(q_next) + c_nuc * float(sv.sum())
        if obj > prev_obj and t > 1.0:
            # Momentum overshoot: restart from the last accepted iterate.
            t = 1.0
            yk = q.copy()
            continue
        rel = abs(prev_obj - obj) / max(1.0, abs(prev_obj))
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        yk = q_next + ((t - 1.0) / t_next) * (q_next - q)
        q, t = q_next, t_next
        prev_obj = obj
        if obj < best_obj:
            best_obj, best_q = obj, q_next.copy()
            trace.append(obj)
        if rel <= tol:
            converged = True
            break
    return best_q, trace, iters, converged


def _diagonal_ar1(z, y):
    """Per-coordinate AR(1) coefficients, clipped to [-1, 1]."""
    num = np.sum(z * y, axis=0)
    den = np.sum(z * z, axis=0)
    dead = den <= 0.0
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} coordinate(s) have zero lagged energy; "
            "their AR(1) coefficients are set to 0",
            RuntimeWarning,
            stacklevel=3,
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(dead, 0.0, num / np.where(dead, 1.0, den))
    return np.clip(d, -1.0, 1.0)


class _BaseTransitionEstimator(BaseEstimator):
    """Shared fit plumbing: validation, optional centering, diagnostics."""

    def _loss(self):
        return Loss.from_spec(self.loss) if hasattr(self, "loss") else Loss()

    def fit(self, X, y=None):
        loss = self._loss()
        if y is None:
            traj = check_trajectory(X)
            z_raw, y_raw = traj[:-1], traj[1:]
        else:
            z_raw, y_raw = check_pairs(X, y)
        dim = z_raw.shape[1]
        center = bool(getattr(self, "center", False))
        if center:
            self.mean_in_ = z_raw.mean(axis=0)
            self.mean_out_ = y_raw.mean(axis=0) if y is not None else self.mean_in_
        else:
            self.mean_in_ = np.zeros(dim)
            self.mean_out_ = np.zeros(dim)
        stats = _Stats(z_raw - self.mean_in_, y_raw - self.mean_out_)
        rng = np.random.default_rng(getattr(self, "random_state", None))
        self.deviations_ = []
        self._fit_stats(stats, loss, rng)
        self.n_features_in_ = dim
        self.rank_ = numerical_rank(self.coef_)
        self.empirical_risk_ = stats.loss_risk(self.coef_, loss)
        return self

    def _require_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet; call fit first"
            )

    def predict(self, X):
        """One-step predictions for each state row of ``X``."""
        self._require_fitted()
        x = check_matrix(np.atleast_2d(np.asarray(X, dtype=float)), "states")
        if x.shape[1] != self.n_features_in_:
            raise ValueError(
                f"states have dimension {x.shape[1]}, expected {self.n_features_in_}"
            )
        return (x - self.mean_in_) @ self.coef_.T + self.mean_out_

    def fit_result(self, wall_ms=None, seed=None):
        self._require_fitted()
        return FitResult(
            estimator=type(self).__name__,
            params=self.get_params(deep=False),
            matrix=self.coef_,
            selected_rank=self.rank_,
            empirical_risk=self.empirical_risk_,
            iterations=self.n_iter_,
            converged=self.converged_,
            objective_trace=list(self.objective_trace_),
            deviations=list(self.deviations_),
            wall_ms=wall_ms,
            seed=seed,
        )


class FullRankVAR(_BaseTransitionEstimator):
    """Unrestricted least-squares estimator of the transition matrix.

    Under the squared-euclidean loss this solves the normal equations exactly
    (with a ridge jitter only when the second-moment matrix is singular) and
    projects onto the spectral ball of radius ``rho`` only when violated; both
    events are recorded in ``deviations_``. Other losses run projected
    subgradient descent from the clipped least-squares point.
    """

    def __init__(self, rho=1.0, loss="squared-euclidean", center=False, tol=1e-8,
                 max_iter=500, random_state=None):
        self.rho = rho
        self.loss = loss
        self.center = center
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _fit_stats(self, stats, loss, rng):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        q = stats.least_squares()
        if stats.jittered:
            self.deviations_.append("ridge-jitter")
        if spectral_norm(q) > self.rho:
            q = project_spectral_ball(q, self.rho)
            self.deviations_.append("spectral-projection")
        if loss.kind == "squared-euclidean":
            self.coef_ = q
            self.n_iter_ = 0
            self.converged_ = True
            self.objective_trace_ = [stats.quad_risk_matrix(q)]
            return
        # Projected subgradient descent; the clipped LS point is the start.
        obj = stats.loss_risk(q, loss)
        best_q, best_obj = q.copy(), obj
        trace = [obj]
        g0 = stats.loss_subgradient_full(q, loss)
        step0 = max(1.0, float(np.linalg.norm(q))) / max(float(np.linalg.norm(g0)), 1e-12)
        for it in range(self.max_iter):
            g = stats.loss_subgradient_full(q, loss)
            q = project_spectral_ball(q - (step0 / math.sqrt(it + 1.0)) * g, self.rho)
            obj = stats.loss_risk(q, loss)
            if obj <= best_obj:
                best_q, best_obj = q.copy(), obj
                trace.append(obj)
        self.coef_ = best_q
        self.n_iter_ = self.max_iter
        self.converged_ = (
            len(trace) >= 2 and (trace[-2] - trace[-1]) <= self.tol * max(1.0, abs(trace[-2]))
        ) or len(trace) == 1
        self.objective_trace_ = trace


class FixedRankVAR(_BaseTransitionEstimator):
    """Reduced-rank estimator at a fixed rank via alternating minimization.

    The matrix is parameterized as ``b @ c.T`` with spectral constraints
    ``||b|| <= rho`` and ``||c|| <= 1``. Under the squared-euclidean loss each
    block solve is exact and factors are clipped after every solve; other
    losses use projected subgradient steps. Initializations: the truncated
    SVD of the full-rank least-squares solution plus ``n_restarts - 1``
    random restarts, keeping the best final objective.
    """

    def __init__(self, rank, rho=1.0, loss="squared-euclidean", center=False,
                 tol=1e-8, max_iter=500, n_restarts=3, random_state=None):
        self.rank = rank
        self.rho = rho
        self.loss = loss
        self.center = center
        self.tol = tol
        self.max_iter = max_iter
        self.n_restarts = n_restarts
        self.random_state = random_state

    def _fit_stats(self, stats, loss, rng):
        rank = int(self.rank)
        if not 1 <= rank <= stats.dim:
            raise ValueError(f"rank must lie in [1, {stats.dim}], got {rank}")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        inits = [_spectral_init(stats, rank, self.rho)]
        for _ in range(self.n_restarts - 1):
            inits.append(_random_init(rng, stats.dim, rank, self.rho))
        if loss.kind == "squared-euclidean":
            obj, b, c, trace, iters, converged = _alternating_quadratic(
                stats, rank, self.rho, self.tol, self.max_iter, inits
            )
        else:
            obj, b, c, trace, iters, converged = _alternating_subgradient(
                stats, rank, self.rho, loss, self.tol, self.max_iter, inits
            )
        self.factorization_ = LowRankFactorization(b=b, c=c)
        self.coef_ = b @ c.T
        self.n_iter_ = iters
        self.converged_ = converged
        self.objective_trace_ = trace


class RankPenalizedVAR(_BaseTransitionEstimator):
    """Rank-adaptive estimator minimizing fit risk plus a rank penalty.

    Fits the fixed-rank estimator for every candidate rank (warm-starting each
    rank with the previous solution padded by a zero column, which makes the
    risk table nonincreasing in rank) and then selects the rank minimizing
    ``risk(r) + pen(r)``.

    Penalty modes
    -------------
    "theoretical"
        ``pen(r)`` from :func:`lrvar.risk.theoretical_penalty` with
        ``constants``; candidate ranks are capped by the admissible rank for
        the sample length.
    "practical"
        ``pen(r) = constant * sqrt(r)`` with an explicit ``constant``.
    "slope-heuristic"
        The constant is calibrated from the largest jump of the rank path and
        doubled; see :func:`lrvar.selection.select_constant`.

    Ranks whose penalized objectives tie within 1e-12 resolve to the smaller
    rank.
    """

    def __init__(self, penalty="slope-heuristic", constant=None, constants=None,
                 candidate_ranks=None, rho=1.0, loss="squared-euclidean",
                 center=False, tol=1e-8, max_iter=500, n_restarts=1,
                 grid_points=200, random_state=None):
        self.penalty = penalty
        self.constant = constant
        self.constants = constants
        self.candidate_ranks = candidate_ranks
        self.rho = rho
        self.loss = loss
        self.center = center
        self.tol = tol
        self.max_iter = max_iter
        self.n_restarts = n_restarts
        self.grid_points = grid_points
        self.random_state = random_state

    def _candidates(self, stats):
        if self.candidate_ranks is not None:
            ranks = sorted({int(r) for r in self.candidate_ranks})
            if not ranks or ranks[0] < 1 or ranks[-1] > stats.dim:
                raise ValueError("candidate_ranks must lie in [1, dimension]")
            return ranks
        if self.penalty == "theoretical":
            constants = self.constants if self.constants is not None else PenaltyConstants()
            top = max_admissible_rank(stats.dim, stats.count + 1, constants)
            return list(range(1, top + 1))
        return list(range(1, stats.dim + 1))

    def _sweep(self, stats, loss, rng, ranks):
        risks = {}
        solutions = {}
        diagnostics = {}
        prev = None
        for rank in ranks:
            inits = [_spectral_init(stats, rank, self.rho)]
            if prev is not None and prev[0].shape[1] < rank:
                pad = rank - prev[0].shape[1]
                inits.append(
                    (
                        np.hstack([prev[0], np.zeros((stats.dim, pad))]),
                        np.hstack([prev[1], np.zeros((stats.dim, pad))]),
                    )
                )
            for _ in range(self.n_restarts - 1):
                inits.append(_random_init(rng, stats.dim, rank, self.rho))
            if loss.kind == "squared-euclidean":
                obj, b, c, trace, iters, converged = _alternating_quadratic(
                    stats, rank, self.rho, self.tol, self.max_iter, inits
                )
            else:
                obj, b, c, trace, iters, converged = _alternating_subgradient(
                    stats, rank, self.rho, loss, self.tol, self.max_iter, inits
                )
            risks[rank] = obj
            solutions[rank] = (b, c)
            diagnostics[rank] = (trace, iters, converged)
            prev = (b, c)
        return risks, solutions, diagnostics

    def _penalty_by_rank(self, stats, ranks, risks):
        if self.penalty == "theoretical":
            constants = self.constants if self.constants is not None else PenaltyConstants()
            self.constant_ = None
            return {
                r: theoretical_penalty(r, stats.dim, stats.count + 1, constants)
                for r in ranks
            }
        if self.penalty == "practical":
            if self.constant is None:
                raise ValueError("the practical penalty needs an explicit constant")
            self.constant_ = float(self.constant)
            return {r: self.constant_ * sqrt_shape(r) for r in ranks}
        if self.penalty == "slope-heuristic":
            if len(ranks) < 2:
                raise ValueError("the slope heuristic needs at least two candidate ranks")
            path = compute_rank_path(risks, n_points=self.grid_points)
            selection = select_constant(path)
            self.rank_path_ = path
            self.c_star_ = selection.c_star
            self.constant_ = selection.working_constant
            return {r: self.constant_ * sqrt_shape(r) for r in ranks}
        raise ValueError(f"unknown penalty mode {self.penalty!r}")

    def _fit_stats(self, stats, loss, rng):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        ranks = self._candidates(stats)
        risks, solutions, diagnostics = self._sweep(stats, loss, rng, ranks)
        penalties = self._penalty_by_rank(stats, ranks, risks)
        best_rank = None
        best_obj = math.inf
        for r in ranks:
            obj = risks[r] + penalties[r]
            if obj < best_obj - 1e-12:
                best_rank, best_obj = r, obj
        b, c = solutions[best_rank]
        trace, iters, converged = diagnostics[best_rank]
        self.factorization_ = LowRankFactorization(b=b, c=c)
        self.coef_ = b @ c.T
        self.selected_rank_ = best_rank
        self.risks_by_rank_ = risks
        self.penalties_by_rank_ = penalties
        self.n_iter_ = iters
        self.converged_ = converged
        self.objective_trace_ = trace



class NuclearNormVAR(_BaseTransitionEstimator):
    """Nuclear-norm penalized least squares via accelerated proximal gradient.

    Minimizes the quadratic empirical risk plus ``constant * ||Q||_S1`` with a
    constant step 1/L, singular value thresholding as the proximal map and
    momentum restarts; a final spectral projection enforces the ``rho`` ball
    (flagged in ``deviations_`` when active). Only the squared-euclidean loss
    is supported.

    ``constant="slope-heuristic"`` calibrates the penalty level on a coarse
    geometric grid of 30 constants spanning [C_zero/1000, C_zero], where
    C_zero is the closed-form level ``2 ||Y'Z|| / count`` above which the
    solution is exactly zero: solutions are computed per grid constant (warm
    started, descending), their numerical ranks form the rank path, and the
    working constant is twice the largest-jump constant.
    """

    def __init__(self, constant="slope-heuristic", rho=1.0, loss="squared-euclidean",
                 center=False, tol=1e-8, max_iter=500, grid_points=30,
                 random_state=None):
        self.constant = constant
        self.rho = rho
        self.loss = loss
        self.center = center
        self.tol = tol
        self.max_iter = max_iter
        self.grid_points = grid_points
        self.random_state = random_state

    def _fit_stats(self, stats, loss, rng):
        if loss.kind != "squared-euclidean":
            raise ValueError("the nuclear-norm estimator supports only the squared-euclidean loss")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if isinstance(self.constant, str):
            if self.constant != "slope-heuristic":
                raise ValueError(f"unknown calibration {self.constant!r}")
            c_nuc = self._calibrate(stats)
        else:
            c_nuc = float(self.constant)
            if c_nuc < 0:
                raise ValueError("the penalty constant must be nonnegative")
        q, trace, iters, converged = _fista_nuclear(stats, c_nuc, self.tol, self.max_iter)
        if spectral_norm(q) > self.rho * (1.0 + 1e-12):
            q = project_spectral_ball(q, self.rho)
            self.deviations_.append("spectral-projection")
        self.constant_ = c_nuc
        self.coef_ = q
        self.n_iter_ = iters
        self.converged_ = converged
        self.objective_trace_ = trace

    def _calibrate(self, stats):
        c_zero = 2.0 * spectral_norm(stats.h) / stats.count
        if c_zero <= 0:
            raise ValueError("degenerate data: the least-squares target is zero")
        grid = np.geomspace(c_zero / 1000.0, c_zero, self.grid_points)
        ranks = np.empty(grid.size, dtype=int)
        objectives = np.empty(grid.size)
        q_warm = None
        for i in range(grid.size - 1, -1, -1):
            q_warm, trace, _, _ = _fista_nuclear(
                stats, float(grid[i]), self.tol, self.max_iter, q_init=q_warm
            )
            ranks[i] = numerical_rank(q_warm)
            objectives[i] = trace[-1]
        path = RankPath(constants=grid, ranks=ranks, objectives=objectives)
        selection = select_constant(path)
        self.rank_path_ = path
        self.c_star_ = selection.c_star
        return selection.working_constant


class ConstantTrend(_BaseTransitionEstimator):
    """No-fit baseline: the transition matrix is the identity.

    Predicts the next state to equal the current one (plus the mean shift
    when centering is on), which makes its one-step errors the lag-1
    differences of the series.
    """

    def __init__(self, center=False):
        self.center = center

    def _fit_stats(self, stats, loss, rng):
        self.coef_ = np.eye(stats.dim)
        self.n_iter_ = 0
        self.converged_ = True
        self.objective_trace_ = [stats.loss_risk(self.coef_, loss)]


class IndependentAR1(_BaseTransitionEstimator):
    """Independent per-coordinate AR(1) fits: a diagonal transition matrix.

    Coefficients are clipped to [-1, 1]; coordinates with zero lagged energy
    get a zero coefficient with a warning.
    """

    def __init__(self, center=False):
        self.center = center

    def _fit_stats(self, stats, loss, rng):
        d = _diagonal_ar1(stats.z, stats.y)
        self.diagonal_ = d
        self.coef_ = np.diag(d)
        self.n_iter_ = 0
        self.converged_ = True
        self.objective_trace_ = [stats.loss_risk(self.coef_, loss)]


class DiagonalPlusLowRankVAR(_BaseTransitionEstimator):
    """Two-stage estimator: per-coordinate AR(1) diagonal plus a low-rank part.

    Stage one fits the diagonal exactly as :class:`IndependentAR1`. Stage two
    fits ``inner`` (default: a slope-calibrated :class:`RankPenalizedVAR`) on
    the stage-one residual targets against the same lagged regressors. The
    reported ``rank_`` is the selected rank of the low-rank part alone.
    """

    def __init__(self, inner=None, loss="squared-euclidean", center=False):
        self.inner = inner
        self.loss = loss
        self.center = center

    def _fit_stats(self, stats, loss, rng):
        d = _diagonal_ar1(stats.z, stats.y)
        self.diagonal_ = d
        residual_targets = stats.y - stats.z * d
        inner = clone(self.inner) if self.inner is not None else RankPenalizedVAR()
        params = inner.get_params(deep=False)
        if params.get("center"):
            inner.set_params(center=False)
        if "loss" in params:
            inner.set_params(loss=self.loss)
        inner.fit(stats.z, residual_targets)
        self.inner_ = inner
        self.coef_ = np.diag(d) + inner.coef_
        self.low_rank_part_ = inner.coef_
        self.n_iter_ = inner.n_iter_
        self.converged_ = inner.converged_
        self.objective_trace_ = list(inner.objective_trace_)

    def fit(self, X, y=None):
        super().fit(X, y)
        # Report the rank of the low-rank component, not of diag + low-rank.
        self.rank_ = numerical_rank(self.low_rank_part_)
        return self
