"""Acceptance gate: ten end-to-end checks over the full feature set.

Each test prints one ``ACCEPTANCE NN PASS|FAIL`` line with the measured
quantities before asserting, so a red criterion still reports its numbers.
The desk-scale benchmark (criteria 5 to 7) runs once as a module fixture.
"""

import json
import math
import time

import numpy as np
import pytest

from lrvar import (
    FixedRankVAR,
    FullRankVAR,
    NoiseSpec,
    PenaltyConstants,
    RankPenalizedVAR,
    SimulationGrid,
    TransitionSpec,
    emit_reports,
    generate_transition,
    run_simulation_grid,
    schatten_norm,
    simulate,
    singular_value_threshold,
    spectral_norm,
    stationary_covariance,
    theoretical_penalty,
)
import property_checks
from property_checks import (
    check_als_monotone_trace,
    check_lipschitz,
    check_projection_idempotent,
    check_rank_path_monotone,
    check_risk_monotone_in_rank,
)

DESK_ESTIMATORS = (
    {"name": "full-rank", "kind": "full-rank"},
    {"name": "oracle", "kind": "fixed-rank", "rank": "r0"},
    {"name": "rank-penalized", "kind": "rank-penalized", "penalty": "slope-heuristic"},
    {"name": "nuclear", "kind": "nuclear"},
)


def verdict(num, passed, detail):
    print(f"ACCEPTANCE {num:02d} {'PASS' if passed else 'FAIL'}: {detail}")


@pytest.fixture(scope="module")
def desk_run():
    """Benchmark grid at desk scale: M=100, n=1000, both low and full true rank."""
    grid = SimulationGrid(
        m_dim=100,
        ranks=(2, 100),
        lengths=(1000,),
        lambdas=(1.0,),
        replications=10,
        seed_base=1234,
        estimators=DESK_ESTIMATORS,
    )
    start = time.perf_counter()
    reports = run_simulation_grid(grid)
    elapsed = time.perf_counter() - start
    cells = {(c.estimator, c.r0): c for c in reports}
    return cells, elapsed


# ---------------------------------------------------------------- criterion 1


def test_criterion_01_full_rank_matches_normal_equations():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(2, 11))
        a = generate_transition(
            TransitionSpec(dimension=m, true_rank=m, spectral_bound=0.8),
            rng,
        )
        x = simulate(a, NoiseSpec(), 500, random_state=rng)
        # constraint radius 2 keeps the spectral projection inactive here
        est = FullRankVAR(rho=2.0).fit(x)
        want = np.linalg.lstsq(x[:-1], x[1:], rcond=None)[0].T
        rel = np.linalg.norm(est.coef_ - want) / np.linalg.norm(want)
        worst = max(worst, rel)
        assert not est.deviations_
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 5.0
    verdict(1, ok, f"max relative error {worst:.3e} over 20 instances in {elapsed:.2f}s")
    assert worst <= 1e-6
    assert elapsed < 5.0


# ---------------------------------------------------------------- criterion 2


def test_criterion_02_noiseless_rank_two_recovery():
    # noiseless pairs with i.i.d. regressors: a contraction driven without
    # noise decays to zero, so recovery is posed on explicit (input, output)
    # pairs spanning the whole space
    start = time.perf_counter()
    errors = []
    for seed in range(10):
        rng = np.random.default_rng(2000 + seed)
        a = generate_transition(TransitionSpec(dimension=20, true_rank=2), rng)
        a *= 0.8 / spectral_norm(a)
        z = rng.normal(size=(500, 20))
        y = z @ a.T
        est = FixedRankVAR(rank=2, random_state=seed).fit(z, y)
        errors.append(float(np.linalg.norm(est.coef_ - a)))
    elapsed = time.perf_counter() - start
    worst = max(errors)
    ok = worst <= 1e-4 and elapsed < 30.0
    verdict(2, ok, f"max Frobenius recovery error {worst:.3e} over 10 seeds in {elapsed:.2f}s")
    assert worst <= 1e-4
    assert elapsed < 30.0


# ---------------------------------------------------------------- criterion 3

AXIS = np.linspace(-4.0, 4.0, 161)  # the 0.05-step search lattice
STEP = 0.05


def _nuclear_2x2(fro2, det):
    # for a 2x2 matrix: (s1 + s2)^2 = ||X||_F^2 + 2 |det X|
    return np.sqrt(fro2 + 2.0 * np.abs(det))


def _snap_to_lattice(m):
    idx = np.clip(np.round((m + 4.0) / STEP).astype(int), 0, 160)
    return AXIS[idx]


def _prox_objective(x, y, tau):
    return 0.5 * float(np.sum((x - y) ** 2)) + tau * float(schatten_norm(x, 1))


def _lattice_prox_minimum(y, tau):
    """Exact minimum of the prox objective over the full 161^4 lattice.

    Every lattice point X with objective at most f_hat satisfies
    0.5 ||X - Y||_F^2 <= f_hat, because the nuclear term is nonnegative, and
    also 0.5 t^2 - tau t + tau ||Y||_F - f_hat <= 0 with t = ||X - Y||_F,
    because ||X||_* >= ||Y||_F - t. f_hat is the objective of an actual
    lattice point, so the global lattice minimizer lies inside the implied
    coordinate box and the restricted scan below is exhaustive.
    """
    shrunk = singular_value_threshold(y, tau)
    f_hat = min(
        _prox_objective(_snap_to_lattice(shrunk), y, tau),
        _prox_objective(_snap_to_lattice(y), y, tau),
    )
    y_fro = float(np.linalg.norm(y))
    t_ball = math.sqrt(2.0 * f_hat)
    disc = tau * tau + 2.0 * f_hat - 2.0 * tau * y_fro
    if disc >= 0.0:
        t_ball = min(t_ball, tau + math.sqrt(disc))
    t_ball += 1e-9
    w = [AXIS[np.abs(AXIS - y.flat[k]) <= t_ball] for k in range(4)]
    assert all(len(axis) for axis in w)

    c, d = np.meshgrid(w[2], w[3], indexing="ij")
    quad_cd = 0.5 * ((c - y[1, 0]) ** 2 + (d - y[1, 1]) ** 2)
    sq_cd = c * c + d * d
    best = f_hat
    for a in w[0]:
        qa = 0.5 * (a - y[0, 0]) ** 2
        if qa >= best:  # objective >= quadratic part alone
            continue
        for b in w[1]:
            qab = qa + 0.5 * (b - y[0, 1]) ** 2
            if qab >= best:
                continue
            fro2 = a * a + b * b + sq_cd
            det = a * d - b * c
            f = qab + quad_cd + tau * _nuclear_2x2(fro2, det)
            m = float(f.min())
            if m < best:
                best = m
    return best


def test_criterion_03_threshold_beats_grid_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    # self-check of the closed-form 2x2 nuclear norm against the SVD
    for _ in range(20):
        m = rng.normal(size=(2, 2))
        closed = _nuclear_2x2(float(np.sum(m * m)), float(np.linalg.det(m)))
        assert abs(closed - schatten_norm(m, 1)) < 1e-12

    worst_gap = -np.inf
    for _ in range(50):
        y = rng.uniform(-2.0, 2.0, size=(2, 2))
        tau = float(rng.uniform(0.05, 0.5))
        ours = _prox_objective(singular_value_threshold(y, tau), y, tau)
        oracle = _lattice_prox_minimum(y, tau)
        worst_gap = max(worst_gap, ours - oracle)
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-3 and elapsed < 60.0
    verdict(3, ok, f"worst objective gap vs lattice oracle {worst_gap:.3e} in {elapsed:.1f}s")
    assert worst_gap <= 1e-3
    assert elapsed < 60.0


# ---------------------------------------------------------------- criterion 4


def test_criterion_04_stationary_covariance_empirical():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    noise = NoiseSpec(family="gaussian")
    worst = 0.0
    for i in range(5):
        a = rng.normal(size=(3, 3))
        a *= rng.uniform(0.3, 0.9) / np.linalg.norm(a, 2)
        x = simulate(a, noise, 50000, random_state=1000 + i)
        emp = np.cov(x.T, bias=True)
        want = stationary_covariance(a, noise.covariance(3))
        rel = float(np.max(np.abs(emp - want)) / np.linalg.norm(want))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = worst <= 0.05 and elapsed < 30.0
    verdict(4, ok, f"worst entrywise deviation {worst:.4f} of Frobenius scale in {elapsed:.1f}s")
    assert worst <= 0.05
    assert elapsed < 30.0


# ---------------------------------------------------------------- criterion 5


def test_criterion_05_benchmark_ordering_low_rank(desk_run):
    cells, elapsed = desk_run
    pen = cells[("rank-penalized", 2)].mean
    orc = cells[("oracle", 2)].mean
    nuc = cells[("nuclear", 2)].mean
    full = cells[("full-rank", 2)].mean
    problems = []
    if not pen <= orc * 1.10:
        problems.append(f"penalized {pen:.3f} not comparable-or-below oracle {orc:.3f}")
    if not orc < nuc:
        problems.append(f"oracle {orc:.3f} not below nuclear {nuc:.3f}")
    if not nuc < full:
        problems.append(f"nuclear {nuc:.3f} not below full-rank {full:.3f}")
    if not pen < 0.5:
        problems.append(f"penalized mean {pen:.3f} outside (0, 0.5)")
    if not 0.5 < nuc < 2.0:
        problems.append(f"nuclear mean {nuc:.3f} outside (0.5, 2.0)")
    if not 2.0 < full < 5.0:
        problems.append(f"full-rank mean {full:.3f} outside (2.0, 5.0)")
    if not elapsed < 1800.0:
        problems.append(f"benchmark took {elapsed:.0f}s, budget 1800s")
    detail = (
        f"means penalized={pen:.3f} oracle={orc:.3f} nuclear={nuc:.3f} "
        f"full-rank={full:.3f} in {elapsed:.0f}s"
    )
    verdict(5, not problems, detail + ("; " + "; ".join(problems) if problems else ""))
    assert not problems, (
        "; ".join(problems)
        + " -- two gaps here are properties of fully converged solvers, not bugs: "
        "(a) the exactly solved full-rank mean sits near its theory value "
        "M^2/(n-1-M) ~ 11, above the quoted band, and (b) a tightly converged, "
        "slope-calibrated nuclear solver adapts its effective rank below the true "
        "rank and beats the fixed-rank oracle on average; analysis is in the "
        "project decisions ledger"
    )


# ---------------------------------------------------------------- criterion 6


def test_criterion_06_penalization_drawback_at_full_rank(desk_run):
    cells, _ = desk_run
    pen = cells[("rank-penalized", 100)].mean
    full = cells[("full-rank", 100)].mean
    ok = pen >= 0.8 * full
    verdict(6, ok, f"full-true-rank means: penalized={pen:.3f} full-rank={full:.3f}")
    assert pen >= 0.8 * full


# ---------------------------------------------------------------- criterion 7


def test_criterion_07_oracle_equals_full_rank_at_saturation(desk_run):
    cells, _ = desk_run
    orc = {r.replication: r.excess_risk for r in cells[("oracle", 100)].records}
    full = {r.replication: r.excess_risk for r in cells[("full-rank", 100)].records}
    rel = max(
        abs(orc[i] - full[i]) / max(abs(full[i]), 1e-300) for i in sorted(full)
    )
    ok = rel <= 1e-4
    verdict(7, ok, f"worst per-replication relative gap {rel:.3e} over 10 replications")
    assert rel <= 1e-4


# ---------------------------------------------------------------- criterion 8


def test_criterion_08_slope_heuristic_selection_rate():
    start = time.perf_counter()
    hits = 0
    selected = []
    for seed in range(20):
        rng = np.random.default_rng(8000 + seed)
        a = generate_transition(TransitionSpec(dimension=20, true_rank=2), rng)
        x = simulate(a, NoiseSpec(), 1000, random_state=rng)
        est = RankPenalizedVAR(random_state=seed).fit(x)
        selected.append(est.selected_rank_)
        hits += est.selected_rank_ in (1, 2, 3)
    elapsed = time.perf_counter() - start
    ok = hits >= 16 and elapsed < 600.0
    verdict(8, ok, f"{hits}/20 seeds selected rank in {{1,2,3}} (ranks {selected}) in {elapsed:.0f}s")
    assert hits >= 16
    assert elapsed < 600.0


# ---------------------------------------------------------------- criterion 9


def test_criterion_09_penalty_arithmetic():
    k = PenaltyConstants(c=1.0, d=1.0, rho=0.5)
    v0_exact = k.v0 == 96.0 * math.e
    d0_exact = k.delta0 == 4.0
    n, m = 1000, 100
    worst = 0.0
    base = theoretical_penalty(1, m, n, k)
    for r in range(1, 51):
        want = math.sqrt(r * math.log(9.0 * r * n) / math.log(9.0 * n))
        got = theoretical_penalty(r, m, n, k) / base
        worst = max(worst, abs(got - want) / want)
    ok = v0_exact and d0_exact and worst <= 1e-12
    verdict(
        9,
        ok,
        f"v0==96e {v0_exact}, delta0==4 {d0_exact}, worst ratio error {worst:.2e} for r<=50",
    )
    assert v0_exact
    assert d0_exact
    assert worst <= 1e-12


# --------------------------------------------------------------- criterion 10


def strip_wall_ms(text):
    lines = text.splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h != "wall_ms"]
    return "\n".join(",".join(line.split(",")[i] for i in keep) for line in lines)


def test_criterion_10_invariant_suites(tmp_path):
    check_lipschitz(n_pairs=1000)
    check_projection_idempotent()
    check_als_monotone_trace()
    check_rank_path_monotone()
    check_risk_monotone_in_rank()

    grid = SimulationGrid(
        m_dim=6,
        ranks=(2,),
        lengths=(80,),
        lambdas=(1.0,),
        replications=3,
        seed_base=99,
        estimators=(
            {"name": "full", "kind": "full-rank"},
            {"name": "pen", "kind": "rank-penalized", "penalty": "practical", "constant": 0.05},
        ),
    )
    dirs = (tmp_path / "first", tmp_path / "second")
    for d in dirs:
        emit_reports(run_simulation_grid(grid), d, grid=grid)
    identical = []
    for name in ("aggregate.csv", "dispersion_n80_lambda1.csv", "report.json"):
        identical.append((dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes())
    identical.append(
        strip_wall_ms((dirs[0] / "replications.csv").read_text())
        == strip_wall_ms((dirs[1] / "replications.csv").read_text())
    )
    ok = all(identical)
    verdict(10, ok, f"5 invariant suites green, repeated-run byte equality {identical}")
    assert ok
