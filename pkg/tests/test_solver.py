import itertools
import math
import warnings

import numpy as np
import pytest

from ms2gd.data import LabeledDataset, SyntheticSpec, generate_synthetic
from ms2gd.problem import CompositeProblem, Regularizer, linear_problem, ridge_component
from ms2gd.sampling import alpha
from ms2gd.solver import (
    DivergenceError,
    SolverConfig,
    estimate_direction,
    ms2gd_run,
    prox_gd_reference,
    prox_sgd_run,
)

from conftest import random_quadratic_problem


@pytest.fixture(scope="module")
def small_ridge():
    ds = generate_synthetic(SyntheticSpec(n=120, d=6, seed=5, task="regression", noise=0.2))
    return ridge_component(ds, 0.05)


def test_snapshot_direction_is_snapshot_gradient(quad6):
    x = np.array([0.3, -1.0, 2.0])
    g = quad6.full_gradient(x)
    est = estimate_direction(g, x, x, [0, 4], quad6)
    np.testing.assert_array_equal(est.v, g)


def _enumerate(p, g, x, y, b):
    return [estimate_direction(g, x, y, list(s), p).v
            for s in itertools.combinations(range(p.n), b)]


@pytest.mark.parametrize("b", [1, 2, 3, 6])
def test_direction_unbiased_over_all_subsets(quad6, b):
    rng = np.random.default_rng(b)
    x, y = rng.standard_normal((2, quad6.d))
    g = quad6.full_gradient(x)
    mean = np.mean(_enumerate(quad6, g, x, y, b), axis=0)
    np.testing.assert_allclose(mean, quad6.full_gradient(y), rtol=0, atol=1e-12)


@pytest.mark.parametrize("b", [1, 2, 3, 6])
def test_direction_variance_is_alpha_scaled(quad6, b):
    rng = np.random.default_rng(10 + b)
    x, y = rng.standard_normal((2, quad6.d))
    g = quad6.full_gradient(x)
    grad_y = quad6.full_gradient(y)
    vs = _enumerate(quad6, g, x, y, b)
    var = np.mean([np.sum((v - grad_y) ** 2) for v in vs])
    z = np.array([quad6.component_grad(i, y) - quad6.component_grad(i, x) for i in range(quad6.n)])
    spread = np.mean(np.sum((z - z.mean(axis=0)) ** 2, axis=1))
    assert abs(var - alpha(quad6.n, b) * spread) <= 1e-12


def test_direction_rejects_bad_batches(quad6):
    x = np.zeros(3)
    with pytest.raises(ValueError):
        estimate_direction(x, x, x, [], quad6)
    with pytest.raises(IndexError):
        estimate_direction(x, x, x, [6], quad6)


def test_full_batch_matches_gradient_descent():
    ds = generate_synthetic(SyntheticSpec(n=40, d=5, seed=1, task="regression"))
    p = linear_problem(ds, "ridge", Regularizer.zero())
    h = 0.5 / p.L
    cfg = SolverConfig(m=15, h=h, b=p.n, K=6, seed=3)
    trace = ms2gd_run(p, cfg)
    x = np.zeros(p.d)
    for t in trace.inner_lengths:
        for _ in range(t):
            x = x - h * p.full_gradient(x)
    np.testing.assert_allclose(trace.x, x, rtol=0, atol=1e-12)


def test_single_component_is_exact():
    ds = LabeledDataset.from_dense([[0.6, 0.8]], [1.0])
    p = ridge_component(ds, 0.5)
    cfg = SolverConfig(m=5, h=0.3, b=1, K=4, seed=0)
    trace = ms2gd_run(p, cfg)
    x = np.zeros(2)
    for t in trace.inner_lengths:
        for _ in range(t):
            x = p.prox(0.3, x - 0.3 * p.component_grad(0, x))
    np.testing.assert_allclose(trace.x, x, rtol=0, atol=1e-15)


def test_runs_are_bit_reproducible(small_ridge):
    cfg = SolverConfig(m=60, h=0.2, b=4, K=5, seed=99)
    a = ms2gd_run(small_ridge, cfg, timed=False)
    b = ms2gd_run(small_ridge, cfg, timed=False)
    assert a.records == b.records
    assert a.inner_lengths == b.inner_lengths
    np.testing.assert_array_equal(a.x, b.x)
    c = ms2gd_run(small_ridge, SolverConfig(m=60, h=0.2, b=4, K=5, seed=100), timed=False)
    assert c.inner_lengths != a.inner_lengths or not np.array_equal(c.x, a.x)


def test_work_accounting(small_ridge):
    b = 5
    trace = ms2gd_run(small_ridge, SolverConfig(m=30, h=0.2, b=b, K=8, seed=1))
    n = small_ridge.n
    assert trace.records[0].evaluations == 0
    assert len(trace.records) == 9
    total = 0
    for k, t in enumerate(trace.inner_lengths, start=1):
        assert 1 <= t <= 30
        total += n + 2 * b * t
        assert trace.records[k].evaluations == total
        assert trace.records[k].passes == total / n
    passes = trace.passes
    assert np.all(passes >= 0) and np.all(np.diff(passes) > 0)
    ideal = trace.ideal_parallel()
    expected = np.cumsum([0] + [n + 2 * t for t in trace.inner_lengths]) / n
    np.testing.assert_allclose(ideal.passes, expected)


def test_last_iterate_restart_not_average(small_ridge):
    # with m = 1 every epoch is one prox step from the snapshot
    cfg = SolverConfig(m=1, h=0.3, b=small_ridge.n, K=3)
    trace = ms2gd_run(small_ridge, cfg)
    x = np.zeros(small_ridge.d)
    for _ in range(3):
        x = small_ridge.prox(0.3, x - 0.3 * small_ridge.full_gradient(x))
    np.testing.assert_allclose(trace.x, x, atol=1e-14)


def test_gap_recorded_against_reference(small_ridge):
    ref = prox_gd_reference(small_ridge, 1e-13)
    trace = ms2gd_run(small_ridge, SolverConfig(m=200, h=0.2, b=4, K=6), ref.value)
    gaps = trace.gaps
    assert gaps[0] > 0
    assert gaps[-1] < 1e-3 * gaps[0]
    no_ref = ms2gd_run(small_ridge, SolverConfig(m=20, h=0.2, b=4, K=2))
    assert all(r.gap is None for r in no_ref.records)


def test_divergence_names_epoch(small_ridge):
    cfg = SolverConfig(m=50, h=50.0, b=1, K=30)
    with pytest.raises(DivergenceError) as exc:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ms2gd_run(small_ridge, cfg)
    assert 1 <= exc.value.epoch <= 30
    assert f"epoch {exc.value.epoch}" in str(exc.value)


def test_bad_inputs(small_ridge):
    with pytest.raises(ValueError):
        ms2gd_run(small_ridge, SolverConfig(m=5, h=0.1, b=small_ridge.n + 1))
    with pytest.raises(ValueError):
        ms2gd_run(small_ridge, SolverConfig(m=5, h=0.1, x0=np.zeros(2)))
    with pytest.raises(ValueError):
        SolverConfig(m=5, h=0.0)
    with pytest.raises(ValueError):
        SolverConfig(m=0, h=0.1)


def test_feasibility_is_reported_not_enforced(small_ridge):
    cfg = SolverConfig(m=5, h=0.9 / small_ridge.L, b=1, K=1)
    flags = cfg.feasibility(small_ridge)
    assert flags["stepsize_condition"] is False
    ms2gd_run(small_ridge, cfg)


def test_sgd_full_batch_is_prox_gradient(small_ridge):
    h = 0.5 / small_ridge.L
    trace = prox_sgd_run(small_ridge, h, small_ridge.n, 7)
    x = np.zeros(small_ridge.d)
    for _ in range(7):
        x = small_ridge.prox(h, x - h * small_ridge.full_gradient(x))
    np.testing.assert_allclose(trace.x, x, atol=1e-14)
    assert len(trace.records) == 8


def test_sgd_zero_stepsize_keeps_point(small_ridge):
    x0 = np.linspace(-1, 1, small_ridge.d)
    trace = prox_sgd_run(small_ridge, 0.0, 3, 100, x0=x0)
    np.testing.assert_array_equal(trace.x, x0)


def test_sgd_records_once_per_pass(small_ridge):
    trace = prox_sgd_run(small_ridge, 0.1, 8, 10 * math.ceil(small_ridge.n / 8) + 3)
    assert len(trace.records) == 12
    assert trace.records[1].evaluations == 8 * math.ceil(small_ridge.n / 8)


def test_constant_step_sgd_plateaus_above_variance_reduction(small_ridge):
    ref = prox_gd_reference(small_ridge, 1e-13)
    n = small_ridge.n
    sgd = prox_sgd_run(small_ridge, 0.3, 1, 60 * n, seed=4, reference_value=ref.value)
    gaps = sgd.gaps
    assert gaps[5] < gaps[0]
    plateau = np.median(gaps[30:])
    assert plateau > 0
    # no further decrease over the second half
    assert np.median(gaps[45:]) > 0.3 * np.median(gaps[30:45])
    vr = ms2gd_run(small_ridge, SolverConfig(m=2 * n, h=0.3, b=1, K=20, seed=4), ref.value)
    assert vr.passes_to_reach(plateau / 100) < sgd.passes[-1]


def test_reference_symmetric_ridge():
    lam = 0.4
    p = ridge_component(LabeledDataset.from_dense([[1.0], [-1.0]], [1.0, -1.0]), lam)
    ref = prox_gd_reference(p, tol=1e-14)
    assert ref.converged
    assert ref.x[0] == pytest.approx(1 / (1 + lam), abs=1e-7)
    x, val = ref
    assert val == pytest.approx(p.objective_value(np.array([1 / (1 + lam)])), abs=1e-13)


def test_reference_l1_shrinks_to_zero():
    ds = generate_synthetic(SyntheticSpec(n=50, d=4, seed=2, task="regression"))
    base = linear_problem(ds, "ridge", Regularizer.zero())
    lam = float(np.abs(base.full_gradient(np.zeros(4))).max()) * 1.01
    p = linear_problem(ds, "ridge", Regularizer.elastic_net(lam, 1e-3))
    ref = prox_gd_reference(p, tol=1e-12)
    np.testing.assert_array_equal(ref.x, 0.0)


def test_reference_matches_closed_form_quadratic():
    p, Qs, cs = random_quadratic_problem(n=5, d=4, seed=8, lam=0.3)
    Q = sum(Qs) / 5 + 0.3 * np.eye(4)
    x_star = np.linalg.solve(Q, -sum(cs) / 5)
    tol = 1e-12
    ref = prox_gd_reference(p, tol=tol)
    assert abs(ref.value - p.objective_value(x_star)) <= 10 * tol


def test_reference_warns_on_iteration_cap(small_ridge):
    with pytest.warns(RuntimeWarning):
        ref = prox_gd_reference(small_ridge, tol=1e-15, max_iters=3)
    assert not ref.converged and ref.iterations == 3
    with pytest.raises(ValueError):
        prox_gd_reference(small_ridge, tol=0.0)
