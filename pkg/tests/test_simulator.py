import csv

import numpy as np
import pytest
from scipy import stats

from mtbranch import model as M
from mtbranch.arrivals import CapacityError, ConstantIntensity, GppParams, TableIntensity, nhpp_sample
from mtbranch.harness.runner import analytic_mean
from mtbranch.harness.stats import chi_square_pmf, ks_two_sample
from mtbranch.simulator import (
    chunk_stream, default_t_big, sample_W, sample_W_batch, simulate_batch, simulate_gpp_compound,
    simulate_no, simulate_superposed, simulate_with_immigration, write_trajectories_csv,
)
from mtbranch.spectral import build_mean_matrix, matrix_exp, perron


def _within(x, target, k=3.0):
    x = np.asarray(x, dtype=float)
    se = x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])
    return np.all(np.abs(x.mean(axis=0) - target) <= k * se)


def test_pure_death_survival():
    x = simulate_batch(M.pure_death(), [1.0], 100_000, 11)[:, 0, 0]
    assert _within(x == 1, np.exp(-1.0))


def test_time_zero_returns_init():
    rng = np.random.default_rng(0)
    traj = simulate_no(M.supercritical_pair(), [0.0, 1.0], rng, init=np.array([3, 2]))
    np.testing.assert_array_equal(traj.counts[0], [3, 2])


def test_critical_means_match_expm():
    grid = np.array([0.5, 1.0, 2.0])
    x = simulate_batch(M.critical_pair(), grid, 100_000, 12)
    for g, t in enumerate(grid):
        target = [0.5 * (1 + np.exp(-2 * t)), 0.5 * (1 - np.exp(-2 * t))]
        np.testing.assert_allclose(matrix_exp(build_mean_matrix(M.critical_pair()), t)[:, 0], target)
        assert _within(x[:, g, :], target)


def test_pure_death_paths_nonincreasing():
    x = simulate_batch(M.pure_death(), np.linspace(0, 3, 13), 2000, 13, init=np.array([5]))
    assert np.all(np.diff(x[:, :, 0], axis=1) <= 0)


def test_zero_arrivals():
    traj = simulate_with_immigration(M.critical_pair(), np.zeros(0), [1.0, 2.0], np.random.default_rng(1))
    assert not traj.counts.any()


def test_mm_inf_poisson():
    x = simulate_batch(M.pure_death(), [1.0], 100_000, 14, arrivals=ConstantIntensity(2.0))[:, 0, 0]
    _, p, _ = chi_square_pmf(x, lambda k: stats.poisson.pmf(k, 2 * (1 - np.exp(-1))))
    assert p > 0.01


@pytest.mark.parametrize("mdl,arr", [
    (M.supercritical_pair(), GppParams(0.25, 0.5, 1.0)),
    (M.two_type(1.0, 2.0, 0.6, 0.8), TableIntensity(np.array([0.0, 1.0, 2.0]), np.array([0.5, 2.0, 1.0]))),
    (M.symmetric_pair(), ConstantIntensity(1.5)),
], ids=["gpp", "table", "poisson"])
def test_immigration_mean_matches_quadrature(mdl, arr):
    grid = np.array([0.5, 1.5, 3.0])
    x = simulate_batch(mdl, grid, 40_000, 15, arrivals=arr)
    for g, t in enumerate(grid):
        assert _within(x[:, g, :], analytic_mean(mdl, arr, t))


@pytest.mark.parametrize("mdl", [M.supercritical_pair(), M.symmetric_pair()], ids=lambda m: m.name)
def test_martingale(mdl):
    pd = perron(build_mean_matrix(mdl))
    grid = np.array([1.0, 2.0, 3.0])
    x = simulate_batch(mdl, grid, 100_000, 16)
    for g, t in enumerate(grid):
        assert _within(x[:, g, :] @ pd.u * np.exp(-pd.rho * t), pd.u[0])


def test_W_samples():
    sp = M.supercritical_pair()
    pd = perron(build_mean_matrix(sp))
    assert default_t_big(pd.rho) == pytest.approx(np.log(1000) / 0.5)
    w = sample_W_batch(sp, pd, 20_000, 17)
    assert _within(w, 0.5)
    assert _within(w == 0, 1 / 3)
    one = sample_W(sp, pd, 5.0, np.random.default_rng(2))
    assert one.value >= 0 and one.t_big == 5.0
    dbl = M.doubling_pair()
    assert np.all(sample_W_batch(dbl, perron(build_mean_matrix(dbl)), 300, 18) > 0)
    with pytest.raises(ValueError):
        sample_W_batch(M.critical_pair(), perron(build_mean_matrix(M.critical_pair())), 10, 1)


def test_superposition_matches_merged_loop():
    mdl, lam, t = M.supercritical_pair(), ConstantIntensity(1.0), 3.0
    n = 5000
    rng = chunk_stream(19, 0)
    sup = np.array([simulate_superposed(mdl, nhpp_sample(lam, t, rng), [t], rng).counts[0] for _ in range(n)])
    merged = simulate_batch(mdl, [t], n, 20, arrivals=lam)[:, 0, :]
    for j in range(2):
        assert ks_two_sample(sup[:, j], merged[:, j])[1] > 0.01


@pytest.mark.parametrize("mdl", [M.pure_death(), M.critical_pair()], ids=lambda m: m.name)
def test_compound_sampler_matches_merged_loop(mdl):
    params, t, n = GppParams(1.0, 1.0, 1.0), 2.0, 20_000
    comp = simulate_gpp_compound(mdl, params, t, n, 21)
    merged = simulate_batch(mdl, [t], n, 22, arrivals=params)[:, 0, :]
    for j in range(mdl.k):
        assert ks_two_sample(comp[:, j], merged[:, j])[1] > 0.01
        assert abs(comp[:, j].mean() - merged[:, j].mean()) <= 3 * np.hypot(
            comp[:, j].std() / np.sqrt(n), merged[:, j].std() / np.sqrt(n))


def test_determinism_and_parallel():
    args = (M.supercritical_pair(), [1.0, 2.0], 3000, 23)
    a = simulate_batch(*args, arrivals=ConstantIntensity(1.0))
    b = simulate_batch(*args, arrivals=ConstantIntensity(1.0))
    c = simulate_batch(*args, arrivals=ConstantIntensity(1.0), workers=3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)
    d = simulate_batch(*args[:3], 24, arrivals=ConstantIntensity(1.0))
    assert not np.array_equal(a, d)
    # a prefix of replicates does not depend on how many are requested
    e = simulate_batch(args[0], args[1], 1000, 23, arrivals=ConstantIntensity(1.0))
    np.testing.assert_array_equal(a[:1000], e)


def test_population_cap():
    with pytest.raises(CapacityError, match="replicate"):
        simulate_batch(M.doubling_pair(), [20.0], 4, 25, pop_cap=1000)


def test_trajectory_csv(tmp_path):
    grid = [0.5, 1.0]
    x = simulate_batch(M.critical_pair(), grid, 3, 26)
    path = write_trajectories_csv(tmp_path / "traj.csv", grid, x)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["replicate", "t", "N_1", "N_2"]
    assert len(rows) == 1 + 3 * 2
    assert rows[1][:2] == ["0", "0.5"] and [int(v) for v in rows[2][2:]] == x[0, 1].tolist()
