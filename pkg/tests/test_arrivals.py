import numpy as np
import pytest
from scipy import stats

from mtbranch.arrivals import (
    CapacityError, ConstantIntensity, ExponentialIntensity, GppParams, NoArrivals, TableIntensity,
    arrivals_from_dict, gpp_marginal_pmf, gpp_sample, nhpp_sample, renewal_density, renewal_mean,
)
from mtbranch.harness.stats import chi_square_pmf


def _counts(sampler, n, seed, edges=None):
    rng = np.random.default_rng(seed)
    if edges is None:
        return np.array([sampler(rng).size for _ in range(n)])
    return np.array([np.histogram(sampler(rng), bins=edges)[0] for _ in range(n)])


def test_constant_poisson_counts():
    x = _counts(lambda r: nhpp_sample(ConstantIntensity(2.0), 1.0, r), 100_000, 1)
    _, p, _ = chi_square_pmf(x, lambda k: stats.poisson.pmf(k, 2.0))
    assert p > 0.01


def test_exponential_intensity_mean():
    lam = ExponentialIntensity(1.0, 1.0)
    x = _counts(lambda r: nhpp_sample(lam, 1.0, r), 50_000, 2)
    assert abs(x.mean() - (np.e - 1)) <= 3 * x.std(ddof=1) / np.sqrt(x.size)
    assert float(lam.cumulative(1.0)) == pytest.approx(np.e - 1)


def test_horizon_zero_and_sorted():
    rng = np.random.default_rng(0)
    assert nhpp_sample(ConstantIntensity(1.0), 0.0, rng).size == 0
    assert gpp_sample(GppParams(1, 1, 1), 0.0, rng).size == 0
    t = nhpp_sample(ExponentialIntensity(3.0, 0.5), 4.0, rng)
    assert np.all(np.diff(t) >= 0) and t.max() <= 4.0


def test_interval_counts_independent_poisson():
    lam = ExponentialIntensity(1.0, 0.7)
    edges = [0.0, 1.0, 2.0]
    x = _counts(lambda r: nhpp_sample(lam, 2.0, r), 100_000, 3, edges)
    for j in range(2):
        mean = float(lam.cumulative(edges[j + 1]) - lam.cumulative(edges[j]))
        _, p, _ = chi_square_pmf(x[:, j], lambda k: stats.poisson.pmf(k, mean))
        assert p > 0.01
    r = np.corrcoef(x[:, 0], x[:, 1])[0, 1]
    assert abs(r) < 3 / np.sqrt(x.shape[0])


def test_table_intensity(tmp_path):
    path = tmp_path / "lam.csv"
    path.write_text("t,lambda\n0,0.5\n1,2\n2,1\n")
    tab = TableIntensity.from_csv(path)
    assert float(tab(0.5)) == pytest.approx(1.25)
    assert float(tab(5.0)) == 1.0
    xs = np.linspace(0, 4, 17)
    np.testing.assert_allclose(tab.inverse_cumulative(tab.cumulative(xs)), xs, atol=1e-12)
    x = _counts(lambda r: nhpp_sample(tab, 3.0, r), 40_000, 4)
    m = float(tab.cumulative(3.0))
    _, p, _ = chi_square_pmf(x, lambda k: stats.poisson.pmf(k, m))
    assert p > 0.01
    with pytest.raises(ValueError):
        TableIntensity(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def test_gpp_geometric_marginal():
    params, t = GppParams(1.0, 1.0, 1.0), np.log(2.0)
    assert gpp_marginal_pmf(params, t, 0) == pytest.approx(0.5)
    assert gpp_marginal_pmf(params, t, 1) == pytest.approx(0.25)
    x = _counts(lambda r: gpp_sample(params, t, r), 50_000, 5)
    _, p, _ = chi_square_pmf(x, lambda k: gpp_marginal_pmf(params, t, k))
    assert p > 0.01
    assert abs(x.mean() - renewal_mean(params, t)) <= 3 * x.std(ddof=1) / np.sqrt(x.size)


@pytest.mark.parametrize("t", [0.3, 0.8, 1.5])
def test_gpp_pmf_at_several_times(t):
    params = GppParams(0.5, 1.5, 1.0)
    x = _counts(lambda r: gpp_sample(params, t, r), 30_000, int(10 * t))
    _, p, _ = chi_square_pmf(x, lambda k: gpp_marginal_pmf(params, t, k))
    assert p > 0.01


def test_gpp_small_a_is_poisson():
    params = GppParams(1e-4, 1.0, 1.0)
    x = _counts(lambda r: gpp_sample(params, 1.0, r), 50_000, 6)
    _, p, _ = chi_square_pmf(x, lambda k: stats.poisson.pmf(k, 1.0))
    assert p > 0.01


def test_gpp_expected_intensity():
    params, t = GppParams(0.5, 1.0, 1.0), 1.2
    x = _counts(lambda r: gpp_sample(params, t, r), 50_000, 7)
    inten = (params.a * x + params.b) * params.lam
    target = params.b * params.lam * np.exp(params.a * params.lam * t)
    assert abs(inten.mean() - target) <= 3 * inten.std(ddof=1) / np.sqrt(x.size)
    assert float(renewal_density(params, t)) == pytest.approx(target)


def test_renewal_mean():
    assert float(renewal_mean(ConstantIntensity(2.5), 3.0)) == pytest.approx(7.5)
    assert float(renewal_mean(GppParams(1.0, 2.0, 1.0), 1.0)) == pytest.approx(3.43656, abs=1e-5)
    for spec in (ConstantIntensity(1.0), GppParams(1, 2, 1), ExponentialIntensity(1, -1), NoArrivals()):
        ts = np.linspace(0, 5, 21)
        m = renewal_mean(spec, ts)
        assert float(m[0]) == 0.0 and np.all(np.diff(m) >= 0)


def test_gpp_pmf_normalization_and_mean():
    params, t = GppParams(0.7, 1.3, 1.0), 1.1
    n = np.arange(2000)
    p = gpp_marginal_pmf(params, t, n)
    assert p.sum() >= 1 - 1e-10
    assert float(n @ p) == pytest.approx(float(renewal_mean(params, t)), abs=1e-8)


def test_gpp_capacity_error():
    with pytest.raises(CapacityError):
        gpp_sample(GppParams(1.0, 1.0, 1.0), 30.0, np.random.default_rng(0), cap=1000)


def test_arrivals_from_dict():
    assert isinstance(arrivals_from_dict({"kind": "none"}), NoArrivals)
    assert arrivals_from_dict({"kind": "poisson", "rate": 2}).rate == 2.0
    g = arrivals_from_dict({"kind": "gpp", "a": 1, "b": 2, "lam": 0.5})
    assert g.growth == 0.5
    e = arrivals_from_dict(ExponentialIntensity(1.0, -0.5).to_dict())
    assert e.delta == -0.5
    with pytest.raises(ValueError):
        arrivals_from_dict({"kind": "hawkes"})
