import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtbranch.arrivals import ConstantIntensity, GppParams, NoArrivals, TableIntensity
from mtbranch.simulator import simulate_batch
from mtbranch.spectral import build_mean_matrix, matrix_exp
from mtbranch.transient import (
    TwoTypeParams, displayed_density_mass, matrix_exp_mean, psi_kernel, survival_kernel,
    transient_mean_n1, zeta_roots,
)

HALF = TwoTypeParams(1.0, 1.0, 0.5, 0.5)

params_st = st.builds(
    TwoTypeParams,
    st.floats(0.05, 20.0), st.floats(0.05, 20.0),
    st.floats(0.0, 1.0), st.floats(0.0, 0.999),
)


def test_params_validation():
    with pytest.raises(ValueError):
        TwoTypeParams(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        TwoTypeParams(0.0, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        TwoTypeParams(1.0, 1.0, 1.5, 0.1)


def test_zeta_examples():
    assert zeta_roots(HALF) == pytest.approx((-0.5, -1.5), abs=1e-14)
    z1, _ = zeta_roots(TwoTypeParams(2.0, 2.0, 1.0, 1 - 1e-9))
    assert -1e-7 < z1 < 0


@settings(max_examples=200, deadline=None)
@given(params_st)
def test_vieta(p):
    z1, z2 = zeta_roots(p)
    assert z2 < 0 and z1 < 0 and z1 >= z2
    assert z1 + z2 == pytest.approx(-(p.mu1 + p.mu2), rel=1e-12, abs=1e-12)
    assert z1 * z2 == pytest.approx(p.mu1 * p.mu2 * (1 - p.p12 * p.p21), rel=1e-12, abs=1e-12)


def test_kernel_half():
    k = psi_kernel(HALF)
    s = np.linspace(0, 10, 11)
    np.testing.assert_allclose(k.density(s), 0.25 * (np.exp(-s / 2) - np.exp(-1.5 * s)), atol=1e-15)
    assert k.total_mass() == pytest.approx(4 / 3, abs=1e-12)
    assert k.lt(1.0) == pytest.approx(1 + 0.25 / (1.5 * 2.5), abs=1e-12)
    assert k.lt(1.0) == pytest.approx(1.06667, abs=5e-6)
    assert k.lt_numeric(1.0) == pytest.approx(k.lt(1.0), abs=1e-8)
    assert k.cdf(60.0) == pytest.approx(4 / 3, abs=1e-10)
    assert k.cdf(0.0) == 1.0 and k.cdf(-1.0) == 0.0
    # the alternative displayed density carries a different mass
    assert displayed_density_mass(HALF) == pytest.approx(17 / 9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(params_st)
def test_kernel_invariants(p):
    k = psi_kernel(p)
    assert k.total_mass() == pytest.approx(1 / (1 - p.p12 * p.p21), rel=1e-10)
    for x in np.geomspace(0.1, 10, 5):
        closed = 1.0 / (1.0 - p.q / ((p.mu1 + x) * (p.mu2 + x)))
        assert k.lt(x) == pytest.approx(closed, rel=1e-10)
        assert abs(k.lt_numeric(x) - closed) < 1e-8


def test_kernel_pure_atom():
    k = psi_kernel(TwoTypeParams(1.0, 2.0, 0.0, 0.7))
    assert k.coef == 0.0 and k.total_mass() == 1.0
    assert k.lt(3.0) == 1.0 and k.lt_numeric(3.0) == 1.0


def test_mm_inf_mean():
    p = TwoTypeParams(1.0, 3.0, 0.0, 0.4)
    val = transient_mean_n1(p, ConstantIntensity(2.0), 1.0)
    assert val == pytest.approx(2 * (1 - np.exp(-1)), abs=1e-8)
    assert val == pytest.approx(1.26424, abs=5e-6)
    # the literal evaluation reduces to the renewal mean here
    assert transient_mean_n1(p, ConstantIntensity(2.0), 1.0, "paper-literal") == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("variant", ["renewal-consistent", "paper-literal"])
def test_time_zero(variant):
    assert transient_mean_n1(HALF, ConstantIntensity(1.0), 0.0, variant) == 0.0


def test_unknown_variant():
    with pytest.raises(ValueError):
        transient_mean_n1(HALF, ConstantIntensity(1.0), 1.0, "other")


@pytest.mark.parametrize("p", [HALF, TwoTypeParams(1.0, 2.0, 0.6, 0.8), TwoTypeParams(3.0, 0.5, 0.9, 0.2)])
def test_survival_kernel_matches_expm(p):
    A = build_mean_matrix(p.model())
    for tau in np.linspace(0, 8, 17):
        assert survival_kernel(p, tau) == pytest.approx(matrix_exp(A, tau)[0, 0], abs=1e-6)


@pytest.mark.parametrize("spec", [
    ConstantIntensity(1.0),
    TableIntensity(np.array([0.0, 1.0, 2.5]), np.array([0.5, 2.0, 1.0])),
    GppParams(0.5, 1.0, 1.0),
], ids=["poisson", "table", "gpp"])
def test_renewal_consistent_matches_oracle(spec):
    for t in (0.5, 2.0, 4.0):
        assert transient_mean_n1(HALF, spec, t) == pytest.approx(matrix_exp_mean(HALF, spec, t)[0], abs=1e-6)


def test_half_model_mc():
    lam, t = ConstantIntensity(1.0), 2.0
    x = simulate_batch(HALF.model(), [t], 100_000, 51, arrivals=lam)[:, 0, 0]
    val = transient_mean_n1(HALF, lam, t)
    assert abs(x.mean() - val) <= 3 * x.std() / np.sqrt(x.size)


def test_gpp_mc():
    p, params, t = TwoTypeParams(1.0, 2.0, 0.6, 0.8), GppParams(0.5, 1.0, 1.0), 2.0
    x = simulate_batch(p.model(), [t], 50_000, 52, arrivals=params)[:, 0, 0]
    assert abs(x.mean() - transient_mean_n1(p, params, t)) <= 3 * x.std() / np.sqrt(x.size)


def test_variants_coincide_without_switching_or_arrivals():
    p = TwoTypeParams(1.0, 2.0, 0.0, 0.0)
    for t in (0.5, 3.0):
        a = transient_mean_n1(p, NoArrivals(), t, "renewal-consistent")
        b = transient_mean_n1(p, NoArrivals(), t, "paper-literal")
        assert a == b == 0.0


@pytest.mark.parametrize("p", [
    TwoTypeParams(1.0, 1.0, 1.0, 2.2e-309),
    TwoTypeParams(1.0, 1.0, 0.5, 1e-20),
    TwoTypeParams(1.0, 1.0 + 1e-12, 0.5, 0.5),
    TwoTypeParams(2.0, 2.0, 0.3, 1e-14),
], ids=["denormal", "tiny-q", "near-equal-rates", "merged-roots"])
def test_kernel_near_confluent_roots(p):
    k = psi_kernel(p)
    assert np.isfinite(k.total_mass())
    assert k.total_mass() == pytest.approx(1 / (1 - p.p12 * p.p21), rel=1e-10)
    assert k.cdf(200.0) == pytest.approx(k.total_mass(), rel=1e-8)
    assert abs(k.lt_numeric(1.0) - k.lt(1.0)) < 1e-8
    A = build_mean_matrix(p.model(), require_regular=False)
    for tau in (0.0, 0.5, 3.0, 10.0):
        assert survival_kernel(p, tau) == pytest.approx(matrix_exp(A, tau)[0, 0], abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(params_st, st.floats(0.0, 15.0))
def test_survival_kernel_property(p, tau):
    A = build_mean_matrix(p.model(), require_regular=False)
    assert survival_kernel(p, tau) == pytest.approx(matrix_exp(A, tau)[0, 0], abs=1e-9)
