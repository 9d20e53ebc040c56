import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtbranch import model as M
from mtbranch.model import ModelError
from mtbranch.spectral import (
    CRITICAL, SUBCRITICAL, SUPERCRITICAL, DegenerateBranchingError, SpectralError,
    build_mean_matrix, classify, critical_constants, matrix_exp, perron, resolvent_direction,
)

REGULAR = [M.pure_death(), M.critical_pair(), M.supercritical_pair(), M.doubling_pair(),
           M.deterministic_cycle(), M.symmetric_pair()]


def test_mean_matrix_examples():
    np.testing.assert_allclose(build_mean_matrix(M.symmetric_pair()), [[-1, 0.5], [0.5, -1]])
    np.testing.assert_allclose(build_mean_matrix(M.pure_death()), [[-1]])
    np.testing.assert_allclose(build_mean_matrix(M.critical_pair()), [[-1, 1], [1, -1]])


def test_orientation_on_asymmetric_model():
    with pytest.raises(ModelError):
        build_mean_matrix(M.asymmetric_chain())
    A = build_mean_matrix(M.asymmetric_chain(), require_regular=False)
    for t in (0.3, 1.0, 2.5):
        got = matrix_exp(A, t)[:, 0]
        np.testing.assert_allclose(got, [np.exp(-t), np.exp(-t) - np.exp(-2 * t)], rtol=1e-12)


@pytest.mark.parametrize("mdl,rho,regime", [
    (M.symmetric_pair(), -0.5, SUBCRITICAL),
    (M.critical_pair(), 0.0, CRITICAL),
    (M.doubling_pair(), 1.0, SUPERCRITICAL),
    (M.supercritical_pair(), 0.5, SUPERCRITICAL),
])
def test_perron_examples(mdl, rho, regime):
    pd = perron(build_mean_matrix(mdl))
    assert pd.rho == pytest.approx(rho, abs=1e-12)
    assert pd.regime == regime
    np.testing.assert_allclose(pd.u, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(pd.v, [1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("mdl", REGULAR, ids=lambda m: m.name)
def test_perron_invariants(mdl):
    pd = perron(build_mean_matrix(mdl))
    A = pd.A
    assert np.max(np.abs(A @ pd.u - pd.rho * pd.u)) <= 1e-10
    assert np.max(np.abs(A.T @ pd.v - pd.rho * pd.v)) <= 1e-10
    assert abs(pd.u.sum() - 1) <= 1e-12 and abs(pd.u @ pd.v - 1) <= 1e-12
    assert np.all(pd.u > 0) and np.all(pd.v > 0)
    for t in np.linspace(0, 5, 11):
        np.testing.assert_allclose(matrix_exp(A, t) @ pd.u * np.exp(-pd.rho * t), pd.u, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_perron_random_two_type(mu1, mu2, p12, p21):
    mdl = M.two_type(mu1, mu2, p12, p21)
    if p12 * p21 >= 1:
        return
    A = build_mean_matrix(mdl)
    pd = perron(A)
    assert pd.rho == pytest.approx(np.max(np.linalg.eigvals(A).real), abs=1e-9)
    assert np.max(np.abs(A @ pd.u - pd.rho * pd.u)) <= 1e-10
    assert np.max(np.abs(pd.v @ A - pd.rho * pd.v)) <= 1e-10


def test_classify():
    assert classify(-0.5, 0.0) == (SUBCRITICAL, "less")
    assert classify(0.0, 0.0) == (CRITICAL, "equal")
    assert classify(1.0, 1.0) == (SUPERCRITICAL, "equal")
    assert classify(1.0, 1.0 + 1e-14) == (SUPERCRITICAL, "equal")
    assert classify(0.5, 0.25)[1] == "greater"


def test_critical_constants():
    mdl = M.critical_pair()
    cc = critical_constants(mdl, perron(build_mean_matrix(mdl)))
    assert cc.Q == pytest.approx(0.25, abs=1e-12)
    assert cc.beta == pytest.approx(2.0, abs=1e-12)
    assert cc.c == pytest.approx(4.0, abs=1e-12)
    assert cc.beta / cc.c == pytest.approx(0.5)
    cyc = M.deterministic_cycle()
    with pytest.raises(DegenerateBranchingError):
        critical_constants(cyc, perron(build_mean_matrix(cyc)))
    sp = M.supercritical_pair()
    with pytest.raises(SpectralError):
        critical_constants(sp, perron(build_mean_matrix(sp)))


def test_matrix_exp_examples():
    A = build_mean_matrix(M.symmetric_pair())
    np.testing.assert_array_equal(matrix_exp(A, 0.0), np.eye(2))
    assert matrix_exp(build_mean_matrix(M.pure_death()), 1.3)[0, 0] == pytest.approx(np.exp(-1.3), rel=1e-12)
    E = matrix_exp(A, 1.0)
    d, o = 0.5 * (np.exp(-0.5) + np.exp(-1.5)), 0.5 * (np.exp(-0.5) - np.exp(-1.5))
    np.testing.assert_allclose(E, [[d, o], [o, d]], rtol=1e-10)


def test_resolvent_examples():
    pdm = build_mean_matrix(M.pure_death())
    np.testing.assert_allclose(resolvent_direction(pdm, 1.0, 1.0), [0.5])
    A = build_mean_matrix(M.critical_pair())
    r = resolvent_direction(A, 1.0, 1.0)
    np.testing.assert_allclose(r, [2 / 3, 1 / 3], atol=1e-14)
    np.testing.assert_allclose((np.eye(2) - A) @ r, [1, 0], atol=1e-10)
    with pytest.raises(SpectralError):
        resolvent_direction(A, 0.0)
