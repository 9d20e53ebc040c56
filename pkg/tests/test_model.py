import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtbranch import model as M
from mtbranch.model import BranchingModel, ModelError, OffspringLaw


ALL = [M.pure_death(), M.critical_pair(), M.supercritical_pair(), M.doubling_pair(),
       M.deterministic_cycle(), M.symmetric_pair(), M.asymmetric_chain()]


def test_h_eval_examples():
    assert M.h_eval(M.pure_death(), 0, np.array([0.3])) == 1.0
    assert M.h_eval(M.critical_pair(), 0, np.array([1.0, 0.5])) == pytest.approx(0.625, abs=1e-15)


@pytest.mark.parametrize("mdl", ALL, ids=lambda m: m.name)
def test_h_at_one_and_probabilities(mdl):
    for i in range(mdl.k):
        assert abs(mdl.offspring[i].probs.sum() - 1.0) <= 1e-12
        assert M.h_eval(mdl, i, np.ones(mdl.k)) == pytest.approx(1.0, abs=1e-12)


def test_h_eval_errors():
    m = M.critical_pair()
    with pytest.raises(IndexError):
        M.h_eval(m, 2, np.ones(2))
    with pytest.raises(ValueError):
        M.h_eval(m, 0, np.array([1.2, 0.5]))


def test_moments_examples():
    m, hess = M.offspring_moments(M.critical_pair())
    np.testing.assert_array_equal(m, [[0, 1], [1, 0]])
    assert hess[0, 1, 1] == 1.0
    m, hess = M.offspring_moments(M.pure_death())
    np.testing.assert_array_equal(m, [[0]])
    assert not hess.any()
    m, hess = M.offspring_moments(M.doubling_pair())
    np.testing.assert_array_equal(m, [[0, 2], [2, 0]])
    assert hess[0, 1, 1] == 2.0


@pytest.mark.parametrize("mdl", ALL, ids=lambda m: m.name)
def test_mean_matches_finite_difference(mdl):
    m, hess = M.offspring_moments(mdl)
    h = 1e-5
    for i in range(mdl.k):
        for j in range(mdl.k):
            # polynomial generating functions extend past the cube, so a central stencil is fine
            up, dn = np.ones(mdl.k), np.ones(mdl.k)
            up[j] += h
            dn[j] -= h
            d = (M.h_vector(mdl, up)[i] - M.h_vector(mdl, dn)[i]) / (2 * h)
            assert d == pytest.approx(m[i, j], abs=1e-6)
        assert np.allclose(hess[i], hess[i].T)


def test_offspring_frequencies():
    rng = np.random.default_rng(7)
    mdl = M.critical_pair()
    draws = np.array([M.sample_offspring(mdl, 0, rng) for _ in range(100_000)])
    for target, p in (([0, 0], 0.5), ([0, 2], 0.5)):
        freq = np.mean(np.all(draws == target, axis=1))
        se = np.sqrt(p * (1 - p) / len(draws))
        assert abs(freq - p) <= 3 * se
    assert np.all(M.sample_offspring(M.pure_death(), 0, rng) == [0])


def test_offspring_law_validation():
    with pytest.raises(ModelError):
        OffspringLaw.from_pairs([([0], 0.5), ([1], 0.4)])
    with pytest.raises(ModelError):
        OffspringLaw.from_pairs([([0], 0.5), ([0], 0.5)])
    with pytest.raises(ModelError):
        OffspringLaw.from_pairs([([-1], 1.0)])
    with pytest.raises(ModelError):
        BranchingModel(np.array([0.0]), (OffspringLaw.from_pairs([([0], 1.0)]),))


def test_dict_round_trip_and_catalogue():
    for mdl in ALL:
        back = BranchingModel.from_dict(mdl.to_dict())
        np.testing.assert_array_equal(back.mu, mdl.mu)
        for a, b in zip(back.offspring, mdl.offspring):
            assert a.pairs() == b.pairs()
    assert M.model_from_spec({"catalogue": "critical"}).name == "critical"
    tt = M.model_from_spec({"two_type": {"mu1": 1, "mu2": 2, "p12": 0.3, "p21": 0.4}})
    assert tt.offspring[0].pairs()[0] == ([0, 1], 0.3)
    with pytest.raises(ModelError):
        M.model_from_spec({"catalogue": "nope"})


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5), st.floats(0.1, 5.0))
def test_random_single_type_laws(weights, mu):
    w = np.array(weights) / np.sum(weights)
    pairs = [([n], float(p)) for n, p in enumerate(w)]
    pairs[-1] = (pairs[-1][0], 1.0 - float(np.sum(w[:-1])))
    mdl = BranchingModel(np.array([mu]), (OffspringLaw.from_pairs(pairs),))
    m, _ = M.offspring_moments(mdl)
    assert m[0, 0] == pytest.approx(np.sum(np.arange(len(w)) * mdl.offspring[0].probs))
    assert M.h_eval(mdl, 0, np.ones(1)) == pytest.approx(1.0, abs=1e-12)


def test_catalogue_fixed_rate_models_reject_mu():
    with pytest.raises(M.ModelError):
        M.model_from_spec({"catalogue": "symmetric", "mu": 2.0})
    assert M.model_from_spec({"catalogue": "critical", "mu": 2.0}).mu[0] == 2.0
