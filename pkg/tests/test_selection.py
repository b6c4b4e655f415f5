import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from bayesreg import selection
from bayesreg.basis import IndexSet, enumerate_total_degree, evaluate_design
from bayesreg.errors import DataError, NotPositiveDefinite
from bayesreg.estimators import Dataset, NoiseModel, PriorSpec, fit_laplace_map
from bayesreg.selection import (
    PriorPolicy,
    degree_weighted_prior,
    kic,
    log_evidence_map,
    stepwise_select,
)

from conftest import random_spd


def exact_log_evidence(psi, y, cm, a0, caa):
    return multivariate_normal.logpdf(y, psi @ a0, cm + psi @ caa @ psi.T)


def test_scalar_evidence():
    ev = log_evidence_map(np.ones((1, 1)), [0.0], NoiseModel.iid(1.0), PriorSpec.gaussian([0.0], [[1.0]]))
    assert ev.log_evidence == pytest.approx(-0.5 * math.log(4 * math.pi), abs=1e-14)
    assert ev.kic == -2.0 * ev.log_evidence
    assert ev.p == 1


def test_evidence_exact_on_random_instances(rng):
    for _ in range(30):
        n, p = int(rng.integers(1, 30)), int(rng.integers(1, 7))
        psi, y = rng.normal(size=(n, p)), rng.normal(size=n)
        cm, caa, a0 = random_spd(rng, n), random_spd(rng, p), rng.normal(size=p)
        ev = log_evidence_map(psi, y, NoiseModel.full(cm), PriorSpec.gaussian(a0, caa))
        assert ev.log_evidence == pytest.approx(exact_log_evidence(psi, y, cm, a0, caa), abs=1e-8)


def test_kic_terms_sum_to_kic(rng):
    psi, y = rng.normal(size=(12, 3)), rng.normal(size=12)
    ev = log_evidence_map(psi, y, NoiseModel.iid(0.5), PriorSpec.gaussian(np.zeros(3), np.eye(3)))
    assert sum(ev.kic_terms().values()) == pytest.approx(ev.kic, rel=1e-12)


def test_doubling_prior_covariance_shift(rng):
    psi, y = rng.normal(size=(10, 2)), rng.normal(size=10)
    cm, caa = random_spd(rng, 10), random_spd(rng, 2)
    noise = NoiseModel.full(cm)
    a0 = np.zeros(2)
    shift = kic(psi, y, noise, PriorSpec.gaussian(a0, 2 * caa)) - kic(psi, y, noise, PriorSpec.gaussian(a0, caa))
    expected = -2 * (exact_log_evidence(psi, y, cm, a0, 2 * caa) - exact_log_evidence(psi, y, cm, a0, caa))
    assert shift == pytest.approx(expected, abs=1e-8)


def test_smaller_noise_with_perfect_fit_lowers_kic():
    psi, y = np.ones((2, 1)), np.array([1.0, 1.0])
    prior = PriorSpec.gaussian([0.0], [[1.0]])
    k_small = kic(psi, y, NoiseModel.iid(0.01), prior)
    k_large = kic(psi, y, NoiseModel.iid(1.0), prior)
    oracle_small = -2 * exact_log_evidence(psi, y, 0.01 * np.eye(2), np.zeros(1), np.eye(1))
    oracle_large = -2 * exact_log_evidence(psi, y, np.eye(2), np.zeros(1), np.eye(1))
    assert oracle_small < oracle_large
    assert k_small < k_large
    assert k_small == pytest.approx(oracle_small, abs=1e-10)


def test_nested_irrelevant_column_raises_kic(rng):
    x = rng.uniform(-1, 1, size=(40, 1))
    small = IndexSet(((0,), (1,)), "legendre")
    large = IndexSet(((0,), (1,), (2,)), "legendre")
    y = evaluate_design(x, small).values @ np.array([1.0, -2.0])
    noise = NoiseModel.iid(0.01)
    policy = PriorPolicy()
    scores = {}
    for name, s in (("small", small), ("large", large)):
        psi = evaluate_design(x, s).values
        prior = degree_weighted_prior(s, policy)
        scores[name] = kic(psi, y, noise, prior)
        oracle = -2 * exact_log_evidence(psi, y, 0.01 * np.eye(40), prior.mean, prior.cov)
        assert scores[name] == pytest.approx(oracle, abs=1e-8)
    assert scores["small"] < scores["large"]


def test_kic_invariant_under_column_permutation(rng):
    psi, y = rng.normal(size=(20, 4)), rng.normal(size=20)
    caa, a0 = random_spd(rng, 4), rng.normal(size=4)
    noise = NoiseModel.iid(0.3)
    perm = np.array([2, 0, 3, 1])
    base = kic(psi, y, noise, PriorSpec.gaussian(a0, caa))
    permuted = kic(psi[:, perm], y, noise, PriorSpec.gaussian(a0[perm], caa[np.ix_(perm, perm)]))
    assert permuted == pytest.approx(base, rel=1e-12)


def test_laplace_kic_uses_laplace_density(rng):
    psi, y = rng.normal(size=(15, 3)), rng.normal(size=15)
    noise = NoiseModel.iid(0.5)
    prior = PriorSpec.laplace(np.zeros(3), np.full(3, 2.0))
    ev = log_evidence_map(psi, y, noise, prior)
    post = fit_laplace_map(psi, y, noise, prior)
    expected_prior = np.sum(np.log(1.0) - 2.0 * np.abs(post.mean))
    assert ev.log_prior_at_map == pytest.approx(expected_prior)
    assert ev.kic == -2 * ev.log_evidence
    with pytest.raises(DataError):
        log_evidence_map(psi, y, noise, PriorSpec.uniform())


# --- prior policy -------------------------------------------------------------


def test_policy_gamma_zero_is_flat():
    prior = degree_weighted_prior(enumerate_total_degree(2, 3), PriorPolicy(2.5, 0.0))
    np.testing.assert_array_equal(np.diag(prior.cov), 2.5)
    np.testing.assert_array_equal(prior.mean, 0.0)


def test_policy_direct_formula():
    prior = degree_weighted_prior(IndexSet(((0, 1),)), PriorPolicy(1.0, 2.0))
    assert prior.cov[0, 0] == pytest.approx(0.25)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0, 7.0])
def test_policy_monotone_in_degree(gamma):
    s = enumerate_total_degree(3, 4)
    var = np.diag(degree_weighted_prior(s, PriorPolicy(1.0, gamma)).cov)
    assert np.all(np.diff(var[np.argsort(s.degrees(), kind="stable")]) <= 0)


def test_policy_validation():
    with pytest.raises(DataError):
        PriorPolicy(0.0, 1.0)
    with pytest.raises(DataError):
        PriorPolicy(1.0, -1.0)


# --- stepwise ----------------------------------------------------------------


def _check_trace(trace):
    accepted = [s.kic for s in trace.accepted()]
    chain = [trace.initial_kic] + accepted
    assert all(b < a - 1e-9 for a, b in zip(chain, chain[1:]))
    assert trace.final_kic == min(chain)


def test_noiseless_constant_keeps_only_constant(rng):
    x = rng.uniform(-1, 1, size=(30, 1))
    y = np.full(30, 2.0)
    noise = NoiseModel.iid(1e-4)
    cands = enumerate_total_degree(1, 2, "legendre")
    policy = PriorPolicy()
    base = IndexSet(((0,),), "legendre")

    def oracle(s):
        psi = evaluate_design(x, s).values
        prior = degree_weighted_prior(s, policy)
        return -2 * exact_log_evidence(psi, y, 1e-4 * np.eye(30), prior.mean, prior.cov)

    for extra in ((1,), (2,)):
        assert oracle(base.with_index(extra)) > oracle(base)
    final, trace = stepwise_select(Dataset(x, y), cands, noise, policy)
    assert final.indices == ((0,),)
    assert all(not s.accepted for s in trace.steps)
    assert len(trace.steps) == 2
    _check_trace(trace)


def test_recovers_linear_support(rng):
    x = rng.uniform(-1, 1, size=(50, 1))
    truth = IndexSet(((0,), (1,)), "legendre")
    y = evaluate_design(x, truth).values @ np.array([1.0, 3.0]) + 1e-6 * rng.normal(size=50)
    final, trace = stepwise_select(Dataset(x, y), enumerate_total_degree(1, 4, "legendre"), NoiseModel.iid(1e-12))
    assert set(truth) <= set(final)
    _check_trace(trace)


def test_constant_data_rejects_everything():
    x = np.linspace(-1, 1, 25)[:, None]
    y = np.full(25, -0.7)
    final, trace = stepwise_select(Dataset(x, y), enumerate_total_degree(1, 3), NoiseModel.iid(1.0))
    assert final.indices == ((0,),)
    assert trace.accepted() == []
    assert trace.final_kic == trace.initial_kic


def test_stepwise_deterministic_and_replays(rng):
    x = rng.uniform(-1, 1, size=(80, 2))
    y = np.sin(2 * x[:, 0]) + x[:, 1] ** 2 + 0.01 * rng.normal(size=80)
    data = Dataset(x, y)
    cands = enumerate_total_degree(2, 3, "legendre")
    noise = NoiseModel.iid(1e-4)
    f1, t1 = stepwise_select(data, cands, noise)
    f2, t2 = stepwise_select(data, cands, noise)
    assert f1 == f2
    assert [(s.candidate, s.kic, s.accepted) for s in t1.steps] == [(s.candidate, s.kic, s.accepted) for s in t2.steps]
    psi = evaluate_design(x, f1).values
    assert kic(psi, y, noise, degree_weighted_prior(f1, PriorPolicy())) == t1.final_kic
    _check_trace(t1)
    # candidates visited in canonical order
    assert [s.candidate for s in t1.steps] == list(cands.indices[1:])


def test_sweeps_never_worse(rng):
    x = rng.uniform(-1, 1, size=(60, 2))
    y = x[:, 0] * x[:, 1] + 0.5 * x[:, 1] ** 3 + 0.01 * rng.normal(size=60)
    data, cands, noise = Dataset(x, y), enumerate_total_degree(2, 3, "legendre"), NoiseModel.iid(1e-4)
    _, single = stepwise_select(data, cands, noise)
    _, multi = stepwise_select(data, cands, noise, sweeps=True)
    assert multi.final_kic <= single.final_kic
    assert multi.sweeps >= 1
    _check_trace(multi)


def test_failing_candidate_recorded(monkeypatch, rng):
    x = rng.uniform(-1, 1, size=(20, 1))
    y = x[:, 0] + 0.1 * rng.normal(size=20)
    real = selection.log_evidence_map

    def flaky(psi, y, noise, prior):
        if np.allclose(psi[:, -1], x[:, 0] ** 2):
            raise NotPositiveDefinite("boom")
        return real(psi, y, noise, prior)

    monkeypatch.setattr(selection, "log_evidence_map", flaky)
    final, trace = stepwise_select(Dataset(x, y), enumerate_total_degree(1, 2), NoiseModel.iid(0.01))
    failed = [s for s in trace.steps if s.reason]
    assert len(failed) == 1 and not failed[0].accepted
    assert "NotPositiveDefinite" in failed[0].reason


def test_stepwise_input_checks(rng):
    data = Dataset(rng.normal(size=(5, 2)), rng.normal(size=5))
    with pytest.raises(DataError):
        stepwise_select(data, IndexSet(()), NoiseModel.iid(1.0))
    with pytest.raises(DataError):
        stepwise_select(data, enumerate_total_degree(1, 2), NoiseModel.iid(1.0))
