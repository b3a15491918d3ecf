"""Toy targets: exact densities, seeded sampling, generators."""

import json

import numpy as np
import pytest
from scipy import integrate, stats

from flowbench.distributions import (
    CorrelatedGaussian,
    MixtureOfGaussians,
    SampleSet,
    StandardNormal,
    make_target,
    random_correlation_matrix,
    target_from_json,
)
from flowbench.errors import ContractError, ShapeError

from _oracles import mog_logpdf_scalar


def test_sample_set_validation():
    with pytest.raises(ContractError):
        SampleSet(np.ones((3, 2)) * np.nan, "target", 0)
    with pytest.raises(ContractError):
        SampleSet(np.ones(5), "target", 0)
    with pytest.raises(ContractError):
        SampleSet(np.ones((3, 2)), "model", 0)
    ok = SampleSet(np.ones((3, 2)), "flow", 7)
    assert ok.n == 3 and ok.dim == 2 and ok.seed == 7


def test_standard_normal_log_prob_matches_scipy():
    base = StandardNormal(3)
    x = np.random.default_rng(0).normal(size=(50, 3))
    expect = stats.multivariate_normal(np.zeros(3), np.eye(3)).logpdf(x)
    assert np.allclose(base.log_prob(x), expect, rtol=1e-12)


def test_mog_log_prob_matches_scalar_oracle():
    mog = MixtureOfGaussians.random(3, seed=5)
    pts = np.random.default_rng(1).uniform(-10, 10, size=(20, 3))
    got = mog.log_prob(pts)
    for i, p in enumerate(pts):
        expect = mog_logpdf_scalar(mog.means, mog.variances, mog.weights, p)
        assert got[i] == pytest.approx(expect, rel=1e-12)


def test_mog_density_integrates_to_one():
    mog = MixtureOfGaussians.random(1, seed=11)
    xs = np.linspace(-30.0, 30.0, 120_001)
    dens = np.exp(mog.log_prob(xs[:, None]))
    total = integrate.trapezoid(dens, xs)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_mog_generator_ranges():
    mog = MixtureOfGaussians.random(6, seed=3)
    assert mog.means.shape == (6, 3)
    assert np.all((mog.means >= -8.0) & (mog.means <= 8.0))
    sig = np.sqrt(mog.variances)
    assert np.all((sig >= 0.3) & (sig <= 1.5))
    assert np.allclose(mog.weights.sum(axis=1), 1.0, atol=1e-12)


def test_mog_three_separated_modes_have_matching_weights():
    w = np.array([[0.5, 0.2, 0.3]])
    mog = MixtureOfGaussians(
        means=[[-5.0, 0.0, 5.0]], variances=[[0.01, 0.01, 0.01]], weights=w
    )
    n = 200_000
    x = mog.sample(n, seed=17).data[:, 0]
    counts = np.array(
        [(x <= -2.5).mean(), ((x > -2.5) & (x <= 2.5)).mean(), (x > 2.5).mean()]
    )
    # each empirical weight within 3 binomial sigmas of the true one
    for c, wt in zip(counts, w[0]):
        assert abs(c - wt) <= 3.0 * np.sqrt(wt * (1 - wt) / n)
    # histogram has three separated bumps: gaps around +-2.5 are empty
    assert ((x > -3.5) & (x < -1.5)).sum() == 0
    assert ((x > 1.5) & (x < 3.5)).sum() == 0


def test_mog_sampling_is_bit_reproducible():
    mog = MixtureOfGaussians.random(4, seed=9)
    a = mog.sample(1000, seed=123).data
    b = mog.sample(1000, seed=123).data
    c = mog.sample(1000, seed=124).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_mog_json_round_trip_is_exact():
    mog = MixtureOfGaussians.random(3, seed=21)
    clone = target_from_json(json.loads(json.dumps(mog.to_json())))
    assert np.array_equal(clone.means, mog.means)
    assert np.array_equal(clone.variances, mog.variances)
    assert np.array_equal(clone.weights, mog.weights)
    assert clone.seed == 21
    x = np.random.default_rng(2).normal(size=(5, 3))
    assert np.array_equal(clone.log_prob(x), mog.log_prob(x))


def test_mog_validation():
    with pytest.raises(ContractError):
        MixtureOfGaussians([[0.0]], [[-1.0]], [[1.0]])
    with pytest.raises(ContractError):
        MixtureOfGaussians([[0.0, 1.0]], [[1.0, 1.0]], [[0.7, 0.7]])
    with pytest.raises(ShapeError):
        MixtureOfGaussians.random(2, seed=0).log_prob(np.zeros((3, 5)))


def test_random_correlation_matrix_properties():
    for dim in (2, 4, 30):
        c = random_correlation_matrix(dim, seed=dim)
        assert np.array_equal(c, c.T)
        assert np.array_equal(np.diag(c), np.ones(dim))
        assert np.linalg.eigvalsh(c).min() > 1e-6
        assert np.abs(c[np.triu_indices(dim, 1)]).max() <= 1.0
    assert np.array_equal(
        random_correlation_matrix(5, seed=1), random_correlation_matrix(5, seed=1)
    )
    assert not np.array_equal(
        random_correlation_matrix(5, seed=1), random_correlation_matrix(5, seed=2)
    )


def test_cg_log_prob_matches_scipy():
    cg = CorrelatedGaussian.random(4, seed=31)
    x = np.random.default_rng(3).normal(size=(100, 4)) * 2
    expect = stats.multivariate_normal(cg.mean, cg.correlation).logpdf(x)
    assert np.allclose(cg.log_prob(x), expect, rtol=1e-10, atol=1e-10)


def test_cg_sample_moments_match_parameters():
    cg = CorrelatedGaussian.random(3, seed=41)
    x = cg.sample(1_000_000, seed=7).data
    assert np.allclose(x.mean(axis=0), cg.mean, atol=0.01)
    emp = np.corrcoef(x, rowvar=False)
    assert np.abs(emp - cg.correlation).max() < 0.01


def test_cg_mean_range_and_determinism():
    cg = CorrelatedGaussian.random(5, seed=2)
    assert np.all((cg.mean >= -3.0) & (cg.mean <= 3.0))
    again = CorrelatedGaussian.random(5, seed=2)
    assert np.array_equal(cg.mean, again.mean)
    assert np.array_equal(cg.correlation, again.correlation)
    a = cg.sample(100, seed=5).data
    b = cg.sample(100, seed=5).data
    assert np.array_equal(a, b)


def test_cg_json_round_trip_is_exact():
    cg = CorrelatedGaussian.random(3, seed=77)
    clone = target_from_json(cg.to_json())
    assert np.array_equal(clone.mean, cg.mean)
    assert np.array_equal(clone.correlation, cg.correlation)
    x = np.random.default_rng(4).normal(size=(10, 3))
    assert np.array_equal(clone.log_prob(x), cg.log_prob(x))


def test_cg_validation():
    with pytest.raises(ContractError):
        CorrelatedGaussian(np.zeros(2), np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ContractError):
        CorrelatedGaussian(np.zeros(2), np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        CorrelatedGaussian(np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_make_target_dispatch():
    assert make_target("mog", 3, 1).dim == 3
    assert make_target("cg", 2, 1).dim == 2
    assert make_target("normal", 4, 1).dim == 4
    with pytest.raises(ContractError):
        make_target("cauchy", 2, 1)
