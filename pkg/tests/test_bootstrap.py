import itertools

import numpy as np
import pytest
from scipy import stats

from gosf.bootstrap import (
    BootstrapDistribution,
    bootstrap_distribution,
    design_hash,
    multiplier_bootstrap_sample,
    oracle_r0_general,
    oracle_r0_isotropic,
    quantile,
    sparse_condition_number,
    substream,
    validity_diagnostic,
)
from gosf.covariance import CovarianceSpec, make_covariance
from gosf.model import InputError
from gosf.simlab import ks_distance


def _unit(X):
    return X / np.sqrt(np.mean(X ** 2, axis=0))


def _dist(samples):
    s = np.sort(np.asarray(samples, float))
    return BootstrapDistribution(s, 1, 1, 1, s.size, 0)


def test_quantile_order_statistic():
    d = _dist(np.arange(1, 11) ** 2)
    assert quantile(d, 0.1) == 9.0
    assert d.quantile_sq(0.1) == pytest.approx(81.0)
    assert quantile(d, 0.5) == 5.0
    with pytest.raises(InputError):
        quantile(d, 0.0)
    with pytest.raises(InputError):
        quantile(d, 1.0)


def test_quantile_monotone_in_alpha():
    d = _dist(np.random.default_rng(0).chisquare(3, 500))
    qs = [quantile(d, a) for a in (0.01, 0.05, 0.1, 0.2, 0.5, 0.9)]
    assert all(a >= b for a, b in zip(qs, qs[1:]))


def test_full_rank_sample_is_projection_norm():
    rng = np.random.default_rng(1)
    X = _unit(rng.standard_normal((40, 4)))
    r = multiplier_bootstrap_sample(X, 4, rng=substream(5, 0))
    e = substream(5, 0).standard_normal(40)
    assert r == pytest.approx(e @ X @ np.linalg.solve(X.T @ X, X.T @ e), rel=1e-10)


def test_single_column_sample():
    X = _unit(np.random.default_rng(2).standard_normal((50, 1)))
    r = multiplier_bootstrap_sample(X, 1, rng=substream(1, 2))
    e = substream(1, 2).standard_normal(50)
    assert r == pytest.approx((e @ X[:, 0] / np.sqrt(50)) ** 2, rel=1e-10)


def test_samples_match_exhaustive_projection():
    X = _unit(np.random.default_rng(3).standard_normal((200, 8)))
    subsets = list(map(list, itertools.combinations(range(8), 2)))
    agree = 0
    for b in range(100):
        r = multiplier_bootstrap_sample(X, 2, rng=substream(0, b))
        e = substream(0, b).standard_normal(200)
        best = max(e @ X[:, S] @ np.linalg.solve(X[:, S].T @ X[:, S], X[:, S].T @ e) for S in subsets)
        assert r <= best + 1e-8 * best
        agree += abs(r - best) <= 1e-6 * max(1.0, best)
    assert agree >= 95


def test_distribution_determinism_and_workers():
    X = _unit(np.random.default_rng(4).standard_normal((60, 10)))
    d1 = bootstrap_distribution(X, 2, 40, seed=7, workers=1)
    d4 = bootstrap_distribution(X, 2, 40, seed=7, workers=4)
    np.testing.assert_array_equal(d1.samples, d4.samples)
    assert np.all(np.diff(d1.samples) >= 0) and np.all(d1.samples >= 0)
    one = bootstrap_distribution(X, 2, 1, seed=7)
    assert one.samples[0] == multiplier_bootstrap_sample(X, 2, rng=substream(7, 0, 0))


def test_quantile_nondecreasing_in_s_with_common_multipliers():
    X = _unit(np.random.default_rng(5).standard_normal((80, 6)))
    qs = [bootstrap_distribution(X, s, 200, seed=1).quantile(0.1) for s in (1, 2, 3)]
    assert qs[0] <= qs[1] <= qs[2]


def test_single_column_quantile_is_chi2():
    X = _unit(np.random.default_rng(6).standard_normal((2000, 1)))
    d = bootstrap_distribution(X, 1, 5000, seed=3)
    assert d.quantile_sq(0.1) == pytest.approx(stats.chi2.ppf(0.9, 1), abs=0.15)


def test_invalid_inputs():
    X = np.ones((5, 3))
    with pytest.raises(InputError):
        bootstrap_distribution(X, 4, 10)
    with pytest.raises(InputError):
        bootstrap_distribution(X, 1, 0)


def test_oracle_isotropic_edge_cases():
    rng = np.random.default_rng(0)
    assert oracle_r0_isotropic(1, 1, rng) >= 0
    draws = oracle_r0_isotropic(5, 5, np.random.default_rng(1), size=20000)
    assert stats.kstest(draws, stats.chi2(5).cdf).statistic < 0.02


def test_oracle_isotropic_self_consistent():
    a = oracle_r0_isotropic(20, 3, np.random.default_rng(10), size=100_000).mean()
    b = oracle_r0_isotropic(20, 3, np.random.default_rng(11), size=100_000).mean()
    assert a == pytest.approx(b, rel=0.02)


def test_oracle_general_identity_matches_isotropic():
    a = oracle_r0_general(CovarianceSpec.identity(6), 2, np.random.default_rng(0), size=10_000)
    b = oracle_r0_isotropic(6, 2, np.random.default_rng(1), size=10_000)
    assert ks_distance(a, b) <= 0.03


def test_oracle_general_full_set_is_chi2():
    draws = oracle_r0_general(CovarianceSpec.ar1(5, 0.7), 5, np.random.default_rng(2), size=20000)
    assert stats.kstest(draws, stats.chi2(5).cdf).statistic < 0.02


def test_oracle_general_matches_independent_enumeration():
    spec = CovarianceSpec.ar1(6, 0.8)
    S = make_covariance(spec)
    got = oracle_r0_general(spec, 2, np.random.default_rng(9), size=50)
    rng = np.random.default_rng(9)
    G = rng.standard_normal((50, 6)) @ np.linalg.cholesky(S).T
    for g, v in zip(G, got):
        ref = max(g[list(T)] @ np.linalg.solve(S[np.ix_(T, T)], g[list(T)])
                  for T in itertools.combinations(range(6), 2))
        assert v == pytest.approx(ref, abs=1e-10)


def test_oracle_general_rejects_large_or_singular():
    with pytest.raises(InputError):
        oracle_r0_general(np.eye(16), 2, np.random.default_rng(0))
    with pytest.raises(InputError):
        oracle_r0_general(np.ones((3, 3)), 1, np.random.default_rng(0))


def test_sparse_condition_number():
    for s in (1, 2, 3):
        assert sparse_condition_number(np.eye(4), s) == pytest.approx(1.0)
    assert sparse_condition_number(np.diag([4.0, 1.0]), 1) == pytest.approx(2.0)
    S = make_covariance(CovarianceSpec.ar1(6, 0.8))
    eig = [np.linalg.eigvalsh(S[np.ix_(T, T)]) for T in itertools.combinations(range(6), 2)]
    expected = np.sqrt(max(e[-1] for e in eig) / min(e[0] for e in eig))
    assert sparse_condition_number(CovarianceSpec.ar1(6, 0.8), 2) == pytest.approx(expected)
    with pytest.raises(InputError):
        sparse_condition_number(np.array([[1.0, 1.0], [1.0, 1.0]]), 2)


def test_validity_diagnostic_and_hash():
    assert validity_diagnostic(2, 10, 100) == pytest.approx(2 * np.log(1000) / 100 ** 0.2)
    X = np.arange(6.0).reshape(3, 2)
    assert design_hash(X) == design_hash(X.copy())
    assert design_hash(X) != design_hash(X.T)
