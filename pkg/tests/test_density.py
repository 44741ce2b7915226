import math

import numpy as np
import pytest

from tdmr.channel import ChannelParams, covariance_matrix
from tdmr.density import (
    NotPositiveDefiniteError,
    build_pattern_table,
    factor_covariance,
    log_conditional_density,
    mahalanobis,
    mixture_log_density,
)
from tdmr.lattice import build_grid


def test_factor_diagonal():
    f = factor_covariance(0.25 * np.eye(2))
    assert f.log_det == pytest.approx(2 * math.log(0.25), rel=1e-14)


def test_factor_two_cell_det():
    g = build_grid(1, 2)
    s = covariance_matrix(g, ChannelParams.two_cell(1.0, 0.5), [1, -1])
    np.testing.assert_array_equal(s, [[2, 1], [1, 2]])
    assert factor_covariance(s).log_det == pytest.approx(math.log(3), rel=1e-14)


def test_factor_roundtrip_checkerboard():
    g = build_grid(2, 2)
    s = covariance_matrix(g, ChannelParams(1, 0.5, 0.3, 0.7), [1, -1, -1, 1])
    f = factor_covariance(s)
    assert np.allclose(np.triu(f.lower, 1), 0)
    assert np.all(np.diag(f.lower) > 0)
    err = np.linalg.norm(f.lower @ f.lower.T - s) / np.linalg.norm(s)
    assert err < 1e-10
    assert f.log_det == pytest.approx(2 * np.log(np.diag(f.lower)).sum(), rel=1e-15)


def test_factor_rejects_singular():
    with pytest.raises(NotPositiveDefiniteError):
        factor_covariance(np.zeros((2, 2)))
    with pytest.raises(NotPositiveDefiniteError):
        build_pattern_table(build_grid(1, 2), ChannelParams.two_cell(0.0, 0.5))


def test_table_order_mirrors_negation():
    t = build_pattern_table(build_grid(2, 2), ChannelParams(1, 0.5, 0.5, 0.5))
    assert len(t) == 16
    np.testing.assert_array_equal(t.patterns[0], np.ones(4))
    for k in range(16):
        np.testing.assert_array_equal(t.patterns[15 - k], -t.patterns[k])
        assert t.index_of(t.patterns[k]) == k


def test_log_density_at_mean_without_jitter():
    ss = 0.6
    t = build_pattern_table(build_grid(2, 2), ChannelParams(1, 0.5, ss, 0.0))
    for k in (0, 5, 9):
        e = t[k]
        assert log_conditional_density(e.mean, e) == pytest.approx(
            -2 * math.log(2 * math.pi * ss**2), rel=1e-13
        )


def test_log_density_two_cell_closed_form():
    t = build_pattern_table(build_grid(1, 2), ChannelParams.two_cell(1.0, 0.5))
    e = t[t.index_of([1, -1])]
    np.testing.assert_array_equal(e.mean, [1, -1])
    want = -math.log(2 * math.pi) - 0.5 * math.log(3)
    assert log_conditional_density([1, -1], e) == pytest.approx(want, rel=1e-14)


def test_log_density_sign_symmetry():
    t = build_pattern_table(build_grid(2, 2), ChannelParams(1, 0.5, 0.4, 0.6))
    y = np.random.default_rng(3).normal(0, 2, size=(20, 4))
    for k in range(16):
        a = log_conditional_density(y, t[k])
        b = log_conditional_density(-y, t[15 - k])
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("rows,cols", [(1, 2), (2, 2), (3, 3)])
def test_mahalanobis_matches_explicit_inverse(rows, cols):
    g = build_grid(rows, cols)
    p = ChannelParams(1.0, 0.5, 0.35, 0.8)
    t = build_pattern_table(g, p)
    rng = np.random.default_rng(rows * 10 + cols)
    y = rng.normal(0, 3, size=(8, g.n))
    for k in rng.choice(len(t), size=min(len(t), 40), replace=False):
        e = t[k]
        s = covariance_matrix(g, p, e.pattern)
        r = y - e.mean
        direct = np.einsum("bi,ij,bj->b", r, np.linalg.inv(s), r)
        np.testing.assert_allclose(mahalanobis(y, e), direct, rtol=1e-8)


def test_log_density_matches_scipy():
    from scipy.stats import multivariate_normal

    g = build_grid(2, 2)
    p = ChannelParams(1.0, 0.5, 0.35, 0.8)
    t = build_pattern_table(g, p)
    y = np.random.default_rng(5).normal(0, 2, size=(10, 4))
    for k in range(16):
        ref = multivariate_normal(t.means[k], covariance_matrix(g, p, t.patterns[k])).logpdf(y)
        np.testing.assert_allclose(log_conditional_density(y, t[k]), ref, rtol=1e-10)


def test_single_cell_mixture_midpoint():
    alpha, ss = 1.3, 0.7
    t = build_pattern_table(build_grid(1, 1), ChannelParams(alpha, 0.2, ss, 0.4))
    want = math.log(math.exp(-(alpha**2) / (2 * ss**2)) / math.sqrt(2 * math.pi * ss**2))
    assert mixture_log_density(np.zeros(1), t) == pytest.approx(want, rel=1e-13)


def test_mixture_lower_bound_and_brute_force():
    t = build_pattern_table(build_grid(2, 2), ChannelParams(1, 0.5, 0.4, 0.6))
    y = np.random.default_rng(8).normal(0, 2, size=(30, 4))
    logs = np.stack([log_conditional_density(y, t[k]) for k in range(16)], axis=1)
    mix = mixture_log_density(y, t)
    assert np.all(mix >= logs.min(axis=1) - 16 * math.log(2) - 1e-12)
    np.testing.assert_allclose(mix, np.log(np.exp(logs).mean(axis=1)), rtol=1e-12)


@pytest.mark.parametrize("rows,cols", [(1, 2), (2, 2), (3, 3)])
def test_mixture_global_sign_flip(rows, cols):
    g = build_grid(rows, cols)
    t = build_pattern_table(g, ChannelParams(1, 0.5, 0.3, 0.7))
    y = np.random.default_rng(2).normal(0, 2, size=(25, g.n))
    np.testing.assert_allclose(mixture_log_density(-y, t), mixture_log_density(y, t), rtol=1e-13)


def test_mixture_stays_finite_far_out():
    t = build_pattern_table(build_grid(3, 3), ChannelParams(1, 0.5, 0.3, 0.7))
    rng = np.random.default_rng(4)
    y = rng.normal(size=(5, 9))
    y *= 1e3 / np.linalg.norm(y, axis=1, keepdims=True)
    assert np.all(np.isfinite(mixture_log_density(y, t)))


def test_mixture_blocks_agree(monkeypatch):
    import tdmr.density as dens

    t = build_pattern_table(build_grid(3, 3), ChannelParams(1, 0.5, 0.3, 0.7))
    y = np.random.default_rng(6).normal(0, 2, size=(50, 9))
    full = mixture_log_density(y, t)
    monkeypatch.setattr(dens, "_BLOCK_ELEMENTS", 9 * 50 * 7)
    np.testing.assert_allclose(mixture_log_density(y, t), full, rtol=1e-13)


def test_two_cell_mixture_integrates_to_one():
    from tdmr.infotheory import QuadratureSpec, quad_mixture

    t = build_pattern_table(build_grid(1, 2), ChannelParams.two_cell(0.4, 0.4))
    _, mass = quad_mixture(t, QuadratureSpec((-8.0, -8.0), (8.0, 8.0), 0.02))
    assert abs(mass - 1) <= 1e-3
