"""Tests for autocovariances and lag-window spectral density estimates."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from dynfpca.basis import FunctionalSeries, build_fourier_basis, center
from dynfpca.errors import InvalidArgumentError, NumericalError, PreconditionError
from dynfpca.specden import (
    WEIGHTS,
    AutocovSet,
    analytic_sdm_var1,
    autocov,
    check_hermitian,
    default_bandwidth,
    estimate_sdm,
    integration_weights,
    lag_window_sdm,
    sdm_from_dict,
    sdm_from_lags,
    sdm_to_dict,
)

TWO_PI = 2.0 * np.pi


def as_centered(coeffs):
    """Wrap raw coefficients as an already-centered series (mean recorded as 0)."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    return FunctionalSeries(c, build_fourier_basis(c.shape[1]), mean=np.zeros(c.shape[1]))


def random_centered(n, d, seed):
    rng = np.random.default_rng(seed)
    return center(FunctionalSeries(rng.standard_normal((n, d)), build_fourier_basis(d)))


class TestAutocov:
    def test_zero_series(self):
        a = autocov(as_centered(np.zeros((6, 3))), 3)
        assert_array_equal(a.matrices, 0.0)

    def test_hand_example(self):
        a = autocov(as_centered([1.0, 2.0, 3.0]), 1)
        assert_allclose(a.lag(0), [[14 / 3]])
        assert_allclose(a.lag(1), [[8 / 3]])

    def test_negative_lag_is_transpose(self):
        a = autocov(random_centered(50, 3, 0), 4)
        for h in range(1, 5):
            assert_array_equal(a.lag(-h), a.lag(h).T)

    def test_divisor_is_n(self):
        x = random_centered(20, 3, 1)
        a = autocov(x, 5)
        c = x.coeffs
        assert_allclose(a.lag(5), c[5:].T @ c[:-5] / 20, rtol=1e-14)

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(2)
        a = autocov(center(FunctionalSeries(rng.standard_normal((100_000, 1)), build_fourier_basis(1))), 1)
        assert abs(a.lag(0)[0, 0] - 1.0) < 0.02
        assert abs(a.lag(1)[0, 0]) < 0.02

    def test_lag_bound(self):
        with pytest.raises(InvalidArgumentError):
            autocov(as_centered([1.0, 2.0, 3.0]), 3)
        with pytest.raises(InvalidArgumentError):
            autocov(as_centered([1.0, 2.0, 3.0]), -1)

    def test_requires_centering(self):
        s = FunctionalSeries(np.ones((4, 1)), build_fourier_basis(1))
        with pytest.raises(PreconditionError):
            autocov(s, 1)


def scalar_acov(values):
    return AutocovSet(np.asarray(values, dtype=float).reshape(-1, 1, 1), n=100)


class TestLagWindow:
    def test_q1_bartlett_keeps_lag0(self):
        a = autocov(random_centered(40, 3, 3), 1)
        sdm = lag_window_sdm(a, 1, "bartlett", n_theta=16)
        for j in range(17):
            assert_allclose(sdm.matrices[j], a.lag(0) / TWO_PI, atol=1e-15)

    def test_white_noise_flat(self):
        acov = AutocovSet(np.stack([np.eye(3), np.zeros((3, 3)), np.zeros((3, 3))]), 100)
        sdm = lag_window_sdm(acov, 2, "bartlett", n_theta=8)
        assert_allclose(sdm.full(), np.broadcast_to(np.eye(3) / TWO_PI, (17, 3, 3)), atol=1e-15)

    def test_hand_example(self):
        sdm = lag_window_sdm(scalar_acov([1.0, 0.5, 0.0]), 2, "bartlett", n_theta=4)
        assert_allclose(sdm.matrices[0, 0, 0].real, 1.5 / TWO_PI, rtol=1e-14)
        assert_allclose(1.5 / TWO_PI, 0.2387, atol=5e-5)

    def test_aliases_share_weights(self):
        a = autocov(random_centered(60, 3, 4), 6)
        b1 = lag_window_sdm(a, 6, "bartlett", 32)
        b2 = lag_window_sdm(a, 6, "triangular-hk", 32)
        assert_array_equal(b1.matrices, b2.matrices)

    def test_flat_top_shape(self):
        x = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5])
        assert_allclose(WEIGHTS["flat-top"](x), [1, 1, 1, 0.5, 0, 0])

    def test_unknown_weight(self):
        with pytest.raises(InvalidArgumentError):
            lag_window_sdm(scalar_acov([1.0, 0.1]), 1, "parzen", 4)

    def test_bandwidth_beyond_lags(self):
        with pytest.raises(InvalidArgumentError):
            lag_window_sdm(scalar_acov([1.0, 0.1]), 2, "bartlett", 4)

    def test_default_bandwidth(self):
        assert default_bandwidth(400) == 20
        assert default_bandwidth(170) == 13
        assert estimate_sdm(random_centered(400, 3, 5), n_theta=8).n_theta == 8

    def test_grid_and_reflection(self):
        sdm = estimate_sdm(random_centered(100, 3, 6), q=5, n_theta=10)
        assert_allclose(sdm.grid, np.pi * np.arange(-10, 11) / 10)
        full = sdm.full()
        for j in range(11):
            assert_array_equal(full[10 - j], np.conj(full[10 + j]))
            assert_array_equal(sdm.at(-j), np.conj(sdm.at(j)))


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(30, 120),
        d=st.sampled_from([1, 3, 5]),
        q=st.integers(1, 12),
        weight=st.sampled_from(sorted(WEIGHTS)),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_hermitian(self, n, d, q, weight, seed):
        rng = np.random.default_rng(seed)
        raw = np.cumsum(rng.standard_normal((n, d)), axis=0) * 0.3 + rng.standard_normal((n, d))
        sdm = estimate_sdm(center(FunctionalSeries(raw, build_fourier_basis(d))), q=q, weight=weight, n_theta=32)
        assert check_hermitian(sdm) <= 1e-10
        assert np.all(sdm.matrices[0].imag == 0) and np.all(sdm.matrices[-1].imag == 0)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(30, 120),
        d=st.sampled_from([1, 3, 5]),
        q=st.integers(1, 12),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_bartlett_psd(self, n, d, q, seed):
        rng = np.random.default_rng(seed)
        raw = np.cumsum(rng.standard_normal((n, d)), axis=0)
        sdm = estimate_sdm(center(FunctionalSeries(raw, build_fourier_basis(d))), q=q, n_theta=64)
        for m in sdm.matrices:
            ev = np.linalg.eigvalsh(m)
            assert ev.min() >= -1e-10 * np.trace(m).real

    @settings(max_examples=20, deadline=None)
    @given(
        q=st.integers(1, 10),
        n_theta=st.integers(40, 200),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_inverse_transform(self, q, n_theta, seed):
        # quadrature over the frequency grid recovers w(h/q) C_h
        x = random_centered(80, 3, seed)
        a = autocov(x, q)
        sdm = lag_window_sdm(a, q, "bartlett", n_theta)
        full = sdm.full()
        w = integration_weights(n_theta)
        for h in range(-q, q + 1):
            rec = TWO_PI * np.einsum("j,jab->ab", w * np.exp(1j * h * sdm.grid), full)
            assert_allclose(rec, (1 - abs(h) / q) * a.lag(h), atol=1e-8)

    def test_plain_average_is_not_exact(self):
        # the unweighted mean over 2N+1 points double counts theta = +-pi
        sdm = sdm_from_lags(np.array([[[1.0]], [[0.6]]]), n_theta=50)
        full = sdm.full()[:, 0, 0]
        plain = TWO_PI * np.mean(full * np.exp(1j * sdm.grid)).real
        trap = TWO_PI * np.sum(integration_weights(50) * full * np.exp(1j * sdm.grid)).real
        assert_allclose(trap, 0.6, atol=1e-12)
        assert abs(plain - 0.6) > 1e-3

    def test_quadrature_weights(self):
        w = integration_weights(5)
        assert w.size == 11
        assert_allclose(w.sum(), 1.0, rtol=1e-15)
        assert w[0] == w[-1] == 0.5 * w[1]


class TestAnalyticVar1:
    def test_zero_matrix(self):
        sig = np.array([[2.0, 0.5], [0.5, 1.0]])
        sdm = analytic_sdm_var1(np.zeros((2, 2)), sig, n_theta=6)
        assert_allclose(sdm.full(), np.broadcast_to(sig / TWO_PI, (13, 2, 2)), atol=1e-15)

    def test_scalar_endpoints(self):
        sdm = analytic_sdm_var1([[0.5]], [[1.0]], n_theta=4)
        assert_allclose(sdm.matrices[0, 0, 0].real, 1 / (TWO_PI * 0.25), rtol=1e-14)
        assert_allclose(sdm.matrices[-1, 0, 0].real, 1 / (TWO_PI * 2.25), rtol=1e-14)
        assert_allclose(sdm.matrices[0, 0, 0].real, 0.63662, atol=5e-6)
        assert_allclose(sdm.matrices[-1, 0, 0].real, 0.07074, atol=5e-6)

    def test_matches_long_lag_sum(self):
        # truncated autocovariance series of the same VAR(1)
        a = np.array([[0.5, 0.2], [-0.1, 0.3]])
        sig = np.eye(2)
        g0 = np.eye(2)
        for _ in range(500):
            g0 = a @ g0 @ a.T + sig
        lags = [g0]
        for _ in range(80):
            lags.append(a @ lags[-1])
        approx = sdm_from_lags(np.array(lags), n_theta=20)
        exact = analytic_sdm_var1(a, sig, n_theta=20)
        assert_allclose(approx.matrices, exact.matrices, atol=1e-12)

    def test_nonstationary(self):
        with pytest.raises(NumericalError):
            analytic_sdm_var1([[1.0]], [[1.0]])


class TestSerialization:
    def test_round_trip(self):
        sdm = estimate_sdm(random_centered(50, 3, 7), q=4, n_theta=6)
        text = json.dumps(sdm_to_dict(sdm))
        back = sdm_from_dict(json.loads(text))
        assert back.n_theta == 6
        assert_array_equal(back.matrices, sdm.matrices)
        assert_array_equal(back.gram, sdm.gram)
