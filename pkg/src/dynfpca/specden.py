"""Autocovariances of a coefficient series and lag-window estimates of its
spectral density matrix on the grid ``theta_j = pi j / n_theta``.

Only the non-negative half ``j = 0..n_theta`` is stored; the negative half is
the entrywise conjugate because the underlying series is real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .basis import FunctionalSeries
from .errors import InvalidArgumentError, NumericalError, PreconditionError

DEFAULT_NTHETA = 1000


@dataclass(frozen=True)
class AutocovSet:
    """Empirical autocovariances ``C_h`` for ``h = 0..q``.

    ``matrices[h]`` is ``(1/n) sum_{k>h} X_k X_{k-h}'``; negative lags are
    produced by :meth:`lag` as transposes rather than stored.
    """

    matrices: np.ndarray = field(repr=False)
    n: int

    @property
    def q(self) -> int:
        return self.matrices.shape[0] - 1

    @property
    def d(self) -> int:
        return self.matrices.shape[1]

    def lag(self, h: int) -> np.ndarray:
        if abs(h) > self.q:
            raise InvalidArgumentError(f"lag {h} beyond stored bound {self.q}")
        return self.matrices[h] if h >= 0 else self.matrices[-h].T


@dataclass(frozen=True)
class SpectralDensityEstimate:
    """Spectral density matrices on ``theta_j = pi j / n_theta``, ``j >= 0``.

    Attributes
    ----------
    n_theta : int
    matrices : complex ndarray of shape (n_theta + 1, d, d)
        ``matrices[j]`` is the estimate at ``theta_j``.
    gram : ndarray of shape (d, d)
        Gram matrix of the coefficient basis used downstream.
    """

    n_theta: int
    matrices: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.matrices.shape[1]

    @property
    def thetas(self) -> np.ndarray:
        """Non-negative half of the grid."""
        return np.pi * np.arange(self.n_theta + 1) / self.n_theta

    @property
    def grid(self) -> np.ndarray:
        """Full symmetric grid ``j = -n_theta..n_theta``."""
        return np.pi * np.arange(-self.n_theta, self.n_theta + 1) / self.n_theta

    def full(self) -> np.ndarray:
        """All ``2 n_theta + 1`` matrices ordered by ``j = -n_theta..n_theta``."""
        neg = np.conj(self.matrices[:0:-1])
        return np.concatenate([neg, self.matrices], axis=0)

    def at(self, j: int) -> np.ndarray:
        if abs(j) > self.n_theta:
            raise IndexError(j)
        return self.matrices[j] if j >= 0 else np.conj(self.matrices[-j])


def bartlett(x):
    return np.clip(1.0 - np.abs(x), 0.0, None)


def flat_top(x):
    # trapezoidal flat-top kernel: 1 on |x|<=1/2, linear decay to 0 at |x|=1
    ax = np.abs(x)
    return np.clip(2.0 * (1.0 - ax), 0.0, 1.0)


WEIGHTS: Dict[str, Callable] = {
    "bartlett": bartlett,
    # same weights (1 - |h|/q), kept as a separate name
    "triangular-hk": bartlett,
    "flat-top": flat_top,
}


def default_bandwidth(n: int) -> int:
    return max(1, math.isqrt(n))


def autocov(series: FunctionalSeries, q: int) -> AutocovSet:
    """Biased (divisor ``n``) autocovariances of a centered series for lags 0..q."""
    n = series.n
    if not series.centered:
        raise PreconditionError("autocov requires a centered series; call center() first")
    if q < 0 or q >= n:
        raise InvalidArgumentError(f"lag bound q must satisfy 0 <= q < n={n}, got {q}")
    x = series.coeffs
    mats = np.empty((q + 1, series.d, series.d))
    for h in range(q + 1):
        mats[h] = x[h:].T @ x[: n - h] / n
    return AutocovSet(mats, n)


def lag_window_sdm(
    acov: AutocovSet,
    q: int,
    weight: str = "bartlett",
    n_theta: int = DEFAULT_NTHETA,
    gram=None,
) -> SpectralDensityEstimate:
    """Lag-window estimate ``(1/2pi) sum_{|h|<=q} w(h/q) C_h exp(-i h theta)``."""
    if weight not in WEIGHTS:
        raise InvalidArgumentError(f"unknown weight {weight!r}; choose from {sorted(WEIGHTS)}")
    if q < 1 or q > acov.q:
        raise InvalidArgumentError(f"bandwidth q={q} must lie in 1..{acov.q}")
    if n_theta < 1:
        raise InvalidArgumentError("n_theta must be positive")
    hs = np.arange(q + 1)
    w = WEIGHTS[weight](hs / q)
    mats = _lag_sum(acov.matrices[: q + 1], w, n_theta)
    g = np.eye(acov.d) if gram is None else np.asarray(gram, dtype=float)
    return SpectralDensityEstimate(int(n_theta), mats, g)


def estimate_sdm(
    series: FunctionalSeries,
    q: int = None,
    weight: str = "bartlett",
    n_theta: int = DEFAULT_NTHETA,
) -> SpectralDensityEstimate:
    """Autocovariances plus lag-window estimate in one call."""
    if q is None:
        q = default_bandwidth(series.n)
    acov = autocov(series, q)
    return lag_window_sdm(acov, q, weight, n_theta, gram=series.basis.gram)


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def analytic_sdm_var1(A, Sigma, n_theta: int = DEFAULT_NTHETA, gram=None) -> SpectralDensityEstimate:
    """Exact spectral density of ``X_t = A X_{t-1} + e_t``, ``Cov(e_t) = Sigma``."""
    a = np.atleast_2d(np.asarray(A, dtype=float))
    s = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if spectral_radius(a) >= 1.0:
        raise NumericalError("VAR(1) matrix has spectral radius >= 1 (nonstationary)")
    d = a.shape[0]
    thetas = np.pi * np.arange(n_theta + 1) / n_theta
    eye = np.eye(d)
    trans = np.linalg.inv(eye[None] - a[None] * np.exp(-1j * thetas)[:, None, None])
    mats = trans @ s @ np.conj(np.swapaxes(trans, 1, 2)) / (2.0 * np.pi)
    mats[0] = mats[0].real
    mats[-1] = mats[-1].real
    g = np.eye(d) if gram is None else np.asarray(gram, dtype=float)
    return SpectralDensityEstimate(int(n_theta), mats, g)


def sdm_from_lags(lags, n_theta: int = DEFAULT_NTHETA, gram=None) -> SpectralDensityEstimate:
    """Spectrum ``(1/2pi) sum_h G_h e^{-ih theta}`` of a finite lag sequence.

    ``lags[h]`` is ``G_h`` for ``h = 0..H`` and ``G_{-h} = G_h'``.
    """
    g = np.asarray(lags, dtype=float)
    mats = _lag_sum(g, np.ones(g.shape[0]), n_theta)
    gm = np.eye(g.shape[1]) if gram is None else np.asarray(gram, dtype=float)
    return SpectralDensityEstimate(int(n_theta), mats, gm)


def _lag_sum(c: np.ndarray, w: np.ndarray, n_theta: int) -> np.ndarray:
    # (1/2pi) [w_0 C_0 + sum_{h>=1} w_h (C_h e^{-ih theta} + C_h' e^{ih theta})]
    thetas = np.pi * np.arange(n_theta + 1) / n_theta
    hs = np.arange(c.shape[0])
    phase = np.exp(-1j * np.outer(thetas, hs[1:])) * w[1:]
    pos = np.einsum("jh,hab->jab", phase, c[1:])
    mats = (w[0] * c[0][None] + pos + np.conj(np.swapaxes(pos, 1, 2))) / (2.0 * np.pi)
    # theta = 0 and pi are real frequencies
    mats[0] = mats[0].real
    mats[-1] = mats[-1].real
    return mats


def integration_weights(n_theta: int) -> np.ndarray:
    """Quadrature weights on the full grid ``j = -n_theta..n_theta`` for
    ``(1/2pi) * integral over [-pi, pi]``.

    ``theta = -pi`` and ``theta = pi`` are the same point on the circle, so
    each endpoint carries half weight; the rule is then exact for every
    trigonometric polynomial of degree below ``2 n_theta``.
    """
    w = np.full(2 * n_theta + 1, 1.0 / (2 * n_theta))
    w[0] = w[-1] = 1.0 / (4 * n_theta)
    return w


def check_hermitian(sdm: SpectralDensityEstimate) -> float:
    """Largest relative Hermitian defect across the grid."""
    m = sdm.matrices
    defect = np.linalg.norm(m - np.conj(np.swapaxes(m, 1, 2)), axis=(1, 2))
    scale = 1.0 + np.linalg.norm(m, axis=(1, 2))
    return float(np.max(defect / scale))


def sdm_to_dict(sdm: SpectralDensityEstimate) -> dict:
    m = sdm.matrices
    return {
        "n_theta": sdm.n_theta,
        "d": sdm.d,
        "gram": sdm.gram.tolist(),
        "matrices": np.stack([m.real, m.imag], axis=-1).tolist(),
    }


def sdm_from_dict(obj: dict) -> SpectralDensityEstimate:
    arr = np.asarray(obj["matrices"], dtype=float)
    return SpectralDensityEstimate(
        int(obj["n_theta"]), arr[..., 0] + 1j * arr[..., 1], np.asarray(obj["gram"], dtype=float)
    )
