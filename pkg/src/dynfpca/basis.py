"""Fourier basis, least-squares projection of sampled curves, and the
coefficient-space geometry (Gram matrix) used by every downstream module.

A curve ``x(u) = sum_k c_k v_k(u)`` is carried around as its coefficient
vector ``c``; inner products are ``<x, y> = c_x' V c_y`` with ``V`` the Gram
matrix of the basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, NumericalError

FOURIER = "fourier"
DEFAULT_NBASIS = 15


@dataclass(frozen=True)
class BasisSpec:
    """Function basis on [0, 1] together with its Gram matrix.

    Attributes
    ----------
    d : int
        Number of basis functions (odd for the Fourier system).
    functions : str
        Identifier of the ordered basis convention.
    gram : ndarray of shape (d, d)
        Gram matrix ``V[i, j] = <v_i, v_j>``.
    grid : ndarray
        Default evaluation grid used for plotting and curve output.
    """

    d: int
    functions: str
    gram: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)

    def design(self, points) -> np.ndarray:
        """Basis evaluations as an ``(len(points), d)`` matrix."""
        u = np.asarray(points, dtype=float)
        if self.functions != FOURIER:
            raise InvalidArgumentError(f"unsupported basis {self.functions!r}")
        out = np.empty((u.size, self.d))
        out[:, 0] = 1.0
        for k in range(1, (self.d - 1) // 2 + 1):
            arg = 2.0 * np.pi * k * u
            out[:, 2 * k - 1] = np.sqrt(2.0) * np.sin(arg)
            out[:, 2 * k] = np.sqrt(2.0) * np.cos(arg)
        return out

    def chol(self) -> np.ndarray:
        """Lower Cholesky factor ``L`` with ``V = L L'``."""
        try:
            return np.linalg.cholesky(self.gram)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("Gram matrix is not positive definite") from exc

    def descriptor(self) -> dict:
        return {"functions": self.functions, "d": self.d, "m_grid": int(self.grid.size)}

    def same_as(self, other: "BasisSpec") -> bool:
        return (
            self.functions == other.functions
            and self.d == other.d
            and np.array_equal(self.gram, other.gram)
        )


def build_fourier_basis(d: int = DEFAULT_NBASIS, m_grid: Optional[int] = None) -> BasisSpec:
    """Orthonormal Fourier basis ``1, sqrt2 sin(2 pi k u), sqrt2 cos(2 pi k u)``.

    The Gram matrix is the identity (computed analytically, not by quadrature).
    """
    if int(d) != d or d < 1 or d % 2 == 0:
        raise InvalidArgumentError(f"d must be an odd integer >= 1, got {d}")
    d = int(d)
    if m_grid is None:
        m_grid = max(4 * d, 101)
    if m_grid < 4 * d:
        raise InvalidArgumentError(f"m_grid must be >= 4*d = {4 * d}, got {m_grid}")
    grid = np.linspace(0.0, 1.0, int(m_grid))
    return BasisSpec(d=d, functions=FOURIER, gram=np.eye(d), grid=grid)


def basis_from_descriptor(desc: dict) -> BasisSpec:
    if desc.get("functions") != FOURIER:
        raise InvalidArgumentError(f"unsupported basis {desc.get('functions')!r}")
    return build_fourier_basis(int(desc["d"]), desc.get("m_grid"))


@dataclass(frozen=True)
class FunctionalSeries:
    """Time series of curves stored as an ``(n, d)`` coefficient matrix.

    ``mean`` is set by :func:`center` and records the subtracted sample mean;
    a series with ``mean is None`` is treated as uncentered.
    """

    coeffs: np.ndarray
    basis: BasisSpec
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.basis.d:
            raise InvalidArgumentError(
                f"coeffs must have shape (n, {self.basis.d}), got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def centered(self) -> bool:
        return self.mean is not None

    def with_coeffs(self, coeffs: np.ndarray) -> "FunctionalSeries":
        return replace(self, coeffs=np.asarray(coeffs, dtype=float))


def project_curves(samples, grid, basis: BasisSpec) -> FunctionalSeries:
    """Least-squares coefficients of discretely sampled curves.

    Parameters
    ----------
    samples : array_like of shape (n, r)
        Row ``t`` holds ``x_t(grid[i])``.
    grid : array_like of shape (r,)
        Strictly increasing sampling points in [0, 1].
    basis : BasisSpec

    Returns
    -------
    FunctionalSeries
        Uncentered series of fitted coefficients.
    """
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    u = np.asarray(grid, dtype=float)
    if u.ndim != 1 or y.shape[1] != u.size:
        raise InvalidArgumentError("grid length must match the number of sample columns")
    if u.size < basis.d:
        raise InvalidArgumentError(
            f"underdetermined projection: {u.size} sample points for {basis.d} basis functions"
        )
    if np.any(np.diff(u) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing")
    if u[0] < 0 or u[-1] > 1:
        raise InvalidArgumentError("grid points must lie in [0, 1]")

    q, r = np.linalg.qr(basis.design(u))
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise NumericalError("basis design matrix is rank deficient on this grid")
    coeffs = np.linalg.solve(r, q.T @ y.T).T
    return FunctionalSeries(coeffs, basis)


def evaluate(series: FunctionalSeries, points, uncentered: bool = False) -> np.ndarray:
    """Curve values at ``points``; adds back the stored mean if ``uncentered``."""
    u = np.asarray(points, dtype=float).ravel()
    if u.size == 0:
        raise InvalidArgumentError("no evaluation points given")
    if u.min() < 0 or u.max() > 1:
        raise InvalidArgumentError("evaluation points must lie in [0, 1]")
    c = series.coeffs
    if uncentered and series.mean is not None:
        c = c + series.mean
    return c @ series.basis.design(u).T


def center(series: FunctionalSeries) -> FunctionalSeries:
    mu = series.coeffs.mean(axis=0)
    prev = series.mean if series.mean is not None else 0.0
    return FunctionalSeries(series.coeffs - mu, series.basis, mean=prev + mu)


def norm_sq(series: FunctionalSeries, t: int) -> float:
    if not -series.n <= t < series.n:
        raise IndexError(f"index {t} out of range for series of length {series.n}")
    x = series.coeffs[t]
    return float(x @ series.basis.gram @ x)


def norms_sq(coeffs: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """Row-wise ``x' V x``."""
    return np.einsum("ti,ij,tj->t", coeffs, gram, coeffs)
