"""Dynamic functional principal components.

Pipeline: eigendecomposition of the spectral density matrix at every grid
frequency, phase alignment of the eigenvectors, filter coefficients by
discrete Fourier inversion of the eigenvector curves, dynamic scores by
filtering the coefficient series, and the dynamic Karhunen-Loeve
reconstruction from the scores.

Filter convention: ``phi_l = (1/2pi) int phi(theta) exp(-i l theta) dtheta``,
scores ``Y_t = sum_l X_{t-l}' V phi_l`` and reconstruction
``X_t = sum_l Y_{t+l} phi_l``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import BasisSpec, FunctionalSeries, norms_sq
from .errors import InvalidArgumentError, NumericalError, PreconditionError
from .specden import SpectralDensityEstimate, integration_weights

ALIGN_TOL = 1e-8
DEFAULT_EPSILON = 0.01
DEFAULT_LMAX = 60


@dataclass(frozen=True)
class EigenCurves:
    """Leading eigenvalues/eigenvectors of the spectral density on ``j = 0..n_theta``.

    Attributes
    ----------
    lambdas : ndarray of shape (p, n_theta + 1)
    vectors : complex ndarray of shape (p, n_theta + 1, d)
        V-normalized, phase-aligned eigenvectors.
    ref : ndarray of shape (d,)
        Reference coefficient vector used for phase alignment.
    gaps : ndarray of shape (p,)
        ``min_j alpha_m(theta_j)``: smallest distance of eigenvalue ``m`` to
        its neighbours over the grid. Near-zero values flag components that
        are poorly identified.
    fallback : ndarray of bool, shape (p, n_theta + 1)
        Grid points where the reference inner product vanished and the
        sequential continuity rule was used instead.
    """

    lambdas: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)
    ref: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    gaps: np.ndarray = field(repr=False)
    fallback: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_theta(self) -> int:
        return self.lambdas.shape[1] - 1

    @property
    def d(self) -> int:
        return self.vectors.shape[2]

    def full_lambdas(self) -> np.ndarray:
        """Eigenvalue curves on ``j = -n_theta..n_theta`` (even in theta)."""
        return np.concatenate([self.lambdas[:, :0:-1], self.lambdas], axis=1)


@dataclass(frozen=True)
class DynamicFpcModel:
    """Real filter coefficients of the first ``p`` dynamic FPCs.

    ``filters[m, k]`` is the coefficient vector of ``phi_{m, k - L}``.
    """

    filters: np.ndarray = field(repr=False)
    L: int
    eigen: Optional[EigenCurves] = field(repr=False)
    basis: BasisSpec = field(repr=False)
    captured_mass: np.ndarray = field(repr=False)
    max_imag: float = 0.0
    lag_capped: bool = False
    component_lags: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.filters.shape[0]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def filter(self, m: int, lag: int) -> np.ndarray:
        if abs(lag) > self.L:
            return np.zeros(self.basis.d)
        return self.filters[m, lag + self.L]

    def lambda0(self) -> np.ndarray:
        if self.eigen is None:
            raise PreconditionError("model carries no eigenvalue curves")
        return self.eigen.lambdas[:, 0].copy()


@dataclass(frozen=True)
class ScoreSeries:
    """Score matrix of shape ``(n, p)``; ``valid`` flags rows unaffected by padding."""

    scores: np.ndarray
    L: int
    valid: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def p(self) -> int:
        return self.scores.shape[1]


def _whiten(gram: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gram matrix V is not positive definite") from exc


def _rotate_real(e: np.ndarray, gram: np.ndarray, prev: Optional[np.ndarray]) -> np.ndarray:
    """Phase for an eigenvector of a real symmetric problem: make it real, then
    pick the sign closest to ``prev`` (or largest coordinate positive)."""
    k = np.argmax(np.abs(e))
    e = e * (np.conj(e[k]) / abs(e[k]))
    e = e.real.astype(complex)
    if prev is not None:
        s = np.real(np.vdot(prev, gram @ e))
        if s < 0:
            e = -e
    return e


def eigendecompose(
    sdm: SpectralDensityEstimate,
    p: int,
    ref=None,
    align_tol: float = ALIGN_TOL,
    herm_tol: float = 1e-10,
) -> EigenCurves:
    """Frequency-wise eigenanalysis of ``F_theta V`` for the ``p`` largest eigenvalues.

    The generalized problem is reduced to a Hermitian one through the
    Cholesky factor of ``V``. Each eigenvector ``e`` is rotated so that
    ``<e, ref>_V`` is real and positive. Where that inner product is below
    ``align_tol`` the phase instead follows the previous grid point.

    Parameters
    ----------
    sdm : SpectralDensityEstimate
    p : int
        Number of components, ``1 <= p <= d``.
    ref : array_like, optional
        Reference coefficient vector; defaults to the constant function
        ``(1, 0, ..., 0)``.
    """
    d = sdm.d
    if not 1 <= p <= d:
        raise InvalidArgumentError(f"p must lie in 1..{d}, got {p}")
    mats = sdm.matrices
    herm_defect = np.linalg.norm(mats - np.conj(np.swapaxes(mats, 1, 2)), axis=(1, 2))
    if np.any(herm_defect > herm_tol * (1.0 + np.linalg.norm(mats, axis=(1, 2)))):
        raise InvalidArgumentError("spectral density matrices are not Hermitian")
    gram = sdm.gram
    ref = np.zeros(d) if ref is None else np.asarray(ref, dtype=float)
    if ref.shape != (d,):
        raise InvalidArgumentError(f"ref must be a length-{d} vector")
    if not np.any(ref):
        ref[0] = 1.0

    low = _whiten(gram)
    h = low.T @ mats @ low
    h = 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))
    vals, vecs = np.linalg.eigh(h)
    vals = vals[:, ::-1]
    vecs = vecs[:, :, ::-1]
    # back-transform e = L'^{-1} f, so that e* V e = f* f = 1
    e_all = np.linalg.solve(low.T[None], vecs)
    nt = mats.shape[0] - 1

    padded = np.concatenate([np.full((nt + 1, 1), np.inf), vals, np.full((nt + 1, 1), -np.inf)], axis=1)
    alpha = np.minimum(padded[:, :-2] - padded[:, 1:-1], padded[:, 1:-1] - padded[:, 2:])
    gaps = alpha[:, :p].min(axis=0)

    vr = gram @ ref
    lambdas = vals[:, :p].T.copy()
    vectors = np.empty((p, nt + 1, d), dtype=complex)
    fallback = np.zeros((p, nt + 1), dtype=bool)
    for m in range(p):
        e = e_all[:, :, m]
        z = e @ vr
        ok = np.abs(z) > align_tol
        out = np.where(ok[:, None], e * (np.conj(z) / np.where(ok, np.abs(z), 1.0))[:, None], e)
        fallback[m] = ~ok
        for j in np.flatnonzero(~ok):
            if j == 0:
                out[0] = _rotate_real(out[0], gram, None)
            elif j == nt:
                out[j] = _rotate_real(out[j], gram, out[j - 1])
            else:
                w = np.vdot(out[j - 1], gram @ out[j])
                if abs(w) > 0:
                    out[j] = out[j] * (np.conj(w) / abs(w))
        vectors[m] = out
    return EigenCurves(lambdas, vectors, ref, gram, gaps, fallback)


def eigencurves_from_vectors(vectors, gram=None, lambdas=None) -> EigenCurves:
    """Wrap user-supplied eigenvector curves (``(p, n_theta + 1, d)``) without
    re-solving any eigenproblem; used for filter synthesis from known curves."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 2:
        v = v[None]
    p, nt1, d = v.shape
    g = np.eye(d) if gram is None else np.asarray(gram, dtype=float)
    lam = np.ones((p, nt1)) if lambdas is None else np.asarray(lambdas, dtype=float)
    ref = np.zeros(d)
    ref[0] = 1.0
    return EigenCurves(lam, v, ref, g, np.full(p, np.nan), np.zeros((p, nt1), dtype=bool))


def full_filter_sequence(eigen: EigenCurves) -> tuple[np.ndarray, float]:
    """Filter coefficients for lags ``-n_theta..n_theta`` by discrete inversion.

    Returns the real coefficients, shape ``(p, 2 n_theta + 1, d)``, and the
    largest imaginary magnitude that was discarded.
    """
    nt = eigen.n_theta
    v = eigen.vectors
    # periodic sample on theta_j, j = 0..2nt-1 (j > nt is theta_{j-2nt} = conj reflection)
    per = np.concatenate([v, np.conj(v[:, nt - 1 : 0 : -1])], axis=1)
    coef = np.fft.fft(per, axis=1) / (2 * nt)
    lags = np.arange(-nt, nt + 1)
    out = coef[:, lags % (2 * nt), :]
    return out.real.copy(), float(np.max(np.abs(out.imag))) if out.size else 0.0


def filter_coefficients(
    eigen: EigenCurves,
    epsilon: float = DEFAULT_EPSILON,
    l_max: int = DEFAULT_LMAX,
    basis: Optional[BasisSpec] = None,
    imag_tol: float = 1e-8,
    truncation: str = "joint",
) -> DynamicFpcModel:
    """Dynamic FPC filters truncated at the smallest lag ``L`` capturing
    ``1 - epsilon`` of every component's squared V-norm mass.

    Using the trapezoid rule on the periodic frequency grid makes the
    untruncated coefficients satisfy Parseval exactly, so the total mass of
    each filter equals 1.

    With ``truncation="joint"`` one ``L`` serves all components. With
    ``"per-component"`` component ``m`` keeps only lags ``|l| <= L_m`` (its
    own threshold lag); the stored array still spans ``max_m L_m``.
    """
    if truncation not in ("joint", "per-component"):
        raise InvalidArgumentError(f"truncation must be 'joint' or 'per-component', got {truncation!r}")
    if not 0 < epsilon < 1:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1), got {epsilon}")
    nt = eigen.n_theta
    if not 0 <= l_max <= nt:
        raise InvalidArgumentError(f"l_max must lie in 0..n_theta={nt}, got {l_max}")
    coef, max_imag = full_filter_sequence(eigen)
    if max_imag > imag_tol:
        raise NumericalError(
            f"filter coefficients have imaginary part {max_imag:.3g} > {imag_tol:g}; "
            "eigenvector curves are not conjugate symmetric"
        )
    gram = eigen.gram
    mass = np.einsum("mki,ij,mkj->mk", coef, gram, coef)
    centre = nt
    # cumulative mass for |l| <= L, L = 0..nt (lags +-nt coincide on the periodic grid)
    sym = mass[:, centre:].copy()
    sym[:, 1:] += mass[:, centre - 1 :: -1][:, : nt]
    sym[:, -1] -= mass[:, 0]
    cum = np.cumsum(sym, axis=1)
    target = 1.0 - epsilon
    reached = cum >= target
    capped = False
    per_m = np.empty(eigen.p, dtype=int)
    for m in range(eigen.p):
        hits = np.flatnonzero(reached[m, : l_max + 1])
        if hits.size:
            per_m[m] = hits[0]
        else:
            per_m[m] = l_max
            capped = True
    L = int(per_m.max())
    if capped:
        warnings.warn(
            f"filter mass target {target:g} not reached within l_max={l_max}; L capped",
            RuntimeWarning,
            stacklevel=2,
        )
    filters = coef[:, centre - L : centre + L + 1, :].copy()
    if truncation == "per-component":
        for m, lm in enumerate(per_m):
            filters[m, : L - lm] = 0.0
            filters[m, L + lm + 1 :] = 0.0
        captured = cum[np.arange(eigen.p), per_m]
    else:
        captured = cum[:, L]
    if basis is None:
        from .basis import FOURIER

        basis = BasisSpec(eigen.d, FOURIER, gram, np.linspace(0.0, 1.0, max(4 * eigen.d, 101)))
    return DynamicFpcModel(filters, L, eigen, basis, captured, max_imag, capped, per_m)


def _check_series(series: FunctionalSeries, basis: BasisSpec):
    if not series.centered:
        raise PreconditionError("series must be centered before computing scores")
    if not series.basis.same_as(basis):
        raise PreconditionError("series basis does not match the model basis")


def dynamic_scores(series: FunctionalSeries, model: DynamicFpcModel) -> ScoreSeries:
    """``Y_mt = sum_{|k|<=L} X_{t-k}' V phi_mk`` with zero padding outside 1..n."""
    _check_series(series, model.basis)
    n, L = series.n, model.L
    w = series.coeffs @ model.basis.gram
    # z[k, t, m] = W_t . phi_{m, k-L}
    z = np.einsum("ti,mki->ktm", w, model.filters)
    scores = np.zeros((n, model.p))
    for idx, k in enumerate(range(-L, L + 1)):
        # t - k in 0..n-1 (0-based)
        lo, hi = max(0, k), min(n, n + k)
        if lo < hi:
            scores[lo:hi] += z[idx, lo - k : hi - k]
    t = np.arange(1, n + 1)
    valid = (t >= L + 1) & (t <= n - L)
    return ScoreSeries(scores, L, valid, "dynamic")


def dynamic_kl_reconstruct(scores: ScoreSeries, model: DynamicFpcModel, p_use: int) -> FunctionalSeries:
    """``X_t = sum_{m<=p_use} sum_{|k|<=L} Y_{m,t+k} phi_mk`` with zero scores outside 1..n."""
    if not 0 <= p_use <= model.p or p_use > scores.p:
        raise InvalidArgumentError(f"p_use must lie in 0..{min(model.p, scores.p)}, got {p_use}")
    n, L = scores.n, model.L
    out = np.zeros((n, model.basis.d))
    y = scores.scores[:, :p_use]
    for idx, k in enumerate(range(-L, L + 1)):
        lo, hi = max(0, -k), min(n, n - k)
        if lo < hi and p_use:
            out[lo:hi] += y[lo + k : hi + k] @ model.filters[:p_use, idx, :]
    return FunctionalSeries(out, model.basis, mean=np.zeros(model.basis.d))


def pv_dyn(eigen: EigenCurves, series: FunctionalSeries, p_use: int) -> float:
    """Share of total variance carried by the first ``p_use`` dynamic components.

    Numerator: integral of the eigenvalue curves over ``[-pi, pi]`` on the
    periodic trapezoid rule; denominator ``(1/n) sum_k ||X_k||^2``.
    """
    if not series.centered:
        raise PreconditionError("series must be centered")
    if not 0 <= p_use <= eigen.p:
        raise InvalidArgumentError(f"p_use must lie in 0..{eigen.p}, got {p_use}")
    total = float(np.mean(norms_sq(series.coeffs, series.basis.gram)))
    if total <= 0:
        raise NumericalError("total variance is zero; PV undefined")
    if p_use == 0:
        return 0.0
    lam = eigen.full_lambdas()[:p_use]
    trace_scale = np.abs(lam).sum(axis=0, keepdims=True)
    lam = np.where((lam < 0) & (lam >= -1e-10 * trace_scale), 0.0, lam)
    w = integration_weights(eigen.n_theta)
    return float(2.0 * np.pi * (lam @ w).sum() / total)


def nmse(original: FunctionalSeries, reconstructed: FunctionalSeries) -> float:
    """``sum ||X_k - Xhat_k||^2 / sum ||X_k||^2`` in the V geometry."""
    if original.coeffs.shape != reconstructed.coeffs.shape:
        raise InvalidArgumentError("original and reconstruction differ in shape")
    if not original.basis.same_as(reconstructed.basis):
        raise PreconditionError("original and reconstruction use different bases")
    g = original.basis.gram
    den = norms_sq(original.coeffs, g).sum()
    if den <= 0:
        raise NumericalError("original series has zero energy; NMSE undefined")
    return float(norms_sq(original.coeffs - reconstructed.coeffs, g).sum() / den)


def fit_dynamic(
    series: FunctionalSeries,
    p: int,
    q: Optional[int] = None,
    n_theta: int = 1000,
    weight: str = "bartlett",
    epsilon: float = DEFAULT_EPSILON,
    l_max: int = DEFAULT_LMAX,
    ref=None,
) -> DynamicFpcModel:
    """Spectral estimate, eigencurves and filters for a centered series."""
    from .specden import estimate_sdm

    sdm = estimate_sdm(series, q=q, weight=weight, n_theta=n_theta)
    eigen = eigendecompose(sdm, p, ref=ref)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return filter_coefficients(eigen, epsilon, min(l_max, n_theta), basis=series.basis)


def model_to_dict(model: DynamicFpcModel) -> dict:
    out = {
        "kind": "dynamic",
        "basis": model.basis.descriptor(),
        "gram": model.basis.gram.tolist(),
        "L": model.L,
        "p": model.p,
        "lags": model.lags.tolist(),
        "filters": model.filters.tolist(),
        "captured_mass": model.captured_mass.tolist(),
        "max_imag": model.max_imag,
        "lag_capped": model.lag_capped,
        "component_lags": None if model.component_lags is None else [int(v) for v in model.component_lags],
    }
    if model.eigen is not None:
        e = model.eigen
        out["eigen"] = {
            "n_theta": e.n_theta,
            "lambdas": e.lambdas.tolist(),
            "ref": e.ref.tolist(),
            "gaps": e.gaps.tolist(),
            "vectors": np.stack([e.vectors.real, e.vectors.imag], axis=-1).tolist(),
        }
    return out


def model_from_dict(obj: dict) -> DynamicFpcModel:
    from .basis import basis_from_descriptor

    basis = basis_from_descriptor(obj["basis"])
    gram = np.asarray(obj["gram"], dtype=float)
    if not np.array_equal(gram, basis.gram):
        basis = BasisSpec(basis.d, basis.functions, gram, basis.grid)
    eigen = None
    if "eigen" in obj:
        e = obj["eigen"]
        vec = np.asarray(e["vectors"], dtype=float)
        lam = np.asarray(e["lambdas"], dtype=float)
        eigen = EigenCurves(
            lam,
            vec[..., 0] + 1j * vec[..., 1],
            np.asarray(e["ref"], dtype=float),
            gram,
            np.asarray(e["gaps"], dtype=float),
            np.zeros(lam.shape, dtype=bool),
        )
    return DynamicFpcModel(
        np.asarray(obj["filters"], dtype=float),
        int(obj["L"]),
        eigen,
        basis,
        np.asarray(obj["captured_mass"], dtype=float),
        float(obj.get("max_imag", 0.0)),
        bool(obj.get("lag_capped", False)),
        None if obj.get("component_lags") is None else np.asarray(obj["component_lags"], dtype=int),
    )
