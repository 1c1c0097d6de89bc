"""Static FPCA: eigenanalysis of the lag-0 covariance, scores and the
truncated static Karhunen-Loeve reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, FunctionalSeries
from .dpca import ScoreSeries, _check_series, _whiten
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class StaticFpcModel:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)  # shape (p, d), rows V-orthonormal
    basis: BasisSpec = field(repr=False)

    @property
    def p(self) -> int:
        return self.eigenvalues.shape[0]


def static_fpca(series: FunctionalSeries, p: int, ref=None, align_tol: float = 1e-8) -> StaticFpcModel:
    """Leading eigenpairs of ``C_0 V`` (divisor-n covariance of a centered series).

    Each eigenvector is signed so that its largest-magnitude coordinate is
    positive. If ``ref`` is given, the sign instead makes ``<v, ref>_V``
    positive wherever it exceeds ``align_tol``, which is the dynamic
    eigenvector convention.
    """
    d = series.d
    if not 1 <= p <= d:
        raise InvalidArgumentError(f"p must lie in 1..{d}, got {p}")
    _check_series(series, series.basis)
    x = series.coeffs
    c0 = x.T @ x / series.n
    low = _whiten(series.basis.gram)
    h = low.T @ c0 @ low
    vals, vecs = np.linalg.eigh(0.5 * (h + h.T))
    vals = vals[::-1][:p]
    vecs = np.linalg.solve(low.T, vecs[:, ::-1][:, :p]).T
    k = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(p), k])
    if ref is not None:
        z = vecs @ series.basis.gram @ np.asarray(ref, dtype=float)
        signs = np.where(np.abs(z) > align_tol, np.sign(z), signs)
    vecs = vecs * signs[:, None]
    return StaticFpcModel(vals, vecs, series.basis)


def static_scores(series: FunctionalSeries, model: StaticFpcModel) -> ScoreSeries:
    _check_series(series, model.basis)
    y = series.coeffs @ model.basis.gram @ model.eigenvectors.T
    return ScoreSeries(y, 0, np.ones(series.n, dtype=bool), "static")


def static_reconstruct(scores: ScoreSeries, model: StaticFpcModel, p_use: int) -> FunctionalSeries:
    if not 0 <= p_use <= model.p or p_use > scores.p:
        raise InvalidArgumentError(f"p_use must lie in 0..{model.p}, got {p_use}")
    out = scores.scores[:, :p_use] @ model.eigenvectors[:p_use]
    return FunctionalSeries(out, model.basis, mean=np.zeros(model.basis.d))


def static_model_to_dict(model: StaticFpcModel) -> dict:
    return {
        "kind": "static",
        "basis": model.basis.descriptor(),
        "gram": model.basis.gram.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "eigenvectors": model.eigenvectors.tolist(),
    }
