"""Change-point CUSUM functional on dynamic FPC scores."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dpca import ScoreSeries
from .errors import InvalidArgumentError, PreconditionError


# The long-run variance of the m-th dynamic score is 2 pi lambda_m(0), so the
# functional below converges to (2 pi)^2 times a sum of squared Brownian bridges.
BRIDGE_SCALE = (2.0 * np.pi) ** 2


@dataclass(frozen=True)
class CusumResult:
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    sup_stat: float
    lambdas0: np.ndarray

    @property
    def bridge_values(self) -> np.ndarray:
        """``values / (2 pi)^2``: the scale on which the null limit is
        ``sum_m B_m(x)^2`` for independent Brownian bridges ``B_m``."""
        return self.values / BRIDGE_SCALE

    @property
    def bridge_sup(self) -> float:
        return self.sup_stat / BRIDGE_SCALE


def cusum_dyn(scores: ScoreSeries, lambdas0) -> CusumResult:
    """CUSUM functional of dynamic scores normalized by ``2 pi lambda_m(0)``.

    ``T(x) = (2 pi / n) sum_m lambda_m(0)^{-1} (S_m(nx) - x S_m(n))^2``
    on ``x = j/n, j = 1..n``, with ``S_m(k)`` the partial sums of the
    ``m``-th score series. Boundary rows enter as computed (zero padded).
    """
    if scores.kind != "dynamic":
        raise PreconditionError("cusum_dyn expects dynamic scores")
    lam = np.atleast_1d(np.asarray(lambdas0, dtype=float))
    if lam.shape != (scores.p,):
        raise InvalidArgumentError(f"need {scores.p} long-run eigenvalues, got {lam.size}")
    if np.any(~(lam > 0)):
        raise InvalidArgumentError("lambdas0 must be strictly positive")
    n = scores.n
    partial = np.cumsum(scores.scores, axis=0)
    x = np.arange(1, n + 1) / n
    bridge = partial - x[:, None] * partial[-1]
    values = (2.0 * np.pi / n) * (bridge**2 / lam).sum(axis=1)
    return CusumResult(x, values, float(values.max()), lam)

