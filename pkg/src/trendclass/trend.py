"""Polynomial trend estimation with AIC degree selection.

Trends are fitted on the raw time steps n = 1..N by least squares.  The
degree is chosen from {1, 2, 3} by AIC, and the coefficients are also
re-expressed on time rescaled to [0, 1], which is what the icon
discriminator consumes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Dict, Mapping, NamedTuple

import numpy as np
from scipy import stats

CANDIDATE_DEGREES = (1, 2, 3)
SIGMA2_FLOOR = 1e-12
BAND_LEVEL = 0.95


class TrendError(ArithmeticError):
    """Numerical failure while fitting a trend."""


def design_matrix(N: int, degree: int) -> np.ndarray:
    """Columns 1, n, n^2, ..., n^degree for n = 1..N."""
    n = np.arange(1, N + 1, dtype=float)
    return np.vander(n, degree + 1, increasing=True)


class OLSFit(NamedTuple):
    beta: np.ndarray
    sigma2: float
    loglik: float
    rss: float
    clamped: bool


def gaussian_loglik(sigma2: float, N: int) -> float:
    """Maximized Gaussian log-likelihood given the MLE residual variance."""
    return -0.5 * N * (np.log(2 * np.pi) + 1.0 + np.log(sigma2))


def ols_fit(y, degree: int) -> OLSFit:
    """Least-squares polynomial fit on time steps 1..N via a QR factorization.

    ``sigma2`` is the residual mean square with divisor N, clamped below at
    ``SIGMA2_FLOOR`` (``clamped`` records whether that happened) so that the
    log-likelihood stays finite on exact fits.
    """
    y = np.asarray(y, dtype=float)
    N = len(y)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if N < degree + 2:
        raise TrendError(f"need at least {degree + 2} points for degree {degree}, got {N}")
    Z = design_matrix(N, degree)
    Q, R = np.linalg.qr(Z)
    diag = np.abs(np.diag(R))
    if diag.min() <= diag.max() * np.finfo(float).eps * N:
        raise TrendError("rank-deficient design matrix")
    beta = np.linalg.solve(R, Q.T @ y) if degree > 0 else np.array([y.mean()])
    resid = y - Z @ beta
    rss = float(resid @ resid)
    sigma2 = rss / N
    clamped = sigma2 < SIGMA2_FLOOR
    if clamped:
        sigma2 = SIGMA2_FLOOR
    return OLSFit(beta, sigma2, float(gaussian_loglik(sigma2, N)), rss, bool(clamped))


def aic(loglik: float, degree: int) -> float:
    # parameter count: degree + 1 coefficients plus the residual variance
    return -2.0 * loglik + 2.0 * (degree + 2)


def standardized_coefficients(beta, N: int) -> np.ndarray:
    """Re-express raw-time coefficients on s = (n - 1) / (N - 1) in [0, 1].

    Returns four entries (gamma_0..gamma_3), zero above the fitted degree.
    Substituting n = 1 + (N - 1) s and expanding binomially gives
    gamma_l = sum_k beta_k * C(k, l) * (N - 1)^l.
    """
    beta = np.asarray(beta, dtype=float)
    if len(beta) > 4:
        raise ValueError("at most cubic trends are supported")
    if N < 2:
        raise ValueError("need N >= 2 to rescale time")
    h = float(N - 1)
    gamma = np.zeros(4)
    for k, b in enumerate(beta):
        for l in range(k + 1):
            gamma[l] += b * comb(k, l) * h ** l
    return gamma


def evaluate_standardized(gamma, N: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, N)
    return np.polynomial.polynomial.polyval(s, np.asarray(gamma, dtype=float))


@dataclass
class TrendFit:
    variable: str
    degree: int
    beta: np.ndarray
    gamma: np.ndarray
    sigma2: float
    loglik: float
    aic: float
    fitted: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray
    rss: float = 0.0
    clamped: bool = False
    aic_by_degree: Dict[int, float] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.fitted)

    @property
    def dim(self) -> tuple:
        """Degree indicators (d1, d2) as in the dim matrix of the pipeline state."""
        return int(self.degree == 1), int(self.degree == 2)


def trend_band(fit: TrendFit, level: float = BAND_LEVEL):
    """Pointwise confidence band for the mean trend.

    fitted(n) +/- t_{(1+level)/2, N-p} * s * sqrt(leverage(n)), with
    s^2 = RSS / (N - p).  The unclamped RSS is used so exact fits give a
    zero-width band.
    """
    N, p = fit.N, fit.degree + 1
    if N <= p:
        raise TrendError("no residual degrees of freedom for the band")
    Q, _ = np.linalg.qr(design_matrix(N, fit.degree))
    leverage = np.einsum("ij,ij->i", Q, Q)
    s = np.sqrt(fit.rss / (N - p))
    half = stats.t.ppf(0.5 + level / 2.0, N - p) * s * np.sqrt(leverage)
    return fit.fitted - half, fit.fitted + half


def select_degree(y, variable: str = "", degrees=CANDIDATE_DEGREES) -> TrendFit:
    """Fit each candidate degree and keep the AIC minimizer (smallest degree on ties)."""
    y = np.asarray(y, dtype=float)
    N = len(y)
    if N < max(degrees) + 2:
        raise TrendError(f"need at least {max(degrees) + 2} time steps, got {N}")
    best = None
    scores: Dict[int, float] = {}
    for degree in degrees:
        res = ols_fit(y, degree)
        score = aic(res.loglik, degree)
        scores[degree] = score
        if best is None or score < best[1]:
            best = (degree, score, res)
    degree, score, res = best
    fitted = design_matrix(N, degree) @ res.beta
    fit = TrendFit(
        variable=variable,
        degree=degree,
        beta=res.beta,
        gamma=standardized_coefficients(res.beta, N),
        sigma2=res.sigma2,
        loglik=res.loglik,
        aic=score,
        fitted=fitted,
        band_lower=fitted,
        band_upper=fitted,
        rss=res.rss,
        clamped=res.clamped,
        aic_by_degree=scores,
    )
    fit.band_lower, fit.band_upper = trend_band(fit)
    return fit


def fit_all(variables: Mapping[str, np.ndarray]) -> Dict[str, TrendFit]:
    """One :class:`TrendFit` per variable, in input order.

    Accepts a plain mapping or anything with a ``variables`` mapping
    (e.g. a :class:`~trendclass.ingest.CleanDataset`).
    """
    variables = getattr(variables, "variables", variables)
    fits: Dict[str, TrendFit] = {}
    for name, y in variables.items():
        try:
            fits[name] = select_degree(y, variable=name)
        except (TrendError, np.linalg.LinAlgError) as exc:
            raise TrendError(f"{name}: {exc}") from exc
    return fits
