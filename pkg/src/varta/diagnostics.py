"""Residual analysis on the latent scale.

A correctly specified model yields latent innovations that are white and
latent observations that are standard Gaussian per component; the checks
here are the corresponding correlogram, portmanteau, and moment-based
flags.  Bands and reference distributions are asymptotic and ignore
estimation uncertainty (reported in the metadata, not corrected for).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import DataValidationError
from .likelihood import TimeSeriesData, VartaModel, latentize

_CAVEAT = ("bands and p-values are asymptotic and treat parameters as "
           "known; small-sample diagnostics on fitted residuals are "
           "approximate")


def residuals(model: VartaModel, data: TimeSeriesData) -> np.ndarray:
    """Latent one-step prediction errors, rows t = k+1..n."""
    z = latentize(model, data)
    k, n = model.k, data.n
    if n <= k:
        raise DataValidationError(f"need more than k = {k} observations")
    resid = z[k:].copy()
    for i in range(1, k + 1):
        resid -= z[k - i:n - i] @ model.var.A[i - 1].T
    return resid


def correlogram(series: np.ndarray, max_lag: int) -> dict:
    """Sample auto- and cross-correlations to ``max_lag``.

    Returns {"lags", "corr", "band"} where corr[i, j, l] is the
    correlation between series i at time t and series j at time t - l
    (so corr[i, i, :] is the autocorrelation of series i, equal to 1 at
    lag 0), and band is the white-noise band 1.96/sqrt(n).
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] < series.shape[1]:
        raise DataValidationError("series must be n x p with n > p")
    n, p = series.shape
    if n <= 4 * max_lag:
        raise DataValidationError(f"need n > 4 L = {4 * max_lag}, got {n}")
    centered = series - series.mean(axis=0)
    denom = np.sqrt(np.einsum("ti,ti->i", centered, centered))
    corr = np.empty((p, p, max_lag + 1))
    for lag in range(max_lag + 1):
        lead = centered[lag:]
        trail = centered[:n - lag]
        cov = lead.T @ trail
        corr[:, :, lag] = cov / np.outer(denom, denom)
    return {
        "lags": np.arange(max_lag + 1),
        "corr": corr,
        "band": 1.96 / np.sqrt(n),
    }


def ljung_box(x: np.ndarray, lags: int) -> tuple[float, float]:
    """Portmanteau statistic and chi-square p-value for one series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n <= 4 * lags:
        raise DataValidationError(f"need n > 4 L = {4 * lags}, got {n}")
    centered = x - x.mean()
    denom = centered @ centered
    acf = np.array([
        (centered[lag:] @ centered[:n - lag]) / denom
        for lag in range(1, lags + 1)
    ])
    q = n * (n + 2.0) * np.sum(acf ** 2 / (n - np.arange(1, lags + 1)))
    return float(q), float(chi2.sf(q, df=lags))


def whiteness_test(resid: np.ndarray, lags: int) -> list[dict]:
    """Per-series portmanteau tests of residual whiteness."""
    resid = np.atleast_2d(np.asarray(resid, dtype=float))
    out = []
    for i in range(resid.shape[1]):
        q, pval = ljung_box(resid[:, i], lags)
        out.append({"series": i, "statistic": q, "pvalue": pval, "lags": lags})
    return out


def gaussianity_check(latent: np.ndarray) -> list[dict]:
    """Moment report per series with 3-sigma flags against N(0, 1).

    Null standard errors: sqrt(1/n) for the mean, sqrt(2/n) for the
    variance, sqrt(6/n) for skewness, sqrt(24/n) for excess kurtosis.
    """
    latent = np.atleast_2d(np.asarray(latent, dtype=float))
    n = latent.shape[0]
    if n < 50:
        raise DataValidationError(f"need n >= 50 for moment checks, got {n}")
    out = []
    for i in range(latent.shape[1]):
        z = latent[:, i]
        mean = z.mean()
        var = z.var()
        zc = z - mean
        skew = np.mean(zc ** 3) / var ** 1.5
        exkurt = np.mean(zc ** 4) / var ** 2 - 3.0
        checks = {
            "mean": (mean, np.sqrt(1.0 / n)),
            "variance": (var - 1.0, np.sqrt(2.0 / n)),
            "skewness": (skew, np.sqrt(6.0 / n)),
            "excess_kurtosis": (exkurt, np.sqrt(24.0 / n)),
        }
        out.append({
            "series": i,
            "mean": float(mean),
            "variance": float(var),
            "skewness": float(skew),
            "excess_kurtosis": float(exkurt),
            "flags": sorted(
                name for name, (dev, se) in checks.items() if abs(dev) > 3 * se
            ),
        })
    return out


@dataclass(frozen=True)
class ResidualReport:
    """Bundle of residual diagnostics for one fitted model."""

    residuals: np.ndarray
    correlations: dict
    whiteness: list[dict]
    moments: list[dict]
    names: tuple[str, ...]
    note: str = _CAVEAT

    def n_band_violations(self) -> int:
        """Cross/auto correlations outside the white-noise band, lags >= 1."""
        corr = self.correlations["corr"][:, :, 1:]
        return int(np.sum(np.abs(corr) > self.correlations["band"]))

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "series": list(self.names),
            "whiteness": [
                {**w, "series": self.names[w["series"]]} for w in self.whiteness
            ],
            "moments": [
                {**m, "series": self.names[m["series"]]} for m in self.moments
            ],
            "correlogram": {
                "band": self.correlations["band"],
                "lags": self.correlations["lags"].tolist(),
                "corr": self.correlations["corr"].tolist(),
            },
            "band_violations": self.n_band_violations(),
        }

    def format_text(self) -> str:
        lines = ["Residual diagnostics", "=" * 60]
        lines.append(f"{'series':<12}{'LB stat':>10}{'p-value':>10}"
                     f"{'mean':>9}{'var':>9}{'skew':>9}{'ex.kurt':>9}")
        for w, m in zip(self.whiteness, self.moments):
            name = self.names[w["series"]]
            lines.append(
                f"{name:<12}{w['statistic']:>10.3f}{w['pvalue']:>10.4f}"
                f"{m['mean']:>9.3f}{m['variance']:>9.3f}"
                f"{m['skewness']:>9.3f}{m['excess_kurtosis']:>9.3f}"
            )
            if m["flags"]:
                lines.append(f"{'':12}flagged: {', '.join(m['flags'])}")
        lines.append(f"correlation band +-{self.correlations['band']:.4f}, "
                     f"{self.n_band_violations()} violations at lags >= 1")
        lines.append(f"note: {self.note}")
        return "\n".join(lines)


def diagnose(model: VartaModel, data: TimeSeriesData,
             max_lag: int | None = None,
             lb_lags: int | None = None) -> ResidualReport:
    """Full residual report: correlogram, whiteness tests, moment flags."""
    resid = residuals(model, data)
    n = resid.shape[0]
    if max_lag is None:
        max_lag = max(1, min(20, n // 5))
    if lb_lags is None:
        lb_lags = max(1, min(10, n // 5))
    z = latentize(model, data)
    return ResidualReport(
        residuals=resid,
        correlations=correlogram(resid, max_lag),
        whiteness=whiteness_test(resid, lb_lags),
        moments=gaussianity_check(z),
        names=data.names,
    )
