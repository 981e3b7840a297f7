"""Simulation-based forecast distributions.

Forecasts are plug-in: the fitted parameters are treated as known, M
latent paths are rolled forward from the latent tail of the sample, and
every path is mapped back to the data scale pointwise.  Because the
per-component map is monotone, sample quantiles of the mapped paths are
the mapped quantiles of the latent paths; means do not commute with the
map, so point forecasts are taken from the mapped sample directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError
from .gaussian import cholesky_lower
from .likelihood import TimeSeriesData, VartaModel, latentize
from .simulation import RngSpec
from .var_model import derive_omega


@dataclass(frozen=True)
class ForecastResult:
    """Simulated future paths: samples[j, s, i] is path j, horizon s+1,
    series i, on the data scale; latent holds the matching latent paths."""

    samples: np.ndarray
    latent: np.ndarray
    names: tuple[str, ...]

    @property
    def n_paths(self) -> int:
        return self.samples.shape[0]

    @property
    def horizon(self) -> int:
        return self.samples.shape[1]

    @property
    def p(self) -> int:
        return self.samples.shape[2]


def forecast(model: VartaModel, data: TimeSeriesData, h: int, n_paths: int,
             rng: RngSpec) -> ForecastResult:
    """Simulate ``n_paths`` joint paths over horizons 1..h."""
    if h < 1:
        raise DataValidationError("horizon h must be >= 1")
    if n_paths < 1:
        raise DataValidationError("number of paths must be >= 1")
    k, p = model.k, model.p
    if data.n < k:
        raise DataValidationError(f"need at least k = {k} observations")
    z = latentize(model, data)
    omega_lower = cholesky_lower(derive_omega(model.var))
    gen = rng.generator()

    # lags[i-1] holds z_{t-i} for every path; all paths share the observed tail
    lags = [np.tile(z[-i], (n_paths, 1)) for i in range(1, k + 1)]
    latent = np.empty((n_paths, h, p))
    for s in range(h):
        step = gen.standard_normal((n_paths, p)) @ omega_lower.T
        for i in range(1, k + 1):
            step += lags[i - 1] @ model.var.A[i - 1].T
        latent[:, s, :] = step
        lags = [step] + lags[:-1]

    samples = np.empty_like(latent)
    for i, m in enumerate(model.marginals):
        samples[:, :, i] = m.from_latent(latent[:, :, i].ravel()).reshape(
            n_paths, h
        )
    return ForecastResult(samples=samples, latent=latent, names=data.names)


def forecast_summary(fr: ForecastResult,
                     levels: tuple[float, ...] = (0.025, 0.975)) -> list[dict]:
    """Per-horizon, per-series mean, median, and order-statistic quantiles.

    Quantiles interpolate linearly between order statistics (one fixed
    convention so summaries are reproducible bit for bit).
    """
    levels = tuple(levels)
    if any(not 0.0 < q < 1.0 for q in levels):
        raise DataValidationError("quantile levels must be inside (0, 1)")
    rows = []
    for s in range(fr.horizon):
        for i in range(fr.p):
            x = fr.samples[:, s, i]
            qs = np.quantile(x, levels, method="linear")
            rows.append({
                "horizon": s + 1,
                "series": fr.names[i],
                "mean": float(x.mean()),
                "median": float(np.median(x)),
                "quantiles": {str(q): float(v) for q, v in zip(levels, qs)},
            })
    return rows
