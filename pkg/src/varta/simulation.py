"""Sample-path generation for the latent VAR and the transformed series.

Reproducibility contract: streams come from the counter-based Philox
generator keyed by a 64-bit seed; parallel replications use jumped
streams (`RngSpec(seed, jumps=r)`), so serial and parallel runs of the
same design produce bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError
from .gaussian import cholesky_lower
from .likelihood import TimeSeriesData, VartaModel
from .var_model import VarParams, companion_covariance, derive_omega

_ALGORITHMS = ("philox",)


@dataclass(frozen=True)
class RngSpec:
    """Seeded, jumpable random stream specification."""

    seed: int
    algorithm: str = "philox"
    jumps: int = 0

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise DataValidationError(
                f"unknown rng algorithm '{self.algorithm}' "
                f"(supported: {_ALGORITHMS})"
            )
        if self.jumps < 0:
            raise DataValidationError("jumps must be >= 0")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.seed)
        if self.jumps:
            bitgen = bitgen.jumped(self.jumps)
        return np.random.Generator(bitgen)

    def jumped(self, jumps: int) -> "RngSpec":
        return RngSpec(self.seed, self.algorithm, self.jumps + jumps)


def simulate_latent(vp: VarParams, n: int, rng: RngSpec,
                    init: str = "stationary", burnin: int = 1000) -> np.ndarray:
    """n x p path of the latent VAR, stationary from the first row.

    The first k rows are drawn jointly from the stacked stationary
    covariance (so no burn-in is needed); later rows follow the lag
    recursion with innovations drawn through the Cholesky factor of the
    derived innovation covariance.  ``init='burnin'`` instead starts at
    zero and discards ``burnin`` warm-up steps, as a cross-check mode.
    """
    if n < 1:
        raise DataValidationError("n must be >= 1")
    if init not in ("stationary", "burnin"):
        raise DataValidationError(f"unknown init mode '{init}'")
    p, k = vp.p, vp.k
    omega = derive_omega(vp)
    lower_omega = cholesky_lower(omega)
    gen = rng.generator()

    if init == "stationary":
        lower_stack = cholesky_lower(companion_covariance(vp))
        w = lower_stack @ gen.standard_normal(k * p)
        rows = max(n, k)
        z = np.zeros((rows, p))
        for j in range(k):
            z[k - 1 - j] = w[j * p:(j + 1) * p]
        start = k
    else:
        rows = max(n, k) + burnin
        z = np.zeros((rows, p))
        start = k

    innov = gen.standard_normal((rows - start, p)) @ lower_omega.T
    for t in range(start, rows):
        zt = innov[t - start]
        for i in range(1, k + 1):
            zt = zt + vp.A[i - 1] @ z[t - i]
        z[t] = zt
    return z[-n:] if init == "burnin" else z[:n]


def simulate_varta(model: VartaModel, n: int, rng: RngSpec,
                   names: tuple[str, ...] = (),
                   init: str = "stationary") -> TimeSeriesData:
    """Simulate the observed series: latent path mapped through the
    marginal quantile transforms."""
    z = simulate_latent(model.var, n, rng, init=init)
    x = np.empty_like(z)
    for i, m in enumerate(model.marginals):
        x[:, i] = m.from_latent(z[:, i])
    return TimeSeriesData(values=x, names=names)
