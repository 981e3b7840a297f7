"""Replication harness: coverage of asymptotic confidence intervals and
RMSE of the estimates across sample sizes.

Replication r draws its data through stream ``master_seed`` jumped r+1
times; the same stream is reused across sample sizes, so smaller samples
are prefixes of larger ones (common random numbers) and serial/parallel
runs agree exactly.  Replications whose fit does not converge, or whose
standard errors are undefined, are excluded from the aggregates and
tallied.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError, NumericalError, VartaError
from .estimation import ParamPacking, confidence_intervals, fit
from .likelihood import VartaModel
from .simulation import RngSpec, simulate_varta


@dataclass(frozen=True)
class McDesign:
    """One coverage/RMSE experiment: truth, sample sizes, replications."""

    truth: VartaModel
    sample_sizes: tuple[int, ...]
    replications: int
    master_seed: RngSpec
    ci_level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(self.sample_sizes))
        if self.replications < 1:
            raise DataValidationError("replications must be >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise DataValidationError("ci_level must be in (0, 1)")
        min_n = 10 * self.truth.p + 1
        for n in self.sample_sizes:
            if n < min_n:
                raise DataValidationError(
                    f"sample size {n} too small (need n > {10 * self.truth.p})"
                )

    def to_dict(self) -> dict:
        return {
            "truth": self.truth.to_dict(),
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "ci_level": self.ci_level,
            "seed": self.master_seed.seed,
        }


@dataclass(frozen=True)
class McReport:
    """Aggregated replication results, per sample size."""

    names: tuple[str, ...]
    groups: tuple[str, ...]
    truth_values: np.ndarray
    ci_level: float
    replications: int
    per_n: dict[int, dict] = field(default_factory=dict)
    # per_n[n] keys: coverage, bias, mse (per-parameter arrays),
    #                n_used, n_excluded

    def coverage_average(self, n: int) -> float:
        return float(np.mean(self.per_n[n]["coverage"]))

    def group_rmse(self, n: int, group: str) -> float:
        mask = np.array([g == group for g in self.groups])
        return float(np.sqrt(np.mean(self.per_n[n]["mse"][mask])))

    def to_dict(self) -> dict:
        return {
            "ci_level": self.ci_level,
            "replications": self.replications,
            "parameters": list(self.names),
            "groups": list(self.groups),
            "truth": self.truth_values.tolist(),
            "results": {
                str(n): {
                    "coverage": r["coverage"].tolist(),
                    "bias": r["bias"].tolist(),
                    "rmse": np.sqrt(r["mse"]).tolist(),
                    "n_used": r["n_used"],
                    "n_excluded": r["n_excluded"],
                }
                for n, r in self.per_n.items()
            },
            "group_summary": group_summary(self),
        }

    def format_text(self) -> str:
        ns = sorted(self.per_n)
        width = max(len(nm) for nm in self.names) + 2
        lines = [f"Empirical coverage of {self.ci_level:.0%} confidence "
                 f"intervals ({self.replications} replications)"]
        header = f"{'':{width}}" + "".join(f"{'n=' + str(n):>10}" for n in ns)
        lines += [header, "-" * len(header)]
        for j, nm in enumerate(self.names):
            row = f"{nm:{width}}" + "".join(
                f"{self.per_n[n]['coverage'][j]:>10.3f}" for n in ns
            )
            lines.append(row)
        lines.append("-" * len(header))
        lines.append(f"{'Average':{width}}" + "".join(
            f"{self.coverage_average(n):>10.3f}" for n in ns
        ))
        lines.append("")
        summary = group_summary(self)
        lines.append(f"{'Group summaries':{width}}")
        head2 = (f"{'n':>8}" + "".join(f"{g + ' cov':>12}" for g in _GROUP_ORDER)
                 + f"{'all cov':>12}"
                 + "".join(f"{g + ' rmse':>12}" for g in _GROUP_ORDER))
        lines += [head2, "-" * len(head2)]
        for n in ns:
            row = f"{n:>8}"
            for g in _GROUP_ORDER:
                row += f"{summary[str(n)][g]['coverage']:>12.3f}"
            row += f"{summary[str(n)]['all']['coverage']:>12.3f}"
            for g in _GROUP_ORDER:
                row += f"{summary[str(n)][g]['rmse']:>12.4f}"
            lines.append(row)
        excluded = {n: self.per_n[n]["n_excluded"] for n in ns}
        if any(excluded.values()):
            lines.append(f"excluded replications: {excluded}")
        return "\n".join(lines)


_GROUP_ORDER = ("A", "marginal", "rho")


def group_summary(report: McReport) -> dict:
    """Mean coverage and pooled RMSE per parameter group and overall."""
    groups = np.asarray(report.groups)
    out: dict = {}
    for n, r in report.per_n.items():
        entry = {}
        for g in _GROUP_ORDER:
            mask = groups == g
            if not mask.any():
                continue
            entry[g] = {
                "size": int(mask.sum()),
                "coverage": float(np.mean(r["coverage"][mask])),
                "rmse": float(np.sqrt(np.mean(r["mse"][mask]))),
            }
        entry["all"] = {
            "size": len(report.names),
            "coverage": float(np.mean(r["coverage"])),
            "rmse": float(np.sqrt(np.mean(r["mse"]))),
        }
        out[str(n)] = entry
    return out


def _run_replication(design: McDesign, r: int) -> list[dict | None]:
    """All sample sizes for one replication stream; None marks a failure."""
    truth = design.truth
    families = [m.family for m in truth.marginals]
    results: list[dict | None] = []
    for n in design.sample_sizes:
        rng = design.master_seed.jumped(r + 1)
        try:
            data = simulate_varta(truth, n, rng)
            fr = fit(data, truth.k, families)
        except (VartaError, np.linalg.LinAlgError):
            results.append(None)
            continue
        if not fr.converged or not np.all(np.isfinite(fr.se)):
            results.append(None)
            continue
        ci = confidence_intervals(fr, design.ci_level)
        results.append({
            "estimates": fr.estimates,
            "lo": ci[:, 0],
            "hi": ci[:, 1],
        })
    return results


def run_mc(design: McDesign, n_jobs: int = 1) -> McReport:
    """Execute the experiment, optionally in a process pool."""
    packing = ParamPacking.from_model(design.truth)
    truth_values = packing.natural(design.truth)
    names = tuple(packing.names())
    groups = tuple(packing.groups())

    reps = range(design.replications)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            all_results = list(
                pool.map(_run_replication, [design] * design.replications, reps)
            )
    else:
        all_results = [_run_replication(design, r) for r in reps]

    per_n: dict[int, dict] = {}
    for j, n in enumerate(design.sample_sizes):
        rows = [res[j] for res in all_results if res[j] is not None]
        n_used = len(rows)
        if n_used == 0:
            raise NumericalError(f"all replications failed at n = {n}")
        est = np.stack([row["estimates"] for row in rows])
        lo = np.stack([row["lo"] for row in rows])
        hi = np.stack([row["hi"] for row in rows])
        contains = (lo <= truth_values) & (truth_values <= hi)
        per_n[n] = {
            "coverage": contains.mean(axis=0),
            "bias": est.mean(axis=0) - truth_values,
            "mse": np.mean((est - truth_values) ** 2, axis=0),
            "n_used": n_used,
            "n_excluded": design.replications - n_used,
        }
    return McReport(
        names=names,
        groups=groups,
        truth_values=truth_values,
        ci_level=design.ci_level,
        replications=design.replications,
        per_n=per_n,
    )
