"""File formats: model JSON, data CSV, design JSON, forecast exports.

CSV uses a comma separator, a required header row of series names, '.'
as the decimal separator, and shortest round-trip float formatting, so a
write/read cycle reproduces values bit for bit.  Missing values are a
validation error: the likelihood has no missing-data path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataValidationError
from .gaussian import CorrelationMatrix
from .likelihood import TimeSeriesData, VartaModel
from .marginals import marginal_from_dict
from .montecarlo import McDesign
from .simulation import RngSpec
from .var_model import VarParams


def model_from_dict(d: dict) -> VartaModel:
    """Parse {"p", "k", "A", "rho", "marginals"} into a model.

    "A" is either one p x p matrix (k = 1) or a list of k of them; "rho"
    lists the upper triangle of the latent correlation row-major.
    """
    for key in ("p", "A", "rho", "marginals"):
        if key not in d:
            raise DataValidationError(f"model config is missing field '{key}'")
    p = int(d["p"])
    a = np.asarray(d["A"], dtype=float)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3 or a.shape[1:] != (p, p):
        raise DataValidationError(
            f"field 'A' must be one or more {p}x{p} matrices, got shape {a.shape}"
        )
    k = int(d.get("k", a.shape[0]))
    if k != a.shape[0]:
        raise DataValidationError(
            f"field 'k' = {k} does not match {a.shape[0]} matrices in 'A'"
        )
    try:
        sigma = CorrelationMatrix.from_rho(np.asarray(d["rho"], dtype=float), p)
    except DataValidationError as exc:
        raise DataValidationError(f"field 'rho': {exc}") from None
    if len(d["marginals"]) != p:
        raise DataValidationError(
            f"field 'marginals' must list {p} entries, got {len(d['marginals'])}"
        )
    marginals = tuple(marginal_from_dict(m) for m in d["marginals"])
    return VartaModel(var=VarParams(A=a, sigma=sigma), marginals=marginals)


def load_model(path: str | Path) -> VartaModel:
    """Read a model from JSON; accepts fit-result files too."""
    d = _load_json(path)
    if "model" in d and isinstance(d["model"], dict):
        d = d["model"]
    return model_from_dict(d)


def _load_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON ({exc})") from None


def save_json(obj: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def write_csv(data: TimeSeriesData, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(data.names) + "\n")
        for row in data.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path: str | Path) -> TimeSeriesData:
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"file not found: {path}")
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise DataValidationError(f"{path}: need a header row and data rows")
    names = tuple(s.strip() for s in lines[0].split(","))
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(names):
            raise DataValidationError(
                f"{path}: row {r} has {len(cells)} fields, expected {len(names)}"
            )
        row = []
        for c, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                raise DataValidationError(
                    f"{path}: missing value at row {r}, column '{names[c]}'"
                )
            try:
                row.append(float(cell))
            except ValueError:
                raise DataValidationError(
                    f"{path}: cannot parse '{cell}' at row {r}, "
                    f"column '{names[c]}'"
                ) from None
        rows.append(row)
    values = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise DataValidationError(
            f"{path}: non-finite value at row {bad[0] + 2}, "
            f"column '{names[bad[1]]}'"
        )
    return TimeSeriesData(values=values, names=names)


def design_from_dict(d: dict) -> McDesign:
    """Parse a replication-experiment config."""
    for key in ("truth", "sample_sizes", "replications", "seed"):
        if key not in d:
            raise DataValidationError(f"design config is missing field '{key}'")
    return McDesign(
        truth=model_from_dict(d["truth"]),
        sample_sizes=tuple(int(n) for n in d["sample_sizes"]),
        replications=int(d["replications"]),
        master_seed=RngSpec(seed=int(d["seed"])),
        ci_level=float(d.get("ci_level", 0.95)),
    )


def load_design(path: str | Path) -> McDesign:
    return design_from_dict(_load_json(path))


def write_forecast_paths_csv(fr, path: str | Path) -> None:
    """Long format: horizon, series, path, value."""
    with open(path, "w") as fh:
        fh.write("horizon,series,path,value\n")
        for s in range(fr.horizon):
            for i in range(fr.p):
                col = fr.samples[:, s, i]
                for j in range(fr.n_paths):
                    fh.write(f"{s + 1},{fr.names[i]},{j + 1},{col[j]!r}\n")


def forecast_summary_dict(fr, levels=(0.025, 0.975)) -> dict:
    from .forecasting import forecast_summary

    return {"levels": list(levels), "rows": forecast_summary(fr, levels)}
