"""Regression and ranking metrics, evaluation reports and their aggregation."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar

import numpy as np
from sortedcontainers import SortedList

from coldta.errors import DomainError, ShapeError
from coldta.helpers import coldta_logger, key_value_text

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Sequence

    from numpy.typing import ArrayLike, NDArray


def _vectors(
    y: ArrayLike,
    yhat: ArrayLike,
    minimum: int,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Validate and convert a pair of equal length vectors."""
    a = np.asarray(y, dtype=np.float64).reshape(-1)
    b = np.asarray(yhat, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        msg = "observed and predicted vectors differ in length"
        raise ShapeError(msg, a.shape, b.shape)
    if a.size < minimum:
        msg = f"need at least {minimum} values, got {a.size}"
        raise DomainError(msg)
    return a, b


def mse(y: ArrayLike, yhat: ArrayLike) -> float:
    """Mean squared error."""
    a, b = _vectors(y, yhat, 1)
    return float(np.mean((a - b) ** 2))


def mae(y: ArrayLike, yhat: ArrayLike) -> float:
    """Mean absolute error."""
    a, b = _vectors(y, yhat, 1)
    return float(np.mean(np.abs(a - b)))


###############################################################################
# Concordance index.
###############################################################################


def _ci_value(concordant: int, ties: int, comparable: int) -> float:
    # Both paths count the same integers, so they agree bit for bit.
    if comparable == 0:
        msg = "concordance index is undefined when every observed value is equal"
        raise DomainError(msg)
    return (2 * concordant + ties) / (2 * comparable)


def concordance_pairs(y: ArrayLike, yhat: ArrayLike) -> float:
    """
    Concordance index by direct evaluation over every pair, O(N^2).

    Over pairs with y_i > y_j, a pair scores 1 when yhat_i > yhat_j, 0.5 when
    the predictions tie, and 0 otherwise.
    """
    a, b = _vectors(y, yhat, 2)
    ranked = a[:, np.newaxis] > a[np.newaxis, :]
    diff = b[:, np.newaxis] - b[np.newaxis, :]
    concordant = int(np.count_nonzero(ranked & (diff > 0)))
    ties = int(np.count_nonzero(ranked & (diff == 0)))
    return _ci_value(concordant, ties, int(np.count_nonzero(ranked)))


def concordance_sorted(y: ArrayLike, yhat: ArrayLike) -> float:
    """
    Concordance index in O(N log N).

    Visits the values in increasing y, one group of equal y at a time. Every
    earlier group has a strictly smaller y, so the sorted list of their
    predictions answers "how many are below / equal to yhat_i" by bisection.
    """
    a, b = _vectors(y, yhat, 2)
    order = np.argsort(a, kind="stable")
    seen: SortedList[float] = SortedList()
    concordant = ties = comparable = 0
    for _, group in groupby(order, key=lambda i: a[i]):
        members = [float(b[i]) for i in group]
        for prediction in members:
            below = seen.bisect_left(prediction)
            concordant += below
            ties += seen.bisect_right(prediction) - below
            comparable += len(seen)
        seen.update(members)
    return _ci_value(concordant, ties, comparable)


def concordance_index(y: ArrayLike, yhat: ArrayLike, *, fast: bool = True) -> float:
    """Return the concordance index, by the sorted path unless fast is False."""
    if fast is True:
        return concordance_sorted(y, yhat)
    return concordance_pairs(y, yhat)


###############################################################################
# Correlation.
###############################################################################


def pearson(y: ArrayLike, yhat: ArrayLike) -> float:
    """Pearson correlation coefficient of y and yhat."""
    a, b = _vectors(y, yhat, 2)
    da = a - a.mean()
    db = b - b.mean()
    denominator = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denominator == 0.0:
        msg = "Pearson correlation is undefined for a zero-variance vector"
        raise DomainError(msg)
    return float(np.dot(da, db)) / denominator


def rm2(y: ArrayLike, yhat: ArrayLike) -> float:
    """
    The r_m^2 external validity score, r^2 * (1 - sqrt(|r^2 - r0^2|)).

    r^2 is the squared Pearson correlation. r0^2 is the coefficient of
    determination of y regressed on yhat through the origin, with slope
    k = sum(y * yhat) / sum(yhat^2).
    """
    a, b = _vectors(y, yhat, 3)
    r2 = pearson(a, b) ** 2
    k = float(np.dot(a, b)) / float(np.dot(b, b))
    residual = float(np.sum((a - k * b) ** 2))
    total = float(np.sum((a - a.mean()) ** 2))
    r02 = 1.0 - residual / total
    return r2 * (1.0 - math.sqrt(abs(r2 - r02)))


###############################################################################
# Reports.
###############################################################################


@dataclass(frozen=True)
class EvaluationReport:
    """The metrics of one model on one scenario."""

    scenario: str
    n: int
    mse: float
    mae: float
    ci: float
    rm2: float
    pearson_r: float

    METRICS: ClassVar[tuple[str, ...]] = ("mse", "mae", "ci", "rm2", "pearson_r")

    def to_dict(self: EvaluationReport) -> dict[str, Any]:
        """Return the report as a plain dictionary."""
        return dataclasses.asdict(self)

    def to_text(self: EvaluationReport) -> str:
        """Return the flat `key = value` form."""
        return key_value_text(self.to_dict())

    def write(self: EvaluationReport, path: Path) -> None:
        """Write the text report and a JSON copy next to it."""
        path.write_text(self.to_text(), encoding="utf-8")
        json_path = Path(f"{path}.json")
        json_path.write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def read(cls: type[EvaluationReport], path: Path) -> EvaluationReport:
        """Read a report from its JSON file, or from the text report's JSON copy."""
        json_path = path if path.suffix == ".json" else Path(f"{path}.json")
        values = json.loads(json_path.read_text(encoding="utf-8"))
        return cls(**{f.name: values[f.name] for f in dataclasses.fields(cls)})


def _or_nan(
    name: str,
    metric: Callable[[ArrayLike, ArrayLike], float],
    y: ArrayLike,
    yhat: ArrayLike,
) -> float:
    """Return the metric, NaN (with a warning) where it is undefined."""
    try:
        return metric(y, yhat)
    except DomainError as err:
        coldta_logger().warning("Metric %s undefined: %s", name, err.message)
        return math.nan


def evaluate_predictions(
    y: ArrayLike,
    yhat: ArrayLike,
    scenario: str = "",
) -> EvaluationReport:
    """
    Compute every metric for one set of predictions.

    Exceptions
    ----------
    DomainError:
        There are no values. Rank and correlation metrics that are undefined
        for the data (too few values, no variance) are reported as NaN.

    """
    a, b = _vectors(y, yhat, 1)
    return EvaluationReport(
        scenario=scenario,
        n=int(a.size),
        mse=mse(a, b),
        mae=mae(a, b),
        ci=_or_nan("ci", concordance_index, a, b),
        rm2=_or_nan("rm2", rm2, a, b),
        pearson_r=_or_nan("pearson_r", pearson, a, b),
    )


def aggregate(
    reports: Iterable[EvaluationReport],
) -> dict[str, dict[str, tuple[float, float]]]:
    """
    Summarize independent runs as mean and standard deviation per scenario.

    Returns
    -------
        scenario -> metric -> (mean, population standard deviation).

    """
    by_scenario: dict[str, list[EvaluationReport]] = {}
    for report in reports:
        by_scenario.setdefault(report.scenario, []).append(report)
    summary: dict[str, dict[str, tuple[float, float]]] = {}
    for scenario in sorted(by_scenario):
        runs = by_scenario[scenario]
        summary[scenario] = {}
        for metric in EvaluationReport.METRICS:
            values = np.array([getattr(r, metric) for r in runs], dtype=np.float64)
            summary[scenario][metric] = (float(values.mean()), float(values.std()))
    return summary


def aggregate_text(
    summary: dict[str, dict[str, tuple[float, float]]],
    runs: Sequence[EvaluationReport],
) -> str:
    """Render an aggregate as `scenario.metric = mean (std)` lines."""
    counts = {s: sum(1 for r in runs if r.scenario == s) for s in summary}
    values: dict[str, Any] = {}
    for scenario, metrics in summary.items():
        values[f"{scenario}.runs"] = counts[scenario]
        for metric, (mean, std) in metrics.items():
            values[f"{scenario}.{metric}"] = f"{mean:.6f} ({std:.6f})"
    return key_value_text(values)
