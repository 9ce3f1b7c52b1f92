"""Comparison of predicted occurrence rates against per-scene observations.

Input is one point per scene: the model's estimated occurrence rate for the
scene's state and the occurrence count actually observed. The summary
aggregates them three ways: binned means over the expected count axis, a
least-squares line through all points and through the low-rate subset (a
well-calibrated model gives slope near 1 through the origin), and the
Poisson log-likelihood of the observations under the per-scene rates versus
the best single constant rate.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine import LikelihoodComparison, compare_log_likelihood
from .errors import ModelFormatError


@dataclass(frozen=True)
class ScenePoint:
    scene_id: str
    estimated_rate: float  # per minute, for the scene's state
    observed_count: int

    def expected_count(self, exposure: float) -> float:
        return self.estimated_rate * exposure


@dataclass(frozen=True)
class BinSummary:
    low: float
    high: float
    count: int
    mean_expected: float
    mean_observed: float


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    n: int


@dataclass(frozen=True)
class EvaluationSummary:
    points: tuple[ScenePoint, ...]
    exposure: float
    bin_width: float
    subset_max: float
    bins: tuple[BinSummary, ...]
    fit_all: LineFit | None
    fit_subset: LineFit | None
    likelihood: LikelihoodComparison


def _line_fit(x: np.ndarray, y: np.ndarray) -> LineFit | None:
    # A line needs two distinct abscissae.
    if x.size < 2 or float(x.max() - x.min()) == 0.0:
        return None
    slope, intercept = np.polyfit(x, y, deg=1)
    return LineFit(slope=float(slope), intercept=float(intercept), n=int(x.size))


def evaluate_predictions(
    points: Sequence[ScenePoint],
    exposure: float = 1.0,
    bin_width: float = 0.25,
    subset_max: float = 1.0,
    static_rate: float | None = None,
) -> EvaluationSummary:
    """Summarize per-scene predictions against observed counts.

    ``exposure`` is the common scene duration in minutes; ``bin_width``
    partitions the expected-count axis starting at 0; ``subset_max`` bounds
    the expected count for the restricted line fit. ``static_rate=None``
    compares against the maximum-likelihood constant rate.
    """
    if not points:
        raise ValueError("need at least one scene point")
    if exposure <= 0 or bin_width <= 0:
        raise ValueError("exposure and bin_width must be > 0")
    x = np.array([p.expected_count(exposure) for p in points], dtype=float)
    y = np.array([p.observed_count for p in points], dtype=float)
    if np.any(x < 0):
        raise ValueError("estimated rates must be >= 0")

    edges = np.floor(x / bin_width).astype(int)
    bins = []
    for b in sorted(set(edges.tolist())):
        mask = edges == b
        bins.append(
            BinSummary(
                low=b * bin_width,
                high=(b + 1) * bin_width,
                count=int(mask.sum()),
                mean_expected=float(x[mask].mean()),
                mean_observed=float(y[mask].mean()),
            )
        )

    subset = x <= subset_max
    likelihood = compare_log_likelihood(
        counts=[p.observed_count for p in points],
        dynamic_rates=[p.estimated_rate for p in points],
        static_rate=static_rate,
        interval=exposure,
    )
    return EvaluationSummary(
        points=tuple(points),
        exposure=exposure,
        bin_width=bin_width,
        subset_max=subset_max,
        bins=tuple(bins),
        fit_all=_line_fit(x, y),
        fit_subset=_line_fit(x[subset], y[subset]),
        likelihood=likelihood,
    )


def load_scene_points(path: str) -> list[ScenePoint]:
    """Read per-scene points from CSV with columns scene_id, estimated_rate,
    observed_count."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        required = {"scene_id", "estimated_rate", "observed_count"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ModelFormatError(
                "scene point CSV needs columns scene_id, estimated_rate, observed_count",
                location=path,
            )
        points = []
        for lineno, row in enumerate(reader, start=2):
            try:
                points.append(
                    ScenePoint(
                        scene_id=row["scene_id"],
                        estimated_rate=float(row["estimated_rate"]),
                        observed_count=int(row["observed_count"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ModelFormatError(str(exc), location=f"{path}:{lineno}") from exc
    return points


def save_scene_points(points: Iterable[ScenePoint], path: str) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["scene_id", "estimated_rate", "observed_count"])
    for p in points:
        writer.writerow([p.scene_id, repr(p.estimated_rate), p.observed_count])
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)
