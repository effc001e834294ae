"""Hidden-width sweeps and capacity phase-transition detection."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .dataprep import DatasetMatrix
from .errors import DataError
from .nncore import TrainConfig, accuracy, train_mlp

Aggregation = Literal["mean", "best"]


@dataclass(frozen=True)
class CapacityPoint:
    hidden_width: int
    train_acc: float
    test_acc: float


@dataclass(frozen=True)
class CapacityCurve:
    variant_label: str
    points: tuple[CapacityPoint, ...]
    seeds_per_point: int = 1
    aggregation: Aggregation = "mean"
    # Per-width replicate accuracies as (train, test) pairs, in replicate order.
    replicates: dict[int, tuple[tuple[float, float], ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        widths = [p.hidden_width for p in self.points]
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise ValueError(f"hidden widths must be strictly increasing, got {widths}")
        for p in self.points:
            if not (0.0 <= p.train_acc <= 1.0 and 0.0 <= p.test_acc <= 1.0):
                raise ValueError(f"accuracy out of range at width {p.hidden_width}")

    @property
    def widths(self) -> list[int]:
        return [p.hidden_width for p in self.points]

    def test_accuracy(self, width: int) -> float:
        for p in self.points:
            if p.hidden_width == width:
                return p.test_acc
        raise KeyError(f"width {width} not in curve")

    def rows(self) -> list[dict]:
        return [
            {"variant": self.variant_label, "hidden_width": p.hidden_width,
             "train_acc": p.train_acc, "test_acc": p.test_acc}
            for p in self.points
        ]


@dataclass(frozen=True)
class TransitionResult:
    critical_width: int | None
    delta: float
    plateau_accuracy: float


def replicate_seed(base_seed: int, hidden_width: int, replicate: int) -> int:
    """Training seed for one (width, replicate) cell.

    Depends only on the width value, not its position in the grid, so curves
    over nested grids agree on shared widths.
    """
    seq = np.random.SeedSequence([base_seed, hidden_width, replicate])
    return int(seq.generate_state(1, np.uint64)[0])


def _fit_one(train: DatasetMatrix, test: DatasetMatrix, width: int, cfg: TrainConfig) -> tuple[float, float]:
    model = train_mlp(train, width, cfg)
    return accuracy(model, train), accuracy(model, test)


def sweep_capacity(
    train: DatasetMatrix,
    test: DatasetMatrix,
    widths: Sequence[int],
    cfg: TrainConfig,
    seeds_per_point: int = 3,
    aggregation: Aggregation = "mean",
    variant_label: str = "baseline",
    n_jobs: int = 1,
) -> CapacityCurve:
    """Train ``seeds_per_point`` MLPs per width and aggregate their accuracies.

    With ``aggregation="best"`` each point reports the replicate with the
    highest test accuracy (ties go to the earlier replicate).
    """
    widths = list(widths)
    if not widths:
        raise ValueError("widths must be nonempty")
    if train.feature_names != test.feature_names:
        raise DataError("train and test feature names differ")
    if seeds_per_point < 1:
        raise ValueError("seeds_per_point must be >= 1")
    if aggregation not in ("mean", "best"):
        raise ValueError(f"unknown aggregation {aggregation!r}")

    cells = [(w, r) for w in widths for r in range(seeds_per_point)]
    cfgs = [cfg.replace(seed=replicate_seed(cfg.seed, w, r)) for w, r in cells]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_fit_one, train, test, w, c) for (w, _), c in zip(cells, cfgs)]
            results = [f.result() for f in futures]
    else:
        results = [_fit_one(train, test, w, c) for (w, _), c in zip(cells, cfgs)]

    points = []
    replicates = {}
    for i, w in enumerate(widths):
        reps = results[i * seeds_per_point:(i + 1) * seeds_per_point]
        replicates[w] = tuple(reps)
        if aggregation == "mean":
            train_acc = float(np.mean([r[0] for r in reps]))
            test_acc = float(np.mean([r[1] for r in reps]))
        else:
            train_acc, test_acc = max(reps, key=lambda r: r[1])
        points.append(CapacityPoint(w, train_acc, test_acc))
    return CapacityCurve(variant_label, tuple(points), seeds_per_point, aggregation, replicates)


def detect_transition(curve: CapacityCurve, delta: float = 0.01) -> TransitionResult:
    """Smallest width whose test accuracy is within ``delta`` of the curve maximum."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if len(curve.points) < 2:
        raise ValueError("detect_transition needs at least 2 curve points")
    plateau = max(p.test_acc for p in curve.points)
    critical = next(p.hidden_width for p in curve.points if p.test_acc >= plateau - delta)
    return TransitionResult(critical, delta, plateau)
