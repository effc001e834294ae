"""Competing methods: L1-regularized probe, two-phase JTT, and cost accounting."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .auditor import AuditReport
from .dataprep import DatasetMatrix
from .errors import DataError, DimensionError
from .nncore import LinearProbe, MlpModel, TrainConfig, accuracy, predict_labels, train_linear, train_mlp

log = logging.getLogger(__name__)

PROTECTED_GROUPS = ("sex", "relationship", "race", "marital-status", "native-country")


@dataclass(frozen=True)
class ImportanceComparison:
    feature_names: tuple[str, ...]
    auditor_abs_weights: tuple[float, ...]
    l1_abs_weights: tuple[float, ...]
    auditor_top: str
    l1_top: str
    l1_sparsity: float
    l1_top_protected: bool = False

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": n, "auditor_weight": a, "l1_weight": b}
                for n, a, b in zip(self.feature_names, self.auditor_abs_weights, self.l1_abs_weights)
            ],
            "auditor_top": self.auditor_top,
            "l1_top": self.l1_top,
            "l1_sparsity": self.l1_sparsity,
            "l1_top_protected": self.l1_top_protected,
        }

    def rows(self) -> list[dict]:
        return [
            {"feature": n, "auditor_weight": a, "l1_weight": b}
            for n, a, b in zip(self.feature_names, self.auditor_abs_weights, self.l1_abs_weights)
        ]


@dataclass(frozen=True)
class CostReport:
    method: str
    epochs_total: int
    trained_parameters_total: int
    wall_seconds: float = 0.0
    parameter_epochs: int = 0
    phase_epochs: tuple[int, ...] = ()

    def __post_init__(self):
        if min(self.epochs_total, self.trained_parameters_total, self.parameter_epochs) < 0:
            raise ValueError("cost counters must be nonnegative")
        if self.wall_seconds < 0:
            raise ValueError("wall_seconds must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "epochs_total": self.epochs_total,
            "trained_parameters_total": self.trained_parameters_total,
            "parameter_epochs": self.parameter_epochs,
            "phase_epochs": list(self.phase_epochs),
            "wall_seconds": self.wall_seconds,
        }


@dataclass(frozen=True)
class JttConfig:
    upweight_factor: int = 5
    phase1_epochs: int = 200
    phase2_epochs: int = 200

    def __post_init__(self):
        if self.upweight_factor < 1 or int(self.upweight_factor) != self.upweight_factor:
            raise ValueError(f"upweight_factor must be an integer >= 1, got {self.upweight_factor}")
        if self.phase1_epochs < 1 or self.phase2_epochs < 1:
            raise ValueError("phase epoch budgets must be >= 1")


# -- L1 ---------------------------------------------------------------------------


def train_l1_probe(data: DatasetMatrix, lam: float, cfg: TrainConfig) -> LinearProbe:
    return train_linear(data, cfg.replace(l1_lambda=lam))


def l1_sparsity(weights: Sequence[float]) -> float:
    """Fraction of weights below a tenth of the largest magnitude."""
    w = np.abs(np.asarray(weights, dtype=np.float64))
    peak = w.max()
    if peak == 0:
        return 1.0
    return float(np.mean(w < 0.1 * peak))


def compare_importance(
    audit: AuditReport,
    l1_probe: LinearProbe,
    feature_names: Sequence[str] | None = None,
    protected_groups: Sequence[str] = PROTECTED_GROUPS,
) -> ImportanceComparison:
    if feature_names is not None and tuple(feature_names) != audit.feature_names:
        raise DataError("L1 probe and audit were fit on different feature spaces")
    if l1_probe.n_features != len(audit.feature_names):
        raise DimensionError(f"L1 probe has {l1_probe.n_features} weights, audit has {len(audit.feature_names)}")
    aud = np.asarray(audit.abs_weights)
    l1 = np.abs(l1_probe.weights)
    names = audit.feature_names
    l1_top = names[int(np.argmax(l1))]
    return ImportanceComparison(
        feature_names=names,
        auditor_abs_weights=tuple(float(v) for v in aud),
        l1_abs_weights=tuple(float(v) for v in l1),
        auditor_top=names[int(np.argmax(aud))],
        l1_top=l1_top,
        l1_sparsity=l1_sparsity(l1),
        l1_top_protected=l1_top.partition("=")[0] in protected_groups,
    )


# -- cost accounting ------------------------------------------------------------------


def _single_run_cost(method: str, n_params: int, epochs: int, seconds: float) -> CostReport:
    return CostReport(method, epochs, n_params, seconds, n_params * epochs, (epochs,))


def train_erm(train: DatasetMatrix, width: int, cfg: TrainConfig) -> tuple[MlpModel, CostReport]:
    start = time.perf_counter()
    model = train_mlp(train, width, cfg)
    return model, _single_run_cost("ERM", model.n_parameters, cfg.epochs, time.perf_counter() - start)


def auditor_pipeline_cost(
    probe_params: int, probe_epochs: int, model_params: int, model_epochs: int, wall_seconds: float = 0.0
) -> CostReport:
    """Cost of one probe fit followed by one MLP fit on the pruned data."""
    return CostReport(
        "auditor",
        probe_epochs + model_epochs,
        probe_params + model_params,
        wall_seconds,
        probe_params * probe_epochs + model_params * model_epochs,
        (probe_epochs, model_epochs),
    )


def jtt_training_set(train: DatasetMatrix, error_rows: np.ndarray, upweight_factor: int) -> DatasetMatrix:
    """Append ``upweight_factor - 1`` extra copies of each error row."""
    error_rows = np.asarray(error_rows, dtype=np.int64)
    if upweight_factor == 1 or error_rows.size == 0:
        return train
    extra = np.tile(error_rows, upweight_factor - 1)
    return train.take(np.concatenate([np.arange(train.n_rows), extra]))


def run_jtt(
    train: DatasetMatrix, test: DatasetMatrix, width: int, jtt: JttConfig, cfg: TrainConfig
) -> tuple[MlpModel, CostReport]:
    """Just-Train-Twice: ERM, then retrain with the ERM errors upweighted.

    Both phases use ``cfg.seed``; phase 2 starts from a fresh initialization.
    """
    if train.feature_names != test.feature_names:
        raise DataError("train and test feature names differ")
    start = time.perf_counter()
    erm = train_mlp(train, width, cfg.replace(epochs=jtt.phase1_epochs))
    errors = np.flatnonzero(predict_labels(erm, train.features) != train.targets)
    log.info("JTT phase 1: %d of %d training rows misclassified", errors.size, train.n_rows)

    upweighted = jtt_training_set(train, errors, jtt.upweight_factor)
    model = train_mlp(upweighted, width, cfg.replace(epochs=jtt.phase2_epochs))
    log.info("JTT phase 2 test accuracy %.4f", accuracy(model, test))

    params = erm.n_parameters
    cost = CostReport(
        "JTT",
        jtt.phase1_epochs + jtt.phase2_epochs,
        2 * params,
        time.perf_counter() - start,
        params * (jtt.phase1_epochs + jtt.phase2_epochs),
        (jtt.phase1_epochs, jtt.phase2_epochs),
    )
    return model, cost


def cost_compare(reports: Sequence[CostReport], reference: str = "ERM") -> list[dict]:
    """Costs relative to the reference method, cheapest parameter-epochs first."""
    if len(reports) < 2:
        raise ValueError("cost_compare needs at least two reports")
    ref = next((r for r in reports if r.method.lower() == reference.lower()), None)
    if ref is None:
        raise ValueError(f"no {reference!r} entry to normalize against")

    def ratio(a: float, b: float) -> float:
        return a / b if b else float("inf")

    rows = [
        {
            "method": r.method,
            "relative_epochs": ratio(r.epochs_total, ref.epochs_total),
            "relative_parameters": ratio(r.trained_parameters_total, ref.trained_parameters_total),
            "relative_parameter_epochs": ratio(r.parameter_epochs, ref.parameter_epochs),
        }
        for r in reports
    ]
    rows.sort(key=lambda row: (row["relative_parameter_epochs"], row["method"]))
    return rows
