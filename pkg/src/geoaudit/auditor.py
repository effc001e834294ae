"""Shortcut auditor: fit a logistic probe and flag dominant input weights.

A feature is flagged when its absolute probe weight exceeds twice the mean
absolute weight. The bias is not part of the mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataprep import DatasetMatrix
from .errors import DimensionError
from .nncore import LinearProbe, TrainConfig, accuracy, train_linear


@dataclass(frozen=True)
class AuditReport:
    feature_names: tuple[str, ...]
    abs_weights: tuple[float, ...]
    bias: float
    tau: float
    flagged: tuple[str, ...]
    probe_train_accuracy: float
    seed: int = 0

    def to_dict(self) -> dict:
        flagged = set(self.flagged)
        return {
            "features": [
                {"name": name, "abs_weight": w, "flagged": name in flagged}
                for name, w in zip(self.feature_names, self.abs_weights)
            ],
            "tau": self.tau,
            "bias": self.bias,
            "probe_train_accuracy": self.probe_train_accuracy,
            "seed": self.seed,
        }

    def is_consistent(self) -> bool:
        """Re-derive tau and the flagged list from the stored weights."""
        tau = prune_threshold(self.abs_weights)
        return tau == self.tau and tuple(flag_shortcuts(self.abs_weights, self.feature_names, tau)) == self.flagged


def prune_threshold(abs_weights: Sequence[float]) -> float:
    """Twice the mean absolute weight."""
    w = np.abs(np.asarray(abs_weights, dtype=np.float64))
    if w.size == 0:
        raise ValueError("prune_threshold needs at least one weight")
    return float(2.0 * np.mean(w))


def flag_shortcuts(abs_weights: Sequence[float], feature_names: Sequence[str], tau: float) -> list[str]:
    """Names whose weight is strictly above ``tau``, largest first.

    Equal magnitudes keep their column order.
    """
    w = np.asarray(abs_weights, dtype=np.float64)
    if w.shape[0] != len(feature_names):
        raise DimensionError(f"{w.shape[0]} weights for {len(feature_names)} feature names")
    hits = [j for j in range(w.shape[0]) if w[j] > tau]
    hits.sort(key=lambda j: (-w[j], j))
    return [feature_names[j] for j in hits]


def report_from_probe(probe: LinearProbe, train: DatasetMatrix, seed: int = 0) -> AuditReport:
    if probe.n_features != train.n_features:
        raise DimensionError(f"probe has {probe.n_features} weights, data has {train.n_features} columns")
    abs_w = np.abs(probe.weights)
    tau = prune_threshold(abs_w)
    return AuditReport(
        feature_names=train.feature_names,
        abs_weights=tuple(float(v) for v in abs_w),
        bias=float(probe.bias),
        tau=tau,
        flagged=tuple(flag_shortcuts(abs_w, train.feature_names, tau)),
        probe_train_accuracy=accuracy(probe, train),
        seed=seed,
    )


def run_audit(train: DatasetMatrix, cfg: TrainConfig) -> AuditReport:
    """Train the unregularized probe on ``train`` and build its report."""
    probe = train_linear(train, cfg.replace(l1_lambda=0.0))
    return report_from_probe(probe, train, cfg.seed)
