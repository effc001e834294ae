"""Counterfactual stress tests: mutate held-out rows and count decision flips."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence, Union

import numpy as np

from .dataprep import DatasetMatrix
from .errors import DataError, DimensionError
from .nncore import Model, predict_labels

Selector = Union[np.ndarray, Sequence[bool], Callable[[DatasetMatrix], np.ndarray]]


@dataclass(frozen=True)
class CounterfactualReport:
    scenario: str
    model_label: str
    eligible_rows: int
    flipped: int
    flip_rate: float  # percent
    structurally_immune: bool = False

    def __post_init__(self):
        if self.eligible_rows <= 0:
            raise DataError("a counterfactual report needs at least one eligible row")
        if not 0 <= self.flipped <= self.eligible_rows:
            raise ValueError("flipped must lie in [0, eligible_rows]")

    def row(self) -> dict:
        return {
            "scenario": self.scenario,
            "model": self.model_label,
            "eligible": self.eligible_rows,
            "flipped": self.flipped,
            "flip_rate_pct": self.flip_rate,
        }


def _mask(data: DatasetMatrix, selector: Selector) -> np.ndarray:
    mask = selector(data) if callable(selector) else selector
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (data.n_rows,):
        raise DimensionError(f"selector has shape {mask.shape}, expected ({data.n_rows},)")
    if not mask.any():
        raise DataError("selector matches no rows")
    return mask


def inject_numeric(data: DatasetMatrix, feature: str, raw_value: float, selector: Selector) -> DatasetMatrix:
    """Overwrite a numeric feature on selected rows with ``raw_value``.

    The value is standardized with the matrix's stored statistics. A column
    that was encoded but later pruned leaves the matrix unchanged.
    """
    mask = _mask(data, selector)
    if feature not in data.standardization:
        if feature in data.feature_names:
            raise DataError(f"feature {feature!r} is not numeric")
        raise KeyError(f"unknown feature {feature!r}")
    if feature not in data.feature_names:
        return data
    mean, std = data.standardization[feature]
    X = data.features.copy()
    X[mask, data.index(feature)] = (raw_value - mean) / std
    return data.with_features(X)


def override_category(data: DatasetMatrix, group: str, category: str, selector: Selector) -> DatasetMatrix:
    """Set ``group=category`` to 1 and its surviving siblings to 0 on selected rows."""
    mask = _mask(data, selector)
    target = f"{group}={category}"
    if target not in data.feature_names:
        raise KeyError(f"category column {target!r} is not in the matrix")
    prefix = f"{group}="
    siblings = [j for j, n in enumerate(data.feature_names) if n.startswith(prefix) and n != target]
    X = data.features.copy()
    X[mask, data.index(target)] = 1.0
    for j in siblings:
        X[mask, j] = 0.0
    return data.with_features(X)


def flip_rate(
    model: Model,
    original: DatasetMatrix,
    modified: DatasetMatrix,
    threshold: float = 0.5,
    scenario: str = "",
    model_label: str = "",
) -> CounterfactualReport:
    """Share of changed rows whose hard decision changes."""
    if original.features.shape != modified.features.shape:
        raise DimensionError(
            f"original shape {original.features.shape} != modified shape {modified.features.shape}"
        )
    changed = np.any(original.features != modified.features, axis=1)
    eligible = int(changed.sum())
    if eligible == 0:
        raise DataError("no rows differ between original and modified data")
    before = predict_labels(model, original.features[changed], threshold)
    after = predict_labels(model, modified.features[changed], threshold)
    flipped = int(np.sum(before != after))
    return CounterfactualReport(scenario, model_label, eligible, flipped, 100.0 * flipped / eligible)


# -- scenario suite -------------------------------------------------------------


@dataclass(frozen=True)
class StressScenario:
    """One counterfactual intervention.

    ``kind="inject"`` writes ``raw_value`` into numeric ``feature``;
    ``kind="override"`` switches categorical ``feature`` to ``category``.
    Selector kinds: ``low_income`` (true label 0 and model predicts 0),
    ``not_category`` (rows whose ``feature=category`` indicator is 0), ``all``.
    """

    name: str
    kind: Literal["inject", "override"]
    feature: str
    raw_value: float = 0.0
    category: str = ""
    selector: Literal["low_income", "not_category", "all"] = "all"


DEFAULT_SCENARIOS = (
    StressScenario("capital_gain_injection", "inject", "capital-gain", raw_value=99999.0, selector="low_income"),
    StressScenario("husband_override", "override", "relationship", category="Husband", selector="not_category"),
)


def scenario_mask(scenario: StressScenario, model: Model, data: DatasetMatrix, threshold: float = 0.5) -> np.ndarray:
    if scenario.selector == "all":
        return np.ones(data.n_rows, dtype=bool)
    if scenario.selector == "low_income":
        preds = predict_labels(model, data.features, threshold)
        return (data.targets == 0) & (preds == 0)
    if scenario.selector == "not_category":
        return data.column(f"{scenario.feature}={scenario.category}") == 0
    raise ValueError(f"unknown selector {scenario.selector!r}")


def run_scenario(
    scenario: StressScenario, model: Model, data: DatasetMatrix, model_label: str, threshold: float = 0.5
) -> CounterfactualReport:
    mask = scenario_mask(scenario, model, data, threshold)
    if scenario.kind == "inject":
        modified = inject_numeric(data, scenario.feature, scenario.raw_value, mask)
        if scenario.feature not in data.feature_names:
            # The model cannot see the column, so no decision can move.
            return CounterfactualReport(scenario.name, model_label, int(mask.sum()), 0, 0.0, True)
    elif scenario.kind == "override":
        modified = override_category(data, scenario.feature, scenario.category, mask)
    else:
        raise ValueError(f"unknown scenario kind {scenario.kind!r}")
    return flip_rate(model, data, modified, threshold, scenario.name, model_label)


def stress_suite(
    baseline_model: Model,
    robust_model: Model,
    baseline_test: DatasetMatrix,
    robust_test: DatasetMatrix,
    scenarios: Sequence[StressScenario] = DEFAULT_SCENARIOS,
    threshold: float = 0.5,
) -> list[CounterfactualReport]:
    """Run every scenario against both models, ordered by (scenario, model)."""
    reports = []
    for scenario in scenarios:
        reports.append(run_scenario(scenario, baseline_model, baseline_test, "baseline", threshold))
        reports.append(run_scenario(scenario, robust_model, robust_test, "robust", threshold))
    return sorted(reports, key=lambda r: (r.scenario, r.model_label))
