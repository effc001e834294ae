"""UCI Adult Census Income layout and the default 9-feature encoding."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .dataprep import (
    ColumnSpec,
    FeatureSchema,
    SplitPair,
    encode_split,
    load_table,
    split_table,
    used_columns,
)


def _cat(name: str, cats: str) -> ColumnSpec:
    return ColumnSpec(name, "categorical", tuple(c.strip() for c in cats.split(",")))


def _num(name: str) -> ColumnSpec:
    return ColumnSpec(name, "numeric")


ADULT_SCHEMA = FeatureSchema(
    columns=(
        _num("age"),
        _cat("workclass", "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, "
                          "State-gov, Without-pay, Never-worked"),
        _num("fnlwgt"),
        _cat("education", "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, "
                          "Assoc-voc, 9th, 7th-8th, 12th, Masters, 1st-4th, 10th, Doctorate, "
                          "5th-6th, Preschool"),
        _num("education-num"),
        _cat("marital-status", "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, "
                               "Married-spouse-absent, Married-AF-spouse"),
        _cat("occupation", "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, "
                           "Prof-specialty, Handlers-cleaners, Machine-op-inspct, Adm-clerical, "
                           "Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, "
                           "Armed-Forces"),
        _cat("relationship", "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried"),
        _cat("race", "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black"),
        _cat("sex", "Female, Male"),
        _num("capital-gain"),
        _num("capital-loss"),
        _num("hours-per-week"),
        _cat("native-country", "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, "
                               "Outlying-US(Guam-USVI-etc), India, Japan, Greece, South, China, "
                               "Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, "
                               "Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, "
                               "Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, "
                               "Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, "
                               "Peru, Hong, Holand-Netherlands"),
    ),
    target_column="income",
    positive_label=">50K",
)

DEFAULT_FEATURES = (
    "age",
    "education-num",
    "hours-per-week",
    "capital-gain",
    "capital-loss",
    "sex=Male",
    "relationship=Husband",
    "marital-status=Never-married",
    "workclass=Private",
)


def load_adult(
    path: str | Path,
    feature_list: Sequence[str] = DEFAULT_FEATURES,
    test_path: str | Path | None = None,
    train_fraction: float = 0.8,
    split_seed: int = 0,
) -> SplitPair:
    """Load and encode Adult.

    With ``test_path`` (e.g. ``adult.test``) the files are used as given;
    otherwise ``path`` is split with ``split_seed``. Either way the test rows
    are standardized with training statistics.
    """
    cols = used_columns(ADULT_SCHEMA, feature_list)
    raw = load_table(path, ADULT_SCHEMA, used_columns=cols)
    if test_path is None:
        train_raw, test_raw = split_table(raw, train_fraction, split_seed)
    else:
        train_raw, test_raw = raw, load_table(test_path, ADULT_SCHEMA, used_columns=cols)
    return encode_split(train_raw, test_raw, ADULT_SCHEMA, feature_list)
