from pathlib import Path

import numpy as np
import pytest

from geoaudit.dataprep import DatasetMatrix

ROOT = Path(__file__).resolve().parents[1]
ADULT_DATA = ROOT / "data" / "adult.data"
ADULT_TEST = ROOT / "data" / "adult.test"


def make_matrix(X, y, names=None) -> DatasetMatrix:
    X = np.asarray(X, dtype=float)
    if names is None:
        names = [f"f{j}" for j in range(X.shape[1])]
    return DatasetMatrix(X, np.asarray(y), tuple(names))


def xor_points(copies: int = 250) -> DatasetMatrix:
    """The four noiseless XOR corners, each replicated ``copies`` times."""
    corners = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
    labels = np.array([0, 1, 1, 0])
    return make_matrix(np.repeat(corners, copies, axis=0), np.repeat(labels, copies), ["x1", "x2"])


@pytest.fixture
def random_small():
    rng = np.random.default_rng(7)
    return make_matrix(rng.normal(size=(16, 5)), rng.integers(0, 2, 16))


@pytest.fixture(scope="session")
def adult_split():
    from geoaudit.adult import load_adult

    return load_adult(ADULT_DATA)


ADULT_CONFIG = ROOT / "configs" / "adult.ini"
STRESS_SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def adult_run(tmp_path_factory):
    """One full pipeline run of the shipped Adult config, with its wall time."""
    import time

    from geoaudit.config import load_config
    from geoaudit.pipeline import execute

    cfg = load_config(ADULT_CONFIG).with_overrides(output_dir=tmp_path_factory.mktemp("adult_run_a"))
    start = time.perf_counter()
    result = execute(cfg)
    return cfg, result, time.perf_counter() - start


@pytest.fixture(scope="session")
def adult_audit(adult_run):
    return adult_run[1].audit


@pytest.fixture(scope="session")
def adult_pruned(adult_run):
    return adult_run[1].pruned


@pytest.fixture(scope="session")
def adult_curves(adult_run):
    return adult_run[1].curves


@pytest.fixture(scope="session")
def adult_final_models(adult_run):
    """(baseline, robust) models at the configured final width for each stress seed."""
    from geoaudit.nncore import train_mlp

    cfg, result, _ = adult_run
    out = {cfg.seed: (result.baseline_model, result.robust_model)}
    for seed in STRESS_SEEDS:
        if seed not in out:
            mlp = cfg.mlp.replace(seed=seed)
            out[seed] = (
                train_mlp(result.data.train, cfg.final_width, mlp),
                train_mlp(result.pruned.train, cfg.final_width, mlp),
            )
    return out


# Criterion number -> "PASS/FAIL ..." line, filled in by test_acceptance.py.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
