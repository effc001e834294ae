"""End-to-end run: ingest, audit, prune, sweep, stress, baselines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .adult import load_adult
from .auditor import AuditReport, run_audit
from .baselines import (
    CostReport,
    ImportanceComparison,
    auditor_pipeline_cost,
    compare_importance,
    cost_compare,
    run_jtt,
    train_l1_probe,
)
from .capacity import CapacityCurve, TransitionResult, detect_transition, sweep_capacity
from .config import ExperimentConfig
from .dataprep import (
    SplitPair,
    drop_features,
    encode_split,
    gen_xor_shortcut,
    load_table,
    split,
    split_table,
    used_columns,
)
from .nncore import MlpModel, accuracy, train_mlp
from .reporting import write_report
from .stresstest import CounterfactualReport, stress_suite

log = logging.getLogger(__name__)

ARTIFACTS = (
    "audit.json", "capacity.csv", "transition.json", "stress.json", "stress.csv",
    "comparison.json", "importance.csv", "manifest.json",
)


class StageError(Exception):
    """Wraps the exception raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config_digest: str
    files: list[str] = field(default_factory=list)
    stages: dict[str, dict] = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "files": sorted(self.files),
            "stages": self.stages,
            "tool_version": self.tool_version,
        }


@dataclass
class PipelineResult:
    manifest: RunManifest
    data: SplitPair | None = None
    pruned: SplitPair | None = None
    audit: AuditReport | None = None
    curves: dict[str, CapacityCurve] = field(default_factory=dict)
    transitions: dict[str, TransitionResult] = field(default_factory=dict)
    baseline_model: MlpModel | None = None
    robust_model: MlpModel | None = None
    stress: list[CounterfactualReport] = field(default_factory=list)
    importance: ImportanceComparison | None = None
    costs: list[CostReport] = field(default_factory=list)


def load_data(cfg: ExperimentConfig) -> SplitPair:
    if cfg.source == "xor":
        data = gen_xor_shortcut(cfg.xor_n, cfg.xor_leak_rate, cfg.xor_noise_std, cfg.split_seed)
        return split(data, cfg.train_fraction, cfg.split_seed)
    if cfg.source == "adult" and cfg.schema is None:
        return load_adult(cfg.path, cfg.feature_list, cfg.test_path, cfg.train_fraction, cfg.split_seed)
    schema = cfg.resolved_schema()
    cols = used_columns(schema, cfg.feature_list)
    raw = load_table(cfg.path, schema, used_columns=cols, has_header=cfg.has_header)
    if raw.dropped:
        log.info("dropped %d rows with missing values", raw.dropped)
    if cfg.test_path:
        test_raw = load_table(cfg.test_path, schema, used_columns=cols, has_header=cfg.has_header)
        return encode_split(raw, test_raw, schema, cfg.feature_list)
    train_raw, test_raw = split_table(raw, cfg.train_fraction, cfg.split_seed)
    return encode_split(train_raw, test_raw, schema, cfg.feature_list)


class _Run:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.result = PipelineResult(RunManifest(cfg.digest()))
        self._final_seconds: dict[str, float] = {}

    def stage(self, name: str, fn):
        start = time.perf_counter()
        try:
            fn()
        except Exception as exc:
            self.result.manifest.stages[name] = {"status": "failed", "seconds": time.perf_counter() - start}
            raise StageError(name, exc) from exc
        self.result.manifest.stages[name] = {"status": "ok", "seconds": time.perf_counter() - start}

    def write(self, report, name: str, fmt: str) -> None:
        write_report(report, self.out / name, fmt)
        self.result.manifest.files.append(name)

    # -- stages --

    def ingest(self):
        r = self.result
        r.data = load_data(self.cfg)
        log.info("ingest: %d train / %d test rows, %d features",
                 r.data.train.n_rows, r.data.test.n_rows, r.data.train.n_features)

    def audit(self):
        r = self.result
        r.audit = run_audit(r.data.train, self.cfg.probe)
        flagged = set(r.audit.flagged)
        r.pruned = SplitPair(drop_features(r.data.train, flagged), drop_features(r.data.test, flagged))
        log.info("audit: tau=%.4f flagged=%s", r.audit.tau, list(r.audit.flagged))

    def sweep(self):
        r, cfg = self.result, self.cfg
        for label, pair in (("baseline", r.data), ("pruned", r.pruned)):
            curve = sweep_capacity(pair.train, pair.test, cfg.widths, cfg.mlp, cfg.seeds_per_point,
                                   cfg.aggregation, label, cfg.n_jobs)
            r.curves[label] = curve
            if len(curve.points) >= 2:
                r.transitions[label] = detect_transition(curve, cfg.delta)
        self.write([c for c in r.curves.values()], "capacity.csv", "csv")
        if r.transitions:
            self.write({k: v for k, v in r.transitions.items()}, "transition.json", "json")

    def _final_models(self):
        r, cfg = self.result, self.cfg
        if r.baseline_model is None:
            start = time.perf_counter()
            r.baseline_model = train_mlp(r.data.train, cfg.final_width, cfg.mlp)
            self._final_seconds["baseline"] = time.perf_counter() - start
            start = time.perf_counter()
            r.robust_model = train_mlp(r.pruned.train, cfg.final_width, cfg.mlp)
            self._final_seconds["robust"] = time.perf_counter() - start

    def stress(self):
        r = self.result
        self._final_models()
        r.stress = stress_suite(r.baseline_model, r.robust_model, r.data.test, r.pruned.test, self.cfg.scenarios)
        doc = {
            "reports": r.stress,
            "pruned_features": list(r.audit.flagged),
            "final_width": self.cfg.final_width,
            "baseline_test_accuracy": accuracy(r.baseline_model, r.data.test),
            "robust_test_accuracy": accuracy(r.robust_model, r.pruned.test),
        }
        self.write(doc, "stress.json", "json")
        self.write(r.stress, "stress.csv", "csv")

    def baselines(self):
        r, cfg = self.result, self.cfg
        doc: dict = {}
        if cfg.l1_enabled:
            l1 = train_l1_probe(r.data.train, cfg.l1_lambda, cfg.probe)
            r.importance = compare_importance(r.audit, l1, r.data.train.feature_names)
            doc["importance"] = r.importance
            doc["l1_lambda"] = cfg.l1_lambda
            self.write(r.importance, "importance.csv", "csv")
        # The unpruned final model is the plain ERM reference.
        self._final_models()
        params, epochs = r.baseline_model.n_parameters, cfg.mlp.epochs
        erm_cost = CostReport("ERM", epochs, params, self._final_seconds["baseline"], params * epochs, (epochs,))
        probe_params = r.data.train.n_features + 1
        costs = [
            erm_cost,
            auditor_pipeline_cost(probe_params, cfg.probe.epochs, r.robust_model.n_parameters, cfg.mlp.epochs,
                                  self._final_seconds.get("robust", 0.0)),
        ]
        if cfg.jtt_enabled:
            jtt_model, jtt_cost = run_jtt(r.data.train, r.data.test, cfg.final_width, cfg.jtt, cfg.mlp)
            costs.append(jtt_cost)
            doc["jtt_test_accuracy"] = accuracy(jtt_model, r.data.test)
        r.costs = costs
        doc["costs"] = costs
        doc["relative_costs"] = cost_compare(costs)
        self.write(doc, "comparison.json", "json")


def execute(cfg: ExperimentConfig) -> PipelineResult:
    """Run the configured stages and write their reports plus ``manifest.json``.

    Stages the config leaves out produce no files, but their upstream
    computations (e.g. the audit that decides what to prune) still run.
    """
    cfg.validate()
    run = _Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    for name in ARTIFACTS:
        stale = run.out / name
        if stale.is_file():
            stale.unlink()

    stages = set(cfg.stages)
    run.stage("ingest", run.ingest)
    run.stage("audit", run.audit)
    if "audit" in stages:
        run.write(run.result.audit, "audit.json", "json")
    for name in ("sweep", "stress", "baselines"):
        if name in stages:
            run.stage(name, getattr(run, name))
        else:
            run.result.manifest.stages[name] = {"status": "skipped", "seconds": 0.0}

    run.result.manifest.files.append("manifest.json")
    write_report(run.result.manifest, run.out / "manifest.json", "json")
    return run.result


def run_pipeline(cfg: ExperimentConfig) -> RunManifest:
    return execute(cfg).manifest
