"""Experiment driver: config parsing, seed-averaged rounds, report emission.

One experiment ingests a dataset, splits it once with the master seed, then
runs R rounds. Round i derives seed_i = seed + i, builds that round's
selection plans, fits any PCA on the training side only, trains the chosen
pipeline, and evaluates on the held-out side. Scalar metrics are averaged
across rounds; confusion matrices are only emitted per round because each
round may use a different selection plan.

Trained stage models are cached under out_dir/cache keyed by a hash of the
input files and every config field that influences the round, so re-running
an unchanged experiment reuses them without changing any result.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cascade import evaluate_cascade, load_cascade, save_cascade, train_cascade
from .dataset import (
    AlignedDataset,
    LabelMap,
    align,
    drop_small_classes,
    load_flow_csv,
    load_host_tensors,
    split_stratified,
)
from .errors import ConfigInvalidError
from .fusion import FusionMode, HybridMatrix, fuse
from .gbdt import GbdtParams, load_gbdt, predict, save_gbdt, train
from .metrics import EvaluationReport, build_report, render_text
from .reduction import apply_pca, fit_pca, make_selection_plan

PIPELINES = ("flat", "cascade")


def _params_from_dict(base: GbdtParams, overrides: dict | None) -> GbdtParams:
    if not overrides:
        return base
    known = {f.name for f in dataclasses.fields(GbdtParams)}
    bad = set(overrides) - known
    if bad:
        raise ConfigInvalidError(f"unknown classifier parameter(s): {sorted(bad)}")
    try:
        return dataclasses.replace(base, **overrides)
    except ValueError as exc:
        raise ConfigInvalidError(str(exc)) from exc


@dataclass(frozen=True)
class ExperimentConfig:
    flow_csv: Path
    host_tensors: Path
    label_map: Path
    out_dir: Path
    mode: FusionMode = FusionMode.FLOW_EVENT_MESSAGE
    pipeline: str = "cascade"
    event_target: tuple[int, int] | None = None
    message_target: tuple[int, int] | None = None
    pca_k: int | None = None
    classifier: GbdtParams = GbdtParams()
    stage1: GbdtParams | None = None     # cascade ml1 override; defaults to classifier
    stage2: GbdtParams | None = None
    rounds: int = 1
    seed: int = 0
    test_fraction: float = 0.33
    label_column: str = "Label"
    id_column: str | None = "id"
    min_class_size: int | None = None
    cache: bool = True

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigInvalidError(f"pipeline must be one of {PIPELINES}")
        if self.rounds < 1:
            raise ConfigInvalidError("rounds must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigInvalidError("test_fraction must be in (0,1)")
        if self.pca_k is not None and self.pca_k < 1:
            raise ConfigInvalidError("pca_k must be >= 1 when present")
        for what, target in (("event", self.event_target), ("message", self.message_target)):
            if target is not None and (len(target) != 2 or min(target) < 1):
                raise ConfigInvalidError(f"{what}_target must be two counts >= 1")

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        """Load a config file; relative paths resolve against its directory."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigInvalidError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigInvalidError(f"config is not valid JSON: {exc}") from exc
        if overrides:
            raw.update(overrides)
        base = path.parent

        def resolve(key, required=True):
            if key not in raw or raw[key] is None:
                if required:
                    raise ConfigInvalidError(f"config field {key!r} is required")
                return None
            return (base / raw[key]).resolve() if not Path(raw[key]).is_absolute() else Path(raw[key])

        try:
            mode = FusionMode.parse(raw.get("mode", "h3"))
        except ValueError as exc:
            raise ConfigInvalidError(str(exc)) from exc
        classifier = _params_from_dict(GbdtParams(), raw.get("classifier"))
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigInvalidError(f"unknown config field(s): {sorted(extra)}")

        def pair(key):
            v = raw.get(key)
            return tuple(int(x) for x in v) if v is not None else None

        return cls(
            flow_csv=resolve("flow_csv"),
            host_tensors=resolve("host_tensors"),
            label_map=resolve("label_map"),
            out_dir=resolve("out_dir"),
            mode=mode,
            pipeline=raw.get("pipeline", "cascade"),
            event_target=pair("event_target"),
            message_target=pair("message_target"),
            pca_k=raw.get("pca_k"),
            classifier=classifier,
            stage1=_params_from_dict(classifier, raw["stage1"]) if raw.get("stage1") else None,
            stage2=_params_from_dict(classifier, raw["stage2"]) if raw.get("stage2") else None,
            rounds=int(raw.get("rounds", 1)),
            seed=int(raw.get("seed", 0)),
            test_fraction=float(raw.get("test_fraction", 0.33)),
            label_column=raw.get("label_column", "Label"),
            id_column=raw.get("id_column", "id"),
            min_class_size=raw.get("min_class_size"),
            cache=bool(raw.get("cache", True)),
        )

    def descriptor(self) -> dict:
        """Everything that influences results, for cache keys and provenance."""
        d = {
            "mode": self.mode.value,
            "pipeline": self.pipeline,
            "event_target": self.event_target,
            "message_target": self.message_target,
            "pca_k": self.pca_k,
            "classifier": dataclasses.asdict(self.classifier),
            "stage1": dataclasses.asdict(self.stage1) if self.stage1 else None,
            "stage2": dataclasses.asdict(self.stage2) if self.stage2 else None,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "label_column": self.label_column,
            "id_column": self.id_column,
            "min_class_size": self.min_class_size,
        }
        d["classifier"].pop("workers", None)    # worker count never affects results
        for stage in ("stage1", "stage2"):
            if d[stage]:
                d[stage].pop("workers", None)
        return d


@dataclass
class RoundResult:
    seed: int
    report: EvaluationReport
    cache_hit: bool


@dataclass
class ExperimentResult:
    rounds: list[RoundResult]
    mean_scalars: dict
    out_dir: Path

    @property
    def mean_macro_f1(self) -> float:
        return self.mean_scalars["macro_f1"]


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(config: ExperimentConfig) -> AlignedDataset:
    flow = load_flow_csv(config.flow_csv, config.label_column, config.id_column)
    host = load_host_tensors(config.host_tensors)
    label_map = LabelMap.load(config.label_map)
    ds = align(flow, host, label_map)
    if config.min_class_size is not None:
        ds = drop_small_classes(ds, config.min_class_size)
    return ds


def _fuse_round(config: ExperimentConfig, ds_train, ds_test, round_seed: int):
    f, m, n, p, q = ds_train.dims
    event_plan = message_plan = None
    if config.mode.uses_event and config.event_target is not None:
        event_plan = make_selection_plan((m, n), config.event_target, round_seed)
    if config.mode.uses_message and config.message_target is not None:
        message_plan = make_selection_plan((p, q), config.message_target, round_seed)
    fused_train = fuse(ds_train, config.mode, event_plan, message_plan)
    fused_test = fuse(ds_test, config.mode, event_plan, message_plan)
    if config.pca_k is not None:
        pca = fit_pca(fused_train.values, config.pca_k)
        fused_train = HybridMatrix(
            apply_pca(pca, fused_train.values), fused_train.labels, config.mode,
            fused_train.provenance, fused_train.label_map, pca_applied=True,
        )
        fused_test = HybridMatrix(
            apply_pca(pca, fused_test.values), fused_test.labels, config.mode,
            fused_test.provenance, fused_test.label_map, pca_applied=True,
        )
    return fused_train, fused_test


def _train_round(config: ExperimentConfig, fused_train: HybridMatrix, round_seed: int,
                 cache_key: str | None):
    """Train (or load from cache) this round's model; returns (model, hit)."""
    suffix = ".cas1" if config.pipeline == "cascade" else ".gbt1"
    cache_path = None
    if cache_key is not None:
        cache_path = config.out_dir / "cache" / (cache_key + suffix)
        if cache_path.exists():
            loader = load_cascade if config.pipeline == "cascade" else load_gbdt
            return loader(cache_path), True

    if config.pipeline == "cascade":
        p1 = dataclasses.replace(config.stage1 or config.classifier, seed=round_seed)
        p2 = dataclasses.replace(config.stage2 or config.classifier, seed=round_seed)
        model = train_cascade(fused_train, p1, p2)
    else:
        params = dataclasses.replace(config.classifier, seed=round_seed)
        model = train(fused_train.values, fused_train.labels, fused_train.label_map.k, params)

    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        (save_cascade if config.pipeline == "cascade" else save_gbdt)(model, cache_path)
    return model, False


def _evaluate(config: ExperimentConfig, model, fused_test: HybridMatrix) -> EvaluationReport:
    if config.pipeline == "cascade":
        return evaluate_cascade(model, fused_test)
    labels, _ = predict(model, fused_test.values)
    return build_report(
        fused_test.labels, labels, fused_test.label_map.k, fused_test.label_map.class_names
    )


_SCALARS = ("accuracy", "macro_f1", "weighted_f1")


def _mean_scalars(reports: list[EvaluationReport]) -> dict:
    out = {key: float(np.mean([getattr(r, key) for r in reports])) for key in _SCALARS}
    names = reports[0].class_names
    out["per_class_f1"] = {
        name: float(np.mean([r.f1[i] for r in reports])) for i, name in enumerate(names)
    }
    out["per_class_precision"] = {
        name: float(np.mean([r.precision[i] for r in reports])) for i, name in enumerate(names)
    }
    out["per_class_recall"] = {
        name: float(np.mean([r.recall[i] for r in reports])) for i, name in enumerate(names)
    }
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute all rounds and write per-round plus mean reports under out_dir."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(config)
    ds_train, ds_test = split_stratified(ds, config.test_fraction, config.seed)

    base_key = None
    if config.cache:
        base_key = json.dumps(
            {
                "inputs": [
                    _file_sha256(config.flow_csv),
                    _file_sha256(config.host_tensors),
                    _file_sha256(config.label_map),
                ],
                "config": config.descriptor(),
            },
            sort_keys=True,
        )

    results: list[RoundResult] = []
    for i in range(config.rounds):
        round_seed = config.seed + i
        fused_train, fused_test = _fuse_round(config, ds_train, ds_test, round_seed)
        cache_key = None
        if base_key is not None:
            cache_key = hashlib.sha256(f"{base_key}|round={i}".encode()).hexdigest()[:32]
        model, hit = _train_round(config, fused_train, round_seed, cache_key)
        report = _evaluate(config, model, fused_test)
        results.append(RoundResult(round_seed, report, hit))

        prefix = config.out_dir / f"round_{i}"
        prefix.with_suffix(".report.json").write_text(report.to_json(), encoding="utf-8")
        prefix.with_suffix(".report.txt").write_text(render_text(report), encoding="utf-8")
        prefix.with_suffix(".confusion.csv").write_text(report.confusion.to_csv(), encoding="utf-8")

    mean = _mean_scalars([r.report for r in results])
    summary = {
        "rounds": config.rounds,
        "seed": config.seed,
        "pipeline": config.pipeline,
        "mode": config.mode.value,
        "mean": mean,
        "per_round": [
            {"seed": r.seed, "macro_f1": r.report.macro_f1,
             "weighted_f1": r.report.weighted_f1, "accuracy": r.report.accuracy}
            for r in results
        ],
    }
    (config.out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return ExperimentResult(results, mean, config.out_dir)
