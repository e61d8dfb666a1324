"""Command-line pipeline driver.

Stages compose through serialized containers so every intermediate is
auditable: synth -> (csv/hft1/json), ingest -> .ald1, fuse -> .hfm1,
reduce -> .pca1/.hfm1, train/cascade -> .gbt1/.cas1, eval -> report files.
`run` executes a whole seed-averaged experiment from a JSON config.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .cascade import load_cascade, save_cascade, train_cascade
from .dataset import (
    LabelMap,
    align,
    drop_small_classes,
    load_aligned,
    load_flow_csv,
    load_host_tensors,
    save_aligned,
    split_stratified,
)
from .errors import ConfigError, ConfigInvalidError, DataError, NumericError
from .experiment import ExperimentConfig, run_experiment
from .fusion import FusionMode, HybridMatrix, fuse, load_hybrid, save_hybrid
from .gbdt import GbdtParams, dump_text, load_gbdt, predict, save_gbdt, train
from .metrics import build_report, render_csv, render_text
from .metrics import EvaluationReport
from .reduction import apply_pca, fit_pca, load_pca, make_selection_plan, save_pca
from .synth import SynthSpec, imbalanced_benchmark, write_synthetic


def _pair(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return (int(r), int(c))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None


def _add_classifier_args(sub: argparse.ArgumentParser) -> None:
    defaults = GbdtParams()
    sub.add_argument("--boost-rounds", type=int, default=defaults.rounds)
    sub.add_argument("--max-depth", type=int, default=defaults.max_depth)
    sub.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    sub.add_argument("--min-child-weight", type=float, default=defaults.min_child_weight)
    sub.add_argument("--l2-lambda", type=float, default=defaults.l2_lambda)
    sub.add_argument("--subsample", type=float, default=defaults.subsample)
    sub.add_argument("--seed", type=int, default=defaults.seed)
    sub.add_argument("--workers", type=int, default=defaults.workers)


def _params_from_args(args) -> GbdtParams:
    try:
        return GbdtParams(
            rounds=args.boost_rounds,
            max_depth=args.max_depth,
            learning_rate=args.learning_rate,
            min_child_weight=args.min_child_weight,
            l2_lambda=args.l2_lambda,
            subsample=args.subsample,
            seed=args.seed,
            workers=args.workers,
        )
    except ValueError as exc:
        raise ConfigInvalidError(str(exc)) from exc


def _cmd_synth(args) -> int:
    if args.spec:
        spec = SynthSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
    else:
        spec = imbalanced_benchmark(seed=args.seed or 0, scale=args.scale)
    paths = write_synthetic(spec, args.out)
    for key, path in paths.items():
        print(f"{key}: {path}")
    return 0


def _cmd_ingest(args) -> int:
    flow = load_flow_csv(args.flow, args.label_column, args.id_column)
    host = load_host_tensors(args.host)
    label_map = LabelMap.load(args.labels)
    ds = align(flow, host, label_map)
    if args.min_class_size is not None:
        ds = drop_small_classes(ds, args.min_class_size)
    if args.split is not None:
        train_ds, test_ds = split_stratified(ds, args.split, args.seed)
        save_aligned(train_ds, args.train_out)
        save_aligned(test_ds, args.test_out)
        print(f"train: {train_ds.n} rows -> {args.train_out}")
        print(f"test:  {test_ds.n} rows -> {args.test_out}")
    else:
        save_aligned(ds, args.out)
        print(f"aligned: {ds.n} rows -> {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    ds = load_aligned(args.data)
    mode = FusionMode.parse(args.mode)
    f, m, n, p, q = ds.dims
    event_plan = message_plan = None
    if mode.uses_event and args.event_target:
        event_plan = make_selection_plan((m, n), args.event_target, args.seed)
    if mode.uses_message and args.message_target:
        message_plan = make_selection_plan((p, q), args.message_target, args.seed)
    hm = fuse(ds, mode, event_plan, message_plan)
    save_hybrid(hm, args.out)
    print(f"fused: {hm.n} x {hm.width} ({mode.value}) -> {args.out}")
    return 0


def _cmd_reduce(args) -> int:
    hm = load_hybrid(args.data)
    if args.fit:
        model = fit_pca(hm.values, args.k)
        save_pca(model, args.model)
        print(f"pca: d={model.input_dim} k={model.k} -> {args.model}")
    if args.out:
        model = load_pca(args.model)
        reduced = HybridMatrix(
            apply_pca(model, hm.values), hm.labels, hm.mode,
            hm.provenance, hm.label_map, pca_applied=True,
        )
        save_hybrid(reduced, args.out)
        print(f"reduced: {reduced.n} x {reduced.width} -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    hm = load_hybrid(args.data)
    model = train(hm.values, hm.labels, hm.label_map.k, _params_from_args(args))
    save_gbdt(model, args.out)
    print(f"model: {len(model.trees)} trees -> {args.out}")
    return 0


def _cmd_cascade(args) -> int:
    hm = load_hybrid(args.data)
    params = _params_from_args(args)
    model = train_cascade(hm, params, params)
    save_cascade(model, args.out)
    print(f"cascade: ml1 {len(model.ml1.trees)} trees, ml2 {len(model.ml2.trees)} trees -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    hm = load_hybrid(args.data)
    with open(args.model, "rb") as fh:
        magic = fh.read(4)
    if magic == b"CAS1":
        from .cascade import evaluate_cascade
        report = evaluate_cascade(load_cascade(args.model), hm)
    else:
        labels, _ = predict(load_gbdt(args.model), hm.values)
        report = build_report(hm.labels, labels, hm.label_map.k, hm.label_map.class_names)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".report.json").write_text(report.to_json(), encoding="utf-8")
    prefix.with_suffix(".report.txt").write_text(render_text(report), encoding="utf-8")
    prefix.with_suffix(".confusion.csv").write_text(report.confusion.to_csv(), encoding="utf-8")
    print(render_text(report), end="")
    return 0


def _cmd_report(args) -> int:
    report = EvaluationReport.from_json(Path(args.report).read_text(encoding="utf-8"))
    rendered = render_csv(report) if args.format == "csv" else render_text(report)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        print(rendered, end="")
    return 0


def _cmd_dump_model(args) -> int:
    print(dump_text(load_gbdt(args.model)), end="")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.no_cache:
        overrides["cache"] = False
    config = ExperimentConfig.from_json(args.config, overrides)
    result = run_experiment(config)
    print(json.dumps(result.mean_scalars, indent=2, sort_keys=True))
    print(f"reports in {result.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusionids", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--spec", help="JSON synthetic spec file")
    s.add_argument("--scale", type=float, default=1.0, help="preset size multiplier")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("ingest", help="align flow CSV with host tensors")
    s.add_argument("--flow", required=True)
    s.add_argument("--host", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--label-column", default="Label")
    s.add_argument("--id-column", default="id")
    s.add_argument("--min-class-size", type=int, default=None)
    s.add_argument("--split", type=float, default=None, help="test fraction; writes train/test files")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="aligned.ald1")
    s.add_argument("--train-out", default="train.ald1")
    s.add_argument("--test-out", default="test.ald1")
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("fuse", help="fuse aligned data into a hybrid matrix")
    s.add_argument("--data", required=True)
    s.add_argument("--mode", default="h3")
    s.add_argument("--event-target", type=_pair, default=None, metavar="RxC")
    s.add_argument("--message-target", type=_pair, default=None, metavar="RxC")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_fuse)

    s = sub.add_parser("reduce", help="fit or apply PCA on a fused matrix")
    s.add_argument("--data", required=True)
    s.add_argument("--fit", action="store_true")
    s.add_argument("-k", type=int, default=10)
    s.add_argument("--model", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_reduce)

    s = sub.add_parser("train", help="train the flat multiclass model")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    _add_classifier_args(s)
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("cascade", help="train the two-stage model")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    _add_classifier_args(s)
    s.set_defaults(func=_cmd_cascade)

    s = sub.add_parser("eval", help="evaluate a model on a fused matrix")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("report", help="render a serialized report")
    s.add_argument("--report", required=True)
    s.add_argument("--format", choices=("text", "csv"), default="text")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_report)

    s = sub.add_parser("dump-model", help="human-readable model dump")
    s.add_argument("--model", required=True)
    s.set_defaults(func=_cmd_dump_model)

    s = sub.add_parser("run", help="run a configured experiment")
    s.add_argument("--config", "-c", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--rounds", type=int, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--no-cache", action="store_true")
    s.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
