"""Command-line surface tying the pipeline together.

Subcommands:
    synth            generate a synthetic embedding file
    fit              fit a model from an embedding file
    eval             score a model against an embedding file
    run-protocol     full incremental run with a task stream and report
    baseline-linear  sampled-feature linear classifier comparison
    diag             singular-value profiles and model storage report

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from fecam import baseline, classifier as clf, harness, model_io, runconfig
from fecam.embeddings import read_embeddings, write_embeddings, write_embeddings_csv
from fecam.errors import FecamError
from fecam.harness import CovSpec, SynthSpec


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model configuration")
    group.add_argument("--config", help="key=value config file")
    group.add_argument("--mode", choices=[m.value for m in clf.Mode])
    group.add_argument("--gamma1", type=float)
    group.add_argument("--gamma2", type=float)
    group.add_argument("--tukey-lambda", type=float, dest="tukey_lambda")
    group.add_argument(
        "--tukey-enabled", choices=["true", "false"], dest="tukey_enabled"
    )
    group.add_argument(
        "--tukey-negative-policy",
        choices=["error", "bypass"],
        dest="tukey_negative_policy",
    )
    group.add_argument(
        "--transform-order",
        choices=["transform-mean", "mean-of-transformed"],
        dest="transform_order",
    )
    group.add_argument("--unbiased", action="store_true", default=None)
    group.add_argument("--logdet-correction", action="store_true", default=None)


_FLAG_KEYS = {
    "mode": "mode",
    "gamma1": "gamma1",
    "gamma2": "gamma2",
    "tukey_lambda": "tukey.lambda",
    "tukey_enabled": "tukey.enabled",
    "tukey_negative_policy": "tukey.negative_policy",
    "transform_order": "prototype.transform_order",
    "unbiased": "covariance.unbiased",
    "logdet_correction": "scoring.logdet_correction",
    "kind": "protocol.kind",
    "initial_classes": "protocol.initial_classes",
    "tasks": "protocol.tasks",
    "classes_per_task": "protocol.classes_per_task",
    "shots": "protocol.shots",
    "domain_order": "protocol.domain_order",
    "seed": "seed",
}


def _collect_values(args: argparse.Namespace) -> dict[str, str]:
    file_values = (
        runconfig.parse_config_file(args.config)
        if getattr(args, "config", None)
        else None
    )
    overrides: dict[str, str] = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is None:
            continue
        overrides[key] = str(value).lower() if isinstance(value, bool) else str(value)
    return runconfig.effective_config(file_values, overrides)


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.aniso_after is not None:
        covs = tuple(
            CovSpec("isotropic", args.scale)
            if k < args.aniso_after
            else CovSpec("anisotropic", args.scale, args.anisotropy)
            for k in range(args.classes)
        )
        cov = covs
    else:
        cov = CovSpec(args.cov.replace("-", "_"), args.scale, args.anisotropy)
    spec = SynthSpec(
        classes=args.classes,
        dim=args.dim,
        rows_per_class=args.rows_per_class,
        mean_spread=args.mean_spread,
        cov=cov,
        seed=args.seed,
    )
    features, labels, _ = harness.synth_generate(spec)
    if args.shift is not None:
        features = features + args.shift
    if args.csv:
        write_embeddings_csv(args.out, features, labels)
    else:
        write_embeddings(args.out, features, labels)
    print(f"wrote {features.shape[0]} rows dim {features.shape[1]} to {args.out}")
    return 0


def _fit_model(values: dict[str, str], train_path: str) -> clf.FeCAMModel:
    features, labels, _ = read_embeddings(train_path)
    config = runconfig.to_fecam_config(values)
    model = clf.FeCAMModel.initial(config)
    return clf.fit_task(model, features, labels)


def _cmd_fit(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    model = _fit_model(values, args.input)
    model_io.save_model(model, args.out)
    report = clf.model_storage_report(model)
    print(f"classes={model.n_classes}")
    print(f"dim={model.dim}")
    print(f"storage.total_bytes={report.total_bytes}")
    print(f"model={args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    config = runconfig.to_fecam_config(values)
    model = model_io.load_model(args.model, config)
    features, labels, _ = read_embeddings(args.input)
    pred = clf.predict_labels(model, features, euclidean=args.euclidean)
    accuracy = float(np.mean(pred == labels))
    print(f"rows={labels.size}")
    print(f"accuracy={accuracy:.6f}")
    return 0


def _cmd_run_protocol(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    model_config = runconfig.to_fecam_config(values)
    protocol_config = runconfig.to_protocol_config(values)
    x_train, y_train, d_train = read_embeddings(args.train)
    x_test, y_test, _ = read_embeddings(args.test)
    stream = harness.build_splits(y_train, protocol_config, domains=d_train)
    report, model = harness.run_protocol(
        stream, x_train, y_train, x_test, y_test, model_config,
        config_echo=values,
    )
    print(report.to_text())
    if args.csv:
        Path(args.csv).write_text(report.to_csv() + "\n")
    if args.save_model:
        model_io.save_model(model, args.save_model)
    return 0


def _cmd_baseline_linear(args: argparse.Namespace) -> int:
    values = _collect_values(args)
    values["mode"] = "per_class"
    model = _fit_model(values, args.train)
    x_test, y_test, _ = read_embeddings(args.test)

    samples, sample_labels = baseline.sample_from_gaussians(
        model, args.samples_per_class, args.seed
    )
    linear = baseline.train_linear(
        samples, sample_labels, epochs=args.epochs,
        learning_rate=args.lr, seed=args.seed,
    )
    x_scored = x_test
    if model.transform_active:
        from fecam.transform import tukey

        x_scored = tukey(x_test, model.config.tukey)
    linear_acc = float(np.mean(baseline.predict_linear(linear, x_scored) == y_test))
    fecam_acc = float(np.mean(clf.predict_labels(model, x_test) == y_test))
    print(f"samples_per_class={args.samples_per_class}")
    print(f"linear.accuracy={linear_acc:.6f}")
    print(f"fecam.accuracy={fecam_acc:.6f}")
    return 0


def _cmd_diag(args: argparse.Namespace) -> int:
    emitted = False
    if args.input:
        features, labels, _ = read_embeddings(args.input)
        for spectrum in harness.singular_value_profile(features, labels):
            top = ",".join(f"{v:.4f}" for v in spectrum.singular_values[: args.top])
            print(f"class{spectrum.class_id}.singular_values={top}")
            print(
                f"class{spectrum.class_id}.anisotropy_ratio="
                f"{spectrum.anisotropy_ratio:.4f}"
            )
        emitted = True
    if args.model:
        values = _collect_values(args)
        config = runconfig.to_fecam_config(values)
        model = model_io.load_model(args.model, config)
        report = clf.model_storage_report(model)
        print(f"storage.mode={report.mode.value}")
        print(f"storage.dim={report.dim}")
        print(f"storage.classes={report.n_classes}")
        print(f"storage.prototype_bytes={report.prototype_bytes}")
        print(f"storage.covariance_bytes={report.covariance_bytes}")
        print(f"storage.total_bytes={report.total_bytes}")
        emitted = True
    if not emitted:
        print("nothing to diagnose: pass --input and/or --model", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fecam",
        description="Training-free continual-learning classifier over "
        "frozen feature embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding file")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--rows-per-class", type=int, default=500)
    p.add_argument("--mean-spread", type=float, default=8.0)
    p.add_argument(
        "--cov", choices=["isotropic", "anisotropic", "random-spd"],
        default="isotropic",
    )
    p.add_argument("--anisotropy", type=float, default=10.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument(
        "--aniso-after", type=int, default=None,
        help="classes at or past this index use the anisotropic recipe",
    )
    p.add_argument(
        "--shift", type=float, default=None,
        help="add a constant to every feature (e.g. to make them nonnegative)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", action="store_true", help="write CSV instead of binary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit a model from an embedding file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("eval", help="score a model against an embedding file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument(
        "--euclidean", action="store_true",
        help="score with the identity metric instead of the model covariances",
    )
    _add_model_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run-protocol", help="full incremental run")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--kind", choices=[k.value for k in harness.ProtocolKind])
    p.add_argument("--initial-classes", type=int, dest="initial_classes")
    p.add_argument("--tasks", type=int)
    p.add_argument("--classes-per-task", type=int, dest="classes_per_task")
    p.add_argument("--shots", type=int)
    p.add_argument("--domain-order", dest="domain_order",
                   help="comma-separated training domain ids (dil)")
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", help="also write the per-task table to this path")
    p.add_argument("--save-model", dest="save_model", help="save the final model")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_run_protocol)

    p = sub.add_parser(
        "baseline-linear",
        help="compare against a linear classifier trained on sampled features",
    )
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--samples-per-class", type=int, default=100,
                   dest="samples_per_class")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=_cmd_baseline_linear)

    p = sub.add_parser("diag", help="data and model diagnostics")
    p.add_argument("--input", help="embedding file for singular-value profiles")
    p.add_argument("--model", help="model file for the storage report")
    p.add_argument("--top", type=int, default=8, help="singular values to print")
    _add_model_flags(p)
    p.set_defaults(func=_cmd_diag)

    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FecamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
