"""Command line interface: train, eval, export-density, oracle-check.

Options resolve with precedence command line > config file > built-in
defaults.  The config file is flat ``key = value`` text whose keys are
the long option names with dashes turned into underscores.  Every run
writes its fully resolved settings to ``run_manifest.txt`` in the output
directory; two runs with identical manifests produce byte-identical
metric files.

Randomness fans out from per-run master seeds through fixed stream
labels (data, init, shuffle, noise, subsample, oracle, eval), so adding
one consumer never shifts another's draws.

Exit codes: 0 success, 1 numeric or oracle failure, 2 usage, config, or
file errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, data, evaluate, net, oracle, seeds

__all__ = ["main", "build_parser"]

VALID_TASKS = ("confidence", "ood", "noisy")
DEFAULT_LAMBDA1 = {"iedl": 0.05, "edl": 0.0}

# Benchmark geometry: an equilateral triangle of clusters, with the
# out-of-distribution ring threading the interior hole between them,
# where a correctly calibrated model should lose confidence.
BLOB_CENTERS = ((0.0, 0.0), (3.0, 0.0), (1.5, 2.598076211353316))
RING_CENTER = (1.5, 0.8660254037844386)


class CliError(Exception):
    """Usage, config, or input-file problem; maps to exit code 2."""


def _parse_int_list(text, option):
    try:
        return [int(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError:
        raise CliError(f"{option}: expected integers, got {text!r}") from None


def _add_data_options(parser):
    group = parser.add_argument_group("data")
    group.add_argument(
        "--dataset", choices=("synthetic", "idx"), default="synthetic",
        help="synthetic blob/ring benchmark or IDX file pairs",
    )
    group.add_argument("--blobs-per-class", type=int, default=200,
                       help="training points per class (synthetic)")
    group.add_argument("--blob-sigma", type=float, default=0.25,
                       help="cluster standard deviation (synthetic)")
    group.add_argument("--test-per-class", type=int, default=200,
                       help="held-out points per class (synthetic)")
    group.add_argument("--ring-count", type=int, default=600,
                       help="out-of-distribution ring points (synthetic)")
    group.add_argument("--ring-radius", type=float, default=0.8)
    group.add_argument("--ring-sigma", type=float, default=0.1)
    group.add_argument("--classes", type=int, default=10,
                       help="label count for IDX data")
    group.add_argument("--train-subset", type=int, default=0,
                       help="subsample the IDX training set to this size (0 = all)")
    group.add_argument("--idx-train-images", default="")
    group.add_argument("--idx-train-labels", default="")
    group.add_argument("--idx-test-images", default="")
    group.add_argument("--idx-test-labels", default="")
    group.add_argument("--idx-ood-images", default="")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iedl",
        description="Evidential Dirichlet classifier with information-weighted training",
    )
    parser.add_argument("--version", action="version", version=f"iedl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train one model per seed")
    train_p.add_argument("--config", default="", help="flat key = value settings file")
    _add_data_options(train_p)
    train_p.add_argument("--mode", choices=("iedl", "edl"), default="iedl",
                         help="information-weighted or plain squared error")
    train_p.add_argument("--lambda1", type=float, default=None,
                         help="log-determinant coefficient "
                              "(default 0.05 for iedl, 0 for edl)")
    train_p.add_argument("--no-kl", action="store_true",
                         help="drop the annealed divergence term")
    train_p.add_argument("--hidden", default="64,64",
                         help="comma-separated hidden layer sizes")
    train_p.add_argument("--epochs", type=int, default=200)
    train_p.add_argument("--batch-size", type=int, default=64)
    train_p.add_argument("--lr", type=float, default=0.001)
    train_p.add_argument("--patience", type=int, default=10)
    train_p.add_argument("--anneal-epochs", type=int, default=0,
                         help="annealing horizon (0 = epoch budget)")
    train_p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    train_p.add_argument("--val-frac", type=float, default=0.2)
    train_p.add_argument("--seeds", default="0",
                         help="comma-separated master seeds, one model each")
    train_p.add_argument("--out", required=True, help="output directory")

    eval_p = sub.add_parser("eval", help="run evaluation tasks on trained models")
    eval_p.add_argument("--config", default="")
    _add_data_options(eval_p)
    eval_p.add_argument("--model-dir", required=True,
                        help="directory holding model_seed<N>.iedl files")
    eval_p.add_argument("--seeds", default="0")
    eval_p.add_argument("--tasks", default="confidence,ood,noisy",
                        help=f"comma-separated tasks from {VALID_TASKS}")
    eval_p.add_argument("--noise-sigma", type=float, default=0.1)
    eval_p.add_argument("--no-equalize", action="store_true",
                        help="keep unequal in/out sample sizes")
    eval_p.add_argument("--out", default="", help="defaults to --model-dir")

    dens_p = sub.add_parser(
        "export-density",
        help="dump normalized per-sample uncertainty scores for one model",
    )
    dens_p.add_argument("--config", default="")
    _add_data_options(dens_p)
    dens_p.add_argument("--model", required=True, help="checkpoint path")
    dens_p.add_argument("--seed", type=int, default=0)
    dens_p.add_argument("--out", required=True, help="output CSV path")

    oracle_p = sub.add_parser("oracle-check", help="run the numerical self-checks")
    oracle_p.add_argument("--config", default="")
    oracle_p.add_argument("--seed", type=int, default=oracle.DEFAULT_SEED)
    oracle_p.add_argument("--quick", action="store_true",
                          help="smaller Monte Carlo budgets")
    return parser, {"train": train_p, "eval": eval_p,
                    "export-density": dens_p, "oracle-check": oracle_p}


def _read_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(subparser, config):
    """Turn config strings into typed defaults on the subcommand parser."""
    actions = {a.dest: a for a in subparser._actions}
    converted = {}
    for key, raw in config.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            valid = sorted(
                d for d in actions if d not in ("help", "config", "command")
            )
            raise CliError(f"unknown config key {key!r}; valid keys: {', '.join(valid)}")
        if isinstance(action, argparse._StoreTrueAction):
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0"):
                raise CliError(f"config key {key!r}: expected a boolean, got {raw!r}")
            converted[key] = lowered in ("true", "1")
        elif action.type is not None:
            try:
                converted[key] = action.type(raw)
            except ValueError:
                raise CliError(f"config key {key!r}: bad value {raw!r}") from None
        else:
            converted[key] = raw
        if action.choices and converted[key] not in action.choices:
            raise CliError(
                f"config key {key!r}: {converted[key]!r} not in {tuple(action.choices)}"
            )
    subparser.set_defaults(**converted)


def _extract_config_path(argv):
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise CliError("--config needs a path")
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return ""


def _manifest_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_manifest(out_dir, command, args,
                    skip=("config", "command", "out", "model_dir")):
    """Record every result-affecting setting; output locations are omitted
    so reruns into different directories can share a manifest."""
    lines = [f"command={command}"]
    for key in sorted(vars(args)):
        if key in skip:
            continue
        lines.append(f"{key}={_manifest_value(getattr(args, key))}")
    path = Path(out_dir) / "run_manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _require_file(path, option):
    if not path:
        raise CliError(f"{option} is required for IDX data")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{option}: no such file: {path}")
    return p


def _train_val_sets(args, seed):
    """Training and validation sets for one master seed."""
    if args.dataset == "synthetic":
        full = data.make_blobs(
            args.blobs_per_class,
            BLOB_CENTERS,
            args.blob_sigma,
            seeds.make_rng(seed, seeds.DATA),
        )
    else:
        images = _require_file(args.idx_train_images, "--idx-train-images")
        labels = _require_file(args.idx_train_labels, "--idx-train-labels")
        full = data.load_idx_dataset(images, labels, args.classes, name="idx-train")
        if args.train_subset:
            full = data.subsample(
                full, args.train_subset, seeds.make_rng(seed, seeds.SUBSAMPLE)
            )
    spec = data.SplitSpec(1.0 - args.val_frac, args.val_frac, seed=seed)
    return data.split(full, spec)


def _eval_sets(args, seed, need_ood):
    """Held-out labeled set and, when requested, the unlabeled OOD set."""
    if args.dataset == "synthetic":
        test_ds = data.make_blobs(
            args.test_per_class,
            BLOB_CENTERS,
            args.blob_sigma,
            seeds.make_rng(seed, seeds.EVAL, 0),
            name="blobs-test",
        )
        ood_ds = None
        if need_ood:
            ood_ds = data.make_ood_ring(
                args.ring_count,
                args.ring_radius,
                args.ring_sigma,
                seeds.make_rng(seed, seeds.EVAL, 1),
                center=RING_CENTER,
            )
        return test_ds, ood_ds
    images = _require_file(args.idx_test_images, "--idx-test-images")
    labels = _require_file(args.idx_test_labels, "--idx-test-labels")
    test_ds = data.load_idx_dataset(images, labels, args.classes, name="idx-test")
    ood_ds = None
    if need_ood:
        ood_images = _require_file(args.idx_ood_images, "--idx-ood-images")
        pixels = data.parse_idx_images(ood_images.read_bytes())
        features = pixels.reshape(pixels.shape[0], -1)
        ood_ds = data.Dataset(
            features, np.full(features.shape[0], data.OOD_LABEL), 0, "idx-ood"
        )
    return test_ds, ood_ds


def _model_path(model_dir, seed):
    return Path(model_dir) / f"model_seed{seed}.iedl"


def _write_train_log(path, logs):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "epoch,lam_t,train_i_mse,train_log_det,train_kl,train_total,"
            "val_total,train_acc,val_acc\n"
        )
        for entry in logs:
            t = entry.train_loss
            fh.write(
                f"{entry.epoch},{entry.lam_t:.12g},{t.i_mse:.12g},"
                f"{t.log_det:.12g},{t.kl:.12g},{t.total:.12g},"
                f"{entry.val_loss.total:.12g},{entry.train_accuracy:.12g},"
                f"{entry.val_accuracy:.12g}\n"
            )


def _resolved_lambda1(args):
    return DEFAULT_LAMBDA1[args.mode] if args.lambda1 is None else args.lambda1


def cmd_train(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed_list = _parse_int_list(args.seeds, "--seeds")
    if not seed_list:
        raise CliError("--seeds: need at least one seed")
    hidden = _parse_int_list(args.hidden, "--hidden")
    args.lambda1 = _resolved_lambda1(args)
    _write_manifest(out_dir, "train", args)
    for seed in seed_list:
        train_ds, val_ds = _train_val_sets(args, seed)
        sizes = [train_ds.features.shape[1], *hidden, train_ds.n_classes]
        model = net.EvidentialMlp(sizes, rng=seeds.make_rng(seed, seeds.INIT))
        cfg = net.TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            lam1=args.lambda1,
            fim_mse=args.mode == "iedl",
            use_kl=not args.no_kl,
            anneal_epochs=args.anneal_epochs or None,
            patience=args.patience,
            optimizer=args.optimizer,
            seed=seed,
        )
        logs = net.train(model, train_ds, val_ds, cfg)
        net.save_checkpoint(model, _model_path(out_dir, seed))
        _write_train_log(out_dir / f"train_log_seed{seed}.csv", logs)
        final = logs[-1]
        print(
            f"seed {seed}: {len(logs)} epochs, val acc {final.val_accuracy:.4f}, "
            f"val loss {final.val_loss.total:.6g}"
        )
    return 0


def _load_model_for(args, seed, feature_dim):
    path = _model_path(args.model_dir, seed)
    if not path.is_file():
        raise CliError(f"no checkpoint for seed {seed}: {path}")
    model = net.load_checkpoint(path)
    if model.n_inputs != feature_dim:
        raise CliError(
            f"{path}: model expects {model.n_inputs} features, "
            f"dataset has {feature_dim}"
        )
    return model


def cmd_eval(args):
    tasks = [tok for tok in str(args.tasks).replace(",", " ").split()]
    for task in tasks:
        if task not in VALID_TASKS:
            raise CliError(
                f"unknown task {task!r}; valid tasks: {', '.join(VALID_TASKS)}"
            )
    if not tasks:
        raise CliError("--tasks: need at least one task")
    seed_list = _parse_int_list(args.seeds, "--seeds")
    out_dir = Path(args.out) if args.out else Path(args.model_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "eval", args)
    reports = {task: [] for task in tasks}
    for seed in seed_list:
        test_ds, ood_ds = _eval_sets(args, seed, need_ood="ood" in tasks)
        model = _load_model_for(args, seed, test_ds.features.shape[1])
        for task in tasks:
            if task == "confidence":
                report = evaluate.confidence_eval(model, test_ds, seed=seed)
            elif task == "ood":
                report = evaluate.ood_detect(
                    model, test_ds, ood_ds, seed=seed,
                    equalize=not args.no_equalize,
                )
            else:
                report = evaluate.noisy_detect(
                    model, test_ds, sigma=args.noise_sigma, seed=seed
                )
            reports[task].append(report)
            evaluate.write_report_csv(
                out_dir / f"{task}_seed{seed}.csv", [report]
            )
    for task in tasks:
        evaluate.write_aggregate_csv(
            out_dir / f"{task}_aggregate.csv", reports[task]
        )
        print(f"{task}: wrote {len(reports[task])} seed reports to {out_dir}")
    return 0


def cmd_export_density(args):
    model_path = Path(args.model)
    if not model_path.is_file():
        raise CliError(f"--model: no such file: {args.model}")
    model = net.load_checkpoint(model_path)
    test_ds, ood_ds = _eval_sets(args, args.seed, need_ood=True)
    if model.n_inputs != test_ds.features.shape[1]:
        raise CliError(
            f"{model_path}: model expects {model.n_inputs} features, "
            f"dataset has {test_ds.features.shape[1]}"
        )
    s_id = net.predict_scores(model, test_ds.features)
    s_ood = net.predict_scores(model, ood_ds.features)
    names = ("diff_ent", "mi", "alpha0")
    combined = {
        name: np.concatenate([getattr(s_id, name), getattr(s_ood, name)])
        for name in names
    }
    normalized = {name: evaluate.min_max_normalize(v) for name, v in combined.items()}
    n_id = len(test_ds)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("set,index,")
        fh.write(",".join(f"{n},{n}_norm" for n in names))
        fh.write("\n")
        total = combined["alpha0"].size
        for i in range(total):
            which = "id" if i < n_id else "ood"
            index = i if i < n_id else i - n_id
            cells = [which, str(index)]
            for name in names:
                cells.append(f"{combined[name][i]:.12g}")
                cells.append(f"{normalized[name][i]:.12g}")
            fh.write(",".join(cells) + "\n")
        for name in names:
            dist = evaluate.energy_distance(
                normalized[name][:n_id], normalized[name][n_id:]
            )
            fh.write(f"# energy,{name},{dist:.12g}\n")
    print(f"wrote {total} rows to {out_path}")
    return 0


def cmd_oracle_check(args):
    checks = oracle.run_oracle_checks(seed=args.seed, quick=args.quick)
    failed = []
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"{status}  {check.name:26s} statistic {check.statistic:.3e} "
            f"(bound {check.bound:g})  {check.detail}"
        )
        if not check.passed:
            failed.append(check.name)
    if failed:
        print(f"oracle-check failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "export-density": cmd_export_density,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        if argv and argv[0] in subparsers:
            config_path = _extract_config_path(argv[1:])
            if config_path:
                _apply_config(subparsers[argv[0]], _read_config(config_path))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
