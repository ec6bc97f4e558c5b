"""Command-line front end: ``advbench <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric divergence.
Every command writes ``manifest-<command>.json`` next to its outputs.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, mnist
from .attack import EPSILON_GRID, attack_all, check_grid, export_grid
from .errors import AdvbenchError, ConfigError
from .pipeline import DEFAULT_EPS_MAX, analyze, checkpoint_path, is_cnn, sweep, sweep_model
from .report import render_report
from .runio import (
    RunManifest,
    SweepResult,
    load_checkpoint,
    plot_accuracy_decline,
    read_results_csv,
    save_checkpoint,
    save_dataset,
    table3_fixture,
    write_results_csv,
)
from .trainer import TrainConfig, train
from .trend import FitResult, fit
from .zoo import CATALOG, build_model, get_spec

log = logging.getLogger("advbench")

SWEEP_GRID = (0.0,) + EPSILON_GRID


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _joined(values):
    return ",".join(format(v, "g") for v in values)


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _seeds(args):
    return list(args.seeds) if args.seeds else [args.seed]


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--seeds", type=_ints, default=None,
                   help="comma-separated seeds; overrides --seed (default: %(default)s)")


def _add_data(p):
    p.add_argument("--data-dir", default=mnist.default_data_dir(),
                   help=f"directory with the MNIST IDX files, optionally gzipped; "
                        f"${mnist.DATA_DIR_ENV} sets the default (default: %(default)s)")


def _add_out(p, default="runs"):
    p.add_argument("--out", default=default, help="output directory (default: %(default)s)")


def _add_results(p):
    p.add_argument("--results", default=None,
                   help="sweep results CSV (default: %(default)s)")
    p.add_argument("--fixture", action="store_true",
                   help="use the embedded published sweep instead of --results (default: %(default)s)")


def build_parser():
    parser = argparse.ArgumentParser(prog="advbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"advbench {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("ingest", help="validate MNIST files and write a dataset summary")
    _add_data(p)
    _add_out(p)

    p = sub.add_parser("train", help="train catalog models with SGD")
    p.add_argument("--model", default=None, help=f"one of {', '.join(CATALOG)} (default: %(default)s)")
    p.add_argument("--models", type=_names, default=None,
                   help="comma-separated model ids; overrides --model (default: %(default)s)")
    _add_seed(p)
    _add_data(p)
    _add_out(p)
    p.add_argument("--epochs", type=int, default=None,
                   help="maximum epochs (default: 100 for FNNs, 50 for CNNs)")
    p.add_argument("--batch-size", type=int, default=64, help="mini-batch size (default: %(default)s)")
    p.add_argument("--lr", type=float, default=None,
                   help="initial learning rate (default: 0.01 for FNNs, 0.001 for CNNs)")
    p.add_argument("--subset", type=int, default=None,
                   help="train on the first N training samples (default: all 50000)")
    p.add_argument("--allow-any-size", action="store_true",
                   help="accept a training file that does not hold 60000 samples (default: %(default)s)")

    p = sub.add_parser("attack", help="write FGSM adversarial test sets for one model")
    p.add_argument("--model", required=True, help="model id of the checkpoint to attack")
    _add_seed(p)
    _add_data(p)
    _add_out(p)
    p.add_argument("--checkpoints", default=None,
                   help="directory holding <model>-s<seed>.advg (default: --out)")
    p.add_argument("--epsilons", type=_floats, default=EPSILON_GRID,
                   help=f"comma-separated attack step sizes (default: {_joined(EPSILON_GRID)})")
    p.add_argument("--subset", type=int, default=None,
                   help="attack only the first N test images (default: all)")
    p.add_argument("--export-images", action="store_true",
                   help="also write PGM images of one digit at every epsilon (default: %(default)s)")
    p.add_argument("--image-index", type=int, default=0,
                   help="test image exported by --export-images (default: %(default)s)")

    p = sub.add_parser("sweep", help="accuracy of trained models over an epsilon grid")
    p.add_argument("--models", type=_names, default=tuple(CATALOG),
                   help=f"comma-separated model ids (default: {','.join(CATALOG)})")
    _add_seed(p)
    _add_data(p)
    _add_out(p)
    p.add_argument("--checkpoints", default=None,
                   help="directory holding <model>-s<seed>.advg (default: --out)")
    p.add_argument("--epsilons", type=_floats, default=SWEEP_GRID,
                   help="comma-separated step sizes; 0 records benign accuracy "
                        f"(default: {_joined(SWEEP_GRID)})")
    p.add_argument("--subset", type=int, default=None,
                   help="evaluate on the first N test images only (default: all)")

    p = sub.add_parser("analyze", help="curve fits, correlations, decelerations, intersections")
    _add_results(p)
    _add_out(p)
    p.add_argument("--max-eps", type=_floats, default=DEFAULT_EPS_MAX,
                   help=f"comma-separated fit-domain upper bounds (default: {_joined(DEFAULT_EPS_MAX)})")

    p = sub.add_parser("plot", help="SVG plots of accuracy decline and quadratic-fit slopes")
    _add_results(p)
    _add_out(p)
    p.add_argument("--fits", default=None,
                   help="fits JSON from analyze (default: fit quadratics on the fly)")
    p.add_argument("--max-eps", type=float, default=2.0,
                   help="fit domain and x-axis limit (default: %(default)s)")

    p = sub.add_parser("report", help="markdown summary of results and fits")
    _add_results(p)
    _add_out(p)
    p.add_argument("--fits", default=None, help="fits JSON from analyze (default: %(default)s)")
    return parser


# commands


def _load_results(args):
    if args.fixture:
        return table3_fixture(), "fixture:table3"
    if not args.results:
        raise ConfigError("give --results PATH or --fixture")
    return read_results_csv(args.results), args.results


def _split(args):
    full = mnist.load_split(args.data_dir, "train")
    return mnist.train_test_split(full, allow_any_size=getattr(args, "allow_any_size", False))


def _test_set(args):
    test = mnist.load_split(args.data_dir, "test")
    return test.head(args.subset) if args.subset else test


def cmd_ingest(args, out, manifest):
    train = mnist.load_split(args.data_dir, "train")
    test = mnist.load_split(args.data_dir, "test")
    manifest.dataset_checksums = mnist.file_checksums(args.data_dir)
    summary = {
        "train_file_samples": len(train),
        "test_samples": len(test),
        "image_shape": list(train.images.shape[1:]),
        "train_label_counts": np.bincount(train.labels, minlength=10).tolist(),
        "test_label_counts": np.bincount(test.labels, minlength=10).tolist(),
        "checksums": manifest.dataset_checksums,
    }
    path = out / "dataset.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [path]


def cmd_train(args, out, manifest):
    ids = args.models or ((args.model,) if args.model else None)
    if not ids:
        raise ConfigError("give --model or --models")
    for m in ids:
        get_spec(m)
    train_set, holdout = _split(args)
    if args.subset:
        train_set = train_set.head(args.subset)
    manifest.dataset_checksums = mnist.file_checksums(args.data_dir)
    outputs = []
    configs = {}
    for model_id in ids:
        for seed in _seeds(args):
            spec = get_spec(model_id)
            base = TrainConfig.default_for(spec)
            overrides = {"seed": seed, "batch_size": args.batch_size}
            if args.epochs is not None:
                overrides["max_epochs"] = args.epochs
            if args.lr is not None:
                overrides["learning_rate"] = args.lr
                # a constant-rate regime stays constant
                constant = base.lr_decay_factor == 1.0
                overrides["lr_floor"] = args.lr if constant else min(base.lr_floor, args.lr)
            config = TrainConfig.default_for(spec, **overrides)
            configs[f"{model_id}-s{seed}"] = config.__dict__.copy()
            log.info("training %s seed %d on %d samples: %s", model_id, seed, len(train_set), config)
            started = time.time()
            model, report = train(build_model(model_id, seed), train_set, holdout, config)
            ckpt = checkpoint_path(out, model_id, seed)
            save_checkpoint(model, ckpt, train_config=config.__dict__, epochs_run=report.epochs_run,
                            train_samples=len(train_set))
            csv_path = out / f"{model_id}-s{seed}-train.csv"
            report.write_csv(csv_path)
            log.info("%s seed %d: %d epochs in %.0fs, holdout %.4f", model_id, seed,
                     report.epochs_run, time.time() - started, report.holdout_accuracy[-1]
                     if report.epochs_run else float("nan"))
            outputs += [ckpt, csv_path]
    manifest.config = {"train": configs, "train_samples": len(train_set)}
    return outputs


def cmd_attack(args, out, manifest):
    get_spec(args.model)
    epsilons = check_grid(args.epsilons)
    ckpt_dir = Path(args.checkpoints) if args.checkpoints else out
    test = _test_set(args)
    manifest.dataset_checksums = mnist.file_checksums(args.data_dir)
    outputs = []
    records = []
    for seed in _seeds(args):
        path = checkpoint_path(ckpt_dir, args.model, seed)
        if not path.exists():
            raise FileNotFoundError(f"missing checkpoint {path}")
        model, _ = load_checkpoint(path)
        for eps, adv in zip(epsilons, attack_all(model, test, epsilons)):
            target = out / f"{args.model}-s{seed}-eps{eps:g}.advg"
            save_dataset(adv, target, model_id=args.model, seed=seed, epsilon=eps)
            outputs.append(target)
        records += sweep_model(model, test, epsilons, seed, args.model)
        if args.export_images:
            outputs += export_grid(model, test, args.image_index, epsilons,
                                   out / "images", prefix=f"{args.model}-s{seed}-digit")
    csv_path = out / f"{args.model}-attack.csv"
    write_results_csv(SweepResult(tuple(records)), csv_path)
    manifest.config = {"epsilons": list(epsilons), "test_samples": len(test)}
    return outputs + [csv_path]


def cmd_sweep(args, out, manifest):
    for m in args.models:
        get_spec(m)
    epsilons = tuple(float(e) for e in args.epsilons)
    if any(e < 0 for e in epsilons) or len(set(epsilons)) != len(epsilons):
        raise ConfigError("epsilons must be non-negative and distinct")
    ckpt_dir = Path(args.checkpoints) if args.checkpoints else out
    test = _test_set(args)
    manifest.dataset_checksums = mnist.file_checksums(args.data_dir)
    result = sweep(args.models, ckpt_dir, test, epsilons, _seeds(args))
    path = out / "results.csv"
    write_results_csv(result, path)
    manifest.config = {"epsilons": list(epsilons), "models": list(args.models),
                       "test_samples": len(test)}
    return [path]


def cmd_analyze(args, out, manifest):
    result, source = _load_results(args)
    doc = analyze(result, args.max_eps)
    doc["source"] = source
    path = out / "fits.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    manifest.config = {"max_eps": list(args.max_eps), "source": source}
    return [path]


def _fits_for_plot(args, result):
    if args.fits:
        doc = json.loads(Path(args.fits).read_text())
        window = doc["windows"].get(format(args.max_eps, "g"))
        if window is None:
            raise ConfigError(f"{args.fits} has no fits for epsilon <= {args.max_eps:g}")
        fits = {}
        for m, fams in window["fits"].items():
            q = fams.get("quadratic", {})
            if "coefficients" in q:
                fits[m] = FitResult("quadratic", tuple(q["coefficients"]), q["r2"],
                                    q["eps_max"], q["n_points"])
        return fits
    return {m: fit(result.series(m), "quadratic", args.max_eps)
            for m in result.model_ids if is_cnn(m)}


def cmd_plot(args, out, manifest):
    result, source = _load_results(args)
    fits = _fits_for_plot(args, result)
    series = []
    for m in result.model_ids:
        s = result.series(m)
        keep = [i for i, e in enumerate(s.epsilons) if e <= args.max_eps]
        series.append(type(s)(m, [s.epsilons[i] for i in keep], [s.accuracies[i] for i in keep]))
    decline = out / "decline.svg"
    plot_accuracy_decline([s for s in series if s.model_id in fits] or series, fits, decline)
    outputs = [decline]
    if fits:
        slopes = out / "slopes.svg"
        plot_accuracy_decline([], fits, slopes, mode="slopes")
        outputs.append(slopes)
    manifest.config = {"max_eps": args.max_eps, "source": source}
    return outputs


def cmd_report(args, out, manifest):
    result, source = _load_results(args)
    analysis = None
    if args.fits:
        analysis = json.loads(Path(args.fits).read_text())
    manifests = []
    dirs = {Path(p).parent for p in (args.results, args.fits) if p}
    for d in sorted(dirs):
        for mpath in sorted(d.glob("manifest-*.json")):
            if mpath.name != "manifest-report.json":
                manifests.append((mpath.name, RunManifest.read(mpath)))
    path = out / "report.md"
    path.write_text(render_report(result, analysis, manifests))
    manifest.config = {"source": source, "fits": args.fits}
    return [path]


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
    "report": cmd_report,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    out = Path(args.out)
    seeds = _seeds(args) if hasattr(args, "seeds") else []
    manifest = RunManifest(command=["advbench"] + argv, seeds=seeds)
    started = time.time()
    try:
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](args, out, manifest)
    except AdvbenchError as exc:
        print(f"advbench {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"advbench {args.command}: {exc}", file=sys.stderr)
        return 3
    manifest.outputs = [str(p) for p in outputs]
    manifest.wall_clock_seconds = round(time.time() - started, 3)
    manifest.write(out / f"manifest-{args.command}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
