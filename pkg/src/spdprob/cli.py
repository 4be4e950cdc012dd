"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print a single JSON object on stderr.
"""

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from . import classify, dimred, distributions, outlier
from . import geometry as geo
from . import io as spio
from .errors import DatasetError, DimensionError, NotSPDError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MODELS = ("mdm", "tslda", "tsqda", "wg-shared", "wg-full")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="random seed")
    g.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    g.add_argument("--tol", type=float, default=1e-10, help="solver tolerance")
    g.add_argument("--output", "-o", default=None, help="primary output file ('-' for stdout)")
    g.add_argument("--config", default=None, help="JSON file with default values for any flag")
    return p


def build_parser(defaults=None):
    common = _common()
    parser = _Parser(prog="spdprob", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    p = add("gen", "generate a synthetic labeled dataset")
    p.add_argument("--spec", help="generator config JSON (overrides the fixture flags)")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--test-output", default=None)

    p = add("zeta", "tabulate the isotropic Gaussian normalization")
    p.add_argument("--d", type=int, required=False, default=2)
    p.add_argument("--sigma-min", type=float, default=0.01)
    p.add_argument("--sigma-max", type=float, default=None,
                   help="upper end of the grid (default shrinks with d to keep the MC error below 1%%)")
    p.add_argument("--grid-size", type=int, default=64)
    p.add_argument("--mc-samples", type=int, default=200_000)

    p = add("fit-iso", "fit an isotropic Gaussian")
    p.add_argument("dataset")
    p.add_argument("--table", help="ZetaTable JSON (built on the fly if omitted)")

    p = add("fit-wg", "fit a wrapped Gaussian")
    p.add_argument("dataset")
    p.add_argument("--method", choices=("moments", "mle"), default="moments")
    p.add_argument("--shrinkage", type=float, default=None)

    p = add("train", "train a classifier")
    p.add_argument("dataset")
    p.add_argument("--model", choices=MODELS, default="mdm")
    p.add_argument("--shrinkage", type=float, default=classify.DEFAULT_SHRINKAGE)
    p.add_argument("--uniform-priors", action="store_true")

    p = add("predict", "predict labels with a trained classifier")
    p.add_argument("dataset")
    p.add_argument("--model-file", required=True)
    p.add_argument("--table", help="ZetaTable JSON for Bayes scores of mdm models")

    p = add("potato", "Riemannian potato outlier gate")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--calibrate", metavar="DATASET")
    mode.add_argument("--stream", metavar="DATASET")
    p.add_argument("--state", help="calibrated state JSON (for --stream)")
    p.add_argument("--state-output", help="where to write the updated state after --stream")
    p.add_argument("--z-th", type=float, default=3.0)

    p = add("tsne", "embed a dataset into 2x2 SPD matrices")
    p.add_argument("dataset")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--n-iter", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=100.0)
    p.add_argument("--exaggeration", type=float, default=4.0)
    p.add_argument("--exaggeration-iters", type=int, default=50)

    p = add("pca", "Riemannian PCA")
    p.add_argument("dataset")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--projected-output", help="also write the projected dataset here")

    p = add("export-xyz", "write 2x2 matrices as (a, b, c, label) CSV rows")
    p.add_argument("dataset")

    if defaults:
        for sp in sub.choices.values():
            sp.set_defaults(**defaults)
    return parser


def _load_config(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    ns, _ = pre.parse_known_args(argv)
    if ns.config is None:
        return None
    try:
        with open(ns.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read config {ns.config}: {exc}", "parse") from exc
    return {k.replace("-", "_"): v for k, v in cfg.items()}


@contextlib.contextmanager
def _writer(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _need_output(args):
    if args.output in (None, "-"):
        raise UsageError(f"{args.command} needs --output FILE")
    return args.output


def _cmd_gen(args):
    if args.spec:
        with open(args.spec) as fh:
            spec = json.load(fh)
    else:
        spec = spio.separable_fixture(args.d, args.n_per_class, args.classes,
                                      args.separation, args.sigma)
    ds = spio.generate(spec, seed=args.seed)
    out = _need_output(args)
    if args.test_fraction is not None:
        if not args.test_output:
            raise UsageError("--test-fraction needs --test-output")
        train, test = classify.train_test_split(len(ds), args.test_fraction, args.seed, ds.labels)
        spio.save_dataset(ds.subset(test), args.test_output, args.format)
        ds = ds.subset(train)
    spio.save_dataset(ds, out, args.format)


def _default_sigma_max(d):
    return 1.5 if d <= 4 else 1.0 if d <= 6 else 0.7


def _table_for(X, seed, tol):
    # small-sigma moment identity: E delta^2 ~ m sigma^2, and curvature only lowers
    # the MLE below that guess, so twice the guess brackets it
    d = X.shape[-1]
    disp = np.mean(geo.airm_distance(geo.frechet_mean(X, tol=tol), X) ** 2)
    hi = max(2.0 * np.sqrt(disp / geo.coords_dim(d)), 0.05)
    grid = distributions.default_sigma_grid(lo=min(0.01, hi / 10), hi=hi)
    return distributions.build_zeta_table(d, grid, seed=seed)


def _cmd_zeta(args):
    hi = args.sigma_max if args.sigma_max is not None else _default_sigma_max(args.d)
    grid = np.geomspace(args.sigma_min, hi, args.grid_size)
    table = distributions.build_zeta_table(args.d, grid, args.mc_samples, args.seed)
    spio.save_json(table, _need_output(args))


def _cmd_fit_iso(args):
    ds = spio.load_dataset(args.dataset)
    table = spio.load_json(args.table) if args.table else _table_for(ds.matrices, args.seed, args.tol)
    spio.save_json(distributions.iso_fit(ds.matrices, table, tol=args.tol), _need_output(args))


def _cmd_fit_wg(args):
    ds = spio.load_dataset(args.dataset)
    if args.method == "moments":
        base = geo.frechet_mean(ds.matrices, tol=args.tol)
        model = distributions.wg_fit_moments(ds.matrices, base, args.shrinkage)
    else:
        model = distributions.wg_fit_mle(ds.matrices)
    spio.save_json(model, _need_output(args))


def _cmd_train(args):
    ds = spio.load_dataset(args.dataset)
    if ds.labels is None:
        raise DatasetError("training needs a labeled dataset", "parse")
    kwargs = {"uniform_priors": args.uniform_priors, "tol": args.tol}
    if args.model != "mdm":
        kwargs["shrinkage"] = args.shrinkage
    model = classify.fit(ds.matrices, ds.labels, args.model, **kwargs)
    spio.save_json(model, _need_output(args))


def _cmd_predict(args):
    ds = spio.load_dataset(args.dataset)
    model = spio.load_json(args.model_file)
    if not isinstance(model, classify.ClassModel):
        raise DatasetError(f"{args.model_file} is not a classifier model", "parse")
    if model.variant == "iso" and not args.table:
        pred = classify.predict_mdm(model, ds.matrices)
    else:
        table = spio.load_json(args.table) if args.table else None
        pred = classify.predict_bayes(model, ds.matrices, table)
    labels = np.atleast_1d(pred.label)
    with _writer(args.output) as fh:
        fh.write("index,label\n")
        fh.writelines(f"{i},{int(k)}\n" for i, k in enumerate(labels))
    if ds.labels is not None:
        acc = float(np.mean(labels == ds.labels))
        print(json.dumps({"accuracy": acc, "n": len(labels)}))


def _cmd_potato(args):
    if args.calibrate:
        ds = spio.load_dataset(args.calibrate)
        state = outlier.potato_calibrate(ds.matrices, args.z_th, tol=args.tol)
        spio.save_json(state, _need_output(args))
        return
    if not args.state:
        raise UsageError("--stream needs --state")
    state = spio.load_json(args.state)
    ds = spio.load_dataset(args.stream)
    state, z, acc = outlier.potato_stream(state, ds.matrices)
    with _writer(args.output) as fh:
        fh.write("index,z,accept\n")
        fh.writelines(f"{i},{repr(float(zi))},{int(a)}\n" for i, (zi, a) in enumerate(zip(z, acc)))
    if args.state_output:
        spio.save_json(state, args.state_output)


def _cmd_tsne(args):
    ds = spio.load_dataset(args.dataset)
    cfg = dimred.TsneConfig(args.perplexity, args.n_iter, args.learning_rate,
                            (args.exaggeration, args.exaggeration_iters), args.seed)
    Y = dimred.tsne_embed(ds.matrices, cfg)
    meta = {"source": os.path.basename(args.dataset), "method": "tsne",
            "perplexity": str(args.perplexity)}
    spio.save_dataset(spio.LabeledDataset(Y, ds.labels, meta), _need_output(args))


def _cmd_pca(args):
    ds = spio.load_dataset(args.dataset)
    proj = dimred.pca_fit(ds.matrices, args.p, seed=args.seed)
    spio.save_json(proj, _need_output(args))
    if args.projected_output:
        Y = dimred.pca_project(proj, ds.matrices)
        meta = {"source": os.path.basename(args.dataset), "method": "pca", "p": str(args.p)}
        spio.save_dataset(spio.LabeledDataset(Y, ds.labels, meta), args.projected_output)


def _cmd_export_xyz(args):
    ds = spio.load_dataset(args.dataset)
    xyz = dimred.spd2_to_xyz(ds.matrices)
    with _writer(args.output) as fh:
        fh.write("a,b,c,label\n")
        for i, (a, b, c) in enumerate(xyz):
            label = "" if ds.labels is None else str(int(ds.labels[i]))
            fh.write(f"{repr(float(a))},{repr(float(b))},{repr(float(c))},{label}\n")


COMMANDS = {
    "gen": _cmd_gen, "zeta": _cmd_zeta, "fit-iso": _cmd_fit_iso, "fit-wg": _cmd_fit_wg,
    "train": _cmd_train, "predict": _cmd_predict, "potato": _cmd_potato,
    "tsne": _cmd_tsne, "pca": _cmd_pca, "export-xyz": _cmd_export_xyz,
}


def _report(kind, code, exc):
    diag = {"error": kind, "exit_code": code, "message": str(exc)}
    if getattr(exc, "code", None) is not None and isinstance(exc, DatasetError):
        diag["code"] = exc.code
    if getattr(exc, "index", None) is not None:
        diag["index"] = exc.index
    print(json.dumps(diag), file=sys.stderr)
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        defaults = _load_config(argv)
        args = build_parser(defaults).parse_args(argv)
        limiter = contextlib.nullcontext()
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        with limiter:
            COMMANDS[args.command](args)
    except UsageError as exc:
        return _report("usage", EXIT_USAGE, exc)
    except SystemExit as exc:
        return int(exc.code or 0)
    except NumericalError as exc:
        return _report(type(exc).__name__, EXIT_NUMERIC, exc)
    except (DatasetError, NotSPDError, DimensionError, OSError, ValueError, KeyError) as exc:
        return _report(type(exc).__name__, EXIT_DATA, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
