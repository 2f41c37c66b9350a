"""Batch command-line tools: build-links, decompose, metrics, evaluate, synth.

Exit status 0 on success, 1 on invalid input or configuration, 2 when the
solver aborts. Set ``CLCP_LOG_LEVEL`` (e.g. ``INFO``, ``DEBUG``) for progress
output on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .evaluation import DEFAULT_GRID, EvalProtocol, evaluate
from .linkmatrix import (
    build_cannot_link,
    compute_lift,
    read_corpus,
    read_vocab,
    write_corpus,
    write_vocab,
)
from .metrics import cannot_link_violation_pct, fit_statistics
from .objective import HyperParams
from .solver import SolverAbort, SolverConfig, fit
from .synth import SynthSpec, generate, synthetic_corpus, vocab_names

logger = logging.getLogger("clcp")

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

SOLVER_KEYS = {
    "rank": int,
    "max_outer_iters": int,
    "inner_steps_per_mode": int,
    "tol": float,
    "seed": int,
    "armijo_step": float,
    "armijo_shrink": float,
    "armijo_c": float,
    "armijo_max_backtracks": int,
    "hard_threshold": float,
    "bias_enabled": "bool",
    "bias_frozen": "bool",
    "bias_floor": float,
    "bias_init_fraction": float,
    "scaled_gradient": "bool",
    "patience": int,
}
HYPER_KEYS = ("beta1", "beta2", "beta3", "theta")
PATH_KEYS = ("tensor", "links", "row_vocab", "col_vocab", "labels", "output_dir")
EXTRA_KEYS = ("metric_tau", "top_terms", "n_splits", "test_fraction", "cv_folds",
              "lasso_grid", "eval_seed")


class ConfigError(ValueError):
    pass


def _convert(key, raw, kind):
    try:
        if kind == "bool":
            return _BOOL[raw.lower()]
        return kind(raw)
    except (KeyError, ValueError):
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def _floats(key, raw, n=None):
    try:
        vals = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key} needs {n} values, got {len(vals)}")
    return vals


def _ints(key, raw, n=None):
    vals = _floats(key, raw, n)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key} must be integers")
    return tuple(int(v) for v in vals)


def load_run_config(path):
    """Parse a decompose config into ``(SolverConfig, paths, extras, raw)``.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    raw = io.read_keyvalue(path)
    known = set(SOLVER_KEYS) | set(HYPER_KEYS) | set(PATH_KEYS) | set(EXTRA_KEYS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")
    for key in ("tensor", "output_dir", "rank"):
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
    hyper = {}
    for key in ("beta1", "beta2", "beta3"):
        if key in raw:
            hyper[key] = _convert(key, raw[key], float)
    if "theta" in raw:
        theta = _floats("theta", raw["theta"])
        if len(theta) == 1:
            theta = theta * 3
        if len(theta) != 3:
            raise ConfigError("theta takes one value or three per-mode values")
        hyper["theta"] = tuple(theta)
    solver = {k: _convert(k, raw[k], kind) for k, kind in SOLVER_KEYS.items() if k in raw}
    try:
        cfg = SolverConfig(hyper=HyperParams(**hyper), **solver)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    base = path.parent
    paths = {k: (base / raw[k]) for k in PATH_KEYS if k in raw}
    extras = {
        "metric_tau": _convert("metric_tau", raw["metric_tau"], float)
        if "metric_tau" in raw else cfg.hard_threshold,
        "top_terms": _convert("top_terms", raw["top_terms"], int) if "top_terms" in raw else 10,
    }
    proto = {}
    for key, name, kind in (("n_splits", "n_splits", int), ("test_fraction", "test_fraction", float),
                            ("cv_folds", "cv_folds", int), ("eval_seed", "seed", int)):
        if key in raw:
            proto[name] = _convert(key, raw[key], kind)
    if "lasso_grid" in raw:
        proto["lasso_grid"] = tuple(_floats("lasso_grid", raw["lasso_grid"]))
    try:
        extras["protocol"] = EvalProtocol(**proto)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    return cfg, paths, extras, raw


def _resolved_items(cfg: SolverConfig, extras, raw) -> dict:
    items = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "hyper"}
    items.update({f.name: getattr(cfg.hyper, f.name) for f in fields(cfg.hyper)})
    items.update({k: v for k, v in extras.items() if k != "protocol"})
    items.update({f"eval_{f.name}": getattr(extras["protocol"], f.name)
                  for f in fields(extras["protocol"])})
    items.update({k: raw[k] for k in PATH_KEYS if k in raw})
    return {k: str(v) for k, v in items.items()}


def _emit(text: str, out_path=None) -> None:
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")


def _check_writable(path: Path) -> None:
    probe = path
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


def phenotype_listing(model, row_vocab, col_vocab, top: int) -> str:
    """Per component: weight, then the top diagnosis and medication terms by loading."""
    _, B, C = model.factors
    lines = []
    for r in range(model.rank):
        lines.append(f"component {r} weight {io._fmt(model.weights[r])}")
        for title, f, vocab in (("diagnoses", B, row_vocab), ("medications", C, col_vocab)):
            col = f[:, r]
            order = sorted(np.flatnonzero(col > 0).tolist(), key=lambda i: (-col[i], i))[:top]
            lines.append(f"  {title}:")
            for i in order:
                label = vocab[i] if vocab is not None else str(i)
                lines.append(f"    {label}\t{io._fmt(col[i])}")
    return "\n".join(lines) + "\n"


def cmd_build_links(args) -> int:
    corpus = read_corpus(args.corpus, args.row_vocab, args.col_vocab)
    links = build_cannot_link(compute_lift(corpus), args.alpha,
                              constrain_undefined=args.constrain_undefined)
    io.write_cannot_link(args.out, links)
    density = len(links) / (links.dims[0] * links.dims[1])
    _emit(io.format_report({"pairs": len(links), "density": density,
                            "n_docs": corpus.n_docs}))
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg, paths, extras, raw = load_run_config(args.config)
    x = io.read_tensor(paths["tensor"])
    links = None
    if "links" in paths:
        links = io.read_cannot_link(paths["links"], dims=(x.shape[1], x.shape[2]))
    row_vocab = read_vocab(paths["row_vocab"]) if "row_vocab" in paths else None
    col_vocab = read_vocab(paths["col_vocab"]) if "col_vocab" in paths else None
    for name, vocab, dim in (("row_vocab", row_vocab, x.shape[1]),
                             ("col_vocab", col_vocab, x.shape[2])):
        if vocab is not None and len(vocab) != dim:
            raise ConfigError(f"{name} has {len(vocab)} terms, tensor mode has {dim}")
    if cfg.hyper.beta3 > 0 and links is None:
        raise ConfigError("beta3 > 0 requires a links file")
    if "labels" in paths:
        io.read_labels(paths["labels"], x.shape[0])
    _check_writable(paths["output_dir"])
    items = _resolved_items(cfg, extras, raw)
    digest = io.config_hash(items)
    if args.dry_run:
        _emit(io.format_report({
            "config_hash": digest,
            "dry_run": "true",
            "shape": list(x.shape),
            "nnz": x.nnz,
            "rank": cfg.rank,
            "n_links": len(links) if links is not None else 0,
            "n_parameters": cfg.rank * (1 + sum(x.shape)) + (1 + sum(x.shape)),
        }))
        return EXIT_OK

    report = fit(x, links, cfg)
    logger.info("fit finished in %.2fs after %d iterations", report.wall_time, report.iterations)
    out = paths["output_dir"]
    out.mkdir(parents=True, exist_ok=True)
    io.write_model(out, report.model)
    with open(out / "trace.csv", "w", encoding="utf-8") as fh:
        fh.write("iteration,kl,angular,l2,cannot_link,total\n")
        for it, b in enumerate(report.trace):
            fh.write(",".join([str(it)] + [io._fmt(v) for v in b.as_dict().values()]) + "\n")
    (out / "phenotypes.txt").write_text(
        phenotype_listing(report.model, row_vocab, col_vocab, extras["top_terms"]),
        encoding="utf-8")
    stats = fit_statistics(x, report.model, extras["metric_tau"])
    summary = {
        "config_hash": digest,
        "converged": str(report.converged).lower(),
        "iterations": report.iterations,
        "degenerate": report.degenerate or "none",
    }
    summary.update({f"objective_{k}": v for k, v in report.final.as_dict().items()})
    summary.update(stats.as_dict())
    if links is not None:
        summary["violation_pct"] = cannot_link_violation_pct(
            report.model, links, extras["metric_tau"])
    text = io.format_report(summary)
    (out / "report.txt").write_text(text, encoding="utf-8")
    _emit(text)
    return EXIT_OK


def cmd_metrics(args) -> int:
    model = io.read_model(args.model)
    x = io.read_tensor(args.tensor)
    for mode, (a, b) in enumerate(zip(model.shape, x.shape), start=1):
        if a != b:
            raise ConfigError(f"shape mismatch in mode {mode}: model {a} vs tensor {b}")
    stats = fit_statistics(x, model, args.tau)
    summary = stats.as_dict()
    if args.links:
        links = io.read_cannot_link(args.links, dims=(x.shape[1], x.shape[2]))
        summary["violation_pct"] = cannot_link_violation_pct(model, links, args.tau)
    _emit(io.format_report(summary), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model_dir, labels_path = args.model, args.labels
    if args.config:
        _, paths, extras, _ = load_run_config(args.config)
        protocol = extras["protocol"]
        model_dir = model_dir or paths["output_dir"]
        labels_path = labels_path or paths.get("labels")
    else:
        grid = tuple(_floats("grid", args.grid)) if args.grid else DEFAULT_GRID
        protocol = EvalProtocol(n_splits=args.splits, test_fraction=args.test_fraction,
                                cv_folds=args.folds, lasso_grid=grid, seed=args.seed)
    if not model_dir or not labels_path:
        raise ConfigError("evaluate needs a model directory and a labels file")
    model = io.read_model(model_dir)
    labels = io.read_labels(labels_path, model.shape[0])
    result = evaluate(model.factors[0], labels, protocol)
    summary = {"mean_auc": result.mean_auc, "std_auc": result.std_auc}
    for s, (a, p) in enumerate(zip(result.split_aucs, result.penalties)):
        summary[f"split_{s}_auc"] = a
        summary[f"split_{s}_penalty"] = p
    _emit(io.format_report(summary), args.out)
    return EXIT_OK


SYNTH_KEYS = ("shape", "rank", "support", "lambda_scale", "bias_fraction",
              "cannot_link_fraction", "label_components", "label_threshold", "seed",
              "n_docs", "corpus_noise")


def load_synth_spec(path):
    raw = io.read_keyvalue(path)
    unknown = sorted(set(raw) - set(SYNTH_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")
    kw = {}
    if "shape" in raw:
        kw["shape"] = _ints("shape", raw["shape"], 3)
    if "support" in raw:
        kw["support"] = _ints("support", raw["support"], 3)
    if "label_components" in raw:
        kw["label_components"] = _ints("label_components", raw["label_components"])
    for key, kind in (("rank", int), ("seed", int), ("lambda_scale", float),
                      ("bias_fraction", float), ("cannot_link_fraction", float),
                      ("label_threshold", float)):
        if key in raw:
            kw[key] = _convert(key, raw[key], kind)
    n_docs = _convert("n_docs", raw["n_docs"], int) if "n_docs" in raw else 500
    noise = _convert("corpus_noise", raw["corpus_noise"], float) if "corpus_noise" in raw else 0.1
    try:
        return SynthSpec(**kw), n_docs, noise
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None


def cmd_synth(args) -> int:
    spec, n_docs, noise = load_synth_spec(args.spec)
    truth, x, links, labels = generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_tensor(out / "tensor.txt", x)
    io.write_cannot_link(out / "links.txt", links)
    io.write_labels(out / "labels.txt", labels)
    io.write_model(out / "truth", truth)
    rows, cols = vocab_names(spec.shape)
    write_vocab(out / "vocab_rows.txt", rows)
    write_vocab(out / "vocab_cols.txt", cols)
    if n_docs > 0:
        write_corpus(out / "corpus.txt", synthetic_corpus(truth, n_docs, spec.seed, noise=noise))
    (out / "decompose.cfg").write_text(
        "\n".join([
            "tensor = tensor.txt",
            "links = links.txt",
            "row_vocab = vocab_rows.txt",
            "col_vocab = vocab_cols.txt",
            "labels = labels.txt",
            "output_dir = fit",
            f"rank = {spec.rank}",
            f"seed = {spec.seed}",
        ]) + "\n", encoding="utf-8")
    _emit(io.format_report({"shape": list(x.shape), "nnz": x.nnz,
                            "total_count": x.total_sum, "n_links": len(links),
                            "n_cases": int(labels.sum())}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clcp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-links", help="cannot-link pairs from a corpus via lift")
    p.add_argument("--corpus", required=True)
    p.add_argument("--row-vocab", required=True)
    p.add_argument("--col-vocab", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--constrain-undefined", action="store_true",
                   help="also constrain pairs whose lift is undefined")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_links)

    p = sub.add_parser("decompose", help="fit the constrained CP model")
    p.add_argument("config")
    p.add_argument("--dry-run", action="store_true", help="validate inputs only")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("metrics", help="fit statistics and violation percentage")
    p.add_argument("--model", required=True, help="directory with A.csv, B.csv, C.csv")
    p.add_argument("--tensor", required=True)
    p.add_argument("--links")
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evaluate", help="AUC of L1 logistic regression on patient factors")
    p.add_argument("--config", help="decompose config; supplies model dir, labels and protocol")
    p.add_argument("--model")
    p.add_argument("--labels")
    p.add_argument("--splits", type=int, default=5)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid", help="comma-separated penalty values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("spec")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("CLCP_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SolverAbort as err:
        print(f"error: solver aborted: {err}", file=sys.stderr)
        return EXIT_ABORT
    except (ValueError, IndexError, OSError) as err:
        # FormatError, ConfigError, CorpusFormatError and shape errors all land here
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
