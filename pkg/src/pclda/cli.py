"""Command-line surface: generation, training, evaluation, and reports.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical divergence.
Human-readable progress goes to stderr; machine artifacts only to files.
Every output file is written to a temp file and renamed, so a failed run
never leaves a partial artifact behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import data as data_io
from .data import (ToyBarsConfig, _atomic_write_text, gen_synthetic_ehr,
                   gen_toy_bars, read_checkpoint, read_corpus, toy_bars_topics,
                   write_checkpoint, write_corpus, write_labels)
from .embed import EmbedConfig
from .errors import (DataFormatError, InvalidParameterError, PCLDAError,
                     TrainingDivergedError)
from .gibbs import fit_logistic_head, gibbs_train
from .gradients import RegConfig, UnconstrainedParams
from .metrics import (fitness_landscape, format_topic_report, heldout_metrics,
                      topic_report, write_metrics)
from .model import TopicModelParams
from .optim import AdamConfig
from .train import (TrainConfig, lambda_ladder, random_init, train_bp_slda,
                    train_ml_slda, train_pc)
from .embed import embed_batch

MANIFEST_VERSION = 1

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


def _log(msg):
    print(msg, file=sys.stderr)


def _usage_error(msg):
    _log(f"error: {msg}")
    raise SystemExit(EXIT_USAGE)


def _threads(args):
    if getattr(args, "threads", None) is not None:
        return int(args.threads)
    return int(os.environ.get("PCLDA_THREADS", "1"))


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(out_dir, config, seed, artifacts):
    manifest = {
        "format_version": MANIFEST_VERSION,
        "command": sys.argv,
        "config": config,
        "config_hash": _config_hash(config),
        "seed": seed,
        "artifacts": artifacts,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _atomic_write_text(os.path.join(out_dir, "manifest.json"),
                       json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _prepare_out_dir(path, force=False, must_be_empty=False):
    if os.path.exists(path):
        if must_be_empty and os.listdir(path) and not force:
            _usage_error(f"output directory {path!r} is not empty "
                         "(pass --force to overwrite)")
    else:
        os.makedirs(path)


def _load_config_file(path):
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError("expected key=value", line_number=lineno)
            key, val = line.split("=", 1)
            cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _resolve(args, defaults):
    """CLI flags override --config file values, which override defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
    effective = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            effective[key] = cli_val
        elif key in file_cfg:
            raw = file_cfg[key]
            caster = type(default) if default is not None else str
            if caster is bool:
                effective[key] = raw.lower() in ("1", "true", "yes")
            else:
                effective[key] = caster(raw)
        else:
            effective[key] = default
    return effective


# ---------------------------------------------------------------------------
# gen

def cmd_gen_toy_bars(args):
    opts = _resolve(args, {"n_docs": 500, "seed": 0, "positive_fraction": 0.5})
    if opts["n_docs"] < 1:
        _usage_error("--n-docs must be positive")
    _prepare_out_dir(args.out, args.force, must_be_empty=True)
    cfg = ToyBarsConfig(n_docs=int(opts["n_docs"]), seed=int(opts["seed"]),
                        positive_fraction=float(opts["positive_fraction"]))
    corpus = gen_toy_bars(cfg)
    corpus_path = os.path.join(args.out, "corpus.txt")
    labels_path = os.path.join(args.out, "labels.csv")
    truth_path = os.path.join(args.out, "ground_truth.json")
    write_corpus(corpus, corpus_path)
    write_labels(corpus, labels_path)
    _atomic_write_text(truth_path, json.dumps(
        {"kind": "toy-bars", "bar_topics": toy_bars_topics(cfg).tolist(),
         "signal_word": 0}, indent=1, sort_keys=True) + "\n")
    config = {"command": "gen toy-bars", **{k: opts[k] for k in sorted(opts)}}
    _write_manifest(args.out, config, int(opts["seed"]),
                    {"corpus": corpus_path, "labels": labels_path,
                     "ground_truth": truth_path})
    _log(f"wrote {corpus.n_docs}-doc toy-bars corpus to {args.out}")
    return 0


def cmd_gen_ehr(args):
    opts = _resolve(args, {"n_docs": 5000, "vocab_size": 100, "n_labels": 11,
                           "k_true": 5, "seed": 0})
    if opts["n_docs"] < 1:
        _usage_error("--n-docs must be positive")
    _prepare_out_dir(args.out, args.force, must_be_empty=True)
    corpus, planted = gen_synthetic_ehr(
        int(opts["n_docs"]), int(opts["vocab_size"]), int(opts["n_labels"]),
        int(opts["k_true"]), int(opts["seed"]))
    corpus_path = os.path.join(args.out, "corpus.txt")
    labels_path = os.path.join(args.out, "labels.csv")
    truth_path = os.path.join(args.out, "ground_truth.json")
    write_corpus(corpus, corpus_path)
    write_labels(corpus, labels_path)
    write_checkpoint(planted, truth_path, {"kind": "ehr-like planted model"})
    config = {"command": "gen ehr-like", **{k: opts[k] for k in sorted(opts)}}
    _write_manifest(args.out, config, int(opts["seed"]),
                    {"corpus": corpus_path, "labels": labels_path,
                     "ground_truth": truth_path})
    _log(f"wrote {corpus.n_docs}-doc ehr-like corpus to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train

TRAIN_DEFAULTS = {
    "k": 4, "lam": "100", "epochs": 200, "seed": 0, "alpha": 1.1,
    "embed_iters": 100, "embed_step": 0.005, "learning_rate": 0.01,
    "tau_phi": 1e-5, "tau_eta": 1e-4, "init": "random",
    "gibbs_sweeps": 500, "gibbs_burn_in": 250, "beta_word": 0.1,
}


def _trace_payload(trace):
    def lb_dict(lb):
        return {"prior_term": lb.prior_term, "data_term": lb.data_term,
                "label_term": lb.label_term, "reg_term": lb.reg_term,
                "total": lb.total}

    return {
        "train": [lb_dict(lb) for lb in trace.train],
        "valid": None if trace.valid is None else [lb_dict(lb) for lb in trace.valid],
        "val_metric": trace.val_metric,
        "best_epoch": trace.best_epoch,
        "n_epochs": len(trace.train),
    }


def _build_init(opts, corpus, objective):
    K = int(opts["k"])
    L = max(corpus.n_labels, 1)
    alpha = float(opts["alpha"])
    init = opts["init"]
    if init == "random":
        return random_init(K, corpus.vocab_size, L, alpha, int(opts["seed"]))
    if init == "gibbs":
        _log("running Gibbs LDA for initialization ...")
        params = gibbs_train(corpus, K, alpha, float(opts["beta_word"]),
                             int(opts["gibbs_sweeps"]), int(opts["gibbs_burn_in"]),
                             int(opts["seed"]))
        return UnconstrainedParams.from_topic_params(params)
    if init.startswith("file:") or init.startswith("gibbs:"):
        path = init.split(":", 1)[1]
        params, _ = read_checkpoint(path)
        if params.vocab_size != corpus.vocab_size:
            raise DataFormatError(
                f"init checkpoint V={params.vocab_size} does not match corpus "
                f"V={corpus.vocab_size}")
        return UnconstrainedParams.from_topic_params(
            replace(params, alpha=alpha) if params.alpha != alpha else params)
    _usage_error(f"unknown --init {init!r}")


def cmd_train(args):
    opts = _resolve(args, TRAIN_DEFAULTS)
    corpus = read_corpus(args.corpus, args.labels)
    _prepare_out_dir(args.out, getattr(args, "force", False))
    objective = args.objective
    lams = [float(x) for x in str(opts["lam"]).split(",")]
    seed = int(opts["seed"])
    embed_cfg = EmbedConfig(T=int(opts["embed_iters"]),
                            nu=float(opts["embed_step"]))
    config_echo = {"command": f"train {objective}", "objective": objective,
                   "threads": _threads(args),
                   **{k: opts[k] for k in sorted(opts)}}
    artifacts = {}

    if objective == "gibbs":
        params = gibbs_train(corpus, int(opts["k"]), float(opts["alpha"]),
                             float(opts["beta_word"]), int(opts["gibbs_sweeps"]),
                             int(opts["gibbs_burn_in"]), seed)
        if corpus.labels is not None:
            Pi = embed_batch(corpus.to_dense(), params, embed_cfg)
            eta = fit_logistic_head(Pi, corpus.labels, float(opts["tau_eta"]),
                                    seed)
            params = TopicModelParams(params.phi, eta, params.alpha)
        ckpt = os.path.join(args.out, "checkpoint.json")
        write_checkpoint(params, ckpt, config_echo)
        artifacts["checkpoint"] = ckpt
        _write_manifest(args.out, config_echo, seed, artifacts)
        _log("gibbs training done")
        return 0

    trainer = {"pc": train_pc, "ml": train_ml_slda, "bp": train_bp_slda}.get(
        objective)
    if trainer is None:
        _usage_error(f"unknown objective {objective!r}")
    if objective == "bp" and lams != [0.0]:
        _log("warning: --objective bp ignores --lambda")
    if objective in ("pc", "ml") and corpus.labels is None and lams != [0.0]:
        raise DataFormatError(f"objective {objective} requires --labels")

    valid = None
    if args.valid_corpus:
        valid = read_corpus(args.valid_corpus, args.valid_labels)

    base_cfg = TrainConfig(
        objective={"pc": "pc", "ml": "ml_replicated", "bp": "bp"}[objective],
        lam=lams[0], epochs=int(opts["epochs"]),
        adam=AdamConfig(learning_rate=float(opts["learning_rate"])),
        reg=RegConfig(float(opts["tau_phi"]), float(opts["tau_eta"])),
        embed=embed_cfg, seed=seed, init=str(opts["init"]))
    init_params = _build_init(opts, corpus, objective)

    if len(lams) > 1:
        if objective != "pc":
            _usage_error("the lambda ladder form applies to --objective pc only")
        rungs = lambda_ladder(corpus, lams, base_cfg, init_params, valid)
        best = None
        for rung in rungs:
            if rung.params is None:
                _log(f"lambda={rung.lam}: diverged, skipped")
                continue
            ckpt = os.path.join(args.out, f"checkpoint_lam{rung.lam:g}.json")
            write_checkpoint(rung.params, ckpt,
                             {**config_echo, "lambda": rung.lam})
            artifacts[f"checkpoint_lam{rung.lam:g}"] = ckpt
            if rung.is_best:
                best = (rung, ckpt)
        if best is not None:
            marker = os.path.join(args.out, "best.json")
            _atomic_write_text(marker, json.dumps(
                {"best_lambda": best[0].lam, "checkpoint": best[1],
                 "validation_label_nll": best[0].metric},
                indent=1, sort_keys=True) + "\n")
            artifacts["best_marker"] = marker
        _write_manifest(args.out, config_echo, seed, artifacts)
        return 0

    params, trace = trainer(corpus, init_params, base_cfg, valid)
    ckpt = os.path.join(args.out, "checkpoint.json")
    trace_path = os.path.join(args.out, "trace.json")
    write_checkpoint(params, ckpt, config_echo)
    _atomic_write_text(trace_path, json.dumps(_trace_payload(trace),
                                              indent=1, sort_keys=True) + "\n")
    artifacts.update({"checkpoint": ckpt, "trace": trace_path})
    _write_manifest(args.out, config_echo, seed, artifacts)
    _log(f"{objective} training done ({len(trace.train)} epochs)")
    return 0


# ---------------------------------------------------------------------------
# eval / landscape / report

def _load_model_and_corpus(model_path, corpus_path, labels_path):
    params, echo = read_checkpoint(model_path)
    corpus = read_corpus(corpus_path, labels_path)
    if params.vocab_size != corpus.vocab_size:
        raise DataFormatError(
            f"vocabulary mismatch: checkpoint V={params.vocab_size}, "
            f"corpus V={corpus.vocab_size}")
    return params, echo, corpus


def cmd_eval(args):
    params, echo, corpus = _load_model_and_corpus(args.model, args.corpus,
                                                  args.labels)
    _prepare_out_dir(args.out, getattr(args, "force", False))
    cfg = EmbedConfig(T=int(args.embed_iters), nu=float(args.embed_step))
    modes = {"predict": ["predict"], "train": ["train"],
             "both": ["train", "predict"]}.get(args.map_mode)
    if modes is None:
        _usage_error("--map-mode must be predict, train, or both")
    method = args.method or echo.get("command", "model")
    lam = float(echo.get("lambda", echo.get("lam", 0.0) or 0.0))
    records = [heldout_metrics(corpus, params, cfg, map_mode=m, method=method,
                               lam=lam, split=args.split_name,
                               train_mode_weight=float(args.train_mode_weight))
               for m in modes]
    csv_path = os.path.join(args.out, "metrics.csv")
    json_path = os.path.join(args.out, "metrics.json")
    write_metrics(records, csv_path, json_path)
    config = {"command": "eval", "model": args.model, "map_mode": args.map_mode,
              "split_name": args.split_name}
    _write_manifest(args.out, config, 0,
                    {"metrics_csv": csv_path, "metrics_json": json_path})
    return 0


def cmd_landscape(args):
    _prepare_out_dir(args.out, getattr(args, "force", False))
    corpus = read_corpus(args.corpus, args.labels)
    cfg = EmbedConfig(T=int(args.embed_iters), nu=float(args.embed_step))
    models = []
    for path in args.models.split(","):
        params, echo = read_checkpoint(path)
        if params.vocab_size != corpus.vocab_size:
            raise DataFormatError(
                f"vocabulary mismatch: checkpoint V={params.vocab_size}, "
                f"corpus V={corpus.vocab_size}")
        tag = echo.get("method") or echo.get("command") \
            or os.path.splitext(os.path.basename(path))[0]
        lam = float(echo.get("lambda", echo.get("lam", 0.0) or 0.0))
        models.append((tag, lam, params))
    records, errors = fitness_landscape(models, corpus, cfg,
                                        split=args.split_name)
    for tag, mode, err in errors:
        _log(f"warning: {tag} ({mode} mode) failed: {err}")
    csv_path = os.path.join(args.out, "landscape.csv")
    json_path = os.path.join(args.out, "landscape.json")
    write_metrics(records, csv_path, json_path)
    config = {"command": "landscape", "models": args.models,
              "split_name": args.split_name}
    _write_manifest(args.out, config, 0,
                    {"landscape_csv": csv_path, "landscape_json": json_path})
    return 0


def cmd_report_topics(args):
    params, _, corpus = _load_model_and_corpus(args.model, args.corpus,
                                               args.labels)
    _prepare_out_dir(args.out, getattr(args, "force", False))
    cfg = EmbedConfig(T=int(args.embed_iters), nu=float(args.embed_step))
    report = topic_report(params, corpus, cfg, top_n=int(args.top_n))
    path = os.path.join(args.out, "topics.txt")
    _atomic_write_text(path, format_topic_report(report))
    config = {"command": "report-topics", "model": args.model,
              "top_n": int(args.top_n)}
    _write_manifest(args.out, config, 0, {"topics": path})
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pclda",
        description="Prediction-constrained supervised topic models")
    sub = parser.add_subparsers(dest="cmd", required=True)

    gen = sub.add_parser("gen", help="generate synthetic corpora")
    gen_sub = gen.add_subparsers(dest="kind", required=True)
    for kind, fn in (("toy-bars", cmd_gen_toy_bars), ("ehr-like", cmd_gen_ehr)):
        g = gen_sub.add_parser(kind)
        g.add_argument("--n-docs", type=int, dest="n_docs")
        g.add_argument("--seed", type=int)
        g.add_argument("--out", required=True)
        g.add_argument("--force", action="store_true")
        g.add_argument("--config")
        if kind == "toy-bars":
            g.add_argument("--positive-fraction", type=float,
                           dest="positive_fraction")
        else:
            g.add_argument("--vocab-size", type=int, dest="vocab_size")
            g.add_argument("--n-labels", type=int, dest="n_labels")
            g.add_argument("--k-true", type=int, dest="k_true")
        g.set_defaults(func=fn)

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--objective", required=True,
                    choices=["pc", "ml", "bp", "gibbs"])
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--labels")
    tr.add_argument("--valid-corpus", dest="valid_corpus")
    tr.add_argument("--valid-labels", dest="valid_labels")
    tr.add_argument("--k", type=int)
    tr.add_argument("--lambda", dest="lam")
    tr.add_argument("--warm-start", action="store_true", dest="warm_start")
    tr.add_argument("--init")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--alpha", type=float)
    tr.add_argument("--embed-iters", type=int, dest="embed_iters")
    tr.add_argument("--embed-step", type=float, dest="embed_step")
    tr.add_argument("--learning-rate", type=float, dest="learning_rate")
    tr.add_argument("--tau-phi", type=float, dest="tau_phi")
    tr.add_argument("--tau-eta", type=float, dest="tau_eta")
    tr.add_argument("--gibbs-sweeps", type=int, dest="gibbs_sweeps")
    tr.add_argument("--gibbs-burn-in", type=int, dest="gibbs_burn_in")
    tr.add_argument("--beta-word", type=float, dest="beta_word")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--threads", type=int)
    tr.add_argument("--config")
    tr.add_argument("--out", required=True)
    tr.add_argument("--force", action="store_true")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="heldout metrics for a checkpoint")
    ev.add_argument("--model", required=True)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--labels")
    ev.add_argument("--map-mode", default="predict", dest="map_mode")
    ev.add_argument("--split-name", default="test", dest="split_name")
    ev.add_argument("--method", default="")
    ev.add_argument("--train-mode-weight", default=1.0, dest="train_mode_weight")
    ev.add_argument("--embed-iters", type=int, default=100, dest="embed_iters")
    ev.add_argument("--embed-step", type=float, default=0.005, dest="embed_step")
    ev.add_argument("--out", required=True)
    ev.add_argument("--force", action="store_true")
    ev.set_defaults(func=cmd_eval)

    ls = sub.add_parser("landscape", help="fitness landscape over models")
    ls.add_argument("--models", required=True)
    ls.add_argument("--corpus", required=True)
    ls.add_argument("--labels", required=True)
    ls.add_argument("--split-name", default="train", dest="split_name")
    ls.add_argument("--embed-iters", type=int, default=100, dest="embed_iters")
    ls.add_argument("--embed-step", type=float, default=0.005, dest="embed_step")
    ls.add_argument("--out", required=True)
    ls.add_argument("--force", action="store_true")
    ls.set_defaults(func=cmd_landscape)

    rp = sub.add_parser("report-topics", help="topic interpretation report")
    rp.add_argument("--model", required=True)
    rp.add_argument("--corpus", required=True)
    rp.add_argument("--labels")
    rp.add_argument("--top-n", type=int, default=10, dest="top_n")
    rp.add_argument("--embed-iters", type=int, default=100, dest="embed_iters")
    rp.add_argument("--embed-step", type=float, default=0.005, dest="embed_step")
    rp.add_argument("--out", required=True)
    rp.add_argument("--force", action="store_true")
    rp.set_defaults(func=cmd_report_topics)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        _log(f"error: {exc}")
        return EXIT_DIVERGED
    except (DataFormatError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except InvalidParameterError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except PCLDAError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
