"""Command-line pipeline driver.

Stages share one output directory and communicate through artifacts, so
they can run end-to-end (`run`) or one at a time:

    driftmf run --config exp.json --out runs/exp1
    driftmf generate --n-users 500 --n-items 500 --seed 1 --out runs/s1
    driftmf train --out runs/s1
    ...
    driftmf sweep --param lasso_lambda --values "[0.001, 0.01, 0.1]" --out runs/lam

Config values come from the JSON file given with --config; any flag
overrides the file.  Relative --out paths resolve under $DRIFTMF_OUT
when that variable is set.
"""

import argparse
import json
import os
import sys

from . import pipeline
from .errors import ConfigError, DriftMFError, StageError

ENV_OUT = "DRIFTMF_OUT"

_TOP_FLAGS = ("mode", "seed", "threads", "data_path", "data_format", "n_slices",
              "window", "equal_duration", "step_epochs", "step_learning_rate",
              "lasso_lambda", "lasso_regressor")
_SYNTH_FLAGS = ("n_users", "n_items", "density", "n_steps", "trans_range",
                "bias_range", "noise_sd")
_HYPER_FLAGS = ("n_factors", "learning_rate", "reg", "epochs")


def _add_config_flags(p):
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.add_argument("--out", metavar="DIR",
                   help=f"output directory (relative paths resolve under ${ENV_OUT})")
    p.add_argument("--mode", choices=pipeline.MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int,
                   help="workers for per-user stages; 1 (default) is fully deterministic")
    p.add_argument("--data", dest="data_path", metavar="FILE",
                   help="rating log file (real mode)")
    p.add_argument("--data-format", choices=("csv", "tsv"))
    p.add_argument("--n-slices", type=int, help="chronological slices (real mode)")
    p.add_argument("--window", type=int, help="slices merged per step (real mode)")
    p.add_argument("--equal-duration", action="store_true", default=None,
                   help="slice by equal time span instead of equal count")
    p.add_argument("--step-epochs", type=int, help="per-step SGD passes")
    p.add_argument("--step-learning-rate", type=float)
    p.add_argument("--lasso-lambda", type=float, help="L1 weight for drift fitting")
    p.add_argument("--lasso-regressor", choices=("previous", "current"))
    p.add_argument("--clamp", nargs=2, type=float, metavar=("LO", "HI"),
                   help="clip predictions to a rating range")
    g = p.add_argument_group("synthetic corpus")
    g.add_argument("--n-users", type=int)
    g.add_argument("--n-items", type=int)
    g.add_argument("--density", type=float)
    g.add_argument("--n-steps", type=int)
    g.add_argument("--r-range", dest="trans_range", nargs=2, type=float,
                   metavar=("LO", "HI"), help="range of transition deviation entries")
    g.add_argument("--b-range", dest="bias_range", nargs=2, type=float,
                   metavar=("LO", "HI"), help="range of drift vector entries")
    g.add_argument("--noise-sd", type=float)
    h = p.add_argument_group("factorization")
    h.add_argument("--n-factors", "-D", dest="n_factors", type=int)
    h.add_argument("--alpha", "--learning-rate", dest="learning_rate", type=float)
    h.add_argument("--reg", type=float)
    h.add_argument("--epochs", type=int)


def _resolve_out(args, doc):
    out = args.out or doc.get("out_dir") or "run"
    root = os.environ.get(ENV_OUT)
    if root and not os.path.isabs(out):
        out = os.path.join(root, out)
    return out


def build_config(args):
    """Merge config file and flags (flag wins) into a RunConfig."""
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: not valid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    for key in _TOP_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "clamp", None) is not None:
        doc["clamp"] = list(args.clamp)
    synth_over = {k: getattr(args, k, None) for k in _SYNTH_FLAGS}
    synth_over = {k: v for k, v in synth_over.items() if v is not None}
    # -D applies to the generator as well so truth and model ranks agree
    if args.n_factors is not None and doc.get("mode", "synthetic") == "synthetic":
        synth_over["n_factors"] = args.n_factors
    if synth_over:
        if doc.get("mode", "synthetic") != "synthetic":
            raise ConfigError("synthetic-corpus flags require synthetic mode")
        block = dict(doc.get("synth") or {})
        for k, v in synth_over.items():
            block[k] = list(v) if isinstance(v, (list, tuple)) else v
        doc["synth"] = block
    hyper_over = {k: getattr(args, k, None) for k in _HYPER_FLAGS}
    hyper_over = {k: v for k, v in hyper_over.items() if v is not None}
    if hyper_over:
        block = dict(doc.get("hyper") or {})
        block.update(hyper_over)
        doc["hyper"] = block
    doc["out_dir"] = _resolve_out(args, doc)
    return pipeline.config_from_dict(doc)


def _print_report(report):
    print(f"rmse_static={report.rmse_static:.6f} "
          f"rmse_tracked={report.rmse_tracked:.6f} "
          f"improvement={report.improvement_pct:.2f}% n_test={report.n_test}")


def cmd_generate(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    corp = pipeline.prepare_corpus(cfg)
    print(f"corpus: {corp.training.n_ratings} training / {corp.testing.n_ratings} test "
          f"ratings, {corp.n_users} users x {corp.n_items} items, "
          f"{corp.t_total - 1} steps -> {cfg.out_dir}")


def cmd_train(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    model = pipeline.train_stage(cfg)
    print(f"model: {model.n_users} users x {model.n_items} items, "
          f"{model.n_factors} factors -> {cfg.out_dir}")


def cmd_track(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    traj = pipeline.track_stage(cfg)
    print(f"trajectories: {traj.n_steps} steps x {traj.n_users} users -> {cfg.out_dir}")


def cmd_fit_dynamics(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    tset = pipeline.fit_stage(cfg)
    s = tset.summary()
    print(f"transitions: {s['n_drifting']} drifting / {s['n_identity_like']} identity-like "
          f"users, mean nnz {s['mean_nnz']:.2f} -> {cfg.out_dir}")


def cmd_predict(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    static_pred, _ = pipeline.predict_stage(cfg)
    print(f"predictions: {static_pred.size} rows -> "
          f"{pipeline.artifact_path(cfg.out_dir, 'predictions')}")


def cmd_evaluate(args):
    cfg = build_config(args)
    pipeline.write_manifest(cfg)
    _print_report(pipeline.evaluate_stage(cfg))


def cmd_run(args):
    cfg = build_config(args)
    _print_report(pipeline.run_experiment(cfg))


def cmd_sweep(args):
    cfg = build_config(args)
    try:
        values = json.loads(args.values)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--values is not valid JSON: {exc}") from None
    if not isinstance(values, list):
        raise ConfigError("--values must be a JSON list")
    rows = pipeline.sweep(cfg, args.param, values, seed_policy=args.seed_policy)
    for row in rows:
        print(f"{row['param']}={row['value']}: rmse_static={row['rmse_static']:.6f} "
              f"rmse_tracked={row['rmse_tracked']:.6f} "
              f"improvement={row['improvement_pct']:.2f}%")
    print(f"sweep table -> {pipeline.artifact_path(cfg.out_dir, 'sweep_csv')}")


_STAGE_NAMES = {
    cmd_generate: "generate",
    cmd_train: "train",
    cmd_track: "track",
    cmd_fit_dynamics: "fit-dynamics",
    cmd_predict: "predict",
    cmd_evaluate: "evaluate",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="driftmf",
        description="Matrix factorization with per-user preference-drift "
                    "tracking and forecasting.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    specs = [
        ("generate", cmd_generate, "materialize the corpus (synthetic or from logs)"),
        ("train", cmd_train, "fit static factors on the training set"),
        ("track", cmd_track, "learn per-step user factors with items frozen"),
        ("fit-dynamics", cmd_fit_dynamics, "fit per-user drift models from trajectories"),
        ("predict", cmd_predict, "forecast and score the test triplets"),
        ("evaluate", cmd_evaluate, "build report files from stored predictions"),
        ("run", cmd_run, "all stages end to end"),
        ("sweep", cmd_sweep, "repeat `run` over a parameter grid"),
    ]
    for name, handler, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == "sweep":
            p.add_argument("--param", required=True,
                           help="one of: " + ", ".join(sorted(pipeline._SWEEP_PARAMS)))
            p.add_argument("--values", required=True,
                           help='JSON list, e.g. "[0.001, 0.1]" or "[[-0.1, 0.1]]"')
            p.add_argument("--seed-policy", choices=pipeline.SEED_POLICIES,
                           default="shared")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return 2
    stage = _STAGE_NAMES.get(args.handler)
    try:
        try:
            args.handler(args)
        except StageError:
            raise
        except DriftMFError as exc:
            if stage is not None:
                raise StageError(stage, exc) from exc
            raise
    except DriftMFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
