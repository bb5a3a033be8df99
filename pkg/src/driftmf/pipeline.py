"""End-to-end experiment driver built on resumable stage artifacts.

All stages read and write one output directory:

    corpus/         corpus.npz, truth.npz (synthetic mode only)
    model/          model.npz
    trajectories/   trajectories.npz, trajectories.csv
    transitions/    transitions.npz, transitions.jsonl
    report/         predictions.csv, report.json, report.csv, curve.csv
    manifest.json

Each artifact is a pure function of the config and its upstream
artifacts, and nothing here embeds wall-clock state, so re-running with
the same config reproduces report files byte for byte (single thread;
more threads give the same numbers, only .npz container bytes may vary).
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import corpus as corpus_io
from . import dynamics, evaluator, factorizer, synthgen, tracker
from .errors import ConfigError, StageError
from .factorizer import HyperParams
from .synthgen import SynthConfig

try:
    from importlib.metadata import version as _dist_version
    PACKAGE_VERSION = _dist_version("driftmf")
except Exception:        # running from a source tree without install
    PACKAGE_VERSION = "unknown"

MANIFEST_NAME = "manifest.json"

_log = logging.getLogger(__name__)

ARTIFACTS = {
    "corpus": os.path.join("corpus", "corpus.npz"),
    "truth": os.path.join("corpus", "truth.npz"),
    "model": os.path.join("model", "model.npz"),
    "trajectories": os.path.join("trajectories", "trajectories.npz"),
    "trajectories_csv": os.path.join("trajectories", "trajectories.csv"),
    "transitions": os.path.join("transitions", "transitions.npz"),
    "transitions_jsonl": os.path.join("transitions", "transitions.jsonl"),
    "predictions": os.path.join("report", "predictions.csv"),
    "report_json": os.path.join("report", "report.json"),
    "report_csv": os.path.join("report", "report.csv"),
    "curve_csv": os.path.join("report", "curve.csv"),
    "sweep_csv": os.path.join("report", "sweep.csv"),
}

MODES = ("synthetic", "real")
SEED_POLICIES = ("shared", "derived")


def derived_seed(seed):
    """A companion seed decorrelated from `seed` (SGD init must not
    coincide with the synthetic truth drawn from the same seed)."""
    return int(np.random.SeedSequence(seed).generate_state(2)[1])


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs; JSON-serializable."""

    mode: str = "synthetic"
    out_dir: str = "run"
    seed: int = 0
    synth: SynthConfig = None
    hyper: HyperParams = None
    data_path: str = None
    data_format: str = "csv"
    n_slices: int = 10
    window: int = 5
    equal_duration: bool = False
    step_epochs: int = None        # per-step SGD passes (default: trainer epochs)
    step_learning_rate: float = None
    lasso_lambda: float = 0.1
    lasso_regressor: str = "previous"
    clamp: tuple = None
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "synthetic":
            if self.data_path is not None:
                raise ConfigError("synthetic mode forbids a data path")
            if self.synth is None:
                object.__setattr__(self, "synth", SynthConfig(seed=self.seed))
        else:
            if not self.data_path:
                raise ConfigError("real mode requires a data path")
            if self.synth is not None:
                raise ConfigError("real mode forbids a synth block")
        if self.n_slices < 2:
            raise ConfigError(f"need at least 2 slices, got {self.n_slices}")
        if not 1 <= self.window <= self.n_slices - 1:
            raise ConfigError(
                f"window must be in [1, {self.n_slices - 1}], got {self.window}")
        if self.hyper is None:
            object.__setattr__(self, "hyper", HyperParams(seed=derived_seed(self.seed)))
        if self.step_epochs is not None and self.step_epochs < 1:
            raise ConfigError(f"step_epochs must be >= 1, got {self.step_epochs}")
        if self.step_learning_rate is not None and not self.step_learning_rate > 0:
            raise ConfigError("step_learning_rate must be > 0")
        if self.lasso_lambda < 0:
            raise ConfigError(f"lasso_lambda must be >= 0, got {self.lasso_lambda}")
        if self.lasso_regressor not in dynamics.REGRESSOR_CHOICES:
            raise ConfigError(
                f"lasso_regressor must be one of {dynamics.REGRESSOR_CHOICES}")
        if self.clamp is not None:
            lo, hi = self.clamp
            if lo > hi:
                raise ConfigError(f"clamp range is inverted: {self.clamp}")
            object.__setattr__(self, "clamp", (float(lo), float(hi)))
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


_SYNTH_ALIASES = {"r_range": "trans_range", "b_range": "bias_range"}
_KNOWN_KEYS = {
    "mode", "out_dir", "seed", "synth", "hyper", "data_path", "data_format",
    "n_slices", "window", "equal_duration", "step_epochs", "step_learning_rate",
    "lasso_lambda", "lasso_regressor", "clamp", "threads",
}


def config_from_dict(doc):
    """Build a RunConfig from a parsed JSON document.

    Unknown keys are rejected.  Omitted seeds are filled from the top
    level: the generator uses `seed` itself, SGD a derived companion.
    """
    doc = dict(doc)
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    seed = int(doc.get("seed", 0))
    mode = doc.get("mode", "synthetic")
    synth = None
    if mode == "synthetic":
        block = dict(doc.get("synth") or {})
        for alias, field_name in _SYNTH_ALIASES.items():
            if alias in block:
                block[field_name] = block.pop(alias)
        for key in ("trans_range", "bias_range"):
            if key in block:
                block[key] = tuple(block[key])
        block.setdefault("seed", seed)
        try:
            synth = SynthConfig(**block)
        except TypeError as exc:
            raise ConfigError(f"bad synth block: {exc}") from None
    hyper_block = dict(doc.get("hyper") or {})
    hyper_block.setdefault("seed", derived_seed(seed))
    try:
        hyper = HyperParams(**hyper_block)
    except TypeError as exc:
        raise ConfigError(f"bad hyper block: {exc}") from None
    clamp = doc.get("clamp")
    kwargs = {k: doc[k] for k in doc
              if k in _KNOWN_KEYS - {"synth", "hyper", "clamp", "seed", "mode"}}
    return RunConfig(mode=mode, seed=seed, synth=synth, hyper=hyper,
                     clamp=tuple(clamp) if clamp is not None else None, **kwargs)


def config_to_dict(cfg):
    doc = asdict(cfg)
    if doc["synth"] is None:
        del doc["synth"]
        doc["data_path"] = cfg.data_path
    else:
        for key in ("trans_range", "bias_range"):
            doc["synth"][key] = list(doc["synth"][key])
        for key in ("data_path",):
            del doc[key]
    if doc.get("clamp") is not None:
        doc["clamp"] = list(doc["clamp"])
    return doc


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(doc)


def artifact_path(out_dir, key, create=False):
    path = os.path.join(out_dir, ARTIFACTS[key])
    if create:
        os.makedirs(os.path.dirname(path), exist_ok=True)
    return path


def _require(out_dir, key, producer):
    path = artifact_path(out_dir, key)
    if not os.path.exists(path):
        raise ConfigError(f"missing artifact {path}; run the `{producer}` stage first")
    return path


def write_manifest(cfg):
    doc = config_to_dict(cfg)
    blob = json.dumps(doc, sort_keys=True)
    manifest = {
        "config": doc,
        "config_sha256": hashlib.sha256(blob.encode("utf-8")).hexdigest(),
        "package_version": PACKAGE_VERSION,
        "artifact_formats": {
            "corpus": corpus_io.CORPUS_FORMAT_VERSION,
            "truth": synthgen.TRUTH_FORMAT_VERSION,
            "model": factorizer.MODEL_FORMAT_VERSION,
            "trajectories": tracker.TRAJECTORY_FORMAT_VERSION,
            "transitions": dynamics.TRANSITIONS_FORMAT_VERSION,
        },
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def prepare_corpus(cfg):
    """`generate` stage: materialize the corpus (and truth) artifacts."""
    if cfg.mode == "synthetic":
        corp, truth = synthgen.generate(cfg.synth)
        synthgen.save_truth(truth, artifact_path(cfg.out_dir, "truth", create=True))
    else:
        logs = corpus_io.ingest(cfg.data_path, cfg.data_format)
        corp = corpus_io.slice_and_window(logs, cfg.n_slices, cfg.window,
                                          equal_duration=cfg.equal_duration)
        corp = corpus_io.filter_test_set(corp)
    corpus_io.save_corpus(corp, artifact_path(cfg.out_dir, "corpus", create=True))
    return corp


def train_stage(cfg):
    corp = corpus_io.load_corpus(_require(cfg.out_dir, "corpus", "generate"))
    model = factorizer.train(corp.training, cfg.hyper)
    factorizer.save_model(model, cfg.hyper, artifact_path(cfg.out_dir, "model", create=True))
    return model


def track_stage(cfg):
    corp = corpus_io.load_corpus(_require(cfg.out_dir, "corpus", "generate"))
    model, _ = factorizer.load_model(_require(cfg.out_dir, "model", "train"))
    traj = tracker.track(corp, model, cfg.hyper, epochs=cfg.step_epochs,
                         learning_rate=cfg.step_learning_rate, threads=cfg.threads)
    tracker.save_trajectories(traj, artifact_path(cfg.out_dir, "trajectories", create=True))
    tracker.write_trajectories_csv(traj, artifact_path(cfg.out_dir, "trajectories_csv"),
                                   ids=corp.ids)
    return traj


def fit_stage(cfg):
    corp = corpus_io.load_corpus(_require(cfg.out_dir, "corpus", "generate"))
    traj = tracker.load_trajectories(_require(cfg.out_dir, "trajectories", "track"))
    tset = dynamics.fit_all(traj, cfg.lasso_lambda, regress_on=cfg.lasso_regressor,
                            threads=cfg.threads)
    dynamics.save_transitions(tset, artifact_path(cfg.out_dir, "transitions", create=True))
    dynamics.write_transitions_jsonl(tset, artifact_path(cfg.out_dir, "transitions_jsonl"),
                                     ids=corp.ids)
    return tset


def _write_predictions_csv(corp, static_pred, tracked_pred, path):
    test = corp.testing
    ids = corp.ids
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user,item,actual,static,tracked\n")
        for k in range(test.n_ratings):
            fh.write(",".join((
                ids.users[test.users[k]],
                ids.items[test.items[k]],
                repr(float(test.values[k])),
                repr(float(static_pred[k])),
                repr(float(tracked_pred[k])),
            )) + "\n")


def _read_predictions_csv(path):
    actual, static_pred, tracked_pred = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "user,item,actual,static,tracked":
            raise ConfigError(f"{path}: unrecognized predictions header")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            actual.append(float(parts[2]))
            static_pred.append(float(parts[3]))
            tracked_pred.append(float(parts[4]))
    return np.array(actual), np.array(static_pred), np.array(tracked_pred)


def predict_stage(cfg):
    """Score the test triplets with both predictors from saved artifacts."""
    corp = corpus_io.load_corpus(_require(cfg.out_dir, "corpus", "generate"))
    model, _ = factorizer.load_model(_require(cfg.out_dir, "model", "train"))
    traj = tracker.load_trajectories(_require(cfg.out_dir, "trajectories", "track"))
    tset = dynamics.load_transitions(_require(cfg.out_dir, "transitions", "fit-dynamics"))
    forecast_states = dynamics.forecast_all(tset, traj.last())
    test = corp.testing
    static_pred = factorizer.predict_many(model, test.users, test.items, clamp=cfg.clamp)
    tracked_pred = dynamics.predict_from_states(forecast_states, model.item_factors,
                                                test.users, test.items, clamp=cfg.clamp)
    _write_predictions_csv(corp, static_pred, tracked_pred,
                           artifact_path(cfg.out_dir, "predictions", create=True))
    return static_pred, tracked_pred


def evaluate_stage(cfg):
    """Build report.json / report.csv (and curve.csv when truth exists)."""
    corp = corpus_io.load_corpus(_require(cfg.out_dir, "corpus", "generate"))
    actual, static_pred, tracked_pred = _read_predictions_csv(
        _require(cfg.out_dir, "predictions", "predict"))
    if actual.size != corp.testing.n_ratings:
        raise ConfigError("predictions do not align with the stored test set")
    report = evaluator.compare_report(corp, static_pred, tracked_pred)
    extra = {}
    transitions_path = artifact_path(cfg.out_dir, "transitions")
    if os.path.exists(transitions_path):
        extra["transitions"] = dynamics.load_transitions(transitions_path).summary()
    truth_path = artifact_path(cfg.out_dir, "truth")
    if os.path.exists(truth_path):
        truth = synthgen.load_truth(truth_path)
        traj = tracker.load_trajectories(_require(cfg.out_dir, "trajectories", "track"))
        model, _ = factorizer.load_model(_require(cfg.out_dir, "model", "train"))
        if truth.states.shape[2] != traj.n_factors:
            # generator and model ranks differ (deliberate ablation);
            # the latent comparison is undefined then
            _log.warning("skipping dissimilarity curve: truth rank %d, model rank %d",
                         truth.states.shape[2], traj.n_factors)
        else:
            curve = evaluator.dissimilarity_curve(traj, truth, model)
            evaluator.write_curve_csv(curve, artifact_path(cfg.out_dir, "curve_csv", create=True))
            extra["dissimilarity"] = {
                "final_static": float(curve.static[-1]),
                "final_tracked": float(curve.tracked[-1]),
                "final_gain_pct": round(float(curve.gain()[-1]) * 100.0, 2),
            }
    evaluator.write_report_json(report, artifact_path(cfg.out_dir, "report_json", create=True),
                                extra=extra)
    evaluator.write_report_csv(report, artifact_path(cfg.out_dir, "report_csv"))
    return report


STAGE_ORDER = (
    ("generate", prepare_corpus),
    ("train", train_stage),
    ("track", track_stage),
    ("fit-dynamics", fit_stage),
    ("predict", predict_stage),
    ("evaluate", evaluate_stage),
)


def run_experiment(cfg):
    """Run every stage in order; returns the final EvalReport.

    A failing stage raises StageError naming the stage; artifacts
    written before the failure stay on disk.
    """
    write_manifest(cfg)
    report = None
    for name, fn in STAGE_ORDER:
        try:
            report = fn(cfg)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
    return report


_SWEEP_PARAMS = {
    "r_range": ("synth", "trans_range", "pair"),
    "trans_range": ("synth", "trans_range", "pair"),
    "b_range": ("synth", "bias_range", "pair"),
    "bias_range": ("synth", "bias_range", "pair"),
    "lasso_lambda": ("self", "lasso_lambda", "float"),
    "D": ("hyper", "n_factors", "int"),
    "n_factors": ("hyper", "n_factors", "int"),
    "alpha": ("hyper", "learning_rate", "float"),
    "learning_rate": ("hyper", "learning_rate", "float"),
}


def _coerce_sweep_value(kind, value):
    if kind == "pair":
        lo, hi = value
        return (float(lo), float(hi))
    return int(value) if kind == "int" else float(value)


def _apply_sweep_value(cfg, param, value):
    target, field_name, kind = _SWEEP_PARAMS[param]
    value = _coerce_sweep_value(kind, value)
    if target == "self":
        return replace(cfg, **{field_name: value})
    if target == "synth":
        if cfg.synth is None:
            raise ConfigError(f"cannot sweep {param} outside synthetic mode")
        return replace(cfg, synth=replace(cfg.synth, **{field_name: value}))
    return replace(cfg, hyper=replace(cfg.hyper, **{field_name: value}))


def _reseed(cfg, seed):
    parts = {"seed": seed, "hyper": replace(cfg.hyper, seed=derived_seed(seed))}
    if cfg.synth is not None:
        parts["synth"] = replace(cfg.synth, seed=seed)
    return replace(cfg, **parts)


def sweep(cfg, param, values, seed_policy="shared"):
    """One full run per value; consolidated table at report/sweep.csv.

    `seed_policy` "shared" reuses cfg's seeds for every value; "derived"
    reseeds run k from cfg.seed + k.
    """
    if param not in _SWEEP_PARAMS:
        raise ConfigError(
            f"unknown sweep parameter {param!r}; choose from {sorted(_SWEEP_PARAMS)}")
    if seed_policy not in SEED_POLICIES:
        raise ConfigError(f"seed_policy must be one of {SEED_POLICIES}")
    rows = []
    for k, value in enumerate(values):
        sub = _apply_sweep_value(cfg, param, value)
        if seed_policy == "derived":
            sub = _reseed(sub, cfg.seed + k)
        sub = replace(sub, out_dir=os.path.join(cfg.out_dir, "sweep", f"{param}-{k:03d}"))
        report = run_experiment(sub)
        summary = dynamics.load_transitions(artifact_path(sub.out_dir, "transitions")).summary()
        rows.append({
            "param": param,
            "value": json.dumps(value),
            "rmse_static": report.rmse_static,
            "rmse_tracked": report.rmse_tracked,
            "improvement_pct": report.improvement_pct,
            "n_test": report.n_test,
            "mean_nnz": summary["mean_nnz"],
            "out_dir": sub.out_dir,
        })
    path = artifact_path(cfg.out_dir, "sweep_csv", create=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("param,value,rmse_static,rmse_tracked,improvement_pct,n_test,mean_nnz,out_dir\n")
        for row in rows:
            fh.write(",".join((
                row["param"],
                '"' + row["value"].replace('"', '""') + '"',
                repr(row["rmse_static"]),
                repr(row["rmse_tracked"]),
                repr(row["improvement_pct"]),
                str(row["n_test"]),
                repr(row["mean_nnz"]),
                row["out_dir"],
            )) + "\n")
    return rows
