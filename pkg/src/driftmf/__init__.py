"""Matrix factorization with per-user preference-drift tracking.

The pieces compose in pipeline order: build or ingest a sliced corpus,
fit static factors, track per-step user factors against frozen item
factors, fit per-user linear drift models, forecast one step ahead, and
score both predictors on the held-out final slice.
"""

from .corpus import (
    IdMaps,
    RatingLog,
    SlicedCorpus,
    SparseRatings,
    filter_test_set,
    ingest,
    load_corpus,
    save_corpus,
    slice_and_window,
)
from .dynamics import (
    TransitionModel,
    TransitionSet,
    fit_all,
    fit_transition,
    forecast,
    forecast_all,
)
from .errors import (
    ConfigError,
    DivergenceError,
    DriftMFError,
    EmptyCorpusError,
    EmptyTestSetError,
    ParseError,
    StageError,
)
from .evaluator import (
    DissimilarityCurve,
    EvalReport,
    compare_report,
    dissimilarity,
    dissimilarity_curve,
    rmse,
)
from .factorizer import FactorModel, HyperParams, load_model, predict, predict_many, save_model, train
from .lasso import LassoProblem, LassoSolution, solve, solve_multi
from .pipeline import RunConfig, load_config, run_experiment, sweep
from .synthgen import SynthConfig, SynthTruth, generate
from .tracker import Trajectories, load_trajectories, save_trajectories, track

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DissimilarityCurve",
    "DivergenceError",
    "DriftMFError",
    "EmptyCorpusError",
    "EmptyTestSetError",
    "EvalReport",
    "FactorModel",
    "HyperParams",
    "IdMaps",
    "LassoProblem",
    "LassoSolution",
    "ParseError",
    "RatingLog",
    "RunConfig",
    "SlicedCorpus",
    "SparseRatings",
    "StageError",
    "SynthConfig",
    "SynthTruth",
    "Trajectories",
    "TransitionModel",
    "TransitionSet",
    "compare_report",
    "dissimilarity",
    "dissimilarity_curve",
    "filter_test_set",
    "fit_all",
    "fit_transition",
    "forecast",
    "forecast_all",
    "generate",
    "ingest",
    "load_config",
    "load_corpus",
    "load_model",
    "load_trajectories",
    "predict",
    "predict_many",
    "rmse",
    "run_experiment",
    "save_corpus",
    "save_model",
    "save_trajectories",
    "slice_and_window",
    "solve",
    "solve_multi",
    "sweep",
    "track",
    "train",
]
