"""Tree-ensemble regression with leaf-local Gaussian-process extrapolation.

The package provides:

- ``ensemble``: stochastic additive regression trees fit by grow-from-root
  backfitting sweeps, with posterior-predictive intervals;
- ``gpx``: Gaussian-process extrapolation of each leaf's residuals for test
  points outside the leaf's training range;
- ``causal``: the two-forest treatment-effect variant that extrapolates
  effects into regions without treatment/control overlap;
- ``conformal``: Jackknife+ and CV+ interval baselines around any regressor;
- ``bench``: simulation DGPs, interior/exterior scoring, and an experiment
  runner;
- ``cli``: a command-line front end over the above.
"""

from .bench import (CausalDGP, MetricsRow, RegressionDGP, classify_exterior, gen_causal,
                    gen_regression, run_experiment, score)
from .causal import (CausalConfig, CausalDraws, CateResult, GPCateResult, OverlapRegion,
                     estimate_propensity, fit_xbcf, load_causal, overlap_region, predict_cate,
                     predict_cate_gp, save_causal)
from .conformal import (ConformalResult, RegressorSpec, cv_plus, ensemble_regressor,
                        jackknife_plus)
from .data import CausalDataset, Dataset, read_csv, write_csv
from .ensemble import (FitConfig, PosteriorDraws, PredictResult, fit, load, predict,
                       sample_sigma2, save)
from .errors import BartGPError, DataError, GPSingularError, ModelFormatError, NumericalError
from .gpx import (GPConfig, GPPredictResult, Hypercube, LeafGPContext, active_variables,
                  gp_conditional, leaf_hypercube, predict_from_root, predict_gp, sq_exp_kernel)
from .intervals import Interval, empirical_interval
from .rng import RngStream
from .tree import (SuffStats, Tree, TreePrior, grow_from_root, log_marginal,
                   sample_leaf_params, split_prob, tree_predict)

__version__ = "0.1.0"

__all__ = [
    "BartGPError", "CateResult", "CausalConfig", "CausalDGP", "CausalDataset", "CausalDraws",
    "ConformalResult", "DataError", "Dataset", "FitConfig", "GPCateResult", "GPConfig",
    "GPPredictResult", "GPSingularError", "Hypercube", "Interval", "LeafGPContext",
    "MetricsRow", "ModelFormatError", "NumericalError", "OverlapRegion", "PosteriorDraws",
    "PredictResult", "RegressionDGP", "RegressorSpec", "RngStream", "SuffStats", "Tree",
    "TreePrior", "active_variables", "classify_exterior", "cv_plus", "empirical_interval",
    "ensemble_regressor", "estimate_propensity", "fit", "fit_xbcf", "gen_causal",
    "gen_regression", "gp_conditional", "grow_from_root", "jackknife_plus", "leaf_hypercube",
    "load", "load_causal", "log_marginal", "overlap_region", "predict", "predict_cate",
    "predict_cate_gp", "predict_from_root", "predict_gp", "read_csv", "run_experiment",
    "sample_leaf_params", "sample_sigma2", "save", "save_causal", "score", "split_prob",
    "sq_exp_kernel", "tree_predict", "write_csv",
]
