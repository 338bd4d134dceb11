"""Discrete-time survival analysis of recurrent events with Gamma frailty.

The panel likelihood factors into closed-form conditional terms by folding
each subject's spells through a sequentially updated Gamma frailty state;
maximum-likelihood fitting, simulation harnesses, and predictive metrics sit
on top of that chain.
"""

from ._backend import backend_name
from .errors import (DimensionMismatchError, FFPSurvError, NumericalError,
                     PanelLikelihoodError, ValidationError)
from .estimation import (FitConfig, FittedModel, OverparamReport, fit,
                         initialize, overparam_check)
from .frailty import (XiPair, compute_xi, fold_chain, moment_matched_gamma,
                      posterior_moments_oracle, posterior_update)
from .io import (dataset_hash, read_model, read_panel_csv, write_model,
                 write_panel_csv)
from .likelihood import (ParameterVector, conditional_spell_likelihood,
                         dataset_loglik, dataset_loglik_grad, panel_loglik,
                         spell_likelihood)
from .metrics import (SurvivalCurve, c_index, evaluate_dataset,
                      integrated_brier, predict_survival, risk_score)
from .model import (DiscreteBaselineHazard, GammaParams, LinearTransform,
                    PanelDataset, Spell, build_baseline, transform)
from .simulation import (GammaFrailty, LogHazard, NonlinearPhi, SimConfig,
                         SqrtSinHazard, TwoPointFrailty, cumulative_hazard,
                         generate, make_setup, sample_duration)

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatchError", "FFPSurvError", "NumericalError",
    "PanelLikelihoodError", "ValidationError",
    "GammaParams", "DiscreteBaselineHazard", "LinearTransform", "Spell",
    "PanelDataset", "build_baseline", "transform",
    "XiPair", "compute_xi", "posterior_update", "moment_matched_gamma",
    "fold_chain", "posterior_moments_oracle",
    "ParameterVector", "spell_likelihood", "conditional_spell_likelihood",
    "panel_loglik", "dataset_loglik", "dataset_loglik_grad",
    "FitConfig", "FittedModel", "OverparamReport", "fit", "initialize",
    "overparam_check",
    "LogHazard", "SqrtSinHazard", "GammaFrailty", "TwoPointFrailty",
    "NonlinearPhi", "SimConfig", "cumulative_hazard", "sample_duration",
    "generate", "make_setup",
    "SurvivalCurve", "predict_survival", "risk_score", "c_index",
    "integrated_brier", "evaluate_dataset",
    "read_panel_csv", "write_panel_csv", "read_model", "write_model",
    "dataset_hash",
    "backend_name",
    "__version__",
]
