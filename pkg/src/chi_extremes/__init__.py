"""Simulation and verification toolkit for extremes of chi-processes with trend."""
from .asymptotics import (AsymptoticEval, GeneralizedChiWeights, gaussian_local_tail, gaussian_pickands_tail,
                          gaussian_piterbarg_local, generalized_chi_tail, log_upsilon, prop21_tail, prop22_local_tail,
                          thm21_tail, thm22_tail, thm23_tail, thm31_field_tail, thm32_field_tail, upsilon)
from .chi import (ChiExperiment, TailEstimate, chi_from_paths, estimate_tail, exact_chi_survival, simulate_chi,
                  simulate_field_sup, simulate_sup, sphere_check, tail_estimate, wilson_interval)
from .constants import (ConstantEstimate, ConstantSpec, adjudicate_P21, closed_form_P21, estimate_windowed,
                        pickands_limit, piterbarg_limit, registry, windowed_profile)
from .covmodels import (ExpansionParams, NonstationaryModel, StationaryModel, TrendSpec, eval_nonstationary_cov,
                        eval_stationary_cov, eval_trend, local_expansion_params, verify_expansion)
from .errors import (ChiExtremesError, ConfigError, EmbeddingError, FactorizationError, HypothesisError,
                     MissingConstantError, QuadratureError, SamplerError)
from .samplers import (SampleGrid, SeedSpec, sample_fbm, sample_gaussian_cholesky, sample_model,
                       sample_separable_field, sample_stationary)

__version__ = "0.1.0"
