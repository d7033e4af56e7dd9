"""Satisfied-user-ratio curve modeling, prediction, and evaluation for
JND-annotated compressed-image datasets."""

from .baseline import (BaselinePrediction, PsnrCurve, baseline_threshold,
                       predict_jnd_baseline, psnr_db)
from .data import (FeatureStore, JndRow, JndSampleTable, load_jnd_csv,
                   load_psnr_csv, load_sur_csv, read_features, save_jnd_csv,
                   save_psnr_csv, save_sur_csv, write_features)
from .distributions import (FAMILIES, FitResult, GevParams, fit_from_json,
                            fit_mle, fit_to_json, gev_cdf, gev_median,
                            gev_pdf, gev_quantile, gev_sample, gev_to_json,
                            negative_log_likelihood)
from .errors import (DegenerateFitError, DomainError, EvaluationError,
                     FormatError, InsufficientDataError, MonotonicityError,
                     SurkitError, TrainingError, UnreachablePercentileError)
from .evaluation import (EvalDataset, EvalReport, FoldPlan, kfold_split,
                         run_evaluation)
from .goodness_of_fit import (AdResult, ModelRanking, ad_pvalue_bootstrap,
                              ad_statistic, rank_models)
from .metrics import ImageMetrics, aggregate, bhattacharyya, delta_psnr, plcc
from .mlp import (MlpConfig, MlpModel, TrainRecord, assemble_input, forward,
                  init_model, load_model, predict_image_level, save_model,
                  train)
from .sur import (DEFAULT_N_LEVELS, JndPmf, SurCurve, empirical_sur,
                  fit_sur_lsq, jnd_pmf, p_jnd, p_sur, sur_from_params,
                  sur_lsq_residual)

__version__ = "0.1.0"
