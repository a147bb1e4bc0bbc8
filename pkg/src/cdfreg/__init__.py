"""Shape-constrained distributional regression on threshold grids.

Estimate conditional CDFs by solving one constrained least-squares
projection of indicator targets per threshold (isotonic cone, total
variation penalty, or a small ReLU network), correct the fitted curves into
proper CDFs by monotone rearrangement, and score everything with integrated
quadratic (CRPS-style) metrics.  Built-in simulation designs and dataset
recipes run the full evaluation protocol end to end.
"""

from .core import (CdfEstimate, IndicatorMatrix, Sample, ThresholdGrid,
                   TrueCdf, count_increases, difference, explicit_grid,
                   indicators, make_grid, total_variation)
from .dataio import (RECIPES, AggregatedSample, DataError, DatasetRecipe,
                     GridSpec, Table, grid_aggregate, jitter_ties, load_csv,
                     load_recipe, site_aggregate)
from .isotonic import IsotonicFit, fit_isotonic, pava, predict_nearest
from .metrics import (MetricReport, crps_continuous, crps_grid,
                      evaluate_grid, msd_grid, per_threshold_mse)
from .rearrange import (StepCdf, clamp_unit, rearrange_many, rearrange_step,
                        step_from_levels)
from .relunet import (FitDivergedError, MlpArchitecture, NetFit, TrainConfig,
                      fit_relu, forward, init_params, loss_and_grads,
                      predict_relu, train_network)
from .scenarios import (DEFAULT_ESTIMATORS, DEFAULT_GRIDS, SCENARIOS, McPlan,
                        McResult, ScenarioData, ScenarioSpec,
                        draw_conditional, default_grid, generate,
                        rep_seed_sequences, run_monte_carlo, split_indices)
from .special import (chi2_cdf, gamma_cdf, normal_cdf,
                      regularized_lower_gamma)
from .trendfilter import (AdmmResult, CvResult, TrendFilterConfig,
                          TrendFilterFit, cv_select_lambda, fused_lasso,
                          fit_trendfilter, penalized_objective,
                          predict_linear, trendfilter_admm)

__version__ = "0.1.0"
