"""Gas source localization on a grid with rank-based gas features.

A mobile robot with a metal-oxide gas sensor localizes a gas leak by
Bayesian inference over candidate source cells.  Readings can enter the
estimator raw (volts), calibrated (concentration), or through
sensor-agnostic transforms -- hit indicators or empirical-distribution
ranks -- that make the estimate invariant to the sensor's unknown
response curve.
"""

from .features import (FEATURE_KINDS, FeatureParams, Measurement,
                       SortedDataset, extract, feature_adaptive_hit,
                       feature_fixed_hit, feature_rank, feature_value,
                       insert_batch)
from .harness import (BenchmarkConfig, TrialResult, replay, run_benchmark,
                      run_trial)
from .planner import Plan, PlannerConfig, plan_path, sample_along, select_goal
from .plume import PlumeCache, PlumeField, SolverParams, estimate_at, solve_plume
from .scenario import Scenario, load_scenario, save_scenario
from .sensor import (SENSOR_PRESETS, SensorParams, SensorState, calibrate,
                     concentration_to_voltage, sensor_preset)
from .ste import (NoiseModel, Posterior, TerminationConfig, check_termination,
                  estimate_source, log_likelihood, make_prior, update_posterior)
from .world import (Environment, ValidationError, cell_center,
                    position_to_cell, rasterize_rectangles)

__version__ = "0.1.0"
