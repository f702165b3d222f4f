"""Adaptive randomly reinforced urns: simulation, Monte Carlo and diagnostics."""

from .montecarlo import (AggregateRow, ReplicationSummary, TableSpec, design_config,
                         reproduce_table, run_replications, summarize)
from .rng import Xoshiro256pp, derive_seed, splitmix64_mix
from .schedule import ScheduleKind, ThresholdState, advance, k_n, rho_bar, update_times
from .targets import (ArmEstimates, EtaKind, Family, ResponseModel, TargetPolicy,
                      eta_neyman, eta_rosenberger, eta_wei, eta_zhang, mle,
                      thresholds_from_estimates, update_estimates)
from .urn import (Mode, SimConfig, StepTrace, Trajectory, UrnState, UtilityKind, UtilitySpec,
                  draw_color, increment_bound_check, simulate_trajectory, step)

__version__ = "0.1.0"
