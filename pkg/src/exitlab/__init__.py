"""exitlab: Monte Carlo exit measures, harmonic functions and Hoelder-regularity
constants for isotropic pure-jump processes."""

from .conditions import (ConditionReport, check_HI, check_J0, check_J1, check_J2,
                         derive_alpha_from_HC, derive_J_from_HI, intrinsic_radius, x_grid)
from .config import ConfigError, LabConfig, load_config, load_preset
from .constants import (ConstantLedger, build_ledger, fit_empirical_beta, run_holder_pipeline,
                        select_b, strengthen_J2, strengthen_J2_power, theoretical_bound,
                        two_point_bound)
from .estimators import HarmonicEstimator, HolderExponentRegressor
from .exit_measure import (ExitEmpirical, HarmonicSpec, check_composition, estimate_exit_measure,
                           harmonic_eval, tail_mass)
from .geometry import AnnularSector, Ball, SetUnion
from .holder import measure_holder, verify_oscillation
from .kernel import KernelSpec, annulus_mu_mass, check_K0, eval_k, jump_rate_above, sample_jump
from .profiles import (DomainError, LConditionWitness, LogCounterexampleProfile,
                       RegularlyVaryingProfile, ScalingProfile, StableProfile, TableProfile,
                       check_L_conditions, eval_L, eval_l, eval_Ltilde, invert_L, make_profile)
from .runner import RunManifest, emit_plot_data, run
from .simulator import (SimConfig, check_dynkin, check_levy_system, estimate_exit_time_mean,
                        simulate_exit, simulate_exits)

__version__ = "0.1.0"
