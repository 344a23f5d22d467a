"""Tikhonov regularization with discrepancy-based choice of the
regularization parameter and the domain discretization level."""

from .diagnostics import (BregmanReport, RateTable, bregman_distance, eta_m, l2_error,
                          q_coercivity_check, rate_table)
from .discrepancy import (DiscrepancyBand, LevelSelectionError, MorozovResult,
                          SearchExhaustedError, SequentialResult, check_band, in_h_set,
                          joint_discrepancy_search, morozov_alpha_search, penalty_H,
                          residual_L, select_level, sequential_discrepancy, value_I)
from .grids import (Grid, Surface, clamp, constant_surface, inner, interpolate,
                    load_surface, norm, save_surface, vector)
from .ladder import Ladder, gamma_m, holder_gamma_bounds, phi_m, project
from .linear import LinearModel, closed_form_minimizer, closed_form_solution, make_ladder_model
from .optimize import (RegularizedSolution, StopRule, WolfeParams, initial_step,
                       minimize_misfit, minimize_tikhonov, wolfe_line_search)
from .pde import (CnSystem, ParabolicModel, PdeParams, forward_operator, initial_condition,
                  misfit_gradient, solve_forward, true_coefficient, true_sigma)
from .penalties import PENALTY_KINDS, Penalty, penalty_subgradient, penalty_value
from .synthdata import (NoisyDataset, estimate_noise_level, generate_data, load_dataset,
                        save_dataset, simpson_2d)
from .tikhonov import TikhonovConfig, check_domain, tikhonov_gradient, tikhonov_value

__version__ = "0.1.0"
