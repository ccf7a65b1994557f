"""Vaccination cost/loss frontiers for metapopulation SIS models."""

from .connectivity import ConnectivityReport, atom_indicator_strategy, classify, condensation, is_invariant
from .equilibrium import (EquilibriumResult, Trajectory, equilibrium_support, infected_fraction,
                          integrate_sis, maximal_equilibrium, vector_field)
from .errors import (DegenerateEigenvalue, InfeasibleCost, InfeasibleLoss, NoConvergence, NotMonatomic,
                     ParepiError, ParseError, StepSizeError, TooLarge, ValidationError)
from .frontier import (FrontierCurve, FrontierPoint, Outcome, Problem, SolverOptions, anti_pareto_frontier,
                       critical_cost_consistency, feasible_region_sample, grid_oracle, max_cost_at_loss,
                       max_loss_at_cost, min_cost_at_loss, min_loss_at_cost, pareto_frontier)
from .model import (AFFINE, UNIFORM, ConstraintSet, CostFunction, PopulationModel, cost, discretize_kernel,
                    load_model, project, save_model, to_uniform_cost_model)
from .spectral import EigenPair, next_gen_matrix, r0, r_e, r_e_gradient, spectral_radius

__version__ = "0.1.0"
