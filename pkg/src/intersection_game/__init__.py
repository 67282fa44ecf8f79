"""Equilibrium co-state learning for a two-player intersection game.

Library layout:

- ``game_model``      dynamics, losses, softened penalty, Hamiltonian
- ``analytic``        closed forms of the decoupled (penalty-free) problem
- ``bvp_solver``      collocation solver for the coupled equilibrium BVP
- ``costate_repr``    step-model parameterization of co-state trajectories
- ``neural``          from-scratch dense networks and full-batch training
- ``data_pipeline``   Latin hypercube sampling, labeling, serialization
- ``active_learning`` compliance-scored acquisition loop
- ``closed_loop``     feedback rollouts, collision detection, evaluation
- ``stats``           one-sided Welch test
- ``experiments``     size/seed/variant study and comparison report
- ``cli``             command-line entry points
"""

from .config import (ActiveConfig, ExperimentPlan, FitConfig, GameConfig,
                     SamplerConfig, SimConfig, SolverConfig, TrainConfig,
                     config_hash, read_game_config, write_game_config)
from .game_model import (Costate, JointState, PlayerState, PmpState,
                         collision_penalty, dynamics_rhs, hamiltonian,
                         instantaneous_loss, optimal_control, penalty_grad_own,
                         pmp_rhs, pmp_rhs_array, sigma, sigma_grad,
                         terminal_costate, terminal_loss)
from .bvp_solver import (AllGuessesFailed, BvpSolution, GuessTrajectory,
                         compute_values, initial_guesses, residual, solve,
                         solve_best)
from .costate_repr import (CostateParams, DegenerateGrid, InteractionType,
                           classify_interaction, clip_to_horizon, fit_params,
                           general_reconstruct, reconstruct_lambda1,
                           reconstruct_lambda2)

__version__ = "0.1.0"
