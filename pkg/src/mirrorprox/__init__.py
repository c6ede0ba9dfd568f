"""Popov and Korpelevich mirror-prox solvers for monotone variational inequalities."""

from .core import (ContractViolation, DomainError, MirrorMap, ProductSimplex, VIProblem,
                   bregman, eval_mapping, grad_psi, h_u, prox_map, spectral_norm)
from .gap import (GapEstimate, SampledGap, estimate_gap_sampling, gap_grid_oracle,
                  theorem_bound)
from .geometry import (BlockLayout, entropic_update, euclidean_update,
                       project_simplex_bisection)
from .problems import (ProblemSpec, generate_game, load_spec, matching_pennies, save_spec)
from .solvers import (SolverConfig, StepDiagnostics, Trace, compute_step_diagnostics,
                      korpelevich_step, popov_step, run)

__version__ = "0.1.0"
