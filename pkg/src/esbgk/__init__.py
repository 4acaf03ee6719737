"""Polyatomic ellipsoidal BGK relaxation on a discrete velocity / internal-energy grid,
with entropy-functional diagnostics and closed-form certificates."""

from .entropy import (EntropyReport, certify_lemma21, certify_lemma22,
                      certify_lemma31, certify_theorem, entropy_production,
                      h_closed_form, h_functional, kullback_bound, l1_distance,
                      relative_entropy)
from .gaussians import (build_gaussian, ellipsoidal_gaussian, gaussian_theta,
                        gaussian_values, lambda_delta, matched_gaussian,
                        maxwellian_00, maxwellian_01)
from .moments import (CorrectedTensor, MacroState, collision_frequency,
                      compute_moments, corrected_tensor)
from .phase_grid import (DistSnapshot, GridSpec, ModelParams, PhaseGrid,
                         auto_bounds, build_grid, integrate)
from .scenario import Scenario, load_scenario, parse_scenario
from .snapshot import read_snapshot, write_snapshot
from .solver import (SolverConfig, TransportConfig, Trajectory, decay_summary,
                     run_homogeneous, run_transport, step_homogeneous,
                     transport_step)
from .sweeps import certify_sweep, refinement_study

__version__ = "0.1.0"
