"""Data-driven finite-horizon LQ control of linear time-varying systems.

The package covers the full pipeline: plant and cost modelling, exact
Riccati baselines, multi-experiment data collection, assembly of the
model-based and data-driven synthesis SDPs, a dense interior-point solver,
and independent KKT/duality certification of the results.
"""

from .assembly import (ConicBlock, ConicProgram, DualSolution, VariableLayout,
                       assemble_model_based, assemble_model_free_lti,
                       assemble_model_free_ltv, extract_dual_solution,
                       gains_from_dual)
from .certify import (KktCertificate, KktReport, PrimalReconstruction,
                      Problem2Report, build_kkt_certificate, check_kkt,
                      check_problem2_feasibility, duality_gap,
                      reconstruct_primal)
from .ensembles import (DataEnsemble, ExcitationSpec, LtiTrajectoryData,
                        RichnessReport, build_lti_trajectory_data,
                        check_richness, collect_ensemble, generate_excitation)
from .errors import (CertificationError, ConditioningError, DivergenceError,
                     InputError, LtvLqError, RankDeficiencyError)
from .ipm import ResidualReport, SolverOptions, SolverResult, residuals, solve
from .riccati import (QFunctionCertificate, ValueMatrices, optimal_gains,
                      qfunction_matrices, solve_dre)
from .systems import (CostSpec, GainSchedule, NonlinearStepper, StageMatrices,
                      TimeVaryingSystem, Trajectory, evaluate_cost,
                      example1_system, example2_plant, load_plant,
                      simulate_closed_loop, simulate_nonlinear_closed_loop,
                      simulate_open_loop, stage_matrices, system_from_dict)

__version__ = "0.1.0"
