"""Quasinonlocal coupling of 1D nonlocal diffusion operators.

Couples two nonlocal diffusion kernels with horizons delta1 = M * delta2
across the interface x = 0 through a single energy, so the resulting
operator is symmetric, annihilates affine fields, dominates the
wide-horizon quadratic form, and satisfies the discrete maximum
principle under explicit Euler stepping at kappa_cfl = 1/4.
"""
from .dynamics import RunRecord, TimeStepper, manufactured_problem, run, step
from .energy import (EnergyValue, discrete_energy, energy_delta, energy_gr,
                     energy_qnl, first_variation_oracle, quadratic_form)
from .exceptions import (ConfigurationError, InstabilityError,
                         KernelEvaluationError, QuadratureError)
from .experiments import (CASES, ErrorReport, SingularComparison, StudyConfig,
                          convergence_study, energy_error_norm, error_linf,
                          observed_orders, report_to_csv, run_property_checks,
                          singular_comparison)
from .grid import Grid1D, GridField, build_grid, sample
from .kernels import (TWO_OVER_S_KERNEL, ScaledKernel, ScalelessKernel, get_kernel,
                      register_kernel)
from .operators import (DiffusionOperator, apply, assemble_local,
                        assemble_nonlocal, assemble_qnl, dump_operator,
                        interface_pair_weights, smallest_eigenvalue,
                        symmetry_defect)

__version__ = "0.1.0"
