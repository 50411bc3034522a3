"""Variable-order Caputo derivatives: direct and fast evaluators, a compact
fourth-order sub-diffusion solver, and a benchmark command line.

The usual entry points:

- `order.build_schedule` resolves the per-step offset points.
- `direct.scan_direct` / `fast.scan_fast` evaluate scalar trajectories.
- `expsum.build_quadrature` compresses the power-law kernel.
- `solver.run` marches an initial-boundary value problem.
- `bench.main` backs the `vofrac-bench` script.
"""

from .order import (OrderFunction, TemporalMesh, SigmaSchedule,
                    constant_order, sin4_order, tabulated_order,
                    order_from_spec, solve_sigma, build_schedule)
from .expsum import (ExpSumParams, ExpSumQuadrature, CertifyReport,
                     compute_params, build_quadrature, quadrature_from_params,
                     certify)
from .direct import g_row, evaluate_direct, scan_direct, caputo_oracle
from .fast import (PanelIntegrals, HistoryBank, panel_integrals,
                   advance_history, step_operator, evaluate_fast, scan_fast,
                   rho_row, check_rho_properties, audit_coefficients,
                   epsilon_bound, default_epsilon)
from .grid import (SpatialMesh, StencilEigens, build_eigens,
                   second_difference, compact_average, apply_A, apply_Lambda,
                   apply_laplace, sine_transform, dst_solve, norms,
                   energy_seminorm_sq)
from .solver import (ProblemSpec, SolverConfig, RunReport, StorageCapExceeded,
                     run, sine_product_problem, decaying_mode_problem,
                     cubic_profile, cubic_profile_caputo)

__version__ = "0.1.0"
