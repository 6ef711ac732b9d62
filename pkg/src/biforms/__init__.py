"""biforms: counting functions, exponential sums, local densities and
pencil invariants for systems of bihomogeneous forms of bidegree (1,1)
and (2,1)."""

from .forms import (BihomSystem, BoxPair, PencilWeights, parse_system,
                    parse_boxes, serialize_system, evaluate,
                    multilinear_eval, beta_sup_norm, bilinear_matrices,
                    h_slices, make_system, swap_xy)
from .counting import (CountResult, KCellSpec, SingularValues, count_N,
                       count_aux, count_M, singular_values, ellipsoid_count,
                       minors_vector, jacobian_minors, k_cell_count)
from .expsums import (ArcParams, ArcMembership, weighted_sum, complete_sum,
                      oscillatory_integral, arc_classify, audit_weyl,
                      audit_aux_inequality)
from .densities import (DensityEstimate, padic_density, padic_density_limit,
                        singular_series, singular_integral,
                        smooth_padic_zero, smooth_real_zero, sigma_factor)
from .geometry import (InvariantReport, fp_dimension, pencil_kernel_stats,
                       s_invariants, singular_locus_dim, compute_invariants,
                       hypothesis_report)
from .workbench import (ExperimentPlan, run_asymptotic,
                        run_lower_bound_check)
from .util import BudgetExceededError, ValidationError

__version__ = "0.1.0"
