"""Subsampled ensemble predictors as generalized U-statistics.

Estimators, variance components, normal-approximation intervals and
Berry-Esseen bounds, plus a simulation harness to check them.
"""

__version__ = "0.1.0"

from .core import (Dataset, Design, EnsembleConfig, Sample, derive_omega,
                   draw_incomplete_design, enumerate_subsamples, n_subsamples)
from .ensemble import EnsembleResult, complete_u, generalized_incomplete_u
from .estimator import GeneralizedUStatisticRegressor
from .exceptions import (CapExceeded, DegenerateProjection, GustatError,
                         InvalidArgs, NumericalFailure, SingularDesign)
from .generators import (Discrete, Empirical, LinearGaussian, OneMinusX, TwoPoint,
                         UniformBox, generate)
from .inference import (BEInputs, ConfidenceInterval, be_bound_complete,
                        be_bound_convolution, be_bound_incomplete_linear,
                        be_bound_subgaussian, build_ci, estimate_g_moments,
                        estimate_h_moments)
from .learners import (KernelSpec, PnnSet, compute_kpnn, make_kernel)
from .simlab import (ExperimentConfig, ExperimentReport, emit_report,
                     ks_to_standard_normal, run_clt_experiment,
                     run_coverage_experiment, run_ratio_experiment)
from .variance import (HDecomposition, VarianceComponents, c_of_k,
                       closed_form_ratio, estimate_zeta1_omega, estimate_zeta_s,
                       estimate_zeta_s_omega, h_decomposition_exact,
                       linear_smoother_bound, u_variance_from_components,
                       variance_ratio)
