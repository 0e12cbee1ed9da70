"""Scalar conservation laws with polygonal convex flux, solved through the
Hopf-Lax formula and its greatest minimizer."""

from .pwl import (ConjugateFn, ConvexityError, DegenerateSegmentError, FluxAssumptionError,
                  PwlConvex, biconjugate, conjugate, conjugate_eval, eval_pwl, make_pwl)
from .data import (ClosedFormC1, PiecewiseConstantDerivative, PiecewiseLinearDerivative,
                   SampledPath, make_piecewise_constant, sample_brownian)
from .variational import (Kind, MinimizerResult, SearchConfig, SharpKernel, SmoothKernel,
                          SolutionField, discrete_exact_minimizer, eval_u, eval_w,
                          greatest_minimizer, min_x_derivative, solve_field)
from .mollify import build_mollified, conjugate_gap, convergence_study, mollified_kernel
from .stochastic import EnsembleStats, PathConfig, ensemble_run, variance_profile
from .verify import VerifyReport

__version__ = "0.1.0"
