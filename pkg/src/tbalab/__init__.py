"""tbalab: numerical solution of thermodynamic Bethe ansatz equations.

The TBA equations are solved as a Banach fixed point of a convolution map
built from a matrix Green's function, then continued into the complex strip
to check the Y-system.
"""
from .errors import *  # noqa: F401,F403
from .spectral import (SpectralData, PerronData, cartan_matrix, check_mat_lt2, dynkin_adjacency,
                       is_irreducible, perron_frobenius)
from .kernel import (KernelDecomp, ScalarKernelParams, build_kernel, cosh_power_fourier, neumann_term, phi,
                     phi_d, phi_d_fourier_oracle, phi_matrix, residue_contour)
from .model import (AsymptoticsSpec, ConvolutionOperator, Grid, ModelSpec, SampledFunction, apply_LC, convolve,
                    eval_asymptotics, make_grid)
from .solver import (SolveReport, SolverOptions, contraction_estimate, kappa_pf, solve_constant, solve_tba,
                     verify_c_independence)
from .analytic import (boundary_value, build_Y, epsilon_extrapolated_boundary, evaluate_strip,
                       ysystem_residual)

__version__ = "0.1.0"
