"""Nonlocal eigenvalue problems and the first nontrivial Fucik curve on 1-D domains."""

from .assembly import GalerkinPair, assemble, assemble_cached, cross_term, energy
from .domain_kernel import Domain, Kernel, Mesh, eval_kernel, exterior_tail
from .fucik_continuation import (CurveSample, FucikPoint, semismooth_newton, trace_curve,
                                 trivial_lines_check, validate_curve)
from .fucik_minimax import CriticalPoint, J_p, c_of_p, criticality_norm, deform_path, grad_Jp
from .nonresonance import NonlinearitySpec, psi, grad_psi, select_R, solve_nonresonance
from .spectrum import EigenPair, domain_monotonicity, lowest_eigenpairs

__version__ = "0.1.0"
