"""Dressing operators on grids: triangular intertwiners, factorizations,
Darboux potentials, and the generalized de Rham/Hodge layer.

The package is organized bottom-up:

- ``grid_ops``: grids, stencils, operator discretization, formal adjoints
- ``spectral``: biorthogonal eigenfamilies, spectral measures, kernels
- ``lagrange``: the divergence form of the Lagrange identity; discrete forms,
  regions, Stokes bookkeeping
- ``transmute``: the triangular dressing operators and their exact inverses
- ``factorize``: triangular splitting of 1 + Phi along projector chains
- ``darboux``: potential dressing by nodeless seeds, iterated stacking
- ``derham``: commuting-family complexes, harmonic spaces, period maps
- ``cli``: batch commands over JSON configs
"""

from .errors import (ConditionNumberError, DefectiveFamilyError,
                     DegreeMismatchError, DelsarteError, DiscretizationError,
                     EmptyBandError, GridError, NonCommutingFamilyError,
                     NotClosedError, NotExactError, SeedNodeError,
                     SingularKernelError, SingularMinorError)
from .grid_ops import (DiffOp, Grid1D, OperatorMatrix, ProductGrid,
                       adjoint_defect, commutator, compose, derivative_matrix,
                       discretize, formal_adjoint, grid_norm, inner,
                       load_diffop, save_diffop)
from .spectral import (EigenFamily, SpectralKernel, congruence_residual,
                       eigensolve, elementary_kernel, kernel_from_measure,
                       load_family, projection_measure, save_family)
from .lagrange import (Concomitant, FormField, SurfaceRegion,
                       bilinear_concomitant, boundary, coboundary,
                       divergence_residual, exterior_derivative, form_norm,
                       primitive, surface_integral)
from .transmute import (DelsarteOp, TransmutationData, adjoint_compat_check,
                        adjoint_operator, build_kernel_Omega, delsarte_apply,
                        delsarte_inverse, delsarte_operator,
                        independence_check, load_transmutation,
                        locality_check, pair_intertwiner, save_transmutation,
                        transform_family, transform_operator)
from .factorize import (ProjectorChain, TriangularPair,
                        break_relation_defect, commutation_check,
                        factor_conjugation_gap, gk_factorize,
                        gk_integral_factors, glm_residual, glm_solve,
                        is_volterra_factor, random_unit_minor,
                        triangular_shear)
from .darboux import (DressedResult, DressingSeed, ExpPoly, SchrodingerOp,
                      crum_iterate, darboux_once, spectrum_compare)
from .derham import (GenComplex, HarmonicReport, d_L, dual_flat_section,
                     expected_betti, flat_complex, flat_dimension,
                     flat_section, harmonic_space, hodge_decompose,
                     hodge_star, laplace_hodge, plain_complex, scalar_product,
                     skrypnik_map)

__version__ = "0.1.0"
