"""Numerical verification tools for third-order fractional operators on R^3.

Half-space Poisson kernels, Bessel identities, Dirichlet and Neumann
extensions, the Liouville equation (-Delta)^{3/2} u = Q e^{3u} and its
blow-up analysis.
"""

__version__ = "0.1.0"

from .errors import ApproximationWarning, ConfigError, DomainError, QuadratureError, SingularPointError
from .fields import Box3, DecayModel, GridField3
from .kernels import (KernelKind, KernelSpec, d_gamma, d_tilde_gamma, kappa_n, kappa_n_gamma, kappa_tilde_n,
                      kappa_tilde_n_gamma, neumann_kernel, neumann_scattering_kernel, poisson_kernel,
                      scattering_kernel)
from .quad import QuadResult, integrate_ball4, integrate_box3, integrate_radial
from .specfun import (BesselOrder, IdentityCheck, bessel_i, bessel_j, bessel_k, dirichlet_profile, gamma_fn,
                      verify_bessel_identity_1, verify_bessel_identity_2, verify_bessel_identity_3)
