"""Numerical checks of the chiral anomaly in a Pauli-Villars regularized
abelian gauge theory: the one-loop three-photon amplitude, its invariant
decomposition, the renormalization relations it obstructs, and the unit
Jacobian of the BRS change of variables."""

__version__ = "0.1.0"

from .clifford import EPSILON, TRACE_SIGN, gamma, gamma5, trace_product  # noqa: F401
from .loop_amplitudes import (  # noqa: F401
    ANOMALY_LIMIT,
    CutoffPair,
    Kinematics,
    contracted_triangle,
    gamma_AAA,
    gamma_AAA_direct,
)
