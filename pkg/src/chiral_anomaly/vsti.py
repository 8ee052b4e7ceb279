"""Relevant parts of the violated Slavnov-Taylor identities at one loop.

The algebraic relations among the renormalization constants are evaluated
in exact rational arithmetic.  The three-photon relation is not algebraic:
its second momentum derivative equals the constant epsilon structure of the
contracted triangle, which no choice of local constants can cancel.  That
obstruction is computed numerically from the loop amplitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .clifford import EPSILON, TRACE_SIGN
from .loop_amplitudes import ANOMALY_LIMIT, Kinematics, contracted_derivative

__all__ = [
    "RenormalizationConstants",
    "ResidualReport",
    "ObstructionReport",
    "exact",
    "tetrahedral_point",
    "residual_r1_r2",
    "residual_r3_r4",
    "residual_r6",
    "residual_r7",
    "anomaly_obstruction",
    "solve_relations",
    "relations_report",
    "ZERO_SOLUTION",
    "OBSTRUCTION_FACTOR",
]

# combinatorial factor multiplying g R1 p3.Gamma in the theta-insertion
OBSTRUCTION_FACTOR = 6


def exact(x) -> Fraction:
    """Rational value of ``x``; floats are read through their shortest
    decimal representation so that 0.3 becomes 3/10."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("constants must be finite")
        return Fraction(repr(x))
    return Fraction(str(x))


@dataclass(frozen=True)
class RenormalizationConstants:
    """Order-hbar constants fixed by the renormalization conditions, together
    with the couplings ``g``, gauge parameter ``alpha`` and mass ``M``."""

    R1: Fraction = Fraction(1)
    R2: Fraction = Fraction(1)
    R3: Fraction = Fraction(1)
    sigma_psibar_psi: Fraction = Fraction(0)
    sigma_trans: Fraction = Fraction(0)
    sigma_long: Fraction = Fraction(0)
    delta_M2: Fraction = Fraction(0)
    delta_g: Fraction = Fraction(0)
    F_AAAA: Fraction = Fraction(0)
    g: Fraction = Fraction(1)
    alpha: Fraction = Fraction(1)
    M: Fraction = Fraction(1)

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, exact(getattr(self, f.name)))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.M <= 0:
            raise ValueError("M must be positive")

    def to_dict(self) -> dict:
        return {k: str(v) for k, v in asdict(self).items()}

    def with_values(self, **kw) -> "RenormalizationConstants":
        return replace(self, **kw)


ZERO_SOLUTION = RenormalizationConstants()


@dataclass
class ResidualReport:
    """Named residuals with their values and a verdict per entry."""

    entries: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def add(self, name: str, value, passed: bool, **extra) -> None:
        self.entries[name] = {"value": value, "passed": bool(passed), **extra}

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.entries.values())

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return v
        return {"entries": conv(self.entries), "notes": conv(self.notes),
                "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# algebraic relations

def residual_r1_r2(c: RenormalizationConstants) -> tuple[Fraction, Fraction]:
    """Mass and longitudinal photon relations."""
    r1 = c.M**2 * (1 - c.R1 * (1 + c.delta_M2 / c.M**2))
    r2 = (1 - c.R1 * (1 + c.sigma_long)) / c.alpha
    return r1, r2


def residual_r3_r4(c: RenormalizationConstants) -> tuple[Fraction, Fraction]:
    """Fermion-photon vertex relations."""
    lhs = c.R1 * (c.g + c.delta_g)
    return (lhs - c.g * c.R2 * (1 + c.sigma_psibar_psi),
            lhs - c.g * c.R3 * (1 + c.sigma_psibar_psi))


def residual_r6(c: RenormalizationConstants) -> Fraction:
    """Ghost-fermion relation ``g (g + delta_g) (R3 - R2)``."""
    return c.g * (c.g + c.delta_g) * (c.R3 - c.R2)


def tetrahedral_point(scale=1) -> tuple[np.ndarray, ...]:
    """Four momenta at the corners of a regular tetrahedron, summing to
    zero, as integer direction vectors times ``scale`` (object arrays of
    Fractions).  Each has length ``sqrt(3) * scale``."""
    s = exact(scale)
    dirs = [(0, 1, 1, 1), (0, 1, -1, -1), (0, -1, 1, -1), (0, -1, -1, 1)]
    return tuple(np.array([Fraction(d) * s for d in v], dtype=object) for v in dirs)


def _kron(a, b) -> int:
    return 1 if a == b else 0


def residual_r7(c: RenormalizationConstants, kin4: Optional[Sequence] = None,
                w: Sequence[tuple[int, int]] = ()) -> np.ndarray:
    """``d^w`` of ``p4_mu (F/3)(dd + dd + dd)_{mu mu1 mu2 mu3}`` as an exact
    (4, 4, 4) object array.

    ``kin4`` holds p1..p4 with p4 = -(p1 + p2 + p3); the default is the
    tetrahedral point.  ``w`` has at most one entry ``(leg, comp)`` with leg
    in {1, 2, 3}: a derivative of the contraction with respect to that
    component, p4 following from momentum conservation.  The box loop is
    not included.
    """
    if kin4 is None:
        kin4 = tetrahedral_point()
    if len(kin4) != 4:
        raise ValueError("kin4 needs four momenta")
    if len(w) > 1:
        raise ValueError("only |w| <= 1 is relevant")
    p = [np.array([exact(x) for x in v], dtype=object) for v in kin4]
    if any(x != 0 for x in p[0] + p[1] + p[2] + p[3]):
        raise ValueError("momenta must sum to zero")
    if w:
        leg, comp = w[0]
        if leg not in (1, 2, 3) or comp not in range(4):
            raise ValueError(f"bad derivative index {w[0]}")
        v = np.array([Fraction(-_kron(comp, a)) for a in range(4)], dtype=object)
    else:
        v = p[3]
    f3 = c.F_AAAA / 3
    out = np.empty((4, 4, 4), dtype=object)
    for a in range(4):
        for b in range(4):
            for d in range(4):
                out[a, b, d] = f3 * (v[a] * _kron(b, d) + v[b] * _kron(a, d)
                                     + v[d] * _kron(a, b))
    return out


# ---------------------------------------------------------------------------
# the three-photon obstruction

@dataclass
class ObstructionReport:
    """Derivatives of ``p_mu Gamma_{mu nu rho}`` at a renormalization point.

    ``epsilon_coefficient`` is the common value of the mixed second
    derivatives divided by ``TRACE_SIGN * eps``; it tends to ``1/(6 pi^2)``.
    ``theta_coefficient`` multiplies it by ``-OBSTRUCTION_FACTOR * g * R1``.
    """

    lambda0: float
    epsilon_coefficient: float
    error: float
    samples: dict
    symmetric_residual: float
    value_w0: np.ndarray
    values_w1: dict
    combinatorial_factor: int = OBSTRUCTION_FACTOR
    theta_coefficient: Optional[float] = None

    @property
    def relative_deviation(self) -> float:
        return abs(self.epsilon_coefficient - ANOMALY_LIMIT) / ANOMALY_LIMIT

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "epsilon_coefficient": self.epsilon_coefficient,
            "reference": ANOMALY_LIMIT,
            "relative_deviation": self.relative_deviation,
            "error": self.error,
            "samples": {f"{k[0]},{k[1]}": v for k, v in self.samples.items()},
            "symmetric_residual": self.symmetric_residual,
            "value_w0": self.value_w0.tolist(),
            "values_w1": {f"p{k[0]}_{k[1]}": v.tolist() for k, v in self.values_w1.items()},
            "combinatorial_factor": self.combinatorial_factor,
            "theta_coefficient": self.theta_coefficient,
        }


# (alpha, beta) pairs for d/dp2_alpha d/dp3_beta; the last is a diagonal
# pair where only the vanishing non-epsilon part can appear
DEFAULT_PAIRS = ((0, 1), (2, 3), (0, 2), (1, 3), (0, 0))


def anomaly_obstruction(lambda0: float = 1e3, kin3: Optional[Kinematics] = None,
                        tol: float = 1e-10,
                        constants: Optional[RenormalizationConstants] = None,
                        pairs: Sequence[tuple[int, int]] = DEFAULT_PAIRS,
                        h: Optional[float] = None) -> ObstructionReport:
    """Evaluate the three-photon relation at ``kin3`` for |w| <= 2.

    The contraction is taken on the first leg with p2, p3 independent.  For
    each sampled ``(alpha, beta)`` the mixed derivative tensor is compared
    with ``TRACE_SIGN * c * eps_{nu rho alpha beta}``; ``c`` is averaged
    over the epsilon-carrying samples and the largest deviation from the
    epsilon form over all samples is the symmetric residual.
    """
    if kin3 is None:
        kin3 = Kinematics.equilateral(1.0)
    if not kin3.non_exceptional():
        raise ValueError("renormalization point must be non-exceptional")
    w0, _ = contracted_derivative(kin3, lambda0, (), h, tol)
    w1 = {}
    for leg in (2, 3):
        for comp in range(4):
            w1[(leg, comp)], _ = contracted_derivative(kin3, lambda0, ((leg, comp),), h, tol)
    samples, coeffs, sym, errs = {}, [], 0.0, []
    for a, b in pairs:
        d, e = contracted_derivative(kin3, lambda0, ((2, a), (3, b)), h, tol)
        eps = EPSILON[:, :, a, b]
        norm = float((eps * eps).sum())
        c = float((d * eps).sum()) / norm if norm else 0.0
        sym = max(sym, float(np.abs(d - c * eps).max()))
        errs.append(e)
        if norm:
            samples[(a, b)] = TRACE_SIGN * c
            coeffs.append(TRACE_SIGN * c)
    coef = float(np.mean(coeffs))
    spread = float(np.max(np.abs(np.array(coeffs) - coef))) if coeffs else 0.0
    theta = None
    if constants is not None:
        theta = -OBSTRUCTION_FACTOR * float(constants.g * constants.R1) * coef
    return ObstructionReport(lambda0, coef, max(max(errs), spread), samples, sym,
                             w0, w1, OBSTRUCTION_FACTOR, theta)


# ---------------------------------------------------------------------------
# solutions

def solve_relations(sigma_long=None, sigma_psibar_psi=None, delta_g=None,
                    g=1, alpha=1, M=1, sigma_trans=0) -> RenormalizationConstants:
    """Constants satisfying all algebraic relations.

    With no self-energy input this is the zero solution (all R = 1, all
    self energies and counterterms 0).  Otherwise ``sigma_long``,
    ``sigma_psibar_psi`` and ``delta_g`` are free and the rest follows:
    ``R1 = 1/(1 + sigma_long)``, ``delta_M2 = sigma_long M^2``,
    ``R2 = R3 = R1 (g + delta_g) / (g (1 + sigma_psibar_psi))``, ``F = 0``.
    """
    sl = exact(sigma_long if sigma_long is not None else 0)
    sp = exact(sigma_psibar_psi if sigma_psibar_psi is not None else 0)
    dg = exact(delta_g if delta_g is not None else 0)
    g, M = exact(g), exact(M)
    if 1 + sl == 0:
        raise ZeroDivisionError("1 + sigma_long must be nonzero")
    if g + dg == 0:
        raise ZeroDivisionError("g + delta_g must be nonzero")
    if g == 0 or 1 + sp == 0:
        raise ZeroDivisionError("g and 1 + sigma_psibar_psi must be nonzero")
    R1 = 1 / (1 + sl)
    R2 = R1 * (g + dg) / (g * (1 + sp))
    return RenormalizationConstants(
        R1=R1, R2=R2, R3=R2, sigma_psibar_psi=sp, sigma_trans=sigma_trans,
        sigma_long=sl, delta_M2=sl * M**2, delta_g=dg, F_AAAA=0, g=g,
        alpha=alpha, M=M)


def relations_report(c: RenormalizationConstants, kin4=None,
                     obstruction: Optional[ObstructionReport] = None) -> ResidualReport:
    """All algebraic residuals (exact) plus, if given, the obstruction.

    The algebraic entries pass only when exactly zero.  The obstruction
    entry passes when the epsilon coefficient vanishes, which it does not.
    """
    rep = ResidualReport()
    r1, r2 = residual_r1_r2(c)
    r3, r4 = residual_r3_r4(c)
    rep.add("r1", r1, r1 == 0)
    rep.add("r2", r2, r2 == 0)
    rep.add("r3", r3, r3 == 0)
    rep.add("r4", r4, r4 == 0)
    rep.add("r6", residual_r6(c), residual_r6(c) == 0)
    r7 = [residual_r7(c, kin4)] + [residual_r7(c, kin4, ((leg, comp),))
                                   for leg in (1, 2, 3) for comp in range(4)]
    r7max = max(abs(x) for t in r7 for x in t.ravel())
    rep.add("r7", r7max, r7max == 0)
    if obstruction is not None:
        coef = obstruction.epsilon_coefficient
        rep.add("r5", coef, abs(coef) <= 10 * obstruction.error,
                reference=ANOMALY_LIMIT, error=obstruction.error,
                relative_deviation=obstruction.relative_deviation,
                combinatorial_factor=obstruction.combinatorial_factor,
                theta_coefficient=obstruction.theta_coefficient)
    algebraic = all(rep.entries[k]["passed"] for k in ("r1", "r2", "r3", "r4", "r6", "r7"))
    if obstruction is None:
        verdict = "consistent" if algebraic else "inconsistent"
    elif rep.entries["r5"]["passed"]:
        verdict = "consistent" if algebraic else "inconsistent"
    else:
        verdict = "anomalous"
    rep.notes["verdict"] = verdict
    rep.notes["constants"] = c.to_dict()
    return rep
