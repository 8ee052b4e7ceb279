"""Pauli-Villars regularized one-loop three-photon amplitude.

Two routes to the same tensor are provided.  The Feynman-parameter route
evaluates the scalar amplitudes ``A`` and ``B`` as six-parameter simplex
integrals and assembles the tensor from them; the direct route integrates the
Dirac trace over the loop momentum in R^4.  Amplitudes are computed at unit
coupling.

Sign conventions: ``TRACE_SIGN`` (``s``) is ``tr(g5 g0 g1 g2 g3)/4``.  The
contracted amplitude is ``s * c * eps_{nu rho a b} p2_a p3_b`` and the
reported epsilon coefficient is ``c``, which tends to ``1/(6 pi^2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .clifford import EPSILON, TRACE_SIGN, trace_tensor
from .quadrature import (
    DEFAULT_MAX_EVALS,
    IntegralResult,
    R4Integrand,
    SimplexIntegrand,
    integrate_r4,
    integrate_simplex,
)

__all__ = [
    "Kinematics",
    "CutoffPair",
    "FermionPropagator",
    "RankThreeTensor",
    "ScalarAmplitudes",
    "ContractedTriangle",
    "NonConvergence",
    "PERMUTATIONS",
    "NORM_A",
    "NORM_B",
    "ANOMALY_LIMIT",
    "denominator_D",
    "ab_prefactor",
    "amplitude_A",
    "amplitude_B",
    "scalar_amplitudes",
    "expr_tensor",
    "gamma_AAA",
    "gamma_AAA_direct",
    "contracted_triangle",
    "contracted_deviation",
    "calibrate_normalization",
    "central_derivative",
    "derivative_stencil",
    "contracted_derivative",
    "uv_scan",
    "ir_second_derivative_scan",
    "IRScanReport",
    "UVScanReport",
    "ir_bound",
]

# value of the contracted epsilon coefficient for Lambda0 -> infinity
ANOMALY_LIMIT = 1.0 / (6.0 * math.pi**2)

# the six argument orderings, in the order used for every 6-vector below
PERMUTATIONS = ("123", "132", "213", "231", "312", "321")

# signs multiplying (Lambda0^2-Lambda^2)^3/pi^2 for A and B; fixed by
# calibrate_normalization against the exact contraction and the direct loop
NORM_A = 1.0
NORM_B = -1.0


class NonConvergence(RuntimeError):
    """An integral did not reach its tolerance within the evaluation budget."""


# ---------------------------------------------------------------------------
# value types

@dataclass(frozen=True, eq=False)
class Kinematics:
    """Three Euclidean momenta with ``p1 + p2 + p3 = 0``; ``p3`` is derived."""

    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = np.array(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (4,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 4-vector")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def p3(self) -> np.ndarray:
        return -self.p1 - self.p2

    @property
    def momenta(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.p1, self.p2, self.p3

    def squares(self) -> tuple[float, float, float]:
        return tuple(float(p @ p) for p in self.momenta)

    def scale(self) -> float:
        return max(math.sqrt(q) for q in self.squares())

    def non_exceptional(self, rtol: float = 1e-12) -> bool:
        """True when no nontrivial partial sum of the momenta vanishes."""
        s = self.scale()
        return s > 0 and all(math.sqrt(q) > rtol * s for q in self.squares())

    def permuted(self, order: str) -> "Kinematics":
        """Momenta relabelled as ``(p_{o1}, p_{o2}, p_{o3})``."""
        p = self.momenta
        return Kinematics(p[int(order[0]) - 1], p[int(order[1]) - 1])

    def rotated(self, R: np.ndarray) -> "Kinematics":
        return Kinematics(R @ self.p1, R @ self.p2)

    def scaled(self, t: float) -> "Kinematics":
        return Kinematics(t * self.p1, t * self.p2)

    @classmethod
    def from_p2_p3(cls, p2, p3) -> "Kinematics":
        p2 = np.asarray(p2, dtype=float)
        p3 = np.asarray(p3, dtype=float)
        return cls(-p2 - p3, p2)

    @classmethod
    def equilateral(cls, scale: float = 1.0, plane: tuple[int, int] = (0, 1)) -> "Kinematics":
        """Corners of an equilateral triangle, ``|p_i| = scale``, in a
        coordinate 2-plane."""
        i, j = plane
        p1 = np.zeros(4)
        p2 = np.zeros(4)
        p1[i] = scale
        p2[i] = -0.5 * scale
        p2[j] = 0.5 * math.sqrt(3.0) * scale
        return cls(p1, p2)


@dataclass(frozen=True)
class CutoffPair:
    """Infrared flow parameter ``lam`` and ultraviolet cutoff ``lam0``."""

    lam: float
    lam0: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.lam0)):
            raise ValueError("cutoffs must be finite")
        if self.lam < 0 or self.lam0 <= 0 or self.lam > self.lam0:
            raise ValueError("need 0 <= lam <= lam0 and lam0 > 0")


@dataclass(frozen=True)
class FermionPropagator:
    """``S(k) = kslash/k^2 * (sigma_{lam0}(k^2) - sigma_{lam}(k^2))`` with
    ``sigma_L(k^2) = L^2/(k^2 + L^2)``."""

    cutoffs: CutoffPair

    def sigma(self, k2):
        a = self.cutoffs.lam**2
        b = self.cutoffs.lam0**2
        k2 = np.asarray(k2, dtype=float)
        return b / (k2 + b) - a / (k2 + a) if a > 0 else b / (k2 + b)

    def scalar(self, k2):
        """``S(k) = kslash * scalar(k^2)``; finite at k = 0 only if lam > 0."""
        a = self.cutoffs.lam**2
        b = self.cutoffs.lam0**2
        k2 = np.asarray(k2, dtype=float)
        return (b - a) / ((k2 + a) * (k2 + b))

    def matrix(self, k) -> np.ndarray:
        from .clifford import gamma
        k = np.asarray(k, dtype=float)
        slash = sum(k[m] * gamma(m).to_complex() for m in range(4))
        return slash * self.scalar(k @ k)


@dataclass
class RankThreeTensor:
    """``components[mu, nu, rho]`` with a componentwise error bound."""

    components: np.ndarray
    error: np.ndarray
    evaluations: int = 0
    converged: bool = True

    def max_error(self) -> float:
        return float(np.max(self.error))

    def permuted(self, perm: Sequence[int]) -> np.ndarray:
        return np.transpose(self.components, perm)


@dataclass
class ScalarAmplitudes:
    """``A`` and ``B`` at the six orderings of one kinematic point."""

    A: dict
    B: dict
    A_error: dict
    B_error: dict
    evaluations: int
    converged: bool

    def vector(self) -> np.ndarray:
        return np.array([self.A[s] for s in PERMUTATIONS] + [self.B[s] for s in PERMUTATIONS])

    def error_vector(self) -> np.ndarray:
        return np.array([self.A_error[s] for s in PERMUTATIONS]
                        + [self.B_error[s] for s in PERMUTATIONS])


@dataclass
class ContractedTriangle:
    """``p1_mu Gamma_{mu nu rho} = TRACE_SIGN * coefficient * w23`` where
    ``w23 = eps_{nu rho a b} p2_a p3_b``."""

    tensor: np.ndarray
    coefficient: float
    error_estimate: float
    evaluations: int
    converged: bool
    trace_sign: int = TRACE_SIGN


def _check(res: IntegralResult, what: str, strict: bool) -> None:
    if strict and not res.converged:
        raise NonConvergence(f"{what}: tolerance not reached after {res.evaluations} evaluations")


# ---------------------------------------------------------------------------
# Feynman-parameter representation

def _partials(x):
    x12 = x[..., 0] + x[..., 1]
    x34 = x[..., 2] + x[..., 3]
    x56 = x[..., 4] + x[..., 5]
    x135 = x[..., 0] + x[..., 2] + x[..., 4]
    x246 = x[..., 1] + x[..., 3] + x[..., 5]
    return x12, x34, x56, x135, x246


def denominator_D(x, cutoffs: CutoffPair, kin: Kinematics):
    """``x135 L^2 + x246 L0^2 + x~34 p2^2 + x~56 p3^2 + 2 x34 x56 p2.p3``
    for simplex points ``x`` of shape ``(..., 6)``."""
    x = np.asarray(x, dtype=float)
    _, x34, x56, x135, x246 = _partials(x)
    p2, p3 = kin.p2, kin.p3
    return (x135 * cutoffs.lam**2 + x246 * cutoffs.lam0**2
            + x34 * (1 - x34) * (p2 @ p2) + x56 * (1 - x56) * (p3 @ p3)
            + 2 * x34 * x56 * (p2 @ p3))


def ab_prefactor(cutoffs: CutoffPair) -> float:
    """``(L0^2 - L^2)^3 / pi^2``, the overall constant of A and B."""
    return (cutoffs.lam0**2 - cutoffs.lam**2) ** 3 / math.pi**2


def _ab_kernels(x, qs: np.ndarray, cutoffs: CutoffPair) -> np.ndarray:
    """Integrands of A and B (without prefactor, in units of ``lam0``) for
    each invariant triple in ``qs`` (shape ``(m, 3)``).

    Returns ``(N, 2m)``: the m A-kernels then the m B-kernels.  Everything is
    divided by ``lam0^2`` powers so that ``d = D/lam0^2`` is O(1).
    """
    L02 = cutoffs.lam0**2
    lam = cutoffs.lam**2 / L02
    x12, x34, x56, x135, x246 = _partials(x)
    x1234 = x12 + x34
    base = x135 * lam + x246
    t34 = x34 * (1 - x34)
    t56 = x56 * (1 - x56)
    c1 = x34**2 * (1 - x34 - 3 * x12) - x56**2 * (1 - x56) + x34 * (x12 - x56)
    c2 = 3 * x56 * (x12**2 + x34**2) + 2 * x12 * x34 - x56 * x1234
    c3 = x12**2 * (1 - x12 - 3 * x34) - x56**2 * (1 - x56) + x12 * (x34 - x56)
    a3 = 2 * x56 - x1234
    b4 = 2 * (x34 * (x12**2 + x56**2) - 3 * x12 * x34 - x56 * (x12**2 + x34**2))
    out = np.empty((x.shape[0], 2 * len(qs)))
    m = len(qs)
    for j, (q1, q2, q3) in enumerate(np.asarray(qs, dtype=float) / L02):
        d = base + t34 * q2 + t56 * q3 + x34 * x56 * (q1 - q2 - q3)
        inv3 = 1.0 / d**3
        inv4 = inv3 / d
        out[:, j] = a3 * inv3 + (q1 * c1 + q2 * c2 + q3 * c3) * inv4
        out[:, m + j] = b4 * inv4
    return out


def _ab_scale(cutoffs: CutoffPair, m: int) -> np.ndarray:
    # undo the lam0 normalisation: A is dimensionless, B carries 1/lam0^2
    pre = (1 - (cutoffs.lam / cutoffs.lam0) ** 2) ** 3 / math.pi**2
    return np.concatenate([np.full(m, NORM_A * pre),
                           np.full(m, NORM_B * pre / cutoffs.lam0**2)])


_UV_FACE = [(1, 3, 5)]


def _invariants(args, kin: Optional[Kinematics]) -> tuple[float, float, float]:
    if isinstance(args, str):
        if kin is None:
            raise ValueError("an ordering string needs kinematics")
        q = kin.squares()
        return tuple(q[int(c) - 1] for c in args)
    q = tuple(float(v) for v in args)
    if len(q) != 3:
        raise ValueError("invariant triple must have three entries")
    return q


def _amplitude(which: int, args, cutoffs, kin, tol, max_evals, strict) -> IntegralResult:
    q = np.array([_invariants(args, kin)])
    scale = _ab_scale(cutoffs, 1)[which]
    f = SimplexIntegrand(6, lambda x: _ab_kernels(x, q, cutoffs)[:, which], _UV_FACE)
    res = integrate_simplex(f, tol / abs(scale), rtol=1e-12, max_evals=max_evals)
    _check(res, "amplitude", strict)
    return IntegralResult(float(res.value) * scale, float(res.error_estimate) * abs(scale),
                          res.evaluations, res.converged, res.regions)


def amplitude_A(args, cutoffs: CutoffPair, kin: Optional[Kinematics] = None,
                tol: float = 1e-8, max_evals: int = DEFAULT_MAX_EVALS,
                strict: bool = False) -> IntegralResult:
    """Scalar amplitude ``A(q1, q2, q3)``.

    ``args`` is either a triple of squared momenta or an ordering string such
    as ``"213"`` resolved against ``kin``.
    """
    return _amplitude(0, args, cutoffs, kin, tol, max_evals, strict)


def amplitude_B(args, cutoffs: CutoffPair, kin: Optional[Kinematics] = None,
                tol: float = 1e-8, max_evals: int = DEFAULT_MAX_EVALS,
                strict: bool = False) -> IntegralResult:
    """Scalar amplitude ``B(q1, q2, q3)``; see :func:`amplitude_A`."""
    return _amplitude(1, args, cutoffs, kin, tol, max_evals, strict)


def scalar_amplitudes(kin: Kinematics, cutoffs: CutoffPair, tol: float = 1e-8,
                      max_evals: int = DEFAULT_MAX_EVALS,
                      strict: bool = False) -> ScalarAmplitudes:
    """A and B at all six orderings, from a single vector-valued integral."""
    if not kin.non_exceptional() and cutoffs.lam == 0:
        raise ValueError("exceptional kinematics need lam > 0")
    q = kin.squares()
    qs = np.array([[q[int(c) - 1] for c in s] for s in PERMUTATIONS])
    scale = _ab_scale(cutoffs, 6)
    f = SimplexIntegrand(6, lambda x: _ab_kernels(x, qs, cutoffs) * scale, _UV_FACE)
    res = integrate_simplex(f, tol, rtol=1e-12, max_evals=max_evals)
    _check(res, "scalar amplitudes", strict)
    v = np.asarray(res.value)
    e = np.broadcast_to(np.asarray(res.error_estimate, dtype=float), v.shape)
    A = {s: float(v[i]) for i, s in enumerate(PERMUTATIONS)}
    B = {s: float(v[6 + i]) for i, s in enumerate(PERMUTATIONS)}
    Ae = {s: float(e[i]) for i, s in enumerate(PERMUTATIONS)}
    Be = {s: float(e[6 + i]) for i, s in enumerate(PERMUTATIONS)}
    return ScalarAmplitudes(A, B, Ae, Be, res.evaluations, res.converged)


def _w12(p1, p2) -> np.ndarray:
    # eps_{a b x y} p1_a p2_b
    return np.einsum("a,b,abxy->xy", p1, p2, EPSILON)


def expr_matrix(kin: Kinematics) -> np.ndarray:
    """``(64, 12)`` matrix taking ``[A(s) for s in PERMUTATIONS] + [B(s) ...]``
    to the flattened tensor ``Gamma[mu, nu, rho]``."""
    p1, p2, p3 = kin.momenta
    w = _w12(p1, p2)
    M = np.zeros((4, 4, 4, 12))
    ia = {s: i for i, s in enumerate(PERMUTATIONS)}
    ib = {s: 6 + i for i, s in enumerate(PERMUTATIONS)}
    M[..., ia["123"]] += np.einsum("t,tmnr->mnr", p1, EPSILON)
    M[..., ia["213"]] -= np.einsum("t,tmnr->mnr", p2, EPSILON)
    M[..., ib["123"]] += np.einsum("n,rm->mnr", p3, w)
    M[..., ib["321"]] += np.einsum("n,rm->mnr", p1, w)
    M[..., ib["312"]] += np.einsum("m,nr->mnr", p2, w)
    M[..., ib["213"]] += np.einsum("m,nr->mnr", p3, w)
    M[..., ib["231"]] += np.einsum("r,mn->mnr", p1, w)
    M[..., ib["132"]] += np.einsum("r,mn->mnr", p2, w)
    return M.reshape(64, 12)


def expr_tensor(A: dict, B: dict, kin: Kinematics) -> np.ndarray:
    """Assemble the tensor from A and B at the six orderings."""
    v = np.array([A[s] for s in PERMUTATIONS] + [B[s] for s in PERMUTATIONS], dtype=float)
    return (expr_matrix(kin) @ v).reshape(4, 4, 4)


def gamma_AAA(kin: Kinematics, cutoffs: CutoffPair, tol: float = 1e-8,
              max_evals: int = DEFAULT_MAX_EVALS, strict: bool = False,
              amplitudes: Optional[ScalarAmplitudes] = None) -> RankThreeTensor:
    """Three-photon tensor assembled from the scalar amplitudes."""
    amp = amplitudes or scalar_amplitudes(kin, cutoffs, tol, max_evals, strict)
    M = expr_matrix(kin)
    G = (M @ amp.vector()).reshape(4, 4, 4)
    err = (np.abs(M) @ amp.error_vector()).reshape(4, 4, 4)
    return RankThreeTensor(G, err, amp.evaluations, amp.converged)


# ---------------------------------------------------------------------------
# direct loop-momentum route

def _loop_trace_matrix() -> np.ndarray:
    # tr[g5 a g_nu b g_mu c g_rho] as a (64 [a b c], 64 [mu nu rho]) matrix
    T6 = trace_tensor(6).astype(float)
    return T6.transpose(0, 2, 4, 3, 1, 5).reshape(64, 64)


def gamma_AAA_direct(kin: Kinematics, cutoffs: CutoffPair, tol: float = 1e-6,
                     rtol: float = 0.0, max_evals: int = DEFAULT_MAX_EVALS,
                     strict: bool = False) -> RankThreeTensor:
    """``2 int_k tr[g5 S(k) g_nu S(k-p2) g_mu S(k+p3) g_rho]`` in R^4."""
    if cutoffs.lam == cutoffs.lam0:
        z = np.zeros((4, 4, 4))
        return RankThreeTensor(z, z.copy())
    Tm = _loop_trace_matrix()
    prop = FermionPropagator(cutoffs)
    p2, p3 = kin.p2, kin.p3

    def f(k):
        b = k - p2
        c = k + p3
        s = (prop.scalar(np.einsum("ni,ni->n", k, k)) * prop.scalar(np.einsum("ni,ni->n", b, b))
             * prop.scalar(np.einsum("ni,ni->n", c, c)))
        outer = (k[:, :, None, None] * b[:, None, :, None] * c[:, None, None, :]).reshape(-1, 64)
        return 2.0 * s[:, None] * (outer @ Tm)

    scale = max(kin.scale(), cutoffs.lam, 1e-3 * cutoffs.lam0)
    res = integrate_r4(R4Integrand(f, 9.0, asymptotic_radius=1e3 * cutoffs.lam0 + 1e3 * scale),
                       tol, rtol=rtol, scale=scale, max_evals=max_evals)
    _check(res, "direct loop", strict)
    G = np.asarray(res.value).reshape(4, 4, 4)
    err = np.broadcast_to(np.asarray(res.error_estimate, dtype=float), (64,)).reshape(4, 4, 4)
    return RankThreeTensor(G, np.array(err), res.evaluations, res.converged)


# ---------------------------------------------------------------------------
# contracted triangle

def _w23(kin: Kinematics) -> np.ndarray:
    return np.einsum("vrab,a,b->vr", EPSILON, kin.p2, kin.p3)


def _contracted_kernel(x, q2, q3, p23, lam0, subtract: bool):
    # x3 / (Q/L0^2 + x123)^3, with Q the momentum part; optionally minus the
    # L0 -> infinity limit x3/x123^3, written without cancellation
    x25 = x[:, 1] + x[:, 4]
    x3 = x[:, 2]
    s = x[:, 0] + x[:, 1] + x[:, 2]
    Q = x25 * (1 - x25) * q2 + x3 * (1 - x3) * q3 + 2 * x25 * x3 * p23
    e = Q / lam0**2
    a = s + e
    if not subtract:
        return x3 / a**3
    return -x3 * e * (a * a + a * s + s * s) / (a**3 * s**3)


def _contracted_integral(kin: Kinematics, lam0: float, tol: float, subtract: bool,
                         max_evals: int) -> IntegralResult:
    q2 = float(kin.p2 @ kin.p2)
    q3 = float(kin.p3 @ kin.p3)
    p23 = float(kin.p2 @ kin.p3)

    def f(x):
        # the Ward identity produces the p2 <-> p3 swapped integral as well
        return np.stack([_contracted_kernel(x, q2, q3, p23, lam0, subtract),
                         _contracted_kernel(x, q3, q2, p23, lam0, subtract)], axis=1)

    return integrate_simplex(SimplexIntegrand(5, f, [(0, 1, 2)]), tol,
                             rtol=1e-12, max_evals=max_evals)


def contracted_triangle(kin: Kinematics, lambda0: float, tol: float = 1e-8,
                        max_evals: int = DEFAULT_MAX_EVALS,
                        strict: bool = False) -> ContractedTriangle:
    """``p1_mu Gamma_{mu nu rho}`` at ``lam = 0``.

    The epsilon coefficient is ``(I(p2, p3) + I(p3, p2))/pi^2`` with
    ``I(p2, p3) = int dmu_5 x3 L0^6 / [x~25 p2^2 + x~3 p3^2 + 2 x25 x3 p2.p3
    + x123 L0^2]^3``; the two terms coincide when ``p2^2 = p3^2``.
    """
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    res = _contracted_integral(kin, lambda0, tol * math.pi**2 / 2, False, max_evals)
    _check(res, "contracted triangle", strict)
    v = np.asarray(res.value)
    c = float(v.sum()) / math.pi**2
    err = float(np.sum(np.broadcast_to(res.error_estimate, v.shape))) / math.pi**2
    return ContractedTriangle(TRACE_SIGN * c * _w23(kin), c, err, res.evaluations, res.converged)


def contracted_deviation(kin: Kinematics, lambda0: float, tol: float = 1e-12,
                         max_evals: int = DEFAULT_MAX_EVALS,
                         strict: bool = False) -> ContractedTriangle:
    """Finite-``lambda0`` part of :func:`contracted_triangle`, i.e. the
    result minus its limit, integrated directly (no cancellation)."""
    res = _contracted_integral(kin, lambda0, tol * math.pi**2 / 2, True, max_evals)
    _check(res, "contracted deviation", strict)
    v = np.asarray(res.value)
    c = float(v.sum()) / math.pi**2
    err = float(np.sum(np.broadcast_to(res.error_estimate, v.shape))) / math.pi**2
    return ContractedTriangle(TRACE_SIGN * c * _w23(kin), c, err, res.evaluations, res.converged)


def calibrate_normalization(lambda0: float = 20.0, tol: float = 1e-9,
                            points: Optional[Sequence[Kinematics]] = None) -> tuple[float, float]:
    """Fit the signs ``(n_A, n_B)`` of the A and B prefactors so that
    ``p1 . Gamma`` built from A, B matches :func:`contracted_triangle`.

    Both A and B contribute to the contraction, so two reference points with
    different invariants give a 2x2 system.
    """
    if points is None:
        points = [Kinematics([1.0, 0.2, -0.3, 0.1], [-0.4, 0.9, 0.2, -0.2]),
                  Kinematics([0.6, -0.5, 0.1, 0.3], [0.2, 0.3, -0.8, 0.4])]
    cut = CutoffPair(0.0, lambda0)
    rows, rhs = [], []
    for kin in points:
        amp = scalar_amplitudes(kin, cut, tol)
        # undo the built-in signs, then split into A and B parts
        v = amp.vector()
        va = np.concatenate([v[:6] / NORM_A, np.zeros(6)])
        vb = np.concatenate([np.zeros(6), v[6:] / NORM_B])
        M = expr_matrix(kin)
        w = TRACE_SIGN * _w23(kin)
        proj = lambda g: float(np.einsum("m,mnr,nr->", kin.p1, g.reshape(4, 4, 4), w) / (w * w).sum())
        rows.append([proj(M @ va), proj(M @ vb)])
        rhs.append(contracted_triangle(kin, lambda0, tol).coefficient)
    na, nb = np.linalg.solve(np.array(rows), np.array(rhs))
    return float(na), float(nb)


# ---------------------------------------------------------------------------
# finite differences

def derivative_stencil(x0: np.ndarray, directions: Sequence[np.ndarray],
                       h: float) -> list[tuple[np.ndarray, float]]:
    """Points and weights of a central-difference derivative of order 0, 1
    or 2 along ``directions`` at ``x0``, with one Richardson step (h, h/2)."""
    x0 = np.asarray(x0, dtype=float)
    dirs = [np.asarray(d, dtype=float) for d in directions]
    if len(dirs) == 0:
        return [(x0, 1.0)]
    if len(dirs) > 2:
        raise ValueError("only derivatives of order <= 2 are supported")
    out = []
    for step, wr in ((h, -1.0 / 3.0), (h / 2, 4.0 / 3.0)):
        if len(dirs) == 1:
            u = dirs[0]
            out += [(x0 + step * u, wr / (2 * step)), (x0 - step * u, -wr / (2 * step))]
        else:
            u, v = dirs
            c = wr / (4 * step**2)
            out += [(x0 + step * (u + v), c), (x0 + step * (u - v), -c),
                    (x0 - step * (u - v), -c), (x0 - step * (u + v), c)]
    return out


def central_derivative(func: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                       directions: Sequence[np.ndarray], h: float) -> np.ndarray:
    """Mixed derivative of ``func`` along ``directions`` (order <= 2) at
    ``x0`` by central differences with one Richardson step."""
    return sum(w * np.asarray(func(p)) for p, w in derivative_stencil(x0, directions, h))


def _momentum_directions(derivative: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    # (leg, component) with leg in {2, 3}; coordinates are (p2, p3)
    dirs = []
    for leg, comp in derivative:
        if leg not in (2, 3) or comp not in range(4):
            raise ValueError(f"bad derivative index {(leg, comp)}")
        u = np.zeros(8)
        u[4 * (leg - 2) + comp] = 1.0
        dirs.append(u)
    return dirs


def contracted_derivative(kin: Kinematics, lambda0: float,
                          derivative: Sequence[tuple[int, int]] = (),
                          h: Optional[float] = None, tol: float = 1e-10,
                          subtract: bool = False, rtol: float = 1e-7,
                          max_evals: int = DEFAULT_MAX_EVALS) -> tuple[np.ndarray, float]:
    """``d^w (p1_mu Gamma_{mu nu rho})`` with respect to components of p2 and
    p3 (p1 = -p2 - p3), at ``lam = 0``.

    The difference stencil is applied inside the integrand so that all
    stencil points share quadrature nodes.  With ``subtract`` the
    ``lambda0 -> infinity`` limit is removed first.  Returns the (nu, rho)
    tensor and an error bound.
    """
    x0 = np.concatenate([kin.p2, kin.p3])
    step = h if h is not None else 1e-2 * kin.scale()
    pts = derivative_stencil(x0, _momentum_directions(derivative), step)
    kins = [Kinematics.from_p2_p3(p[:4], p[4:]) for p, _ in pts]
    qs = [(float(k.p2 @ k.p2), float(k.p3 @ k.p3), float(k.p2 @ k.p3)) for k in kins]
    W = np.array([w * TRACE_SIGN * _w23(k).ravel() / math.pi**2 for k, (_, w) in zip(kins, pts)])

    def f(x):
        K = np.empty((x.shape[0], len(kins)))
        for j, (q2, q3, p23) in enumerate(qs):
            K[:, j] = (_contracted_kernel(x, q2, q3, p23, lambda0, subtract)
                       + _contracted_kernel(x, q3, q2, p23, lambda0, subtract))
        return K @ W

    res = integrate_simplex(SimplexIntegrand(5, f, [(0, 1, 2)]), tol, rtol=rtol,
                            max_evals=max_evals)
    err = float(np.max(res.error_estimate))
    return np.asarray(res.value).reshape(4, 4), err


# ---------------------------------------------------------------------------
# scans

@dataclass
class UVScanReport:
    lambda0: np.ndarray
    deviation: np.ndarray
    error: np.ndarray
    slope: float
    derivative: tuple


def uv_scan(kin: Kinematics, lambda0_list: Sequence[float],
            derivative: Sequence[tuple[int, int]] = (), tol: float = 1e-13,
            h: Optional[float] = None) -> UVScanReport:
    """Deviation of the contracted triangle from its limit versus lambda0.

    ``derivative`` is a multi-index of (leg, component) pairs with leg in
    {2, 3} (p1 follows from momentum conservation); at most two entries.
    The deviation is the max-abs over the (nu, rho) components, integrated
    directly as a difference to the limit.
    """
    lams = np.asarray(lambda0_list, dtype=float)
    if len(lams) < 2 or np.any(np.diff(lams) <= 0):
        raise ValueError("lambda0_list must be ascending with at least two entries")
    if len(derivative) > 2:
        raise ValueError("derivative order must be <= 2")
    dev, err = [], []
    for lam0 in lams:
        d, e = contracted_derivative(kin, lam0, derivative, h, tol, subtract=True)
        dev.append(float(np.abs(d).max()))
        err.append(e)
    dev = np.array(dev)
    slope = float(np.polyfit(np.log(lams), np.log(dev), 1)[0])
    return UVScanReport(lams, dev, np.array(err), slope, tuple(derivative))


def ir_bound(p3sq: float, lam: float) -> float:
    """Upper bound on the finite remainder f of the IR scan."""
    r = math.sqrt((p3sq + 4 * lam**2) / p3sq)
    return 20.0 / (math.pi**2 * math.sqrt(p3sq * (p3sq + 4 * lam**2))) * math.log(1 + r)


@dataclass
class IRScanReport:
    lambdas: np.ndarray
    coefficient: np.ndarray          # eps-projection of the Laplacian, times TRACE_SIGN
    error: np.ndarray
    log_coefficient: float           # fitted a in coefficient*(p3^2+L^2) = a ln L^2 + b
    log_coefficient_reference: float
    mu2: float
    remainder: np.ndarray            # f at each lambda
    bound: np.ndarray
    other_projection: np.ndarray     # max |Laplacian - eps part| per lambda
    r_squared: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.log_coefficient / self.log_coefficient_reference - 1)

    @property
    def bound_ok(self) -> bool:
        return bool(np.all(np.abs(self.remainder) <= self.bound))


def _ab_laplacian_p2(p3: np.ndarray, cutoffs: CutoffPair, h: float, tol: float,
                     max_evals: int) -> tuple[np.ndarray, float, int]:
    """``delta_ab d^2 Gamma / dp2_a dp2_b`` at ``p2 = 0`` (p3 fixed).

    The stencil is applied inside the integrand, so all stencil points share
    the quadrature nodes and the noise cancels in the differences.  One
    Richardson step combines steps h and h/2.
    """
    kins, weights = [], []
    for step, wr in ((h, -1.0 / 3.0), (h / 2, 4.0 / 3.0)):
        kins.append(Kinematics.from_p2_p3(np.zeros(4), p3))
        weights.append(wr * (-8.0) / step**2)
        for a in range(4):
            for sgn in (1.0, -1.0):
                e = np.zeros(4)
                e[a] = sgn * step
                kins.append(Kinematics.from_p2_p3(e, p3))
                weights.append(wr / step**2)
    qs = np.array([[k.squares()[int(c) - 1] for c in s] for k in kins for s in PERMUTATIONS])
    scale = _ab_scale(cutoffs, 6)
    mats = [expr_matrix(k) * scale[None, :] * w for k, w in zip(kins, weights)]
    n = len(kins)
    # kernel columns come as [A for all (kin, ordering)] + [B for all ...]
    big = np.zeros((12 * n, 64))
    for j, M in enumerate(mats):
        big[6 * j:6 * j + 6] = M[:, :6].T
        big[6 * n + 6 * j:6 * n + 6 * j + 6] = M[:, 6:].T

    def f(x):
        return _ab_kernels(x, qs, cutoffs) @ big

    res = integrate_simplex(SimplexIntegrand(6, f, _UV_FACE), tol, rtol=1e-10,
                            max_evals=max_evals)
    err = float(np.max(res.error_estimate))
    return np.asarray(res.value).reshape(4, 4, 4), err, res.evaluations


def ir_second_derivative_scan(p3, lambda_list: Sequence[float], lambda0: float,
                              tol: float = 1e-6, h_factor: float = 0.05,
                              max_evals: int = DEFAULT_MAX_EVALS,
                              min_r_squared: float = 0.999) -> IRScanReport:
    """Laplacian in p2 at ``p2 = 0`` of the three-photon tensor for a
    sequence of infrared regulators, and a fit of its logarithmic growth.

    The epsilon projection ``c(L)`` of the Laplacian (times TRACE_SIGN) is
    fitted as ``c (p3^2 + L^2) = a ln L^2 + b``; ``mu^2 = exp(-b/a)`` and the
    remainder is ``f = c - a ln(L^2/mu^2)/(p3^2 + L^2)``.
    """
    p3 = np.asarray(p3, dtype=float)
    p3sq = float(p3 @ p3)
    if p3sq == 0:
        raise ValueError("p3 must be nonzero")
    lams = np.asarray(lambda_list, dtype=float)
    if len(lams) < 2 or np.any(np.diff(lams) >= 0):
        raise ValueError("lambda_list must be decreasing with at least two entries")
    E = np.einsum("mnrs,s->mnr", EPSILON, p3)
    coef, errs, other = [], [], []
    for lam in lams:
        cut = CutoffPair(lam, lambda0)
        h = h_factor * min(lam, math.sqrt(p3sq))
        lap, err, _ = _ab_laplacian_p2(p3, cut, h, tol, max_evals)
        c = float((lap * E).sum() / (E * E).sum())
        coef.append(TRACE_SIGN * c)
        errs.append(err * np.abs(E).sum() / (E * E).sum())
        other.append(float(np.abs(lap - c * E).max()))
    coef = np.array(coef)
    y = coef * (p3sq + lams**2)
    X = np.stack([np.log(lams**2), np.ones(len(lams))], axis=1)
    (a, b), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ np.array([a, b])
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    mu2 = math.exp(-b / a) if a != 0 else float("nan")
    f = coef - a * np.log(lams**2 / mu2) / (p3sq + lams**2)
    report = IRScanReport(lams, coef, np.array(errs), float(a), 1.0 / (2 * math.pi**2), mu2,
                          f, np.array([ir_bound(p3sq, l) for l in lams]), np.array(other), r2)
    if r2 < min_r_squared:
        raise NonConvergence(f"logarithmic fit quality too low (R^2 = {r2:.4f})")
    return report
