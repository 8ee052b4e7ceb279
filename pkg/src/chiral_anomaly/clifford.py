"""Exact Euclidean Dirac algebra.

Gamma matrices obey ``{g_mu, g_nu} = -2 delta_{mu nu}`` and
``gamma5 = -g0 g1 g2 g3``.  Entries are Gaussian rationals stored as two
object arrays of :class:`fractions.Fraction` (real and imaginary parts), so
every identity below holds with zero tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

__all__ = [
    "GammaMatrix",
    "Gamma",
    "Gamma5",
    "Slash",
    "gamma",
    "gamma5",
    "identity",
    "trace_product",
    "epsilon",
    "EPSILON",
    "TRACE_SIGN",
    "trace_tensor",
]


def _frac_array(a) -> np.ndarray:
    out = np.empty((4, 4), dtype=object)
    for i in range(4):
        for j in range(4):
            out[i, j] = Fraction(a[i][j])
    return out


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    """A 4x4 matrix with Gaussian-rational entries ``re + i*im``."""

    re: np.ndarray
    im: np.ndarray

    @classmethod
    def from_complex(cls, m) -> "GammaMatrix":
        m = np.asarray(m, dtype=complex)
        return cls(_frac_array(m.real.tolist()), _frac_array(m.imag.tolist()))

    def __matmul__(self, other: "GammaMatrix") -> "GammaMatrix":
        re = self.re.dot(other.re) - self.im.dot(other.im)
        im = self.re.dot(other.im) + self.im.dot(other.re)
        return GammaMatrix(re, im)

    __mul__ = __matmul__

    def __add__(self, other: "GammaMatrix") -> "GammaMatrix":
        return GammaMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "GammaMatrix") -> "GammaMatrix":
        return GammaMatrix(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "GammaMatrix":
        return GammaMatrix(-self.re, -self.im)

    def scale(self, c) -> "GammaMatrix":
        """Multiply by a rational (real) scalar."""
        c = Fraction(c)
        return GammaMatrix(self.re * c, self.im * c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GammaMatrix):
            return NotImplemented
        return bool(np.all(self.re == other.re) and np.all(self.im == other.im))

    def __hash__(self):
        return hash((tuple(self.re.ravel()), tuple(self.im.ravel())))

    def trace(self) -> complex | Fraction:
        re = sum(self.re[i, i] for i in range(4))
        im = sum(self.im[i, i] for i in range(4))
        return re if im == 0 else complex(re, im)

    def to_complex(self) -> np.ndarray:
        return self.re.astype(float) + 1j * self.im.astype(float)


# Chiral basis built from Pauli matrices.  The hermitian set
# {sigma_1 x sigma_a (a=1..3), sigma_2 x 1} squares to +1; multiplying by i
# gives the required -1.
_s0 = np.eye(2)
_s1 = np.array([[0, 1], [1, 0]])
_s2 = np.array([[0, -1j], [1j, 0]])
_s3 = np.array([[1, 0], [0, -1]])
_HERMITIAN = [np.kron(_s2, _s0)] + [np.kron(_s1, s) for s in (_s1, _s2, _s3)]
_GAMMAS = tuple(GammaMatrix.from_complex(1j * h) for h in _HERMITIAN)


def _check_index(mu: int) -> None:
    if not isinstance(mu, (int, np.integer)) or not 0 <= mu <= 3:
        raise IndexError(f"Lorentz index must be in 0..3, got {mu!r}")


def gamma(mu: int) -> GammaMatrix:
    _check_index(mu)
    return _GAMMAS[mu]


def identity() -> GammaMatrix:
    return GammaMatrix.from_complex(np.eye(4))


@lru_cache(maxsize=None)
def gamma5() -> GammaMatrix:
    g = _GAMMAS
    return -(g[0] @ g[1] @ g[2] @ g[3])


@dataclass(frozen=True)
class Gamma:
    mu: int

    def __post_init__(self):
        _check_index(self.mu)


@dataclass(frozen=True)
class Gamma5:
    pass


@dataclass(frozen=True)
class Slash:
    """``p_mu gamma_mu`` for a rational 4-vector ``p``."""

    p: tuple

    def __post_init__(self):
        if len(self.p) != 4:
            raise ValueError("Slash needs a 4-vector")
        object.__setattr__(self, "p", tuple(Fraction(c) for c in self.p))


GammaFactor = Union[Gamma, Gamma5, Slash]


def _matrix(f: GammaFactor) -> GammaMatrix:
    if isinstance(f, Gamma):
        return gamma(f.mu)
    if isinstance(f, Gamma5):
        return gamma5()
    if isinstance(f, Slash):
        out = gamma(0).scale(f.p[0])
        for mu in range(1, 4):
            out = out + gamma(mu).scale(f.p[mu])
        return out
    raise TypeError(f"not a gamma factor: {f!r}")


def trace_product(factors: Sequence[GammaFactor]):
    """Exact trace of the ordered product of ``factors``.

    Returns a :class:`Fraction` when the trace is real, else a ``complex``.
    """
    if not factors:
        return Fraction(4)
    m = _matrix(factors[0])
    for f in factors[1:]:
        m = m @ _matrix(f)
    return m.trace()


def epsilon(mu: int, nu: int, rho: int, sigma: int) -> int:
    idx = (mu, nu, rho, sigma)
    for i in idx:
        _check_index(i)
    if len(set(idx)) < 4:
        return 0
    sign = 1
    lst = list(idx)
    for i in range(4):
        for j in range(i + 1, 4):
            if lst[i] > lst[j]:
                sign = -sign
    return sign


EPSILON = np.zeros((4, 4, 4, 4))
for _p in itertools.permutations(range(4)):
    EPSILON[_p] = epsilon(*_p)

# tr(gamma5 g_mu g_nu g_rho g_sigma) = TRACE_SIGN * 4 * epsilon(mu, nu, rho, sigma)
TRACE_SIGN = int(trace_product([Gamma5(), Gamma(0), Gamma(1), Gamma(2), Gamma(3)]) / 4)


def _int_gammas() -> tuple[np.ndarray, np.ndarray]:
    g = np.array([m.to_complex() for m in _GAMMAS])
    g5 = gamma5().to_complex()
    return g, g5


@lru_cache(maxsize=None)
def trace_tensor(n: int, with_gamma5: bool = True) -> np.ndarray:
    """``T[a1..an] = tr(gamma5 g_a1 ... g_an)`` (or without gamma5) as an
    exact integer array of shape ``(4,)*n``.

    Entries of products of the basis matrices are Gaussian integers of
    modulus <= 1, so complex128 arithmetic is exact here; the result is
    checked to be integral before conversion.
    """
    g, g5 = _int_gammas()
    out = np.zeros((4,) * n, dtype=complex)
    for idx in itertools.product(range(4), repeat=n):
        m = g5.copy() if with_gamma5 else np.eye(4, dtype=complex)
        for a in idx:
            m = m @ g[a]
        out[idx] = np.trace(m)
    if np.any(out.imag != 0) or np.any(out.real != np.round(out.real)):
        raise ArithmeticError("trace tensor is not a real integer array")
    return out.real.astype(np.int64)
