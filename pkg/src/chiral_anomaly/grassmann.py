"""Finite Grassmann algebras, Grassmann-valued matrices and determinants,
and the Jacobian matrix of the cutoff-regularized BRS transformation on a
truncated plane-wave lattice.

Coefficients are exact Gaussian rationals (sympy's ``QQ_I``).  A monomial is
stored as an integer bitmask over the generators; products pick up the sign
of the shuffle that sorts the generators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from sympy.polys.domains import QQ_I

__all__ = [
    "GrassmannAlgebra",
    "GrassmannElement",
    "GrassmannMatrix",
    "AlgebraMismatch",
    "GeneratorBoundExceeded",
    "StructuralPreconditionError",
    "g_mul",
    "g_det",
    "g_matmul",
    "ModeLattice",
    "FIELD_NAMES",
    "FIELD_PRESETS",
    "build_brs_jacobian",
    "verify_unit_jacobian",
    "Certificate",
    "coeff",
]

DEFAULT_GENERATOR_BOUND = 24
MAX_DENSE_DIM = 10


class AlgebraMismatch(ValueError):
    pass


class GeneratorBoundExceeded(ValueError):
    pass


class StructuralPreconditionError(ValueError):
    pass


def coeff(x):
    """Convert int, Fraction, complex-with-rational-parts or QQ_I to QQ_I."""
    if isinstance(x, complex):
        return QQ_I(Fraction(x.real).limit_denominator(), Fraction(x.imag).limit_denominator())
    if isinstance(x, tuple):
        return QQ_I(QQ_I.dom.convert(Fraction(x[0])), QQ_I.dom.convert(Fraction(x[1])))
    if isinstance(x, Fraction):
        return QQ_I.convert(QQ_I.dom.convert(x))
    return QQ_I.convert(x)


_ZERO = QQ_I.zero
_ONE = QQ_I.one


def _shuffle_sign(a: int, b: int) -> int:
    """Sign of ``theta_a theta_b`` brought into sorted order (disjoint masks):
    one transposition for every pair (i in a, j in b) with i > j."""
    n = 0
    bb = b
    while bb:
        low = bb & -bb
        j = low.bit_length() - 1
        n += bin(a >> (j + 1)).count("1")
        bb ^= low
    return -1 if n & 1 else 1


@dataclass(frozen=True)
class GrassmannAlgebra:
    """Ordered anticommuting generators."""

    generators: tuple
    bound: int = DEFAULT_GENERATOR_BOUND

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if len(set(self.generators)) != len(self.generators):
            raise ValueError("generator names must be distinct")
        if len(self.generators) > self.bound:
            raise GeneratorBoundExceeded(
                f"{len(self.generators)} generators exceed the bound {self.bound}")

    def index(self, name) -> int:
        return self.generators.index(name)

    def gen(self, name) -> "GrassmannElement":
        return GrassmannElement(self, {1 << self.index(name): _ONE})

    def scalar(self, c) -> "GrassmannElement":
        c = coeff(c)
        return GrassmannElement(self, {0: c} if c else {})

    def zero(self) -> "GrassmannElement":
        return GrassmannElement(self, {})

    def one(self) -> "GrassmannElement":
        return self.scalar(1)


class GrassmannElement:
    """Linear combination of monomials; ``terms`` maps bitmask -> QQ_I."""

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: GrassmannAlgebra, terms: Mapping[int, object]):
        self.algebra = algebra
        self.terms = {m: c for m, c in terms.items() if c}

    def _check(self, other: "GrassmannElement") -> None:
        if other.algebra is not self.algebra and other.algebra != self.algebra:
            raise AlgebraMismatch("elements belong to different algebras")

    def _lift(self, other) -> "GrassmannElement":
        if isinstance(other, GrassmannElement):
            self._check(other)
            return other
        return self.algebra.scalar(other)

    def __add__(self, other):
        other = self._lift(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, _ZERO) + c
        return GrassmannElement(self.algebra, t)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.algebra, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        return g_mul(self, self._lift(other))

    def __rmul__(self, other):
        return g_mul(self._lift(other), self)

    def __eq__(self, other):
        if not isinstance(other, GrassmannElement):
            other = self.algebra.scalar(other)
        return self.algebra == other.algebra and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def scalar_part(self):
        return self.terms.get(0, _ZERO)

    def without_scalar(self) -> "GrassmannElement":
        return GrassmannElement(self.algebra, {m: c for m, c in self.terms.items() if m})

    def divisible_by(self, name) -> bool:
        """Every monomial contains generator ``name``."""
        bit = 1 << self.algebra.index(name)
        return all(m & bit for m in self.terms)

    def is_even(self) -> bool:
        return all(bin(m).count("1") % 2 == 0 for m in self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda m: (bin(m).count("1"), m)):
            names = [str(g) for i, g in enumerate(self.algebra.generators) if m >> i & 1]
            c = self.terms[m]
            parts.append(f"({c})" + ("*" + "*".join(names) if names else ""))
        return " + ".join(parts)


def g_mul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Exterior product ``a b``."""
    a._check(b)
    out: dict = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            if ma & mb:
                continue
            m = ma | mb
            c = ca * cb
            if _shuffle_sign(ma, mb) < 0:
                c = -c
            out[m] = out.get(m, _ZERO) + c
    return GrassmannElement(a.algebra, out)


# ---------------------------------------------------------------------------
# matrices

@dataclass
class GrassmannMatrix:
    algebra: GrassmannAlgebra
    entries: list
    block_map: Optional[list] = None

    def __post_init__(self):
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise ValueError("matrix must be square")

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def label(self, i: int):
        return self.block_map[i] if self.block_map else i

    def nonzero(self) -> Iterable[tuple[int, int, GrassmannElement]]:
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                if not e.is_zero():
                    yield i, j, e

    @classmethod
    def identity(cls, algebra: GrassmannAlgebra, n: int) -> "GrassmannMatrix":
        return cls(algebra, [[algebra.one() if i == j else algebra.zero() for j in range(n)]
                             for i in range(n)])

    def copy(self) -> "GrassmannMatrix":
        return GrassmannMatrix(self.algebra, [list(r) for r in self.entries],
                               list(self.block_map) if self.block_map else None)


def g_matmul(A: GrassmannMatrix, B: GrassmannMatrix) -> GrassmannMatrix:
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    alg = A.algebra
    n = A.dim
    out = [[alg.zero() for _ in range(n)] for _ in range(n)]
    for i, k, a in A.nonzero():
        for j in range(n):
            b = B.entries[k][j]
            if not b.is_zero():
                out[i][j] = out[i][j] + g_mul(a, b)
    return GrassmannMatrix(alg, out, A.block_map)


def _perm_sign(p: Sequence[int]) -> int:
    s = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, L = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            L += 1
        if L % 2 == 0:
            s = -s
    return s


def _det_leibniz(M: GrassmannMatrix) -> GrassmannElement:
    # sum over permutations, skipping those that hit a zero entry; the
    # product is always taken in row order
    n = M.dim
    alg = M.algebra
    cols = [[j for j in range(n) if not M.entries[i][j].is_zero()] for i in range(n)]
    total = alg.zero()
    perm = [0] * n
    used = [False] * n

    def rec(i: int, acc: GrassmannElement):
        nonlocal total
        if acc.is_zero():
            return
        if i == n:
            total = total + (acc if _perm_sign(perm) > 0 else -acc)
            return
        for j in cols[i]:
            if not used[j]:
                used[j] = True
                perm[i] = j
                rec(i + 1, g_mul(acc, M.entries[i][j]))
                used[j] = False

    rec(0, alg.one())
    return total


def _det_minor(M: GrassmannMatrix) -> GrassmannElement:
    # Laplace expansion along successive rows, memoized on the set of
    # columns still available; M[row, j] multiplies its minor from the left
    n = M.dim
    alg = M.algebra
    memo: dict = {}

    def det(row: int, free: int) -> GrassmannElement:
        if row == n:
            return alg.one()
        if free in memo:
            return memo[free]
        out = alg.zero()
        k = 0
        for j in range(n):
            if not free >> j & 1:
                continue
            e = M.entries[row][j]
            if not e.is_zero():
                sub = det(row + 1, free & ~(1 << j))
                term = g_mul(e, sub)
                out = out + (term if k % 2 == 0 else -term)
            k += 1
        memo[free] = out
        return out

    return det(0, (1 << n) - 1)


def _structural_violation(M: GrassmannMatrix, eps) -> Optional[tuple]:
    for i in range(M.dim):
        for j in range(M.dim):
            e = M.entries[i][j]
            if i == j:
                if e.scalar_part() != _ONE or not e.without_scalar().divisible_by(eps):
                    return (i, j, "diagonal entry is not 1 + (multiple of eps)")
            elif not e.divisible_by(eps):
                return (i, j, "off-diagonal entry is not a multiple of eps")
    return None


def _det_structural(M: GrassmannMatrix, eps) -> GrassmannElement:
    bad = _structural_violation(M, eps)
    if bad is not None:
        i, j, why = bad
        raise StructuralPreconditionError(f"entry ({i}, {j}) [{M.label(i)} , {M.label(j)}]: {why}")
    # any permutation other than the identity uses two eps-carrying entries,
    # and the identity term is 1 + sum of diagonal eps-parts (eps^2 = 0)
    out = M.algebra.one()
    for i in range(M.dim):
        out = out + M.entries[i][i].without_scalar()
    return out


def g_det(M: GrassmannMatrix, method: str = "minor_expansion", eps="eps",
          max_dim: int = MAX_DENSE_DIM) -> GrassmannElement:
    """Determinant with Grassmann products taken in row order.

    ``leibniz`` and ``minor_expansion`` are limited to ``dim <= max_dim``;
    ``structural`` needs unit diagonal (up to eps-multiples) and
    eps-multiple off-diagonal entries, and returns ``1 + sum_i (M_ii - 1)``.
    """
    if method in ("leibniz", "minor_expansion"):
        if M.dim > max_dim:
            raise ValueError(f"{method} determinant limited to dim <= {max_dim} (got {M.dim})")
        return _det_leibniz(M) if method == "leibniz" else _det_minor(M)
    if method == "structural":
        return _det_structural(M, eps)
    raise ValueError(f"unknown determinant method {method!r}")


# ---------------------------------------------------------------------------
# BRS Jacobian on a mode lattice

# field order: A_0..A_3, psi_1..psi_4, psibar_1..psibar_4, c, cbar
FIELD_NAMES = ("A0", "A1", "A2", "A3", "psi1", "psi2", "psi3", "psi4",
               "psibar1", "psibar2", "psibar3", "psibar4", "c", "cbar")

FIELD_PRESETS = {
    "full": FIELD_NAMES,
    "reduced": ("A0", "c", "cbar"),
    "gauge": ("A0", "A1", "A2", "A3", "c", "cbar"),
    "fermion": ("psi1", "psi2", "psi3", "psi4", "c"),
}


@dataclass(frozen=True)
class ModeLattice:
    """Integer mode vectors ``n``; momenta are ``k_n = n * (2 pi / L)``."""

    points: tuple

    def __post_init__(self):
        pts = tuple(tuple(int(v) for v in p) for p in self.points)
        if not pts or any(len(p) != 4 for p in pts):
            raise ValueError("modes must be non-empty 4-component integer vectors")
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate modes")
        object.__setattr__(self, "points", pts)

    @classmethod
    def box(cls, shape: Sequence[int]) -> "ModeLattice":
        """Centered box, e.g. ``(3, 1, 1, 1)`` gives n_0 in {-1, 0, 1}."""
        if len(shape) != 4 or any(s < 1 for s in shape):
            raise ValueError("shape needs four positive entries")
        ranges = [range(-(s // 2), s - s // 2) for s in shape]
        return cls(tuple(itertools.product(*ranges)))

    @classmethod
    def parse(cls, spec: str) -> "ModeLattice":
        """``"3x1x1x1"`` style box specification."""
        try:
            shape = [int(v) for v in spec.lower().split("x")]
        except ValueError:
            raise ValueError(f"bad mode specification {spec!r}") from None
        shape += [1] * (4 - len(shape))
        return cls.box(shape)

    @classmethod
    def from_cutoff(cls, lambda0, dims: int = 4) -> "ModeLattice":
        """All ``n`` with ``|n| <= lambda0`` (``lambda0`` in units of 2 pi/L)
        in the first ``dims`` directions."""
        lam2 = Fraction(lambda0) ** 2
        r = int(Fraction(lambda0))
        rng = [range(-r, r + 1) if d < dims else range(0, 1) for d in range(4)]
        return cls(tuple(p for p in itertools.product(*rng) if sum(v * v for v in p) <= lam2))

    def __len__(self):
        return len(self.points)

    def __contains__(self, p):
        return tuple(p) in set(self.points)


def _sigma(n: Sequence[int], lambda0) -> Fraction:
    # Pauli-Villars sigma_{0, L0}(k) = L0^2/(k^2 + L0^2), momenta in 2 pi/L
    l2 = Fraction(lambda0) ** 2
    return l2 / (sum(v * v for v in n) + l2)


def _resolve_fields(field_content) -> tuple:
    if isinstance(field_content, str):
        if field_content in FIELD_PRESETS:
            return FIELD_PRESETS[field_content]
        field_content = [f.strip() for f in field_content.split(",") if f.strip()]
    fields = tuple(field_content)
    unknown = [f for f in fields if f not in FIELD_NAMES]
    if unknown or not fields:
        raise ValueError(f"unknown field names {unknown}")
    # keep the canonical order
    return tuple(f for f in FIELD_NAMES if f in fields)


def build_brs_jacobian(modes: ModeLattice, lambda0, constants: Mapping[str, object],
                       g=1, alpha=1, field_content="full",
                       max_generators: int = 64) -> GrassmannMatrix:
    """Jacobian matrix ``d phi'_{i,n} / d phi_{j,n'}`` of the regularized BRS
    change of variables; row ``(j, n')``, column ``(i, n)``.

    ``constants`` holds R1..R4 (keys ``"R1"``.. ``"R4"``).  Generators of the
    algebra are ``eps`` and the modes of c, psi, psibar present in
    ``field_content`` (modes outside the lattice are cut off, i.e. zero).
    """
    fields = _resolve_fields(field_content)
    R = {k: coeff(Fraction(constants.get(k, 1))) for k in ("R1", "R2", "R3", "R4")}
    g = coeff(Fraction(g))
    alpha = Fraction(alpha)
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    pts = modes.points
    present = set(pts)
    gens = ["eps"]
    odd_fields = [f for f in fields if f == "c" or f.startswith("psi")]
    for f in odd_fields:
        for n in pts:
            gens.append((f, n))
    if len(gens) > max_generators:
        raise GeneratorBoundExceeded(
            f"{len(gens)} generators needed (fields {len(odd_fields)} x modes {len(pts)} + eps) "
            f"exceed the bound {max_generators}")
    alg = GrassmannAlgebra(tuple(gens), bound=max_generators)
    eps = alg.gen("eps")
    I = coeff((0, 1))

    def field(name, n):
        if name not in fields or tuple(n) not in present:
            return alg.zero()
        return alg.gen((name, tuple(n)))

    labels = [(f, n) for n in pts for f in fields]
    pos = {lab: i for i, lab in enumerate(labels)}
    N = len(labels)
    M = [[alg.zero() for _ in range(N)] for _ in range(N)]
    for i in range(N):
        M[i][i] = alg.one()

    def put(row, col, value: GrassmannElement):
        if row in pos and col in pos and not value.is_zero():
            M[pos[row]][pos[col]] = M[pos[row]][pos[col]] + value

    partner = lambda idx: (idx + 2 - 1) % 4 + 1  # i -> i+2 cyclically in 1..4
    for n in pts:
        s = coeff(_sigma(n, lambda0))
        for nn in pts:
            d = tuple(a - b for a, b in zip(n, nn))
            for kind, Rk in (("psi", R["R2"]), ("psibar", R["R3"])):
                pref = I * g * Rk * s
                for i in range(1, 5):
                    # d psi'_{i,n} / d psi_{i+2,n'} = i g R sigma(k_n) c_{n-n'} eps
                    put((f"{kind}{partner(i)}", nn), (f"{kind}{i}", n), field("c", d) * eps * pref)
                    # d psi'_{i,n} / d c_{n'} = i g R sigma(k_n) psi_{i+2,n-n'} eps
                    put(("c", nn), (f"{kind}{i}", n), field(f"{kind}{partner(i)}", d) * eps * pref)
        for mu in range(4):
            k = coeff(n[mu])
            # d A'_{mu,n} / d c_n = -i R1 sigma(k_n) k_{n,mu} eps
            put(("c", n), (f"A{mu}", n), eps * (-I * R["R1"] * s * k))
            # d cbar'_n / d A_{mu,n} = -i (R4/alpha) sigma(k_n) k_{n,mu} eps
            put((f"A{mu}", n), ("cbar", n), eps * (-I * R["R4"] * coeff(Fraction(1) / alpha) * s * k))
    return GrassmannMatrix(alg, M, labels)


# ---------------------------------------------------------------------------
# certificate

@dataclass
class Certificate:
    dim: int
    generators: int
    checks: list = field(default_factory=list)   # (name, passed, detail)
    determinants: dict = field(default_factory=dict)
    counterexample: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "generators": self.generators,
            "passed": self.passed,
            "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in self.checks],
            "determinants": {k: str(v) for k, v in self.determinants.items()},
            "counterexample": self.counterexample,
        }

    def to_text(self) -> str:
        lines = [f"jacobian certificate: dim={self.dim} generators={self.generators}"]
        for n, ok, d in self.checks:
            lines.append(f"  [{'PASS' if ok else 'FAIL'}] {n}: {d}")
        for k, v in self.determinants.items():
            lines.append(f"  det[{k}] = {v}")
        if self.counterexample:
            lines.append(f"  counterexample: {self.counterexample}")
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _mutate(M: GrassmannMatrix, how: str) -> GrassmannMatrix:
    M = M.copy()
    eps = M.algebra.gen("eps")
    if how == "diag":
        M.entries[0][0] = M.entries[0][0] + eps * coeff(Fraction(3, 7))
    elif how == "offdiag":
        j = 1 if M.dim > 1 else 0
        M.entries[0][j] = M.entries[0][j] + M.algebra.one()
    else:
        raise ValueError(f"unknown mutation {how!r}")
    return M


def verify_unit_jacobian(modes: ModeLattice, lambda0, constants: Mapping[str, object],
                         g=1, alpha=1, field_content="full", mutate: Optional[str] = None,
                         max_generators: int = 64,
                         dense_methods: Sequence[str] = ("minor_expansion", "leibniz")) -> Certificate:
    """Check that the BRS Jacobian matrix has determinant exactly 1.

    Checks: (i) diagonal entries exactly 1, (ii) off-diagonal entries are
    eps-multiples, (iii) the eps-part has zero trace, hence det = 1 by the
    structural argument; when ``dim <= 10`` the determinant is also expanded
    densely and compared with 1.  ``mutate`` ("diag" or "offdiag") plants a
    defect as a negative control.
    """
    M = build_brs_jacobian(modes, lambda0, constants, g, alpha, field_content, max_generators)
    if mutate:
        M = _mutate(M, mutate)
    alg = M.algebra
    cert = Certificate(M.dim, len(alg.generators))
    one = alg.one()

    bad_diag = next(((i, M.entries[i][i]) for i in range(M.dim) if M.entries[i][i] != one), None)
    cert.checks.append(("diagonal entries are exactly 1", bad_diag is None,
                        "all 1" if bad_diag is None else f"entry {M.label(bad_diag[0])} = {bad_diag[1]}"))
    if bad_diag is not None and cert.counterexample is None:
        i = bad_diag[0]
        cert.counterexample = {"row": i, "col": i, "label": str(M.label(i)), "value": str(bad_diag[1])}

    bad_off = None
    for i, j, e in M.nonzero():
        if i != j and not e.divisible_by("eps"):
            bad_off = (i, j, e)
            break
    cert.checks.append(("off-diagonal entries carry eps", bad_off is None,
                        "all eps-multiples" if bad_off is None
                        else f"entry ({M.label(bad_off[0])}, {M.label(bad_off[1])}) = {bad_off[2]}"))
    if bad_off is not None and cert.counterexample is None:
        i, j, e = bad_off
        cert.counterexample = {"row": i, "col": j, "label": f"{M.label(i)} / {M.label(j)}", "value": str(e)}

    tr = alg.zero()
    for i in range(M.dim):
        tr = tr + M.entries[i][i].without_scalar()
    cert.checks.append(("trace of eps-part vanishes", tr.is_zero(), str(tr)))

    try:
        d = g_det(M, "structural")
        cert.determinants["structural"] = d
        cert.checks.append(("structural det = 1", d == one, str(d)))
    except StructuralPreconditionError as exc:
        cert.checks.append(("structural det = 1", False, f"precondition: {exc}"))

    if M.dim <= MAX_DENSE_DIM:
        for method in dense_methods:
            d = g_det(M, method)
            cert.determinants[method] = d
            cert.checks.append((f"{method} det = 1", d == one, str(d)))
    return cert
