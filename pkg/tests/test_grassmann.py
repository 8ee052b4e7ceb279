from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiral_anomaly.grassmann import (
    FIELD_NAMES,
    AlgebraMismatch,
    GeneratorBoundExceeded,
    GrassmannAlgebra,
    GrassmannMatrix,
    ModeLattice,
    StructuralPreconditionError,
    build_brs_jacobian,
    g_det,
    g_matmul,
    g_mul,
    verify_unit_jacobian,
)

ALG = GrassmannAlgebra(("t1", "t2", "t3", "t4", "eps"))
UNIT = {"R1": 1, "R2": 1, "R3": 1, "R4": 1}
rat = st.fractions(min_value=-4, max_value=4, max_denominator=5)


@st.composite
def elements(draw, max_terms=4):
    e = ALG.scalar(draw(rat))
    for _ in range(draw(st.integers(0, max_terms))):
        gens = draw(st.lists(st.sampled_from(ALG.generators), min_size=1, max_size=2, unique=True))
        m = ALG.scalar(draw(rat))
        for g in gens:
            m = m * ALG.gen(g)
        e = e + m
    return e


def test_anticommutation_and_nilpotency():
    a, b = ALG.gen("t1"), ALG.gen("t2")
    assert g_mul(a, b) == -g_mul(b, a)
    assert g_mul(a, a).is_zero()


def test_eps_square_kills_cross_term():
    t1, t2, eps = ALG.gen("t1"), ALG.gen("t2"), ALG.gen("eps")
    x = 1 + Fraction(2) * t1 * eps
    y = 1 + Fraction(3) * t2 * eps
    assert x * y == 1 + Fraction(2) * t1 * eps + Fraction(3) * t2 * eps


@given(elements(), elements(), elements())
def test_associativity(a, b, c):
    assert (a * b) * c == a * (b * c)


@given(elements(), elements(), elements())
def test_distributivity(a, b, c):
    assert a * (b + c) == a * b + a * c


@given(elements(), elements())
def test_even_elements_commute(a, b):
    if a.is_even() and b.is_even():
        assert a * b == b * a


def test_algebra_checks():
    other = GrassmannAlgebra(("x",))
    with pytest.raises(AlgebraMismatch):
        ALG.gen("t1") + other.gen("x")
    with pytest.raises(GeneratorBoundExceeded):
        GrassmannAlgebra(tuple(f"g{i}" for i in range(30)))
    with pytest.raises(ValueError):
        GrassmannAlgebra(("a", "a"))


def small_matrix(entries):
    return GrassmannMatrix(ALG, [[e if not isinstance(e, (int, Fraction)) else ALG.scalar(e)
                                  for e in row] for row in entries])


def test_determinant_examples():
    eps, t1, t2 = ALG.gen("eps"), ALG.gen("t1"), ALG.gen("t2")
    M = small_matrix([[1, t1 * eps], [t2 * eps, 1]])
    for method in ("leibniz", "minor_expansion", "structural"):
        assert g_det(M, method) == ALG.one()
    T = small_matrix([[1, Fraction(5) * eps], [0, 1]])
    assert g_det(T, "leibniz") == ALG.one()
    for n in (1, 4, 7):
        assert g_det(GrassmannMatrix.identity(ALG, n), "minor_expansion") == ALG.one()


def test_ordinary_numbers_give_ordinary_determinant():
    M = small_matrix([[2, 1, 0], [1, 3, 1], [0, 1, 4]])
    assert g_det(M, "leibniz") == ALG.scalar(18)
    assert g_det(M, "minor_expansion") == ALG.scalar(18)


def test_structural_precondition_and_size_limits():
    with pytest.raises(StructuralPreconditionError):
        g_det(small_matrix([[1, 1], [0, 1]]), "structural")
    with pytest.raises(ValueError):
        g_det(GrassmannMatrix.identity(ALG, 11), "leibniz")
    with pytest.raises(ValueError):
        g_det(GrassmannMatrix.identity(ALG, 2), "bogus")


@st.composite
def matrices(draw, n):
    return small_matrix([[draw(elements(2)) for _ in range(n)] for _ in range(n)])


@given(st.integers(1, 4).flatmap(matrices))
def test_leibniz_equals_minor_expansion(M):
    assert g_det(M, "leibniz") == g_det(M, "minor_expansion")


@st.composite
def unit_plus_eps(draw, n):
    eps = ALG.gen("eps")
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            c = draw(rat)
            g = ALG.gen(draw(st.sampled_from(("t1", "t2", "t3"))))
            row.append(ALG.one() + c * g * eps if i == j else c * eps + draw(rat) * g * eps)
        rows.append(row)
    return small_matrix(rows)


@given(st.integers(1, 5).flatmap(unit_plus_eps))
def test_structural_agrees_and_inverse(M):
    d = g_det(M, "structural")
    assert d == g_det(M, "minor_expansion") == g_det(M, "leibniz")
    n = M.dim
    N = [[M.entries[i][j] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    inv = small_matrix([[(1 if i == j else 0) - N[i][j] for j in range(n)] for i in range(n)])
    eye = GrassmannMatrix.identity(ALG, n)
    for P in (g_matmul(M, inv), g_matmul(inv, M)):
        assert all(P.entries[i][j] == eye.entries[i][j] for i in range(n) for j in range(n))


def test_mode_lattice():
    m = ModeLattice.parse("3x1x1x1")
    assert len(m) == 3 and (1, 0, 0, 0) in m and (-1, 0, 0, 0) in m
    assert len(ModeLattice.from_cutoff(1)) == 9
    with pytest.raises(ValueError):
        ModeLattice.parse("3xa")
    assert len(ModeLattice.parse("3")) == 3


def test_brs_matrix_structure_full_single_mode():
    M = build_brs_jacobian(ModeLattice.box((1, 1, 1, 1)), 2, UNIT, field_content="full")
    assert M.dim == len(FIELD_NAMES)
    one = M.algebra.one()
    assert all(M.entries[i][i] == one for i in range(M.dim))
    off = [e for i, j, e in M.nonzero() if i != j]
    assert off and all(e.divisible_by("eps") for e in off)


def test_reduced_lattice_both_methods():
    cert = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, UNIT, field_content="reduced")
    assert cert.passed and cert.dim == 9
    assert set(cert.determinants) == {"structural", "minor_expansion", "leibniz"}


def test_full_multi_mode_structural():
    cert = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, UNIT, field_content="full")
    assert cert.passed and cert.dim == 42
    assert "structural" in cert.determinants


@given(st.lists(st.fractions(min_value=Fraction(1, 5), max_value=5, max_denominator=9),
                min_size=5, max_size=5))
def test_scaling_invariance(vals):
    consts = dict(zip(("R1", "R2", "R3", "R4"), vals[:4]))
    cert = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, consts, g=vals[4],
                                field_content=("psi1", "psi3", "c"))
    assert cert.passed


@pytest.mark.parametrize("how", ["diag", "offdiag"])
def test_mutated_matrix_fails_with_location(how):
    cert = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, UNIT,
                                field_content="reduced", mutate=how)
    assert not cert.passed
    assert cert.counterexample is not None and "row" in cert.counterexample
    assert "FAIL" in cert.to_text()


def test_generator_bound_enforced():
    with pytest.raises(GeneratorBoundExceeded):
        build_brs_jacobian(ModeLattice.from_cutoff(1), 1, UNIT, field_content="full",
                           max_generators=24)
