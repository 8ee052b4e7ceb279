from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from chiral_anomaly.loop_amplitudes import ANOMALY_LIMIT, Kinematics
from chiral_anomaly.vsti import (
    ZERO_SOLUTION,
    RenormalizationConstants,
    anomaly_obstruction,
    exact,
    relations_report,
    residual_r1_r2,
    residual_r3_r4,
    residual_r6,
    residual_r7,
    solve_relations,
    tetrahedral_point,
)

rat = st.fractions(min_value=-3, max_value=3, max_denominator=11)
ALGEBRAIC = ("r1", "r2", "r3", "r4", "r6", "r7")


@pytest.fixture(scope="module")
def obstruction():
    return anomaly_obstruction(1e3)


def test_exact_conversion():
    assert exact(0.3) == Fraction(3, 10)
    assert exact("1/7") == Fraction(1, 7)
    with pytest.raises(ValueError):
        exact(float("nan"))


def test_constants_validation():
    with pytest.raises(ValueError):
        RenormalizationConstants(alpha=0)
    with pytest.raises(ValueError):
        RenormalizationConstants(M=-1)


def test_r1_r2_examples():
    assert residual_r1_r2(ZERO_SOLUTION) == (0, 0)
    c = RenormalizationConstants(R1=Fraction(1, 2), sigma_long=1, delta_M2=1)
    assert residual_r1_r2(c) == (0, 0)
    c = RenormalizationConstants(R1=2, alpha=Fraction(1, 2))
    assert residual_r1_r2(c) == (-1, -2)


def test_r3_r4_and_r6_examples():
    assert residual_r3_r4(ZERO_SOLUTION) == (0, 0)
    c = RenormalizationConstants(R2=Fraction(11, 10), R3=Fraction(11, 10), sigma_psibar_psi=Fraction(-1, 11))
    r3, r4 = residual_r3_r4(c)
    assert r3 == 0 and r3 == r4
    assert residual_r6(RenormalizationConstants(R2=1, R3=Fraction(11, 10))) == Fraction(1, 10)
    assert residual_r6(RenormalizationConstants(R2=1, R3=2, g=0)) == 0


def test_tetrahedral_point():
    p = tetrahedral_point(Fraction(1, 2))
    assert all(x == 0 for x in sum(p))
    sq = [sum(x * x for x in v) for v in p]
    assert sq == [Fraction(3, 4)] * 4
    dots = {sum(a * b for a, b in zip(p[i], p[j])) for i in range(4) for j in range(i + 1, 4)}
    assert dots == {Fraction(-1, 4)}


@given(rat)
def test_r7_linear_in_F(F):
    base = residual_r7(RenormalizationConstants(F_AAAA=1))
    t = residual_r7(RenormalizationConstants(F_AAAA=F))
    assert np.all(t == F * base)
    d = residual_r7(RenormalizationConstants(F_AAAA=F), w=((2, 1),))
    assert np.all(d == F * residual_r7(RenormalizationConstants(F_AAAA=1), w=((2, 1),)))


def test_r7_zero_and_structure():
    assert all(x == 0 for x in residual_r7(ZERO_SOLUTION).ravel())
    t = residual_r7(RenormalizationConstants(F_AAAA=3))
    p4 = tetrahedral_point()[3]
    # fully symmetric, trace over a pair gives 6 p4
    assert t[0, 1, 2] == t[2, 1, 0] == t[1, 0, 2]
    assert [sum(t[a, b, b] for b in range(4)) for a in range(4)] == [6 * x for x in p4]
    with pytest.raises(ValueError):
        residual_r7(ZERO_SOLUTION, w=((1, 0), (2, 0)))
    with pytest.raises(ValueError):
        residual_r7(ZERO_SOLUTION, kin4=[(1, 0, 0, 0)] * 4)


def test_zero_solution_is_exact():
    rep = relations_report(solve_relations())
    assert all(rep.entries[k]["value"] == 0 and rep.entries[k]["passed"] for k in ALGEBRAIC)
    assert rep.notes["verdict"] == "consistent"


def test_family_example():
    c = solve_relations(sigma_long=0.3)
    assert c.R1 == Fraction(10, 13) and c.delta_M2 / c.M**2 == Fraction(3, 10)
    assert residual_r1_r2(c) == (0, 0)


@given(rat, rat, rat, rat.filter(lambda x: x != 0), st.fractions(min_value=Fraction(1, 10), max_value=5))
def test_family_solves_every_relation(sl, sp, dg, g, M):
    assume(1 + sl != 0 and g + dg != 0 and 1 + sp != 0)
    c = solve_relations(sigma_long=sl, sigma_psibar_psi=sp, delta_g=dg, g=g, M=M)
    rep = relations_report(c)
    assert all(rep.entries[k]["value"] == 0 for k in ALGEBRAIC)


def test_family_rejects_singular_inputs():
    with pytest.raises(ZeroDivisionError):
        solve_relations(sigma_long=-1)
    with pytest.raises(ZeroDivisionError):
        solve_relations(delta_g=-1)


def test_obstruction_value(obstruction):
    assert obstruction.relative_deviation < 0.02
    assert obstruction.symmetric_residual < 1e-3 * ANOMALY_LIMIT
    assert len(obstruction.samples) == 4 and len(obstruction.values_w1) == 8
    assert obstruction.combinatorial_factor == 6
    # |w| = 0 is eps_{nu rho a b} p2_a p3_b times the same coefficient
    assert np.abs(obstruction.value_w0).max() > 0.01


def test_obstruction_point_independent(obstruction):
    R = np.linalg.qr(np.random.default_rng(2).normal(size=(4, 4)))[0]
    k = Kinematics.equilateral(1.0).rotated(R).scaled(1.5)
    o = anomaly_obstruction(1e3 * 1.5, k)
    assert abs(o.epsilon_coefficient - obstruction.epsilon_coefficient) < 1e-3 * ANOMALY_LIMIT


def test_obstruction_independent_of_constants(obstruction):
    c = solve_relations(sigma_long=0.3, delta_g=0.2)
    o = anomaly_obstruction(1e3, constants=c)
    assert o.epsilon_coefficient == obstruction.epsilon_coefficient
    assert o.theta_coefficient == pytest.approx(-6 * float(c.g * c.R1) * o.epsilon_coefficient)


def test_report_verdict_and_json(obstruction):
    rep = relations_report(solve_relations(), obstruction=obstruction)
    assert rep.notes["verdict"] == "anomalous"
    assert not rep.entries["r5"]["passed"]
    assert '"r5"' in rep.to_json()


def test_exceptional_point_rejected():
    k = Kinematics(np.array([1.0, 0, 0, 0]), np.array([-1.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        anomaly_obstruction(1e3, k)
