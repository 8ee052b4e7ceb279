import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiral_anomaly.loop_amplitudes import PERMUTATIONS, CutoffPair, Kinematics, gamma_AAA, scalar_amplitudes
from chiral_anomaly.tensor_basis import (
    NOR_CORRECTED,
    NOR_RELATIONS,
    DegenerateKinematics,
    basis_tensors,
    column,
    configuration_samples,
    decompose,
    derive_relations,
    gauge_space,
    invariants_from_AB,
    reconstruct,
    reconstruct_from_AB,
    relation_residuals,
    relation_rows,
)

KIN = Kinematics(np.array([1.0, 0.2, 0.0, 0.0]), np.array([-0.3, 1.1, 0.4, 0.0]))
CUT = CutoffPair(0.1, 20.0)
Q = (1.0, 1.3, 0.8)

coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=8, max_size=8).map(np.array)


@pytest.fixture(scope="module")
def amps():
    return scalar_amplitudes(KIN, CUT, 1e-8)


@pytest.fixture(scope="module")
def derived():
    return derive_relations(configuration_samples(Q, 3))


def ab_error_assignment(amps):
    # invariants are linear in (A, B); propagate absolute errors
    J = np.array([invariants_from_AB(*np.split(e, 2)) for e in np.eye(12)]).T
    return np.abs(J) @ amps.error_vector()


def test_exceptional_kills_w_structures():
    k = Kinematics(np.array([1.0, 0.5, 0, 0]), np.array([-1.0, -0.5, 0, 0]))
    T = basis_tensors(k)
    assert np.all(T[2:] == 0)
    with pytest.raises(DegenerateKinematics):
        decompose(T[0], k)


def test_basis_antisymmetry():
    T = basis_tensors(KIN)
    for axes in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
        assert np.allclose(T[0], -np.transpose(T[0], axes))
    # w = eps p1 p2 sits on the index pair not carrying the momentum
    assert np.allclose(T[2], -np.transpose(T[2], (2, 1, 0)))
    assert np.allclose(T[4], -np.transpose(T[4], (0, 2, 1)))
    assert np.allclose(T[6], -np.transpose(T[6], (1, 0, 2)))


def test_basis_rank_and_gauge():
    inv = decompose(basis_tensors(KIN)[0], KIN)
    # two Schouten identities relate the eight structures
    assert inv.rank == 6 and inv.gauge.shape == (8, 2)
    assert np.abs(reconstruct(inv.gauge[:, 0], KIN)).max() < 1e-12
    assert gauge_space(KIN).shape == (48, 12)


@pytest.mark.parametrize("k", range(8))
def test_decompose_basis_element(k):
    T = basis_tensors(KIN)[k]
    inv = decompose(T, KIN)
    assert np.allclose(reconstruct(inv.a, KIN), T, atol=1e-12)
    # a - e_k lies in the gauge directions
    d = inv.a - np.eye(8)[k]
    proj = inv.gauge @ (inv.gauge.T @ d)
    assert np.allclose(d, proj, atol=1e-10)


@given(coeffs)
def test_round_trip(a):
    T = reconstruct(a, KIN)
    inv = decompose(T, KIN)
    assert np.allclose(reconstruct(inv.a, KIN), T, atol=1e-10 * (1 + np.abs(a).max()))
    assert inv.residual < 1e-9 * (1 + np.abs(a).max())


def test_degenerate_parallel_momenta():
    k = Kinematics(np.array([1.0, 0, 0, 0]), np.array([2.0, 0, 0, 0]))
    with pytest.raises(DegenerateKinematics):
        decompose(np.zeros((4, 4, 4)), k)


def test_gamma_is_in_the_span(amps):
    g = gamma_AAA(KIN, CUT, amplitudes=amps)
    inv = decompose(g, KIN)
    assert inv.residual < 10 * np.linalg.norm(g.error)


def test_two_amplitude_form_reproduces_tensor(amps):
    g = gamma_AAA(KIN, CUT, amplitudes=amps)
    t = reconstruct_from_AB(amps.A, amps.B, KIN)
    assert np.allclose(t, g.components, atol=1e-14)
    # the 48 invariants from A, B rebuild the tensor at every relabelled
    # kinematics, where A and B are read at the relabelled orderings
    x = invariants_from_AB(amps.A, amps.B)
    for n, s in enumerate(PERMUTATIONS):
        pi = dict(zip("123", s))
        A = {o: amps.A["".join(pi[c] for c in o)] for o in PERMUTATIONS}
        B = {o: amps.B["".join(pi[c] for c in o)] for o in PERMUTATIONS}
        ks = KIN.permuted(s)
        assert np.allclose(reconstruct(x[8 * n:8 * n + 8], ks), reconstruct_from_AB(A, B, ks),
                           atol=1e-13)


def test_invariants_match_decomposition_up_to_gauge(amps):
    g = gamma_AAA(KIN, CUT, amplitudes=amps)
    inv = decompose(g, KIN)
    x = invariants_from_AB(amps.A, amps.B)[:8]
    d = x - inv.a
    assert np.allclose(d, inv.gauge @ (inv.gauge.T @ d), atol=1e-8)


def test_corrected_relations_hold_on_computed_invariants(amps):
    x = invariants_from_AB(amps.A, amps.B)
    err = ab_error_assignment(amps)
    for name, terms in NOR_CORRECTED:
        rows = relation_rows((name, terms))
        assert np.all(np.abs(rows @ x) <= 10 * (np.abs(rows) @ err) + 1e-15), name


def test_printed_a6_a8_line_contradicts_two_amplitude_form(amps):
    x = invariants_from_AB(amps.A, amps.B)
    res = relation_residuals(x, NOR_RELATIONS)
    assert res["A6(123)=A8(213)"] > 1e-3
    assert max(v for k, v in res.items() if k != "A6(123)=A8(213)") < 1e-10


def test_constant_A_violates_sum_rule():
    x = invariants_from_AB(np.ones(6), np.zeros(6))
    assert relation_residuals(x)["A1(123)+A1(231)+A1(312)=0"] == pytest.approx(3.0)
    assert relation_residuals(invariants_from_AB(np.zeros(6), np.zeros(6)))["A1(123)+A1(231)+A1(312)=0"] == 0


def test_derived_relations(derived):
    assert derived.rank >= 7
    ok, _, _ = derived.gauge_compatible(np.vstack([relation_rows(r) for r in NOR_CORRECTED]))
    assert ok
    ok_printed, _, _ = derived.gauge_compatible(np.vstack([relation_rows(r) for r in NOR_RELATIONS]))
    assert not ok_printed


def test_random_assignment_violates(derived):
    x = np.random.default_rng(1).normal(size=48)
    assert np.abs(derived.residuals(x)).max() > 1e-3


def test_derive_needs_all_configurations():
    s = [t for t in configuration_samples(Q, 2) if t[0] != 3]
    with pytest.raises(ValueError):
        derive_relations(s)


def test_column_layout():
    assert column(1, "123") == 0 and column(8, "321") == 47
