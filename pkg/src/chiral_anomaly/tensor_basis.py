"""Invariant decomposition of the three-photon tensor and Bose relations.

The tensor is expanded as ``sum_i A_i(123) T_i`` over eight parity-odd
structures.  In four dimensions they satisfy two Schouten identities, so
they span a 6-dimensional space and the coefficients ``A_i`` are defined up
to a 2-dimensional null space ("gauge").  :func:`decompose` returns the
minimum-norm coefficients together with that null space.

Unknowns of a relation are the 48 numbers ``A_i(s)`` for ``i = 1..8`` and
``s`` in :data:`PERMUTATIONS`; column ``8*PERMUTATIONS.index(s) + i - 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .clifford import EPSILON
from .loop_amplitudes import PERMUTATIONS, Kinematics, RankThreeTensor, expr_tensor

__all__ = [
    "DegenerateKinematics",
    "InvariantSet",
    "RelationMatrix",
    "basis_tensors",
    "decompose",
    "reconstruct",
    "reconstruct_from_AB",
    "invariants_from_AB",
    "column",
    "configuration_samples",
    "configuration_rows",
    "bose_rows",
    "derive_relations",
    "gauge_space",
    "relation_rows",
    "relation_residuals",
    "NOR_RELATIONS",
    "NOR_CORRECTED",
    "CONDITION_THRESHOLD",
]

CONDITION_THRESHOLD = 1e8
NUM_UNKNOWNS = 48


class DegenerateKinematics(ValueError):
    """The basis tensors do not span their generic 6-dimensional space."""


def column(i: int, order: str) -> int:
    """Column of ``A_i(order)`` (``i`` is 1-based)."""
    return 8 * PERMUTATIONS.index(order) + (i - 1)


def basis_tensors(kin: Kinematics) -> np.ndarray:
    """The eight structures, shape ``(8, 4, 4, 4)``, index order
    ``[mu, nu, rho]``."""
    p1, p2 = kin.p1, kin.p2
    w = np.einsum("a,b,abxy->xy", p1, p2, EPSILON)
    return np.array([
        np.einsum("t,tmnr->mnr", p1, EPSILON),
        np.einsum("t,tmnr->mnr", p2, EPSILON),
        np.einsum("n,mr->mnr", p1, w),
        np.einsum("n,mr->mnr", p2, w),
        np.einsum("m,nr->mnr", p1, w),
        np.einsum("m,nr->mnr", p2, w),
        np.einsum("r,mn->mnr", p1, w),
        np.einsum("r,mn->mnr", p2, w),
    ])


@dataclass
class InvariantSet:
    """Coefficients ``A_1..A_8`` at one ordered argument triple.

    ``gauge`` spans the coefficient directions that leave the tensor
    unchanged (columns, shape ``(8, 8 - rank)``).
    """

    a: np.ndarray
    args: tuple
    condition_number: float
    residual: float
    rank: int
    gauge: np.ndarray

    def tensor(self, kin: Kinematics) -> np.ndarray:
        return reconstruct(self.a, kin)


def _basis_matrix(kin: Kinematics) -> np.ndarray:
    return basis_tensors(kin).reshape(8, 64).T


def decompose(gamma, kin: Kinematics, threshold: float = CONDITION_THRESHOLD,
              rank_tol: float = 1e-10) -> InvariantSet:
    """Least-squares invariants of ``gamma`` (array or RankThreeTensor).

    Solved through the SVD of the 64x8 basis matrix.  The condition number
    is taken over the nonzero singular values (generically 6 of them).
    """
    G = gamma.components if isinstance(gamma, RankThreeTensor) else np.asarray(gamma, dtype=float)
    Bm = _basis_matrix(kin)
    U, sv, Vt = np.linalg.svd(Bm, full_matrices=False)
    if sv[0] == 0:
        raise DegenerateKinematics("all basis tensors vanish")
    rank = int(np.sum(sv > rank_tol * sv[0]))
    if rank < 6:
        raise DegenerateKinematics(f"basis rank {rank} < 6")
    cond = float(sv[0] / sv[rank - 1])
    if cond > threshold:
        raise DegenerateKinematics(f"condition number {cond:.3g} exceeds {threshold:.3g}")
    g = G.reshape(64)
    a = Vt[:rank].T @ ((U[:, :rank].T @ g) / sv[:rank])
    residual = float(np.linalg.norm(Bm @ a - g))
    return InvariantSet(a, kin.squares(), cond, residual, rank, Vt[rank:].T.copy())


def reconstruct(a: Sequence[float], kin: Kinematics) -> np.ndarray:
    """``sum_i a_i T_i``."""
    return np.tensordot(np.asarray(a, dtype=float), basis_tensors(kin), axes=1)


def gauge_space(kin: Kinematics, rank_tol: float = 1e-10) -> np.ndarray:
    """48 x k matrix spanning coefficient changes, over all six orderings,
    that leave every permuted tensor unchanged."""
    cols = []
    for n, s in enumerate(PERMUTATIONS):
        ns = null_space(_basis_matrix(kin.permuted(s)), rcond=rank_tol)
        for k in range(ns.shape[1]):
            v = np.zeros(NUM_UNKNOWNS)
            v[8 * n:8 * n + 8] = ns[:, k]
            cols.append(v)
    return np.array(cols).T if cols else np.zeros((NUM_UNKNOWNS, 0))


# ---------------------------------------------------------------------------
# two-amplitude form

def _as_dict(values) -> dict:
    if isinstance(values, Mapping):
        return {s: float(values[s]) for s in PERMUTATIONS}
    values = list(values)
    if len(values) != 6:
        raise ValueError("need six values, one per ordering")
    return {s: float(v) for s, v in zip(PERMUTATIONS, values)}


def reconstruct_from_AB(A_values, B_values, kin: Kinematics) -> np.ndarray:
    """Tensor from A and B at the six orderings (dicts keyed by ordering
    string, or sequences in :data:`PERMUTATIONS` order)."""
    return expr_tensor(_as_dict(A_values), _as_dict(B_values), kin)


def _relabel(order: str, target: str) -> str:
    # apply the relabelling 1->target[0], 2->target[1], 3->target[2]
    pi = dict(zip("123", target))
    return "".join(pi[c] for c in order)


def invariants_from_AB(A_values, B_values) -> np.ndarray:
    """The 48-vector of ``A_i(s)`` implied by the two-amplitude form."""
    A = _as_dict(A_values)
    B = _as_dict(B_values)
    out = np.zeros(NUM_UNKNOWNS)
    for n, s in enumerate(PERMUTATIONS):
        a = lambda t: A[_relabel(t, s)]
        b = lambda t: B[_relabel(t, s)]
        out[8 * n:8 * n + 8] = [
            a("123"),
            -a("213"),
            b("123") - b("321"),
            b("123"),
            -b("213"),
            b("312") - b("213"),
            b("231"),
            b("132"),
        ]
    return out


# ---------------------------------------------------------------------------
# relations

# printed relations as lists of (coefficient, i, ordering); each is imposed at
# all six relabellings
NOR_RELATIONS = (
    ("A1(123)+A1(231)+A1(312)=0", ((1, 1, "123"), (1, 1, "231"), (1, 1, "312"))),
    ("A1(123)=A1(321)", ((1, 1, "123"), (-1, 1, "321"))),
    ("A2(123)=-A1(213)", ((1, 2, "123"), (1, 1, "213"))),
    ("A5(123)=-A4(213)", ((1, 5, "123"), (1, 4, "213"))),
    ("A6(123)=-A3(213)", ((1, 6, "123"), (1, 3, "213"))),
    ("A6(123)=A8(213)", ((1, 6, "123"), (-1, 8, "213"))),
    ("A7(123)=A4(231)", ((1, 7, "123"), (-1, 4, "231"))),
    ("A3(123)=A4(123)-A4(321)", ((1, 3, "123"), (-1, 4, "123"), (1, 4, "321"))),
)

# the same list with the line that contradicts the two-amplitude form
# replaced by the relation that form implies
NOR_CORRECTED = tuple(
    r if r[0] != "A6(123)=A8(213)" else ("A8(123)=A4(132)", ((1, 8, "123"), (-1, 4, "132")))
    for r in NOR_RELATIONS
)


def relation_rows(relation) -> np.ndarray:
    """Rows (6 x 48) of one relation imposed at all six relabellings."""
    _, terms = relation
    rows = []
    for target in PERMUTATIONS:
        v = np.zeros(NUM_UNKNOWNS)
        for c, i, s in terms:
            v[column(i, _relabel(s, target))] += c
        rows.append(v)
    return np.array(rows)


def relation_residuals(assignment: np.ndarray, relations=NOR_RELATIONS) -> dict:
    """Max-abs residual of each relation on a 48-vector of invariants."""
    x = np.asarray(assignment, dtype=float)
    return {name: float(np.abs(relation_rows((name, t)) @ x).max()) for name, t in relations}


@dataclass
class RelationMatrix:
    """Linear constraints on the 48 invariants.

    ``rows`` is an orthonormal basis of the constraint space; ``gauge`` spans
    the coefficient freedom of the basis (see :func:`gauge_space`).
    """

    rows: np.ndarray
    gauge: np.ndarray
    invariants: tuple
    tol: float = 1e-8

    @property
    def rank(self) -> int:
        return self.rows.shape[0]

    def residuals(self, assignment: np.ndarray) -> np.ndarray:
        return self.rows @ np.asarray(assignment, dtype=float)

    def contains(self, rows: np.ndarray) -> np.ndarray:
        """Per row: does it lie in the constraint row space?"""
        rows = np.atleast_2d(rows)
        proj = rows - (rows @ self.rows.T) @ self.rows
        return np.linalg.norm(proj, axis=1) <= self.tol * np.maximum(np.linalg.norm(rows, axis=1), 1)

    def solution_space(self) -> np.ndarray:
        return null_space(self.rows, rcond=self.tol) if self.rank else np.eye(NUM_UNKNOWNS)

    def gauge_compatible(self, rows: np.ndarray) -> tuple[bool, int, int]:
        """Is every solution of these constraints, up to gauge, a solution of
        ``rows``?  Returns (ok, dim of solutions + gauge, dim of the span of
        that and null(rows) + gauge).

        This is the statement the relations can make once the two Schouten
        identities leave the invariants defined only up to gauge.
        """
        S = self.solution_space()
        R = null_space(np.atleast_2d(rows), rcond=self.tol)
        RG = np.hstack([R, self.gauge])
        r_rg = np.linalg.matrix_rank(RG, self.tol)
        r_all = np.linalg.matrix_rank(np.hstack([RG, S]), self.tol)
        return r_all == r_rg, r_rg, r_all


def _realize(q) -> tuple[float, float, float]:
    """For invariants ``q``: the component of p1 along p2, the length of its
    perpendicular part, and ``|p2|``."""
    q1, q2, q3 = q
    d12 = 0.5 * (q3 - q1 - q2)
    r2 = math.sqrt(q2)
    c = d12 / r2
    perp = q1 - c * c
    if perp < -1e-12:
        raise ValueError("invariants violate the triangle inequality")
    perp = math.sqrt(max(perp, 0.0))
    return c, perp, r2


def _config_pair(config: int, q, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    c, perp, r2 = _realize(q)
    if config == 1:
        # p2 on axis 3; p1 = c e3 + perp*(cos t e0 + sin t e2)
        t = rng.uniform(0, 2 * math.pi)
        return (np.array([perp * math.cos(t), 0.0, perp * math.sin(t), c]),
                np.array([0.0, 0.0, 0.0, r2]))
    i, j = {2: (0, 3), 3: (2, 3)}[config]
    t = rng.uniform(0, 2 * math.pi)
    e = np.array([math.cos(t), math.sin(t)])
    f = np.array([-e[1], e[0]])
    p1 = np.zeros(4)
    p2 = np.zeros(4)
    p2[[i, j]] = r2 * e
    p1[[i, j]] = c * e + perp * f
    return p1, p2


def configuration_samples(q: Sequence[float], n_each: int = 3, seed: int = 0,
                          relabel: bool = True) -> list:
    """Samples ``(config, order, kin)`` of the three special configurations,
    all with invariants ``q = (p1^2, p2^2, p3^2)``.

    Configurations (0-based components), imposed on the pair
    ``(p_{order[0]}, p_{order[1]})``:
      1. first = (a, 0, b, c), second = (0, 0, 0, d)
      2. both in the (0, 3) plane
      3. both in the (2, 3) plane
    With ``relabel`` every ordering of the legs is used, otherwise only
    ``"123"``.
    """
    rng = np.random.default_rng(seed)
    orders = PERMUTATIONS if relabel else ("123",)
    out = []
    for order in orders:
        qq = [q[int(ch) - 1] for ch in order]
        for _ in range(n_each):
            for config in (1, 2, 3):
                P1, P2 = _config_pair(config, qq, rng)
                p = {order[0]: P1, order[1]: P2, order[2]: -P1 - P2}
                out.append((config, order, Kinematics(p["1"], p["2"])))
    return out


def _component_row(kin: Kinematics, order: str, idx: tuple) -> np.ndarray:
    """Row giving ``Gamma_idx(p_o1, p_o2, p_o3)`` in terms of the unknowns."""
    row = np.zeros(NUM_UNKNOWNS)
    B = basis_tensors(kin.permuted(order))
    n = PERMUTATIONS.index(order)
    row[8 * n:8 * n + 8] = B[(slice(None),) + tuple(idx)]
    return row


def _identity_row_base(kin, lhs, rhs) -> np.ndarray:
    return _component_row(kin, *lhs) - _component_row(kin, *rhs)


def configuration_rows(config: int, kin: Kinematics, order: str = "123") -> list:
    """Component identities used at configuration 1, 2 or 3, with the legs
    relabelled by ``order`` (tensor indices in the configuration list are
    1-based and converted here)."""
    o = lambda *t: tuple(v - 1 for v in t)
    rows = []
    _identity_row = lambda k, lhs, rhs: _identity_row_base(
        k, (_relabel(lhs[0], order), lhs[1]), (_relabel(rhs[0], order), rhs[1]))
    if config == 1:
        for m, n, r in ((1, 1, 2), (1, 2, 1)):
            rows.append(_identity_row(kin, ("123", o(m, n, r)), ("213", o(n, m, r))))
    elif config == 2:
        m, n, r = 1, 2, 3
        lhs = ("123", o(m, n, r))
        rows.append(_identity_row(kin, lhs, ("213", o(n, m, r))))
        rows.append(_identity_row(kin, lhs, ("321", o(r, n, m))))
        rows.append(_identity_row(kin, lhs, ("132", o(m, r, n))))
    elif config == 3:
        m, n, r = 1, 2, 3
        rows.append(_identity_row(kin, ("123", o(m, n, r)), ("213", o(n, m, r))))
    else:
        raise ValueError(f"unknown configuration {config}")
    return rows


def bose_rows(kin: Kinematics) -> list:
    """Every component identity of full Bose symmetry at ``kin``."""
    rows = []
    for perm in itertools.permutations(range(3)):
        order = "".join(str(k + 1) for k in perm)
        if order == "123":
            continue
        for idx in itertools.product(range(4), repeat=3):
            nidx = tuple(idx[perm[k]] for k in range(3))
            rows.append(_identity_row_base(kin, ("123", idx), (order, nidx)))
    return rows


def _orthonormal_rows(rows, tol: float) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros((0, NUM_UNKNOWNS))
    _, sv, Vt = np.linalg.svd(np.array(rows), full_matrices=False)
    r = int(np.sum(sv > tol * sv[0]))
    return Vt[:r]


def derive_relations(samples: Iterable, full_bose: bool = False,
                     tol: float = 1e-9, min_rank: int = 7) -> RelationMatrix:
    """Constraints on the invariants implied by Bose symmetry at the sampled
    kinematics.

    ``samples`` holds ``(config, order, Kinematics)`` triples as produced by
    :func:`configuration_samples` (pairs mean order ``"123"``); all must
    share the same invariants, since
    the unknowns are the invariants at one argument triple.  With
    ``full_bose`` every component identity is used at every sample.
    """
    samples = [t if len(t) == 3 else (t[0], "123", t[1]) for t in samples]
    if not samples:
        raise ValueError("no sample kinematics")
    q = np.array(samples[0][2].squares())
    for _, _, k in samples:
        if not np.allclose(k.squares(), q, rtol=1e-9, atol=1e-12):
            raise ValueError("all samples must share the same invariants")
    configs = {c for c, _, _ in samples}
    if not full_bose and not {1, 2, 3} <= configs:
        raise ValueError("samples must include configurations 1, 2 and 3")
    rows = []
    for c, order, k in samples:
        rows += bose_rows(k) if full_bose else configuration_rows(c, k, order)
    R = _orthonormal_rows(rows, tol)
    if R.shape[0] < min_rank:
        import warnings
        warnings.warn(f"derived constraint rank {R.shape[0]} < {min_rank}; add samples")
    return RelationMatrix(R, gauge_space(samples[0][2]), tuple(q), tol)
