"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are also collected
and printed together at the end of a pytest run.  Run directly with
``python3 tests/test_acceptance.py`` to get only the summary lines.
"""

import json
import math
import time

import numpy as np

from chiral_anomaly import cli
from chiral_anomaly.grassmann import FIELD_PRESETS, ModeLattice, verify_unit_jacobian
from chiral_anomaly.loop_amplitudes import (
    ANOMALY_LIMIT,
    PERMUTATIONS,
    CutoffPair,
    Kinematics,
    calibrate_normalization,
    gamma_AAA,
    gamma_AAA_direct,
    ir_second_derivative_scan,
    scalar_amplitudes,
    uv_scan,
)
from chiral_anomaly.quadrature import R4Integrand, SimplexIntegrand, integrate_r4, integrate_simplex
from chiral_anomaly.tensor_basis import (
    NOR_RELATIONS,
    configuration_samples,
    derive_relations,
    invariants_from_AB,
    relation_rows,
)
from chiral_anomaly.vsti import anomaly_obstruction, solve_relations

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def run_cli(*argv):
    import contextlib
    import io
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["--format", "json", *argv])
    return code, json.loads(buf.getvalue()) if code == 0 else None


def test_criterion_1_anomaly_coefficient():
    t0 = time.time()
    code, doc = run_cli("anomaly", "--lambda0", "1e3")
    dt = time.time() - t0
    c = doc["result"]["coefficient"] if doc else float("nan")
    rel = abs(c - ANOMALY_LIMIT) / ANOMALY_LIMIT
    report(1, code == 0 and rel < 5e-3 and dt < 60,
           f"eps coefficient {c:.7f} vs 1/(6 pi^2) = {ANOMALY_LIMIT:.7f}, "
           f"rel dev {rel:.2e} (< 5e-3), {dt:.1f} s")


def test_criterion_2_simplex_goldens():
    vol = integrate_simplex(SimplexIntegrand(5, lambda x: np.ones(len(x))), 1e-12).value
    sing = integrate_simplex(SimplexIntegrand(
        5, lambda x: x[:, 2] / (x[:, 0] + x[:, 1] + x[:, 2]) ** 3, [(0, 1, 2)]), 1e-7).value
    e1, e2 = abs(vol - 1 / 24), abs(sing - 1 / 12)
    report(2, e1 < 1e-10 and e2 < 1e-5,
           f"int dmu5 1 error {e1:.1e} (< 1e-10); int dmu5 x3/x123^3 error {e2:.1e} (< 1e-5)")


def test_criterion_3_fujikawa_constant():
    t0 = time.time()
    r = integrate_r4(R4Integrand(lambda k: np.exp(-np.sum(k * k, axis=1)), 50.0, 10.0), 1e-10)
    dt = time.time() - t0
    err = abs(r.value - 1 / (16 * math.pi**2))
    report(3, err < 1e-6 and dt < 1.0,
           f"int d4k/(2pi)^4 exp(-k^2) = {r.value:.9f}, error {err:.1e} (< 1e-6), {dt:.2f} s")


ORACLE_POINTS = (
    Kinematics(np.array([1.0, 0.2, 0.0, 0.0]), np.array([-0.3, 1.1, 0.4, 0.0])),
    Kinematics(np.array([0.3, -0.7, 0.4, 0.2]), np.array([-0.5, 0.2, 0.6, -0.1])),
    Kinematics.equilateral(1.0, plane=(1, 2)).rotated(
        np.linalg.qr(np.random.default_rng(7).normal(size=(4, 4)))[0]),
)


def test_criterion_4_oracle_equivalence():
    na, nb = calibrate_normalization(tol=1e-7)
    cut = CutoffPair(0.1, 50.0)
    worst = 0.0
    for kin in ORACLE_POINTS:
        g = gamma_AAA(kin, cut, 1e-9).components
        d = gamma_AAA_direct(kin, cut, 1e-5).components
        # relative per component; components that vanish by symmetry are
        # compared on the scale 1e-3 * max|Gamma|
        floor = 1e-3 * np.abs(g).max()
        worst = max(worst, float((np.abs(d - g) / np.maximum(np.abs(g), floor)).max()))
    report(4, worst < 0.01,
           f"fitted N signs (A, B) = ({na:+.6f}, {nb:+.6f}); max componentwise rel diff "
           f"Feynman-parameter vs direct loop over 3 points = {worst:.2e} (< 1e-2)")


def test_criterion_5_bose_symmetry():
    kin = Kinematics.equilateral()
    cut = CutoffPair(0.1, 50.0)
    base = gamma_AAA(kin, cut, 1e-9)
    ratio = 0.0
    res_max = 0.0
    for order in PERMUTATIONS:
        t = gamma_AAA(kin.permuted(order), cut, 1e-9)
        axes = [order.index(str(j + 1)) for j in range(3)]
        res = np.abs(np.transpose(t.components, axes) - base.components)
        err = np.transpose(t.error, axes) + base.error
        res_max = max(res_max, float(res.max()))
        ratio = max(ratio, float((res / np.maximum(err, 1e-300)).max()))
    report(5, ratio < 10, f"max Bose residual {res_max:.2e}, max residual/combined error {ratio:.2f} (< 10)")


def test_criterion_6_relations():
    kin = ORACLE_POINTS[0]
    amps = scalar_amplitudes(kin, CutoffPair(0.1, 20.0), 1e-9)
    x = invariants_from_AB(amps.A, amps.B)
    J = np.abs(np.array([invariants_from_AB(*np.split(e, 2)) for e in np.eye(12)]).T)
    err = J @ amps.error_vector()
    failed = []
    for name, terms in NOR_RELATIONS:
        rows = relation_rows((name, terms))
        if np.any(np.abs(rows @ x) > 10 * (np.abs(rows) @ err)):
            failed.append(f"{name} residual {np.abs(rows @ x).max():.2e}")
    derived = derive_relations(configuration_samples(kin.squares(), 3))
    allrows = np.vstack([relation_rows(r) for r in NOR_RELATIONS])
    contained = bool(derived.contains(allrows).all())
    ok = not failed and contained
    report(6, ok, f"{len(NOR_RELATIONS) - len(failed)}/{len(NOR_RELATIONS)} printed relations "
           f"within 10x errors (failing: {'; '.join(failed) or 'none'}); printed rows in derived "
           f"space (rank {derived.rank}): {contained}")


def test_criterion_7_uv_scaling():
    r = uv_scan(Kinematics.equilateral(), [1e2, 10**2.5, 1e3, 10**3.5])
    report(7, abs(r.slope + 2.0) <= 0.2,
           f"log-log slope {r.slope:.3f} (target -2.0 +- 0.2), deviations "
           + ", ".join(f"{d:.2e}" for d in r.deviation))


def test_criterion_8_ir_divergence():
    p3 = np.array([1.0, 0.0, 0.0, 0.0])
    r = ir_second_derivative_scan(p3, [0.1, 10**-1.5, 0.01], 30.0, tol=1e-5)
    ok = r.relative_deviation < 0.05 and r.bound_ok
    report(8, ok, f"fitted log coefficient {r.log_coefficient:.5f} vs 1/(2 pi^2) = "
           f"{r.log_coefficient_reference:.5f} (rel dev {r.relative_deviation:.3f}, need < 0.05); "
           f"remainder bound respected: {r.bound_ok} (max |f|/bound "
           f"{float(np.max(np.abs(r.remainder) / r.bound)):.1e})")


def test_criterion_9_jacobian():
    unit = {"R1": 1, "R2": 1, "R3": 1, "R4": 1}
    small = []
    for fields in ("reduced", "gauge", "fermion", ("psi1", "psi3", "c")):
        for modes in ("1x1x1x1", "2x1x1x1", "3x1x1x1", "1x3x1x1"):
            n = len(FIELD_PRESETS.get(fields, fields)) * len(ModeLattice.parse(modes))
            if n <= 10:
                small.append(verify_unit_jacobian(ModeLattice.parse(modes), 2, unit, field_content=fields))
    agree = all(c.passed and len(c.determinants) == 3
                and len({str(v) for v in c.determinants.values()}) == 1 for c in small)
    full = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, unit, field_content="full")
    lattice = verify_unit_jacobian(ModeLattice.from_cutoff(1), 1, unit, field_content="full",
                                   max_generators=200)
    mutant = verify_unit_jacobian(ModeLattice.parse("3x1x1x1"), 2, unit, field_content="reduced",
                                  mutate="diag")
    ok = agree and full.passed and lattice.passed and not mutant.passed and mutant.counterexample
    report(9, bool(ok), f"{len(small)} reduced configurations (dim <= 10) det = 1 with 3 methods "
           f"agreeing: {agree}; full 14-field structural dim {full.dim}: {full.passed}, dim "
           f"{lattice.dim}: {lattice.passed}; mutant fails at {mutant.counterexample['label']}")


def test_criterion_10_theorem_witness():
    code, doc = run_cli("relations", "--solution", "zero")
    e = doc["result"]["entries"]
    exact_zero = all(e[k]["value"] == "0" for k in ("r1", "r2", "r3", "r4", "r6", "r7"))
    c0 = e["r5"]["value"]
    rel = abs(c0 - ANOMALY_LIMIT) / ANOMALY_LIMIT
    coeffs = []
    for sl in (-0.5, 0.0, 0.3, 2.0):
        for sp in (-0.2, 0.4):
            for dg in (-0.3, 0.0, 0.5):
                c = solve_relations(sigma_long=sl, sigma_psibar_psi=sp, delta_g=dg)
                coeffs.append(anomaly_obstruction(1e3, constants=c).epsilon_coefficient)
    R = np.linalg.qr(np.random.default_rng(11).normal(size=(4, 4)))[0]
    points = [Kinematics.equilateral(), Kinematics.equilateral(2.0, plane=(2, 3)),
              Kinematics.equilateral(0.5).rotated(R)]
    for k in points:
        for f in (1e2, 1e3, 1e4):
            coeffs.append(anomaly_obstruction(f * k.scale(), k).epsilon_coefficient)
    spread = (max(coeffs) - min(coeffs)) / ANOMALY_LIMIT
    above = min(abs(c) for c in coeffs) > 1e-3
    ok = code == 0 and exact_zero and rel < 0.02 and spread < 0.01 and above
    report(10, ok, f"algebraic residuals exactly 0: {exact_zero}; obstruction {c0:.6f} "
           f"(rel dev {rel:.1e} < 0.02); variation over 24 family members, 3 points and "
           f"L0/|p| in [1e2, 1e4]: {spread:.1e} (< 1e-2); verdict {doc['result']['verdict']}")


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    tests.sort(key=lambda f: int(f.__name__.split("_")[2]))
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
