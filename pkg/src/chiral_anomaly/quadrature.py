"""Deterministic adaptive cubature.

The workhorse is :func:`integrate_cube`, a globally adaptive integrator over
axis-aligned boxes using the Genz-Malik degree-7/5 embedded rule (dimension
>= 2) or Gauss-Kronrod 7/15 (dimension 1).  Integrands are vectorized: they
receive an ``(N, dim)`` array of points and return ``(N,)`` or ``(N, m)``
values.  Vector-valued integrands share one subdivision, and the error norm
is the max over components.

:func:`integrate_simplex` maps the Feynman-parameter measure
``dmu_n = prod dx_i delta(1 - sum x_i)`` onto the unit cube with a
stick-breaking transform; :func:`integrate_r4` handles ``d^4k/(2pi)^4`` in
hyperspherical coordinates with a compactified radius.
"""

from __future__ import annotations

import heapq
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegralResult",
    "SimplexIntegrand",
    "R4Integrand",
    "NonFiniteIntegrand",
    "integrate_cube",
    "integrate_simplex",
    "integrate_r4",
    "simplex_map",
    "default_workers",
    "DEFAULT_MAX_EVALS",
]

DEFAULT_MAX_EVALS = 10**8
WORKERS_ENV = "CHIRAL_ANOMALY_WORKERS"


class NonFiniteIntegrand(ArithmeticError):
    """Raised when the integrand returns nan/inf at some sample point."""

    def __init__(self, point):
        self.point = np.asarray(point)
        super().__init__(f"non-finite integrand value at point {self.point.tolist()}")


@dataclass
class IntegralResult:
    value: np.ndarray | float
    error_estimate: np.ndarray | float
    evaluations: int
    converged: bool = True
    regions: int = 0

    def __iter__(self):
        # allows ``value, err = result``
        yield self.value
        yield self.error_estimate


@dataclass(frozen=True)
class SimplexIntegrand:
    """Integrand on the standard simplex ``x_i >= 0, sum x_i = 1``.

    ``eval`` takes an ``(N, dim)`` array of simplex points.  Each entry of
    ``singular_faces`` is a tuple of (0-based) coordinate indices whose
    partial sum going to zero is an integrable singularity; only the first
    one is used to orient the map.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    singular_faces: Sequence[Sequence[int]] = ()


@dataclass(frozen=True)
class R4Integrand:
    eval: Callable[[np.ndarray], np.ndarray]
    decay_exponent: float = 5.0
    # radius beyond which the declared falloff holds (None: 1e3 * scale)
    asymptotic_radius: Optional[float] = None


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# rules on [-1, 1]^n

def _genz_malik(n: int):
    l2 = math.sqrt(9 / 70)
    l3 = math.sqrt(9 / 10)
    l4 = math.sqrt(9 / 10)
    l5 = math.sqrt(9 / 19)
    pts = [np.zeros(n)]
    w7 = [(12824 - 9120 * n + 400 * n * n) / 19683]
    w5 = [(729 - 950 * n + 50 * n * n) / 729]
    for lam, a, b in ((l2, 980 / 6561, 245 / 486), (l3, (1820 - 400 * n) / 19683, (265 - 100 * n) / 1458)):
        for i in range(n):
            for sgn in (1, -1):
                p = np.zeros(n)
                p[i] = sgn * lam
                pts.append(p)
                w7.append(a)
                w5.append(b)
    for i, j in itertools.combinations(range(n), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            p = np.zeros(n)
            p[i], p[j] = si * l4, sj * l4
            pts.append(p)
            w7.append(200 / 19683)
            w5.append(25 / 729)
    for signs in itertools.product((1, -1), repeat=n):
        pts.append(l5 * np.array(signs, dtype=float))
        w7.append(6859 / 19683 / 2**n)
        w5.append(0.0)
    return np.array(pts), np.array(w7), np.array(w5), l2, l3


_GK15_X = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_GK15_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_GK7_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def _gk15():
    x = np.concatenate([-_GK15_X[:-1], _GK15_X[::-1]])
    wk = np.concatenate([_GK15_WK[:-1], _GK15_WK[::-1]])
    wg = np.zeros(15)
    # Gauss nodes are the odd-indexed Kronrod nodes 1,3,5,7(center),...
    gauss_idx = [1, 3, 5, 7, 9, 11, 13]
    gw = np.concatenate([_GK7_WG[:-1], _GK7_WG[::-1]])
    wg[gauss_idx] = gw
    # weights above sum to 2 on [-1,1]; normalize to unit volume
    return x[:, None], wk / 2, wg / 2


class _Rule:
    def __init__(self, n: int):
        self.n = n
        if n == 1:
            self.nodes, self.w_hi, self.w_lo = _gk15()
            self.l2 = self.l3 = None
        else:
            self.nodes, self.w_hi, self.w_lo, self.l2, self.l3 = _genz_malik(n)
        self.npts = len(self.nodes)

    def split_dims(self, fvals_norm: np.ndarray) -> np.ndarray:
        """Dimension to bisect, from fourth divided differences."""
        if self.n == 1:
            return np.zeros(fvals_norm.shape[0], dtype=int)
        n = self.n
        f0 = fvals_norm[:, 0]
        f2p = fvals_norm[:, 1:1 + 2 * n:2]
        f2m = fvals_norm[:, 2:2 + 2 * n:2]
        f3p = fvals_norm[:, 1 + 2 * n:1 + 4 * n:2]
        f3m = fvals_norm[:, 2 + 2 * n:2 + 4 * n:2]
        ratio = (self.l2 / self.l3) ** 2
        d = np.abs(f2p + f2m - 2 * f0[:, None] - ratio * (f3p + f3m - 2 * f0[:, None]))
        # argmax picks the lowest index on ties, which keeps this deterministic
        return np.argmax(d, axis=1)


_RULES: dict[int, _Rule] = {}


def _rule(n: int) -> _Rule:
    if n not in _RULES:
        _RULES[n] = _Rule(n)
    return _RULES[n]


def _evaluate(f, pts: np.ndarray, workers: int) -> np.ndarray:
    if workers <= 1 or len(pts) < 2 * workers:
        vals = f(pts)
    else:
        chunks = np.array_split(pts, workers)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(f, chunks))
        vals = np.concatenate(parts, axis=0)
    vals = np.asarray(vals)
    if vals.shape[0] != pts.shape[0]:
        raise ValueError("integrand returned wrong number of values")
    bad = ~np.isfinite(vals)
    if bad.any():
        row = np.nonzero(bad.reshape(len(pts), -1).any(axis=1))[0][0]
        raise NonFiniteIntegrand(pts[row])
    return vals


def integrate_cube(
    f: Callable[[np.ndarray], np.ndarray],
    lower: Sequence[float],
    upper: Sequence[float],
    atol: float = 1e-8,
    rtol: float = 0.0,
    max_evals: int = DEFAULT_MAX_EVALS,
    workers: Optional[int] = None,
    initial_splits: int = 1,
    max_batch: int = 4096,
) -> IntegralResult:
    """Globally adaptive integration of a vectorized ``f`` over a box.

    Stops once the summed error estimate is below ``max(atol, rtol*|I|)``
    (norms are max-abs over components) or the evaluation budget runs out,
    in which case ``converged`` is False.  Regions are refined in order of
    decreasing error with the region id as tiebreak, and all sums run in a
    fixed order, so the result does not depend on ``workers``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    if n < 1:
        raise ValueError("need at least one dimension")
    if atol <= 0 and rtol <= 0:
        raise ValueError("need a positive tolerance")
    workers = default_workers() if workers is None else max(1, int(workers))
    rule = _rule(n)

    # initial grid of initial_splits^n boxes
    k = max(1, int(initial_splits))
    edges = [np.linspace(lower[i], upper[i], k + 1) for i in range(n)]
    cells = np.array(list(itertools.product(range(k), repeat=n)), dtype=int)
    lo = np.stack([edges[i][cells[:, i]] for i in range(n)], axis=1)
    hi = np.stack([edges[i][cells[:, i] + 1] for i in range(n)], axis=1)
    centers = (lo + hi) / 2
    halfw = (hi - lo) / 2

    evals = 0
    next_id = 0
    # per-region storage
    store_val: dict[int, np.ndarray] = {}
    store_err: dict[int, float] = {}
    store_geom: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}
    heap: list[tuple[float, int]] = []
    scalar = None

    def process(c: np.ndarray, h: np.ndarray):
        nonlocal evals, next_id, scalar
        R = c.shape[0]
        pts = (c[:, None, :] + h[:, None, :] * rule.nodes[None, :, :]).reshape(-1, n)
        vals = _evaluate(f, pts, workers)
        if scalar is None:
            scalar = vals.ndim == 1
        vals = vals.reshape(R, rule.npts, -1)
        evals += pts.shape[0]
        vol = np.prod(2 * h, axis=1)
        hi_est = np.einsum("p,rpm->rm", rule.w_hi, vals) * vol[:, None]
        lo_est = np.einsum("p,rpm->rm", rule.w_lo, vals) * vol[:, None]
        err = np.max(np.abs(hi_est - lo_est), axis=1)
        norms = np.max(np.abs(vals), axis=2)
        dims = rule.split_dims(norms)
        for r in range(R):
            rid = next_id
            next_id += 1
            store_val[rid] = hi_est[r]
            store_err[rid] = float(err[r])
            store_geom[rid] = (c[r], h[r], int(dims[r]))
            heapq.heappush(heap, (-float(err[r]), rid))

    process(centers, halfw)

    def totals():
        ids = sorted(store_val)
        tot = np.sum([store_val[i] for i in ids], axis=0)
        et = math.fsum(store_err[i] for i in ids)
        return tot, et

    converged = False
    while True:
        total, err_total = totals()
        target = max(atol, rtol * float(np.max(np.abs(total))))
        if err_total <= target:
            converged = True
            break
        if evals + 2 * rule.npts > max_evals:
            break
        # pop the worst regions until their error covers the excess
        excess = err_total - target
        batch = []
        acc = 0.0
        budget_regions = max(1, (max_evals - evals) // (2 * rule.npts))
        while heap and len(batch) < min(max_batch, budget_regions):
            e, rid = heapq.heappop(heap)
            batch.append(rid)
            acc += -e
            if acc >= excess and len(batch) >= 1:
                break
        batch.sort()
        cs, hs = [], []
        for rid in batch:
            c, h, d = store_geom.pop(rid)
            del store_val[rid]
            del store_err[rid]
            h2 = h.copy()
            h2[d] /= 2
            for sgn in (-1, 1):
                c2 = c.copy()
                c2[d] += sgn * h2[d]
                cs.append(c2)
                hs.append(h2)
        process(np.array(cs), np.array(hs))

    value = total[0] if scalar else total
    err_total = float(err_total)
    return IntegralResult(
        value=float(value) if scalar else np.asarray(value),
        error_estimate=err_total,
        evaluations=evals,
        converged=converged,
        regions=len(store_val),
    )


# ---------------------------------------------------------------------------
# simplex

def _stick_breaking(u: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map ``u`` in [0,1]^(m-1) to the m-simplex; returns (x, jacobian)."""
    N = u.shape[0]
    x = np.empty((N, m))
    jac = np.ones(N)
    rest = np.ones(N)
    for i in range(m - 1):
        x[:, i] = rest * u[:, i]
        rest = rest * (1 - u[:, i])
    x[:, m - 1] = rest
    # Jacobian prod_{i=1}^{m-2} (1-u_i)^{m-1-i}
    for i in range(m - 2):
        jac = jac * (1 - u[:, i]) ** (m - 2 - i)
    return x, jac


def simplex_map(n: int, singular_face: Sequence[int] | None = None):
    """Return ``phi(u) -> (x, jac)`` taking the unit (n-1)-cube onto
    ``dmu_n``.

    With ``singular_face`` S, the first cube coordinate is ``s = sum_{i in S}
    x_i`` and the face ``s = 0`` sits at the cube origin.
    """
    if n < 2:
        raise ValueError("simplex needs at least two parameters")
    if not singular_face:
        return lambda u: _stick_breaking(u, n)
    face = sorted(set(int(i) for i in singular_face))
    if not face or len(face) >= n or min(face) < 0 or max(face) >= n:
        raise ValueError(f"bad singular face {singular_face!r} for dim {n}")
    rest = [i for i in range(n) if i not in face]
    a, b = len(face), len(rest)

    def phi(u):
        s = u[:, 0]
        ua = u[:, 1:a]
        ub = u[:, a:]
        ya, ja = _stick_breaking(ua, a) if a > 1 else (np.ones((len(u), 1)), np.ones(len(u)))
        yb, jb = _stick_breaking(ub, b) if b > 1 else (np.ones((len(u), 1)), np.ones(len(u)))
        x = np.empty((len(u), n))
        x[:, face] = s[:, None] * ya
        x[:, rest] = (1 - s)[:, None] * yb
        jac = s ** (a - 1) * (1 - s) ** (b - 1) * ja * jb
        return x, jac

    return phi


def integrate_simplex(
    f: SimplexIntegrand,
    tol: float,
    rtol: float = 0.0,
    max_evals: int = DEFAULT_MAX_EVALS,
    workers: Optional[int] = None,
    initial_splits: int = 1,
) -> IntegralResult:
    """Integrate ``f`` against ``dmu_n`` (total mass ``1/(n-1)!``)."""
    if tol <= 0 and rtol <= 0:
        raise ValueError("tol must be positive")
    if f.dim < 2:
        raise ValueError("simplex integrand needs dim >= 2")
    face = f.singular_faces[0] if f.singular_faces else None
    phi = simplex_map(f.dim, face)

    def g(u):
        x, jac = phi(u)
        v = np.asarray(f.eval(x))
        return v * jac if v.ndim == 1 else v * jac[:, None]

    d = f.dim - 1
    return integrate_cube(g, np.zeros(d), np.ones(d), atol=tol, rtol=rtol,
                          max_evals=max_evals, workers=workers,
                          initial_splits=initial_splits)


# ---------------------------------------------------------------------------
# R^4

def hyperspherical(t: np.ndarray, th1, th2, phi, scale: float = 1.0):
    """Points and measure for ``r = scale*t/(1-t)`` and the three angles."""
    r = scale * t / (1 - t)
    drdt = scale / (1 - t) ** 2
    s1, s2 = np.sin(th1), np.sin(th2)
    k = np.stack([
        r * np.cos(th1),
        r * s1 * np.cos(th2),
        r * s1 * s2 * np.cos(phi),
        r * s1 * s2 * np.sin(phi),
    ], axis=1)
    w = r**3 * s1**2 * s2 * drdt
    return k, w


def _check_decay(f: R4Integrand, scale: float) -> None:
    dirs = np.array([[1, 0, 0, 0], [0.5, 0.5, 0.5, 0.5], [0, -0.6, 0, 0.8]], dtype=float)
    r0 = f.asymptotic_radius if f.asymptotic_radius is not None else 1e3 * scale
    radii = r0 * np.array([1.0, 10.0])
    pts = np.concatenate([r * dirs for r in radii])
    v = np.abs(np.asarray(f.eval(pts))).reshape(len(pts), -1).max(axis=1)
    v = v * np.repeat(radii, len(dirs)) ** f.decay_exponent
    near, far = v[: len(dirs)], v[len(dirs):]
    if np.any(far > 10 * near + 1e-300):
        raise ValueError(
            f"integrand does not decay like |k|^-{f.decay_exponent} (sampled growth)")


def integrate_r4(
    f: R4Integrand,
    tol: float,
    rtol: float = 0.0,
    scale: float = 1.0,
    max_evals: int = DEFAULT_MAX_EVALS,
    workers: Optional[int] = None,
    symmetrize: bool = True,
    initial_splits: int = 2,
) -> IntegralResult:
    """``int d^4k/(2pi)^4 f(k)``.

    With ``symmetrize`` the integrand is replaced by ``(f(k)+f(-k))/2``,
    which leaves the integral unchanged and removes odd parts exactly; the
    azimuth then only needs ``[0, pi]``.
    """
    if f.decay_exponent < 5:
        raise ValueError("decay_exponent must be >= 5 for a convergent integral")
    if tol <= 0 and rtol <= 0:
        raise ValueError("tol must be positive")
    _check_decay(f, scale)
    norm = 1.0 / (2 * math.pi) ** 4
    phi_max = math.pi if symmetrize else 2 * math.pi
    phi_fac = 2.0 if symmetrize else 1.0
    complex_seen = []

    def g(u):
        k, w = hyperspherical(u[:, 0], u[:, 1], u[:, 2], u[:, 3], scale)
        v = np.asarray(f.eval(k))
        if symmetrize:
            v = 0.5 * (v + np.asarray(f.eval(-k)))
        if np.iscomplexobj(v):
            complex_seen.append(True)
            v = np.concatenate([v.real.reshape(len(k), -1), v.imag.reshape(len(k), -1)], axis=1)
        ww = w * norm * phi_fac
        return v * ww if v.ndim == 1 else v * ww[:, None]

    res = integrate_cube(g, [0, 0, 0, 0], [1, math.pi, math.pi, phi_max],
                         atol=tol, rtol=rtol, max_evals=max_evals,
                         workers=workers, initial_splits=initial_splits)
    if complex_seen:
        v = np.asarray(res.value)
        half = v.shape[-1] // 2
        res.value = v[..., :half] + 1j * v[..., half:]
        if res.value.shape == (1,):
            res.value = complex(res.value[0])
    return res
