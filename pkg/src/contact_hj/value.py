"""Viscosity solution of the Cauchy problem via the inf-representation.

The solution is u(t, x) = inf_y A(t, y, x, phi(y)), with A produced by
the fundamental-solution machinery.  A quantitative localization radius
mu(t) bounds every minimizing y inside the closed ball B(x, mu(t) t), so
the search is a coarse grid over that ball followed by per-coordinate
golden-section refinement; the rest point y = x is always a candidate.

For value-independent Lagrangians (K = 0) the same search reduces to the
classical inf-convolution formula; `lax_oleinik_classical` exposes that
path under an explicit precondition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._util import as_point, golden_min
from .errors import PreconditionError
from .fundamental import OptimizerParams, fundamental_direct
from .systems import (ContactSystem, HamiltonianSystem, legendre_to_hamiltonian)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

@dataclass
class InitialDatum:
    """Bounded Lipschitz initial condition with declared constants.

    phi is vectorized over a leading batch axis ((..., n) -> (...)); lip
    and sup_abs are declared, not inferred, because they parameterize the
    localization radius.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    lip: float
    sup_abs: float
    name: str = ""

    def __post_init__(self):
        if self.lip < 0 or self.sup_abs < 0:
            raise PreconditionError("lip and sup_abs must be nonnegative")

    def __call__(self, y):
        return self.phi(np.asarray(y, dtype=float))

    def validate(self, x_bounds, samples: int = 512, seed: int = 0,
                 slack: float = 1e-6) -> bool:
        """Spot-check |phi| <= sup_abs and difference quotients <= lip.

        Pairs both far-apart and nearby points; nearby pairs are what
        actually probe the local slope.
        """
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in x_bounds], dtype=float)
        hi = np.array([b[1] for b in x_bounds], dtype=float)
        a = rng.uniform(lo, hi, size=(samples, lo.size))
        b_far = rng.uniform(lo, hi, size=(samples, lo.size))
        b_near = a + rng.uniform(-1e-3, 1e-3, size=a.shape)
        a = np.concatenate([a, a])
        b = np.concatenate([b_far, b_near])
        fa = np.asarray(self(a), dtype=float)
        fb = np.asarray(self(b), dtype=float)
        ok_bound = np.max(np.abs(np.concatenate([fa, fb]))) <= self.sup_abs * (1.0 + slack)
        dist = np.linalg.norm(a - b, axis=-1)
        mask = dist > 1e-12
        quot = np.abs(fa - fb)[mask] / dist[mask]
        ok_lip = quot.size == 0 or float(quot.max()) <= self.lip * (1.0 + slack)
        return bool(ok_bound and ok_lip)


def datum_sin() -> InitialDatum:
    """phi(y) = sin(y_1)."""
    return InitialDatum(phi=lambda y: np.sin(y[..., 0]), lip=1.0, sup_abs=1.0,
                        name="sin")


def datum_cos_bump(width: float = math.pi) -> InitialDatum:
    """Compactly supported cosine bump (1 + cos(pi |y| / width)) / 2."""
    w = float(width)

    def phi(y):
        r = np.linalg.norm(y, axis=-1)
        return np.where(r <= w, 0.5 * (1.0 + np.cos(math.pi * r / w)), 0.0)

    return InitialDatum(phi=phi, lip=0.5 * math.pi / w, sup_abs=1.0,
                        name=f"cos-bump({w:g})")


def datum_constant(c: float) -> InitialDatum:
    return InitialDatum(phi=lambda y: np.full(y.shape[:-1], float(c)),
                        lip=0.0, sup_abs=abs(float(c)), name=f"constant({c:g})")


def datum_quadratic_window(window: float = 10.0) -> InitialDatum:
    """phi(y) = min(|y|, window)^2 / 2: quadratic well clipped to stay bounded."""
    w = float(window)

    def phi(y):
        r = np.minimum(np.linalg.norm(y, axis=-1), w)
        return 0.5 * r * r

    return InitialDatum(phi=phi, lip=w, sup_abs=0.5 * w * w,
                        name=f"quadratic-window({w:g})")


def datum_abs_window(window: float = 10.0) -> InitialDatum:
    """phi(y) = min(|y|, window)."""
    w = float(window)
    return InitialDatum(phi=lambda y: np.minimum(np.linalg.norm(y, axis=-1), w),
                        lip=1.0, sup_abs=w, name=f"abs-window({w:g})")


def datum_linear_window(slope: float, window: float = 10.0) -> InitialDatum:
    """phi(y) = slope * clamp(y_1, -window, window)."""
    a, w = float(slope), float(window)
    return InitialDatum(phi=lambda y: a * np.clip(y[..., 0], -w, w),
                        lip=abs(a), sup_abs=abs(a) * w,
                        name=f"linear-window({a:g},{w:g})")


BUILTIN_DATUM_IDS = ("sin", "cos-bump", "constant(<c>)")


def builtin_datum(spec_id: str) -> InitialDatum:
    """Resolve a built-in initial datum id."""
    s = spec_id.strip()
    arg = None
    if "(" in s:
        if not s.endswith(")"):
            raise PreconditionError(f"malformed datum id {spec_id!r}")
        s, raw = s[:-1].split("(", 1)
        try:
            arg = float(raw)
        except ValueError as exc:
            raise PreconditionError(f"malformed datum argument in {spec_id!r}") from exc
    if s == "sin":
        return datum_sin()
    if s == "cos-bump":
        return datum_cos_bump() if arg is None else datum_cos_bump(arg)
    if s == "constant":
        if arg is None:
            raise PreconditionError("constant datum requires a value, e.g. constant(0.5)")
        return datum_constant(arg)
    raise PreconditionError(f"unknown datum id {spec_id!r}; known: {BUILTIN_DATUM_IDS}")


# ---------------------------------------------------------------------------
# localization radius
# ---------------------------------------------------------------------------

def mu_radius(S: ContactSystem, datum: InitialDatum, t: float) -> float:
    """Localization rate: every argmin satisfies |y - x| <= mu(t) * t.

    Maximum of the four sign-case envelopes (phi at the argmin and at x
    each may be of either sign), which over-approximates soundly without
    knowing the minimizer.  Uses C1 = 2K (so 1 - e^{-2Kt} <= C1 t for all
    t >= 0) and C2 = sup|phi| * C1.
    """
    if not t > 0:
        raise PreconditionError("t must be positive")
    K = S.K
    C = float(S.C_const)
    c0 = S.c0
    C2 = datum.sup_abs * 2.0 * K
    e2 = math.exp(2.0 * K * t)
    lip1 = datum.lip + 1.0
    conj_scaled = S.theta0_star(e2 * lip1)
    conj_plain = S.theta0_star(lip1)
    cases = (
        c0 + C2 + C + conj_scaled / e2,   # phi(y) <= 0, phi(x) <= 0
        e2 * (c0 + C2 + C) + conj_plain,  # phi(y) >= 0, phi(x) >= 0
        c0 + C + conj_scaled / e2,        # phi(y) <= 0, phi(x) >= 0
        e2 * (c0 + C) + conj_plain,       # phi(y) >= 0, phi(x) <= 0
    )
    return float(max(cases))


# ---------------------------------------------------------------------------
# argmin search
# ---------------------------------------------------------------------------

@dataclass
class SearchParams:
    """Controls of the inf-over-y search."""

    segments: int = 16         # curve segments of every inner solve
    grid_points: int = 33      # coarse grid points per axis
    ytol: float = 1e-6         # golden-section tolerance in y
    refine_sweeps: int = 2     # coordinate-descent sweeps (n = 2)
    opt: OptimizerParams = field(default_factory=OptimizerParams)


def _value_at(S: ContactSystem, datum: InitialDatum, t: float, x: np.ndarray,
              y: np.ndarray, search: SearchParams) -> float:
    phi_y = float(datum(y))
    res = fundamental_direct(S, t, y, x, phi_y, segments=search.segments,
                             opt=search.opt)
    return res.A


def _search_ball(S, datum, t, x, search) -> tuple:
    """Coarse grid + golden refinement of y -> A(t, y, x, phi(y)) over the ball."""
    n = x.size
    radius = mu_radius(S, datum, t) * t

    def g(y):
        return _value_at(S, datum, t, x, np.asarray(y, dtype=float), search)

    best_y = x.copy()
    best_val = g(x)  # rest point always participates

    G = max(2, int(search.grid_points))
    axes = [np.linspace(x[i] - radius, x[i] + radius, G) for i in range(n)]
    if n == 1:
        for yv in axes[0]:
            y = np.array([yv])
            val = g(y)
            if val < best_val:
                best_val, best_y = val, y
        step = 2.0 * radius / (G - 1)
        lo = max(x[0] - radius, best_y[0] - step)
        hi = min(x[0] + radius, best_y[0] + step)
        yr, vr = golden_min(lambda c: g(np.array([c])), lo, hi, xtol=search.ytol)
        if vr < best_val:
            best_val, best_y = vr, np.array([yr])
    else:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        inside = np.linalg.norm(mesh - x, axis=-1) <= radius + 1e-12
        for y in mesh[inside]:
            val = g(y)
            if val < best_val:
                best_val, best_y = val, y.copy()
        step = 2.0 * radius / (G - 1)
        y_cur = best_y.copy()
        for _ in range(max(1, search.refine_sweeps)):
            for i in range(n):
                others = np.delete(y_cur - x, i)
                half = math.sqrt(max(radius ** 2 - float(np.dot(others, others)), 0.0))
                lo = max(x[i] - half, y_cur[i] - step)
                hi = min(x[i] + half, y_cur[i] + step)
                if hi <= lo:
                    continue

                def gi(c, i=i):
                    yy = y_cur.copy()
                    yy[i] = c
                    return g(yy)

                ci, vi = golden_min(gi, lo, hi, xtol=search.ytol)
                if vi < best_val:
                    best_val = vi
                    y_cur[i] = ci
                    best_y = y_cur.copy()
        best_y = best_y.copy()
    return float(best_val), best_y, radius


def solve_value(S: ContactSystem, datum: InitialDatum, t: float, x,
                search: Optional[SearchParams] = None) -> tuple:
    """u(t, x) = min_y A(t, y, x, phi(y)) and its argmin.

    The search ball B(x, mu(t) t) provably contains every minimizer, and
    the center candidate guarantees the result never exceeds the value of
    resting at x.
    """
    search = search or SearchParams()
    x = as_point(x, S.dim)
    val, y_star, _ = _search_ball(S, datum, t, x, search)
    return val, y_star


def lax_oleinik_classical(S: ContactSystem, datum: InitialDatum, t: float, x,
                          search: Optional[SearchParams] = None) -> tuple:
    """Classical inf-convolution value for value-independent Lagrangians.

    Same search as `solve_value`; requires a declared K = 0 so the cost
    ODE degenerates to the plain action integral.
    """
    if S.K != 0.0:
        raise PreconditionError(
            "classical formula requires a value-independent system (K = 0)")
    return solve_value(S, datum, t, x, search)


@dataclass
class ValueGrid:
    """u(t, x) over a (times x points) table, with argmins and radii."""

    times: np.ndarray           # (T,)
    points: np.ndarray          # (P, n)
    values: np.ndarray          # (T, P)
    argmins: np.ndarray         # (T, P, n)
    radius_used: np.ndarray     # (T,) = mu(t) * t
    axes: Optional[list] = None  # spatial lattice axes when points form one


def grid_points_1d(lo: float, hi: float, count: int) -> np.ndarray:
    return np.linspace(lo, hi, count)[:, None]


def solve_value_grid(S: ContactSystem, datum: InitialDatum,
                     times: Sequence[float], points: np.ndarray,
                     search: Optional[SearchParams] = None,
                     axes: Optional[list] = None) -> ValueGrid:
    """Tabulate solve_value over times x points (deterministic order)."""
    search = search or SearchParams()
    times = np.asarray(list(times), dtype=float)
    if times.size == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise PreconditionError("times must be positive and strictly ascending")
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != S.dim:
        raise PreconditionError("points must have shape (P, dim)")
    T, P = times.size, points.shape[0]
    values = np.empty((T, P))
    argmins = np.empty((T, P, S.dim))
    radius = np.empty(T)
    for a, t in enumerate(times):
        radius[a] = mu_radius(S, datum, float(t)) * float(t)
        for b in range(P):
            val, y_star = solve_value(S, datum, float(t), points[b], search)
            values[a, b] = val
            argmins[a, b] = y_star
    return ValueGrid(times=times, points=points, values=values,
                     argmins=argmins, radius_used=radius, axes=axes)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    """Centered-difference residual of the evolution equation on a grid."""

    median: float
    p90: float
    residuals: np.ndarray

    def refine_ratio(self, other: "ResidualReport") -> float:
        return self.median / max(other.median, 1e-300)


def _uniform_spacing(vals, what):
    steps = np.diff(vals)
    if vals.size < 3 or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise PreconditionError(f"{what} must be uniform with >= 3 points")
    return float(steps[0])


def pde_residual(system, grid: ValueGrid) -> ResidualReport:
    """|d_t u + H(x, u, d_x u)| at interior grid points (median / p90).

    `system` may be a HamiltonianSystem or a ContactSystem (in which case
    the Hamiltonian is the numeric convex dual).  Percentiles rather than
    a max: the value function is only almost-everywhere smooth, so a few
    kink points carry no information about scheme consistency.
    """
    times = grid.times
    dt = _uniform_spacing(times, "time levels")
    if grid.axes is None or len(grid.axes) not in (1, 2):
        raise PreconditionError("pde_residual requires a 1-D or 2-D lattice "
                                "with recorded axes")
    axes = [np.asarray(a, dtype=float) for a in grid.axes]
    dxs = [_uniform_spacing(a, "spatial lattice") for a in axes]
    shape = (times.size,) + tuple(a.size for a in axes)
    if grid.values.size != np.prod(shape):
        raise PreconditionError("grid points do not form the recorded lattice")
    U = grid.values.reshape(shape)

    if isinstance(system, HamiltonianSystem):
        def ham(xv, uv, pv):
            return float(system.H(xv, uv, pv))
    elif isinstance(system, ContactSystem):
        def ham(xv, uv, pv):
            return legendre_to_hamiltonian(system, xv, uv, pv)[0]
    else:
        raise PreconditionError("system must be a ContactSystem or HamiltonianSystem")

    if len(axes) == 1:
        u_t = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2.0 * dt)
        grads = [(U[1:-1, 2:] - U[1:-1, :-2]) / (2.0 * dxs[0])]
        u_mid = U[1:-1, 1:-1]
        coords = np.stack(np.meshgrid(axes[0][1:-1], indexing="ij"), axis=-1)
    else:
        inner = (slice(1, -1), slice(1, -1), slice(1, -1))
        u_t = (U[2:, 1:-1, 1:-1] - U[:-2, 1:-1, 1:-1]) / (2.0 * dt)
        grads = [
            (U[1:-1, 2:, 1:-1] - U[1:-1, :-2, 1:-1]) / (2.0 * dxs[0]),
            (U[1:-1, 1:-1, 2:] - U[1:-1, 1:-1, :-2]) / (2.0 * dxs[1]),
        ]
        u_mid = U[inner]
        coords = np.stack(np.meshgrid(axes[0][1:-1], axes[1][1:-1],
                                      indexing="ij"), axis=-1)

    res = np.empty_like(u_t)
    flat_coords = coords.reshape(-1, len(axes))
    for a in range(res.shape[0]):
        flat_u = u_mid[a].reshape(-1)
        flat_p = np.stack([g[a].reshape(-1) for g in grads], axis=-1)
        flat_ut = u_t[a].reshape(-1)
        vals = np.array([
            abs(flat_ut[i] + ham(flat_coords[i], flat_u[i], flat_p[i]))
            for i in range(flat_coords.shape[0])
        ])
        res[a] = vals.reshape(res.shape[1:])
    flat = res.ravel()
    return ResidualReport(median=float(np.median(flat)),
                          p90=float(np.percentile(flat, 90)),
                          residuals=res)


@dataclass
class InitialGapReport:
    """How fast u(t, x) returns to phi(x) as the horizon shrinks."""

    ts: np.ndarray
    gaps: np.ndarray
    mus: np.ndarray
    fitted_c2: float
    linear_bound: np.ndarray    # lip * mu(t) * t + fitted_c2 * t
    decay_ok: bool

    def table(self):
        return list(zip(self.ts, self.gaps))


def initial_condition_check(S: ContactSystem, datum: InitialDatum, x,
                            t_sequence: Sequence[float],
                            search: Optional[SearchParams] = None) -> InitialGapReport:
    """Track |u(t, x) - phi(x)| down a decreasing sequence of horizons.

    Gaps must fit under lip * mu(t) * t + C2' t for a fitted constant C2'
    (which holds by construction once C2' is fitted; the meaningful flag
    is `decay_ok`, requiring gap(t') <= 1.5 * (t'/t) * gap(t) + 1e-6 for
    consecutive horizons).
    """
    search = search or SearchParams()
    x = as_point(x, S.dim)
    ts = np.asarray(list(t_sequence), dtype=float)
    if ts.size < 1 or np.any(ts <= 0) or np.any(np.diff(ts) >= 0):
        raise PreconditionError("t_sequence must be positive and strictly decreasing")
    phi_x = float(datum(x))
    gaps = np.empty(ts.size)
    mus = np.empty(ts.size)
    for i, t in enumerate(ts):
        val, _ = solve_value(S, datum, float(t), x, search)
        gaps[i] = abs(val - phi_x)
        mus[i] = mu_radius(S, datum, float(t))
    slack = gaps - datum.lip * mus * ts
    fitted_c2 = float(max(0.0, np.max(slack / ts)))
    bound = datum.lip * mus * ts + fitted_c2 * ts
    decay_ok = True
    for i in range(ts.size - 1):
        rho = ts[i + 1] / ts[i]
        if gaps[i + 1] > 1.5 * rho * gaps[i] + 1e-6:
            decay_ok = False
    return InitialGapReport(ts=ts, gaps=gaps, mus=mus, fitted_c2=fitted_c2,
                            linear_bound=bound, decay_ok=decay_ok)
