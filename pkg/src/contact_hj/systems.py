"""Contact Lagrangian/Hamiltonian systems and their convex duality.

A contact system couples a Tonelli-type Lagrangian L(x, u, v) -- or a
Hamiltonian H(x, u, p) -- with the growth metadata the downstream bounds
consume: a coercivity envelope theta0/theta0_bar with offset c0, and a
uniform bound K on the derivative in the value slot u.  The metadata is
declared by the caller, never inferred; `verify_conditions` audits it on
a sampled box.

Evaluator contract
------------------
All evaluators are vectorized over a leading batch axis: x and v have
shape (..., n), u has shape (...,), and results broadcast accordingly.
Evaluators must be pure; a system instance may be shared read-only
between workers (the conjugate cache only performs idempotent inserts).

Derivatives that are not supplied analytically fall back to central
finite differences with step `h_fd`.  Second derivatives difference the
first-derivative evaluator, so supplying an analytic gradient already
gives accurate Hessians.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from ._util import as_point, golden_min
from .errors import NonConvergence, PreconditionError

Evaluator = Callable[..., np.ndarray]

#: default tolerance of the Legendre stationarity solve
TOL_NEWTON = 1e-10
#: default half-width of the fallback search box for dual variables
DUAL_BOX = 1e3
#: default radius of the conjugate grid for theta0*
CONJUGATE_RMAX = 1e3


# ---------------------------------------------------------------------------
# finite differences (batched, central)
# ---------------------------------------------------------------------------

def _fd_grad_last_axis(f, z, h):
    """Central-difference gradient of f along the last axis of z."""
    n = z.shape[-1]
    cols = []
    for i in range(n):
        e = np.zeros_like(z)
        e[..., i] = h
        cols.append((f(z + e) - f(z - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def _fd_scalar(f, u, h):
    u = np.asarray(u, dtype=float)
    return (f(u + h) - f(u - h)) / (2.0 * h)


def _fd_jacobian_last_axis(g, z, h):
    """Central-difference Jacobian of a vector field g along the last axis.

    Returns shape (..., n, n) with [i, j] = d g_j / d z_i, symmetrized,
    which is the Hessian when g is a gradient.
    """
    n = z.shape[-1]
    rows = []
    for i in range(n):
        e = np.zeros_like(z)
        e[..., i] = h
        rows.append((g(z + e) - g(z - e)) / (2.0 * h))
    m = np.stack(rows, axis=-2)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


# ---------------------------------------------------------------------------
# system types
# ---------------------------------------------------------------------------

@dataclass
class ContactSystem:
    """Lagrangian-side contact system with growth metadata.

    Parameters mirror the conditions a Tonelli-type contact Lagrangian
    satisfies: L strictly convex in v, sandwiched between nondecreasing
    superlinear envelopes, with |dL/du| <= K.
    """

    dim: int
    lagrangian: Evaluator
    K: float
    theta0: Callable[[np.ndarray], np.ndarray]
    theta0_bar: Callable[[np.ndarray], np.ndarray]
    c0: float
    C_const: Optional[float] = None
    L_x: Optional[Evaluator] = None
    L_u: Optional[Evaluator] = None
    L_v: Optional[Evaluator] = None
    L_vv: Optional[Evaluator] = None
    theta0_conj: Optional[Callable[[float], float]] = None
    h_fd: float = 1e-5
    name: str = ""
    _conj_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise PreconditionError(f"dim must be 1 or 2, got {self.dim}")
        if self.K < 0 or self.c0 < 0:
            raise PreconditionError("K and c0 must be nonnegative")
        if self.C_const is None:
            self.C_const = float(self.theta0_bar(0.0))

    # evaluators ------------------------------------------------------

    def L(self, x, u, v):
        return self.lagrangian(x, u, v)

    def Lx(self, x, u, v):
        if self.L_x is not None:
            return self.L_x(x, u, v)
        return _fd_grad_last_axis(lambda xx: self.lagrangian(xx, u, v), np.asarray(x, float), self.h_fd)

    def Lu(self, x, u, v):
        if self.L_u is not None:
            return self.L_u(x, u, v)
        return _fd_scalar(lambda uu: self.lagrangian(x, uu, v), u, self.h_fd)

    def Lv(self, x, u, v):
        if self.L_v is not None:
            return self.L_v(x, u, v)
        return _fd_grad_last_axis(lambda vv: self.lagrangian(x, u, vv), np.asarray(v, float), self.h_fd)

    def Lvv(self, x, u, v):
        if self.L_vv is not None:
            return self.L_vv(x, u, v)
        return _fd_jacobian_last_axis(lambda vv: self.Lv(x, u, vv), np.asarray(v, float), self.h_fd)

    # growth ----------------------------------------------------------

    def theta0_star(self, k: float, r_max: float = CONJUGATE_RMAX) -> float:
        """Convex conjugate sup_{r in [0, r_max]} (k r - theta0(r)).

        Computed by grid maximization plus golden refinement and cached
        per argument; a user-supplied closed form, when present, takes
        precedence over the numeric conjugate.
        """
        if self.theta0_conj is not None:
            return float(self.theta0_conj(k))
        key = (float(k), float(r_max))
        cached = self._conj_cache.get(key)
        if cached is not None:
            return cached
        r = np.linspace(0.0, r_max, 4097)
        g = k * r - np.asarray(self.theta0(r), dtype=float)
        j = int(np.argmax(g))
        lo = r[max(j - 1, 0)]
        hi = r[min(j + 1, r.size - 1)]
        _, neg = golden_min(lambda rr: float(self.theta0(rr)) - k * rr, lo, hi, xtol=1e-12)
        val = max(float(g[j]), -neg)
        self._conj_cache[key] = val
        return val


@dataclass
class HamiltonianSystem:
    """Hamiltonian-side contact system; dual counterpart of ContactSystem."""

    dim: int
    hamiltonian: Evaluator
    K: float
    H_x: Optional[Evaluator] = None
    H_u: Optional[Evaluator] = None
    H_p: Optional[Evaluator] = None
    H_pp: Optional[Evaluator] = None
    h_fd: float = 1e-5
    name: str = ""

    def H(self, x, u, p):
        return self.hamiltonian(x, u, p)

    def Hx(self, x, u, p):
        if self.H_x is not None:
            return self.H_x(x, u, p)
        return _fd_grad_last_axis(lambda xx: self.hamiltonian(xx, u, p), np.asarray(x, float), self.h_fd)

    def Hu(self, x, u, p):
        if self.H_u is not None:
            return self.H_u(x, u, p)
        return _fd_scalar(lambda uu: self.hamiltonian(x, uu, p), u, self.h_fd)

    def Hp(self, x, u, p):
        if self.H_p is not None:
            return self.H_p(x, u, p)
        return _fd_grad_last_axis(lambda pp: self.hamiltonian(x, u, pp), np.asarray(p, float), self.h_fd)

    def Hpp(self, x, u, p):
        if self.H_pp is not None:
            return self.H_pp(x, u, p)
        return _fd_jacobian_last_axis(lambda pp: self.Hp(x, u, pp), np.asarray(p, float), self.h_fd)


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def _damped_newton_root(F, J, z0, tol, max_iter):
    """Damped Newton for F(z) = 0; returns (z, converged)."""
    z = np.array(z0, dtype=float)
    Fz = np.atleast_1d(np.asarray(F(z), dtype=float))
    nrm = float(np.linalg.norm(Fz))
    for _ in range(max_iter):
        if nrm <= tol:
            return z, True
        Jz = np.atleast_2d(np.asarray(J(z), dtype=float))
        try:
            step = np.linalg.solve(Jz, Fz)
        except np.linalg.LinAlgError:
            return z, False
        if not np.all(np.isfinite(step)):
            return z, False
        alpha = 1.0
        while True:
            z_new = z - alpha * step
            F_new = np.atleast_1d(np.asarray(F(z_new), dtype=float))
            n_new = float(np.linalg.norm(F_new))
            if np.isfinite(n_new) and n_new < (1.0 - 1e-4 * alpha) * nrm:
                break
            alpha *= 0.5
            if alpha < 2.0 ** -30:
                return z, nrm <= tol
        z, Fz, nrm = z_new, F_new, n_new
    return z, nrm <= tol


def _coordinate_golden_min(f, z0, lo, hi, xtol=1e-9, sweeps=4):
    """Cyclic per-coordinate golden-section descent on [lo, hi]^n."""
    z = np.array(z0, dtype=float)
    for _ in range(sweeps):
        for i in range(z.size):
            def fi(c, i=i):
                zz = z.copy()
                zz[i] = c
                return f(zz)
            z[i] = golden_min(fi, lo, hi, xtol=xtol)[0]
    return z


def _probes(z, delta):
    """Axis and diagonal probe points around z."""
    n = z.size
    pts = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        pts.append(z + e)
        pts.append(z - e)
    if n == 2:
        for sx in (1.0, -1.0):
            for sy in (1.0, -1.0):
                pts.append(z + delta * np.array([sx, sy]))
    return pts


def _is_local_max(gain, z, scale=1.0):
    """Probe whether z locally maximizes the concave gain (rejects saddles)."""
    g0 = gain(z)
    delta = 1e-4 * (1.0 + float(np.linalg.norm(z))) * scale
    tol = 1e-10 * (1.0 + abs(g0))
    return all(gain(q) <= g0 + tol for q in _probes(z, delta))


def _legendre_solve(gain, F, J, z0, tol_newton, max_iter, dual_box, what):
    """Shared stationarity solve: damped Newton, golden fallback, max check."""
    z, ok = _damped_newton_root(F, J, z0, tol_newton, max_iter)
    if ok and not _is_local_max(gain, z):
        ok = False
    if not ok:
        z = _coordinate_golden_min(lambda q: -gain(q), z0.copy(), -dual_box, dual_box)
        z, ok = _damped_newton_root(F, J, z, tol_newton, max_iter)
        ok = ok and _is_local_max(gain, z)
    if not ok:
        raise NonConvergence(
            f"Legendre stationarity solve failed; the {what} may not be "
            "strictly convex/superlinear in its dual slot")
    return z


def legendre_to_lagrangian(H: HamiltonianSystem, x, r: float, v,
                           tol_newton: float = TOL_NEWTON,
                           max_iter: int = 100,
                           dual_box: float = DUAL_BOX):
    """sup_p <p, v> - H(x, r, p) and its maximizer.

    Solves the stationarity system H_p(x, r, p) = v by damped Newton from
    p = 0; if the Hessian is numerically singular, Newton stalls, or the
    stationary point is not a maximum, falls back to per-coordinate
    golden-section search on [-dual_box, dual_box] plus a Newton polish.
    """
    x = as_point(x, H.dim)
    v = as_point(v, H.dim)

    def gain(p):
        return float(np.dot(p, v) - np.asarray(H.H(x, r, p), dtype=float))

    p = _legendre_solve(gain,
                        lambda p: np.asarray(H.Hp(x, r, p), dtype=float) - v,
                        lambda p: H.Hpp(x, r, p),
                        np.zeros_like(v), tol_newton, max_iter, dual_box,
                        "Hamiltonian")
    return gain(p), p


def legendre_to_hamiltonian(L: ContactSystem, x, r: float, p,
                            tol_newton: float = TOL_NEWTON,
                            max_iter: int = 100,
                            dual_box: float = DUAL_BOX):
    """sup_v <p, v> - L(x, r, v) and its maximizer (inverse transform)."""
    x = as_point(x, L.dim)
    p = as_point(p, L.dim)

    def gain(v):
        return float(np.dot(p, v) - np.asarray(L.L(x, r, v), dtype=float))

    v = _legendre_solve(gain,
                        lambda v: np.asarray(L.Lv(x, r, v), dtype=float) - p,
                        lambda v: L.Lvv(x, r, v),
                        np.zeros_like(p), tol_newton, max_iter, dual_box,
                        "Lagrangian")
    return gain(v), v


def hamiltonian_from_contact(S: ContactSystem, tol_newton: float = TOL_NEWTON) -> HamiltonianSystem:
    """Wrap the numeric Legendre transform of S as a HamiltonianSystem.

    The gradient H_p is the maximizing velocity of the inner transform
    (conjugate-gradient identity), so it carries no finite-difference
    noise on top of the Newton tolerance.  Point-wise, an order of
    magnitude slower than an analytic dual; intended for diagnostics on
    systems that only declare the Lagrangian side.
    """
    def _pointwise(fn, x, u, p):
        x = np.asarray(x, float)
        p = np.asarray(p, float)
        if x.ndim == 1:
            return fn(x, float(u), p)
        flat_x = x.reshape(-1, S.dim)
        flat_p = np.broadcast_to(p, x.shape).reshape(-1, S.dim)
        flat_u = np.broadcast_to(np.asarray(u, float), x.shape[:-1]).ravel()
        out = [fn(flat_x[i], float(flat_u[i]), flat_p[i])
               for i in range(flat_x.shape[0])]
        return np.asarray(out).reshape(x.shape[:-1] + np.shape(out[0]))

    def ham(x, u, p):
        return _pointwise(
            lambda xx, uu, pp: legendre_to_hamiltonian(S, xx, uu, pp,
                                                       tol_newton=tol_newton)[0],
            x, u, p)

    def grad(x, u, p):
        return _pointwise(
            lambda xx, uu, pp: legendre_to_hamiltonian(S, xx, uu, pp,
                                                       tol_newton=tol_newton)[1],
            x, u, p)

    return HamiltonianSystem(dim=S.dim, hamiltonian=ham, K=S.K, H_p=grad,
                             name=f"dual({S.name})" if S.name else "dual")


# ---------------------------------------------------------------------------
# condition audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleBox:
    """Axis-aligned sampling region for the condition audit."""

    x_bounds: tuple  # ((lo, hi),) * dim
    u_bounds: tuple  # (lo, hi)
    v_bounds: tuple  # ((lo, hi),) * dim

    @classmethod
    def cube(cls, dim: int, half_width: float = 5.0) -> "SampleBox":
        b = tuple((-half_width, half_width) for _ in range(dim))
        return cls(x_bounds=b, u_bounds=(-half_width, half_width), v_bounds=b)


@dataclass
class ConditionReport:
    """Worst-case margins of the standing conditions on sampled points.

    Margins are signed: nonnegative means the condition held on every
    sample.  The report never raises; callers inspect `violations`.
    """

    samples: int
    lvv_min_eig: float
    lu_bound_margin: float
    sandwich_upper_margin: float
    sandwich_lower_margin: float
    theta0_at_zero: float
    theta0_monotone_margin: float
    theta0_bar_monotone_margin: float
    theta0_superlinear_margin: float
    violations: list

    MARGIN_TOL = 1e-9

    @property
    def passed(self) -> bool:
        return not self.violations

    def lines(self) -> list:
        def tag(ok):
            return "ok " if ok else "FAIL"
        t = self.MARGIN_TOL
        return [
            f"[{tag(self.lvv_min_eig > -t)}] strict convexity: min eig L_vv = {self.lvv_min_eig:.6g}",
            f"[{tag(self.lu_bound_margin > -t)}] |L_u| <= K margin = {self.lu_bound_margin:.6g}",
            f"[{tag(self.sandwich_upper_margin > -t)}] upper growth margin = {self.sandwich_upper_margin:.6g}",
            f"[{tag(self.sandwich_lower_margin > -t)}] lower growth margin = {self.sandwich_lower_margin:.6g}",
            f"[{tag(abs(self.theta0_at_zero) <= t)}] theta0(0) = {self.theta0_at_zero:.6g}",
            f"[{tag(self.theta0_monotone_margin > -t)}] theta0 nondecreasing margin = {self.theta0_monotone_margin:.6g}",
            f"[{tag(self.theta0_bar_monotone_margin > -t)}] theta0_bar nondecreasing margin = {self.theta0_bar_monotone_margin:.6g}",
            f"[{tag(self.theta0_superlinear_margin > -t)}] theta0 difference-quotient margin = {self.theta0_superlinear_margin:.6g}",
        ]


def verify_conditions(S: ContactSystem, box: SampleBox, samples: int = 256,
                      seed: int = 0) -> ConditionReport:
    """Audit the declared growth/convexity conditions on Latin-hypercube samples.

    Superlinearity is only checked as nondecreasing difference quotients
    theta0(r)/r on the sampled radii; a genuine limit at infinity is not
    numerically decidable.
    """
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    n = S.dim
    d = 2 * n + 1
    sampler = qmc.LatinHypercube(d=d, seed=seed)
    unit = sampler.random(samples)
    lows = np.array([b[0] for b in box.x_bounds] + [box.u_bounds[0]]
                    + [b[0] for b in box.v_bounds])
    highs = np.array([b[1] for b in box.x_bounds] + [box.u_bounds[1]]
                     + [b[1] for b in box.v_bounds])
    pts = qmc.scale(unit, lows, highs)
    x = pts[:, :n]
    u = pts[:, n]
    v = pts[:, n + 1:]

    Lval = np.asarray(S.L(x, u, v), dtype=float)
    Lu = np.asarray(S.Lu(x, u, v), dtype=float)
    Lvv = np.asarray(S.Lvv(x, u, v), dtype=float)
    eigs = np.linalg.eigvalsh(Lvv.reshape(samples, n, n))
    speed = np.linalg.norm(v, axis=-1)

    upper = np.asarray(S.theta0_bar(speed), dtype=float) + S.K * np.abs(u) - Lval
    lower = Lval - np.asarray(S.theta0(speed), dtype=float) + S.c0 + S.K * np.abs(u)

    radii = np.unique(np.concatenate([speed, np.linspace(0.0, speed.max() + 1.0, 33)]))
    radii.sort()
    th0 = np.asarray(S.theta0(radii), dtype=float)
    th0b = np.asarray(S.theta0_bar(radii), dtype=float)
    mono0 = float(np.min(np.diff(th0))) if radii.size > 1 else 0.0
    mono0b = float(np.min(np.diff(th0b))) if radii.size > 1 else 0.0
    pos = radii[radii > 0]
    quot = np.asarray(S.theta0(pos), dtype=float) / pos
    superlin = float(np.min(np.diff(quot))) if pos.size > 1 else 0.0

    report = ConditionReport(
        samples=samples,
        lvv_min_eig=float(eigs.min()),
        lu_bound_margin=float(S.K - np.abs(Lu).max()),
        sandwich_upper_margin=float(upper.min()),
        sandwich_lower_margin=float(lower.min()),
        theta0_at_zero=float(S.theta0(0.0)),
        theta0_monotone_margin=mono0,
        theta0_bar_monotone_margin=mono0b,
        theta0_superlinear_margin=superlin,
        violations=[],
    )
    t = ConditionReport.MARGIN_TOL
    checks = [
        ("L_vv not positive definite", report.lvv_min_eig > -t),
        ("|L_u| exceeds declared K", report.lu_bound_margin > -t),
        ("upper growth bound violated", report.sandwich_upper_margin > -t),
        ("lower growth bound violated", report.sandwich_lower_margin > -t),
        ("theta0(0) != 0", abs(report.theta0_at_zero) <= t),
        ("theta0 not nondecreasing", report.theta0_monotone_margin > -t),
        ("theta0_bar not nondecreasing", report.theta0_bar_monotone_margin > -t),
        ("theta0 difference quotients decrease", report.theta0_superlinear_margin > -t),
    ]
    report.violations = [msg for msg, ok in checks if not ok]
    return report


# ---------------------------------------------------------------------------
# built-in systems
# ---------------------------------------------------------------------------

def _sq(v):
    return 0.5 * np.sum(np.asarray(v, float) ** 2, axis=-1)


def _eye_like(v):
    v = np.asarray(v, float)
    n = v.shape[-1]
    return np.broadcast_to(np.eye(n), v.shape + (n,)).copy()


def _zeros_scalar(x, u, v):
    return np.zeros(np.broadcast(np.asarray(u, float), _sq(v)).shape)


def quadratic_system(dim: int = 1) -> ContactSystem:
    """L = |v|^2 / 2 (classical kinetic action, no value coupling)."""
    return ContactSystem(
        dim=dim,
        lagrangian=lambda x, u, v: _sq(v),
        K=0.0,
        theta0=lambda r: 0.5 * np.asarray(r, float) ** 2,
        theta0_bar=lambda r: 0.5 * np.asarray(r, float) ** 2,
        c0=0.0,
        L_x=lambda x, u, v: np.zeros_like(np.asarray(v, float)),
        L_u=_zeros_scalar,
        L_v=lambda x, u, v: np.asarray(v, float).copy(),
        L_vv=lambda x, u, v: _eye_like(v),
        theta0_conj=lambda k: 0.5 * float(k) ** 2,
        name="quadratic",
    )


def discounted_quadratic_system(lam: float, dim: int = 1) -> ContactSystem:
    """L = -lam*u + |v|^2 / 2 (discounted kinetic action)."""
    if lam < 0:
        raise PreconditionError("discount rate must be nonnegative")
    return ContactSystem(
        dim=dim,
        lagrangian=lambda x, u, v: -lam * np.asarray(u, float) + _sq(v),
        K=float(lam),
        theta0=lambda r: 0.5 * np.asarray(r, float) ** 2,
        theta0_bar=lambda r: 0.5 * np.asarray(r, float) ** 2,
        c0=0.0,
        L_x=lambda x, u, v: np.zeros_like(np.asarray(v, float)),
        L_u=lambda x, u, v: np.broadcast_to(-lam, np.broadcast(np.asarray(u, float), _sq(v)).shape).copy(),
        L_v=lambda x, u, v: np.asarray(v, float).copy(),
        L_vv=lambda x, u, v: _eye_like(v),
        theta0_conj=lambda k: 0.5 * float(k) ** 2,
        name=f"discounted-quadratic({lam:g})",
    )


def quartic_system(dim: int = 1) -> ContactSystem:
    """L = |v|^4 / 4 (superlinear beyond quadratic, still value-free)."""
    def lag(x, u, v):
        v = np.asarray(v, float)
        return 0.25 * np.sum(v * v, axis=-1) ** 2

    def grad(x, u, v):
        v = np.asarray(v, float)
        return np.sum(v * v, axis=-1)[..., None] * v

    def hess(x, u, v):
        v = np.asarray(v, float)
        s = np.sum(v * v, axis=-1)
        return s[..., None, None] * _eye_like(v) + 2.0 * v[..., :, None] * v[..., None, :]

    return ContactSystem(
        dim=dim,
        lagrangian=lag,
        K=0.0,
        theta0=lambda r: 0.25 * np.asarray(r, float) ** 4,
        theta0_bar=lambda r: 0.25 * np.asarray(r, float) ** 4,
        c0=0.0,
        L_x=lambda x, u, v: np.zeros_like(np.asarray(v, float)),
        L_u=_zeros_scalar,
        L_v=grad,
        L_vv=hess,
        theta0_conj=lambda k: 0.75 * abs(float(k)) ** (4.0 / 3.0),
        name="quartic",
    )


def trig_contact_system(dim: int = 1) -> ContactSystem:
    """L = |v|^2/2 + sin(x_1) sin(u): genuine, bounded value coupling."""
    def lag(x, u, v):
        x = np.asarray(x, float)
        return _sq(v) + np.sin(x[..., 0]) * np.sin(np.asarray(u, float))

    def lx(x, u, v):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 0] = np.cos(x[..., 0]) * np.sin(np.asarray(u, float))
        return out

    def lu(x, u, v):
        x = np.asarray(x, float)
        return np.sin(x[..., 0]) * np.cos(np.asarray(u, float))

    return ContactSystem(
        dim=dim,
        lagrangian=lag,
        K=1.0,
        theta0=lambda r: 0.5 * np.asarray(r, float) ** 2,
        theta0_bar=lambda r: 0.5 * np.asarray(r, float) ** 2 + 1.0,
        c0=1.0,
        L_x=lx,
        L_u=lu,
        L_v=lambda x, u, v: np.asarray(v, float).copy(),
        L_vv=lambda x, u, v: _eye_like(v),
        theta0_conj=lambda k: 0.5 * float(k) ** 2,
        name="trig-contact",
    )


def quadratic_hamiltonian(dim: int = 1) -> HamiltonianSystem:
    """H = |p|^2 / 2, dual of the quadratic system."""
    return HamiltonianSystem(
        dim=dim,
        hamiltonian=lambda x, u, p: _sq(p),
        K=0.0,
        H_x=lambda x, u, p: np.zeros_like(np.asarray(p, float)),
        H_u=_zeros_scalar,
        H_p=lambda x, u, p: np.asarray(p, float).copy(),
        H_pp=lambda x, u, p: _eye_like(p),
        name="quadratic",
    )


def discounted_quadratic_hamiltonian(lam: float, dim: int = 1) -> HamiltonianSystem:
    """H = lam*u + |p|^2 / 2, dual of the discounted quadratic system."""
    return HamiltonianSystem(
        dim=dim,
        hamiltonian=lambda x, u, p: lam * np.asarray(u, float) + _sq(p),
        K=float(lam),
        H_x=lambda x, u, p: np.zeros_like(np.asarray(p, float)),
        H_u=lambda x, u, p: np.broadcast_to(lam, np.broadcast(np.asarray(u, float), _sq(p)).shape).copy(),
        H_p=lambda x, u, p: np.asarray(p, float).copy(),
        H_pp=lambda x, u, p: _eye_like(p),
        name=f"discounted-quadratic({lam:g})",
    )


def quartic_hamiltonian(dim: int = 1) -> HamiltonianSystem:
    """H = (3/4) |p|^(4/3), dual of the quartic system (singular at p=0)."""
    eps = 1e-300

    def ham(x, u, p):
        p = np.asarray(p, float)
        return 0.75 * np.sum(p * p, axis=-1) ** (2.0 / 3.0)

    def hp(x, u, p):
        p = np.asarray(p, float)
        s = np.sum(p * p, axis=-1)
        return (s + eps)[..., None] ** (-1.0 / 3.0) * p

    return HamiltonianSystem(dim=dim, hamiltonian=ham, K=0.0,
                             H_x=lambda x, u, p: np.zeros_like(np.asarray(p, float)),
                             H_u=_zeros_scalar, H_p=hp, name="quartic")


def trig_contact_hamiltonian(dim: int = 1) -> HamiltonianSystem:
    """H = |p|^2/2 - sin(x_1) sin(u), dual of the trig-contact system."""
    def ham(x, u, p):
        x = np.asarray(x, float)
        return _sq(p) - np.sin(x[..., 0]) * np.sin(np.asarray(u, float))

    def hx(x, u, p):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 0] = -np.cos(x[..., 0]) * np.sin(np.asarray(u, float))
        return out

    def hu(x, u, p):
        x = np.asarray(x, float)
        return -np.sin(x[..., 0]) * np.cos(np.asarray(u, float))

    return HamiltonianSystem(
        dim=dim,
        hamiltonian=ham,
        K=1.0,
        H_x=hx,
        H_u=hu,
        H_p=lambda x, u, p: np.asarray(p, float).copy(),
        H_pp=lambda x, u, p: _eye_like(p),
        name="trig-contact",
    )


BUILTIN_SYSTEM_IDS = ("quadratic", "discounted-quadratic(<lambda>)", "quartic", "trig-contact")


def _parse_system_id(spec_id: str):
    base = spec_id.strip()
    arg = None
    if "(" in base:
        if not base.endswith(")"):
            raise PreconditionError(f"malformed system id {spec_id!r}")
        base, raw = base[:-1].split("(", 1)
        try:
            arg = float(raw)
        except ValueError as exc:
            raise PreconditionError(f"malformed system argument in {spec_id!r}") from exc
    return base, arg


def builtin_system(spec_id: str, dim: int = 1) -> ContactSystem:
    """Resolve a built-in Lagrangian system id such as 'discounted-quadratic(0.5)'."""
    base, arg = _parse_system_id(spec_id)
    if base == "quadratic":
        return quadratic_system(dim)
    if base == "discounted-quadratic":
        if arg is None:
            raise PreconditionError("discounted-quadratic requires a rate, e.g. discounted-quadratic(1.0)")
        return discounted_quadratic_system(arg, dim)
    if base == "quartic":
        return quartic_system(dim)
    if base == "trig-contact":
        return trig_contact_system(dim)
    raise PreconditionError(f"unknown system id {spec_id!r}; known: {BUILTIN_SYSTEM_IDS}")


def builtin_hamiltonian(spec_id: str, dim: int = 1) -> HamiltonianSystem:
    """Resolve the Hamiltonian dual of a built-in system id."""
    base, arg = _parse_system_id(spec_id)
    if base == "quadratic":
        return quadratic_hamiltonian(dim)
    if base == "discounted-quadratic":
        if arg is None:
            raise PreconditionError("discounted-quadratic requires a rate")
        return discounted_quadratic_hamiltonian(arg, dim)
    if base == "quartic":
        return quartic_hamiltonian(dim)
    if base == "trig-contact":
        return trig_contact_hamiltonian(dim)
    raise PreconditionError(f"unknown system id {spec_id!r}; known: {BUILTIN_SYSTEM_IDS}")


def with_overrides(S: ContactSystem, **kwargs) -> ContactSystem:
    """Copy a system with replaced metadata (used by config-level overrides)."""
    allowed = {"K", "c0", "C_const", "theta0", "theta0_bar", "theta0_conj", "name"}
    bad = set(kwargs) - allowed
    if bad:
        raise PreconditionError(f"cannot override fields {sorted(bad)}")
    return replace(S, _conj_cache={}, **kwargs)
