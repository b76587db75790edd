"""Vanishing contact-structure experiments.

A lambda-family of contact Lagrangians whose value coupling K_lambda
shrinks to zero degenerates, in the limit, to a classical Lagrangian
L0(x, v).  The experiment solves the Cauchy problem for each family
member and for the limit system, measures the sup-gap over a compact
(times x points) grid, and verifies the a-priori envelope on the running
cost that drives the convergence estimate.

The grid is the experiment's compact-set proxy and is recorded in the
report; descending lambda should produce nonincreasing gaps for the
built-in families, but monotonicity is reported as a soft flag rather
than enforced (only the limit itself is guaranteed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cost_ode import Curve, integrate_cost
from .errors import BoundViolation, PreconditionError
from .fundamental import fundamental_direct
from .systems import ContactSystem, _eye_like, _sq
from .value import (InitialDatum, SearchParams, ValueGrid,
                    lax_oleinik_classical, mu_radius, solve_value)


@dataclass
class LambdaFamily:
    """Family lambda -> L^lambda with its declared limit system."""

    builder: Callable[[float], ContactSystem]
    K_of_lambda: Callable[[float], float]
    limit_system: ContactSystem
    name: str = ""


def family_discounted(dim: int = 1) -> LambdaFamily:
    """L^lambda = -lambda u + |v|^2/2; the classical discounted family."""
    from .systems import discounted_quadratic_system, quadratic_system
    return LambdaFamily(
        builder=lambda lam: discounted_quadratic_system(lam, dim),
        K_of_lambda=lambda lam: float(lam),
        limit_system=quadratic_system(dim),
        name="discounted",
    )


def perturbed_system(lam: float, dim: int = 1) -> ContactSystem:
    """L^lambda = -lambda arctan(u) + |v|^2/2 + lambda sin(x_1).

    A family whose frozen-value member L_lambda(x, v) also moves with
    lambda, so the general exponential-weight machinery is genuinely
    exercised (L - u dL/du is not lambda-free here).
    """
    if lam < 0:
        raise PreconditionError("lambda must be nonnegative")

    def lag(x, u, v):
        x = np.asarray(x, float)
        return (-lam * np.arctan(np.asarray(u, float)) + _sq(v)
                + lam * np.sin(x[..., 0]))

    def lx(x, u, v):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        out[..., 0] = lam * np.cos(x[..., 0])
        return out

    def lu(x, u, v):
        u = np.asarray(u, float)
        shape = np.broadcast(u, _sq(v)).shape
        return np.broadcast_to(-lam / (1.0 + u * u), shape).copy()

    return ContactSystem(
        dim=dim,
        lagrangian=lag,
        K=float(lam),
        theta0=lambda r: 0.5 * np.asarray(r, float) ** 2,
        theta0_bar=lambda r: 0.5 * np.asarray(r, float) ** 2 + lam * (1.0 + 0.5 * math.pi),
        c0=float(lam),
        L_x=lx,
        L_u=lu,
        L_v=lambda x, u, v: np.asarray(v, float).copy(),
        L_vv=lambda x, u, v: _eye_like(v),
        theta0_conj=lambda k: 0.5 * float(k) ** 2,
        name=f"perturbed({lam:g})",
    )


def family_perturbed(dim: int = 1) -> LambdaFamily:
    from .systems import quadratic_system
    return LambdaFamily(
        builder=lambda lam: perturbed_system(lam, dim),
        K_of_lambda=lambda lam: float(lam),
        limit_system=quadratic_system(dim),
        name="perturbed",
    )


BUILTIN_FAMILY_IDS = ("discounted", "perturbed")


def builtin_family(spec_id: str, dim: int = 1) -> LambdaFamily:
    s = spec_id.strip()
    if s == "discounted":
        return family_discounted(dim)
    if s == "perturbed":
        return family_perturbed(dim)
    raise PreconditionError(f"unknown family id {spec_id!r}; known: {BUILTIN_FAMILY_IDS}")


# ---------------------------------------------------------------------------
# a-priori envelope on the running cost
# ---------------------------------------------------------------------------

@dataclass
class ContactBoundResult:
    """Envelope check along one limit-system minimizer."""

    bound: float
    max_abs_u: float
    correction_integral: float
    f_term: float
    c_factor: float
    passed: bool


def _frozen_gap_integral(S_lambda: ContactSystem, L0: ContactSystem,
                         xi: Curve, substeps: int) -> float:
    """Integral of |L_lambda(xi, xi') - L0(xi, xi')| with the RK4 quadrature.

    L_lambda freezes the value slot at zero; the integrand depends on s
    only, so the RK4 stages collapse to a Simpson-type rule per substep.
    """
    N = xi.segments
    m = int(substeps)
    h = xi.t_final / (N * m)
    vel = xi.velocities
    total = 0.0
    zero = np.zeros(())
    for k in range(N):
        a = xi.nodes[k]
        vk = vel[k]

        def f(shift):
            pos = a + shift * vk
            return abs(float(S_lambda.L(pos, zero, vk)) - float(L0.L(pos, zero, vk)))

        for j in range(m):
            f0 = f(j * h)
            fm = f((j + 0.5) * h)
            f1 = f((j + 1) * h)
            total += (h / 6.0) * (f0 + 4.0 * fm + f1)
    return total


def contact_bound(S_lambda: ContactSystem, L0: ContactSystem, xi: Curve,
                  u: float, R: float, substeps: int = 4,
                  slack: float = 1e-9) -> ContactBoundResult:
    """Check max_s |u^lambda_xi(s)| against its Gronwall-type envelope.

    xi must be a minimizer of the limit action between endpoints at most
    R apart; the envelope combines the limit system's growth metadata
    with the family member's K and the frozen-value correction integral.
    Raises BoundViolation when the trajectory escapes (an implementation
    or family-declaration error).
    """
    t = xi.t_final
    d = float(np.linalg.norm(xi.nodes[-1] - xi.nodes[0]))
    if d > R * (1.0 + 1e-9) + 1e-12:
        raise PreconditionError(f"endpoint distance {d:g} exceeds declared R={R:g}")
    K_lam = S_lambda.K
    ekt = math.exp(K_lam * t)
    kappa = float(L0.theta0_bar(R / t)) + 2.0 * L0.c0
    f_term = kappa * ekt
    c_factor = t * K_lam * ekt + 1.0
    corr = _frozen_gap_integral(S_lambda, L0, xi, substeps)
    bound = t * f_term + c_factor * abs(u) + ekt * corr

    traj = integrate_cost(S_lambda, xi, u, substeps)
    max_abs = float(np.max(np.abs(traj.samples)))
    passed = max_abs <= bound + slack
    result = ContactBoundResult(bound=bound, max_abs_u=max_abs,
                                correction_integral=corr, f_term=f_term,
                                c_factor=c_factor, passed=passed)
    if not passed:
        raise BoundViolation(
            f"running cost reached {max_abs:.6g}, envelope is {bound:.6g}; "
            "check the declared growth metadata of the family")
    return result


# ---------------------------------------------------------------------------
# convergence experiment
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Gaps, envelopes and pointwise tables of one vanishing run."""

    lambdas: np.ndarray          # (L,), descending
    times: np.ndarray            # (T,)
    points: np.ndarray           # (P, n)
    baseline: ValueGrid
    values: list                 # per lambda: (T, P) array of u^lambda
    argmins: list                # per lambda: (T, P, n) array of y_star
    gaps: np.ndarray             # (L,) sup over the grid of |u^lambda - u|
    bound_values: np.ndarray     # (L, T, P) envelope values
    bound_max_abs: np.ndarray    # (L, T, P) attained max |u^lambda_xi|
    bound_passed: np.ndarray     # (L, T, P) bool
    frozen_gap_rate: np.ndarray  # (L,) max over points of (1/t) * int |L_lambda - L0| along the limit minimizer
    monotone: bool
    final_gap: float = field(init=False)

    def __post_init__(self):
        self.final_gap = float(self.gaps[-1]) if self.gaps.size else 0.0

    def max_bound(self, i: int) -> float:
        """Largest envelope value (trajectory bound M) for lambda index i."""
        return float(np.max(self.bound_values[i]))


def run_vanishing(family: LambdaFamily, datum: InitialDatum,
                  lambdas: Sequence[float], times: Sequence[float],
                  points: np.ndarray,
                  search: Optional[SearchParams] = None,
                  substeps: int = 4,
                  monotone_tol: float = 1e-6) -> ConvergenceReport:
    """Solve the family and its limit over a grid; report sup-gaps per lambda.

    lambdas must be positive and strictly descending.  The limit solution
    and its minimizing curves are computed once and reused for the
    envelope checks; envelope failures are recorded per point rather than
    aborting the run.
    """
    search = search or SearchParams()
    lambdas = np.asarray(list(lambdas), dtype=float)
    if lambdas.size == 0 or np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise PreconditionError("lambdas must be positive and strictly descending")
    times = np.asarray(list(times), dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise PreconditionError("points must have shape (P, dim)")
    T, P = times.size, points.shape[0]
    L0 = family.limit_system

    base_vals = np.empty((T, P))
    base_args = np.empty((T, P, points.shape[1]))
    base_curves = {}
    base_u0 = np.empty((T, P))
    base_R = np.empty((T, P))
    base_radius = np.array([mu_radius(L0, datum, float(t)) * float(t) for t in times])
    for a, t in enumerate(times):
        for b in range(P):
            x = points[b]
            val, y_star = lax_oleinik_classical(L0, datum, float(t), x, search)
            base_vals[a, b] = val
            base_args[a, b] = y_star
            phi_y = float(datum(y_star))
            res = fundamental_direct(L0, float(t), y_star, x, phi_y,
                                     segments=search.segments, opt=search.opt)
            base_curves[(a, b)] = res.minimizer
            base_u0[a, b] = phi_y
            base_R[a, b] = max(float(np.linalg.norm(y_star - x)), 1e-9)
    baseline = ValueGrid(times=times, points=points, values=base_vals,
                         argmins=base_args, radius_used=base_radius)

    values = []
    argmins = []
    gaps = np.empty(lambdas.size)
    bound_values = np.empty((lambdas.size, T, P))
    bound_max = np.empty((lambdas.size, T, P))
    bound_ok = np.zeros((lambdas.size, T, P), dtype=bool)
    frozen_sup = np.empty(lambdas.size)

    for i, lam in enumerate(lambdas):
        S_lam = family.builder(float(lam))
        vals = np.empty((T, P))
        args = np.empty((T, P, points.shape[1]))
        fro = 0.0
        for a, t in enumerate(times):
            for b in range(P):
                vals[a, b], args[a, b] = solve_value(S_lam, datum, float(t),
                                                     points[b], search)
                xi = base_curves[(a, b)]
                try:
                    r = contact_bound(S_lam, L0, xi, base_u0[a, b], base_R[a, b],
                                      substeps=substeps)
                    bound_ok[i, a, b] = True
                except BoundViolation:
                    r = None
                if r is None:
                    bound_values[i, a, b] = np.nan
                    bound_max[i, a, b] = np.nan
                else:
                    bound_values[i, a, b] = r.bound
                    bound_max[i, a, b] = r.max_abs_u
                    if xi.t_final > 0:
                        fro = max(fro, r.correction_integral / xi.t_final)
        values.append(vals)
        argmins.append(args)
        gaps[i] = float(np.max(np.abs(vals - base_vals)))
        frozen_sup[i] = fro

    monotone = bool(np.all(np.diff(gaps) <= monotone_tol))
    if not monotone:
        warnings.warn("sup-gaps are not monotone along descending lambda "
                      "(convergence itself is still checked)", RuntimeWarning,
                      stacklevel=2)
    return ConvergenceReport(lambdas=lambdas, times=times, points=points,
                             baseline=baseline, values=values, argmins=argmins,
                             gaps=gaps, bound_values=bound_values,
                             bound_max_abs=bound_max, bound_passed=bound_ok,
                             frozen_gap_rate=frozen_sup, monotone=monotone)
