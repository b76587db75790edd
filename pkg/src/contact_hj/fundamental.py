"""Fundamental solutions of contact Hamilton-Jacobi equations.

Two independent routes compute the same object.  The variational route
minimizes the terminal running cost u_xi(t) over discretized curves
pinned at both endpoints (generalized variational principle of Herglotz
type); the characteristic route shoots the first-order system

    xi' = H_p,   p' = -H_x - H_u p,   u' = <p, xi'> - H

and solves the two-point boundary condition in the initial momentum.
`fundamental_exponential` evaluates the exponential-weight form of the
terminal cost, an identity that holds along every curve and ties the
integrator and the representation together; `herglotz_residual` measures
how well a curve satisfies the stationarity ODE

    d/ds L_v = L_x + L_u L_v.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ._util import as_point
from .cost_ode import CostTrajectory, Curve, integrate_cost, integrate_cost_many
from .errors import (OVERFLOW_LIMIT, NoRootFound, NonConvergence, Overflow,
                     PreconditionError)
from .systems import ContactSystem, HamiltonianSystem

#: below this horizon the fundamental solution is refused rather than
#: extrapolated (it blows up as t -> 0+ for distinct endpoints)
T_MIN = 1e-6


@dataclass
class OptimizerParams:
    """Knobs of the interior-node quasi-Newton minimization."""

    tol: float = 1e-9          # objective decrease defining convergence
    gtol: float = 1e-6         # gradient norm defining convergence
    max_iter: int = 500
    fd_step: float = 1e-6      # central-difference step on node coordinates
    substeps: int = 4          # cost-ODE substeps per curve segment


@dataclass
class FundamentalResult:
    """Outcome of a fundamental-solution computation.

    A is the terminal running cost of the best curve and h = A - u by
    definition, so A - h recovers the initial value exactly.
    """

    h: float
    A: float
    minimizer: Curve
    trajectory: CostTrajectory
    iterations: int
    objective_history: np.ndarray
    converged: bool
    p0: Optional[np.ndarray] = None  # shooting route only


@dataclass
class CharacteristicState:
    """State (xi, p, u) of the characteristic system at time s."""

    xi: np.ndarray
    p: np.ndarray
    u: float
    s: float


# ---------------------------------------------------------------------------
# direct minimization
# ---------------------------------------------------------------------------

def fundamental_direct(S: ContactSystem, t: float, x, y, u: float,
                       segments: int = 32,
                       opt: Optional[OptimizerParams] = None) -> FundamentalResult:
    """Minimize the terminal running cost over curves from x to y.

    The decision variables are the interior nodes of a piecewise-linear
    curve initialized as the straight segment; the objective value is the
    final sample of the cost ODE.  Gradients are central differences on
    the node coordinates, evaluated as one batched integration sweep.
    """
    opt = opt or OptimizerParams()
    if t <= T_MIN:
        raise PreconditionError(f"t must exceed {T_MIN:g}")
    if segments < 2:
        raise PreconditionError("need at least 2 segments")
    if not np.isfinite(u):
        raise PreconditionError("u must be finite")
    x = as_point(x, S.dim)
    y = as_point(y, S.dim)
    n = S.dim
    N = int(segments)
    D = (N - 1) * n

    base = Curve.straight(x, y, t, N)
    z0 = base.interior
    eye = np.eye(D) * opt.fd_step
    last_f = {"f": np.nan}

    def fun_and_grad(z):
        zs = np.vstack([z[None, :], z[None, :] + eye, z[None, :] - eye])
        nodes = np.empty((2 * D + 1, N + 1, n))
        nodes[:, 0, :] = x
        nodes[:, -1, :] = y
        nodes[:, 1:-1, :] = zs.reshape(-1, N - 1, n)
        finals = integrate_cost_many(S, t, nodes, u, opt.substeps)[:, -1]
        f = float(finals[0])
        g = (finals[1:D + 1] - finals[D + 1:]) / (2.0 * opt.fd_step)
        last_f["f"] = f
        return f, g

    f0, g0 = fun_and_grad(z0)
    history = [f0]
    # scipy's L-BFGS-B stops on EITHER criterion; the contract wants both,
    # so its own ftol is disabled and the per-component gradient tolerance
    # is tightened to imply the 2-norm criterion.
    pgtol = opt.gtol / np.sqrt(max(D, 1))
    res = minimize(fun_and_grad, z0, jac=True, method="L-BFGS-B",
                   callback=lambda xk: history.append(last_f["f"]),
                   options={"maxiter": opt.max_iter, "ftol": 1e-15,
                            "gtol": pgtol, "maxls": 100,
                            "maxcor": min(max(D, 1), 64)})
    curve = base.with_interior(res.x)
    traj = integrate_cost(S, curve, u, opt.substeps)
    A = traj.final
    if history[-1] != A:
        history.append(A)

    grad_norm = float(np.linalg.norm(np.atleast_1d(res.jac)))
    last_dec = history[-2] - history[-1] if len(history) >= 2 else 0.0
    converged = grad_norm < opt.gtol and last_dec < opt.tol
    if res.nit >= opt.max_iter and not converged:
        raise NonConvergence(
            f"curve minimization exhausted {opt.max_iter} iterations "
            f"(gradient norm {grad_norm:.3g})")
    return FundamentalResult(h=A - u, A=A, minimizer=curve, trajectory=traj,
                             iterations=int(res.nit),
                             objective_history=np.asarray(history),
                             converged=bool(converged))


# ---------------------------------------------------------------------------
# exponential-weight representation
# ---------------------------------------------------------------------------

def _exp_sweep(S: ContactSystem, t_final: float, nodes: np.ndarray,
               u0: np.ndarray, substeps: int):
    """RK4 the augmented system (u, I, J) along a batch of curves.

    I(s) integrates the value derivative of L along the trajectory and
    J(s) integrates exp(-I) (L - u dL/du); the exponential-weight value
    is exp(I(t)) (u0 + J(t)).
    """
    B, Np1, _ = nodes.shape
    N = Np1 - 1
    m = int(substeps)
    h = t_final / (N * m)
    vel = (nodes[:, 1:, :] - nodes[:, :-1, :]) * (N / t_final)
    u = np.array(u0, dtype=float).reshape(B).copy()
    I = np.zeros(B)
    J = np.zeros(B)

    def rhs(pos, vk, uu, ii):
        lval = np.asarray(S.L(pos, uu, vk), dtype=float)
        lu = np.asarray(S.Lu(pos, uu, vk), dtype=float)
        return lval, lu, np.exp(-ii) * (lval - uu * lu)

    for k in range(N):
        a = nodes[:, k, :]
        vk = vel[:, k, :]
        for j in range(m):
            x0 = a + (j * h) * vk
            xm = a + ((j + 0.5) * h) * vk
            x1 = a + ((j + 1) * h) * vk
            du1, dI1, dJ1 = rhs(x0, vk, u, I)
            du2, dI2, dJ2 = rhs(xm, vk, u + 0.5 * h * du1, I + 0.5 * h * dI1)
            du3, dI3, dJ3 = rhs(xm, vk, u + 0.5 * h * du2, I + 0.5 * h * dI2)
            du4, dI4, dJ4 = rhs(x1, vk, u + h * du3, I + h * dI3)
            u = u + (h / 6.0) * (du1 + 2 * du2 + 2 * du3 + du4)
            I = I + (h / 6.0) * (dI1 + 2 * dI2 + 2 * dI3 + dI4)
            J = J + (h / 6.0) * (dJ1 + 2 * dJ2 + 2 * dJ3 + dJ4)
        if np.max(np.abs(u)) > OVERFLOW_LIMIT:
            raise Overflow("cost blow-up inside exponential-weight evaluation")
    return u, I, J


def fundamental_exponential(S: ContactSystem, xi: Curve, u: float,
                            substeps_per_segment: int = 4) -> float:
    """Exponential-weight value of the terminal cost along a given curve.

    Equals the forward-integrated terminal cost for *every* curve (not
    just minimizers); the pair of routes is used as a consistency check.
    """
    if not np.isfinite(u):
        raise PreconditionError("u must be finite")
    _, I, J = _exp_sweep(S, xi.t_final, xi.nodes[None], np.array([u]),
                         substeps_per_segment)
    return float(np.exp(I[0]) * (u + J[0]))


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------

def _lie_rhs(HS: HamiltonianSystem, xi, p, u):
    Hp = np.asarray(HS.Hp(xi, u, p), dtype=float)
    Hx = np.asarray(HS.Hx(xi, u, p), dtype=float)
    Hu = np.asarray(HS.Hu(xi, u, p), dtype=float)
    Hval = np.asarray(HS.H(xi, u, p), dtype=float)
    dxi = Hp
    dp = -Hx - Hu[..., None] * p
    du = np.sum(p * Hp, axis=-1) - Hval
    return dxi, dp, du


def lie_step_field(HS: HamiltonianSystem, state: CharacteristicState):
    """Right-hand side (xi', p', u') of the characteristic system."""
    xi = as_point(state.xi, HS.dim)
    p = as_point(state.p, HS.dim)
    dxi, dp, du = _lie_rhs(HS, xi, p, float(state.u))
    return dxi, dp, float(du)


def _lie_batch(HS: HamiltonianSystem, t: float, x0: np.ndarray, u0: float,
               p0: np.ndarray, steps: int, record: bool = False):
    """RK4 the characteristic system for a batch of initial momenta."""
    B, n = p0.shape
    xi = np.broadcast_to(x0, (B, n)).astype(float).copy()
    p = np.array(p0, dtype=float)
    u = np.full(B, float(u0))
    h = t / steps
    if record:
        path_xi = np.empty((steps + 1, B, n))
        path_p = np.empty((steps + 1, B, n))
        path_u = np.empty((steps + 1, B))
        path_xi[0], path_p[0], path_u[0] = xi, p, u
    for i in range(steps):
        k1x, k1p, k1u = _lie_rhs(HS, xi, p, u)
        k2x, k2p, k2u = _lie_rhs(HS, xi + 0.5 * h * k1x, p + 0.5 * h * k1p, u + 0.5 * h * k1u)
        k3x, k3p, k3u = _lie_rhs(HS, xi + 0.5 * h * k2x, p + 0.5 * h * k2p, u + 0.5 * h * k2u)
        k4x, k4p, k4u = _lie_rhs(HS, xi + h * k3x, p + h * k3p, u + h * k3u)
        xi = xi + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > OVERFLOW_LIMIT:
            raise Overflow("characteristic integration blew up")
        if record:
            path_xi[i + 1], path_p[i + 1], path_u[i + 1] = xi, p, u
    if record:
        return path_xi, path_p, path_u
    return xi, p, u


def shoot(HS: HamiltonianSystem, t: float, x, u0: float, p0, steps: int = 256) -> CharacteristicState:
    """Integrate one characteristic from (x, p0, u0) to time t."""
    if not t > 0:
        raise PreconditionError("t must be positive")
    x = as_point(x, HS.dim)
    p0 = as_point(p0, HS.dim)
    xi, p, u = _lie_batch(HS, t, x, u0, p0[None, :], int(steps))
    return CharacteristicState(xi=xi[0], p=p[0], u=float(u[0]), s=float(t))


def fundamental_shooting(HS: HamiltonianSystem, t: float, x, y, u: float,
                         steps: int = 256, segments: int = 64,
                         p_max: Optional[float] = None,
                         newton_tol: float = 1e-9, max_newton: int = 40,
                         grid_per_axis: int = 9) -> FundamentalResult:
    """Solve the two-point boundary problem xi(t; p0) = y in the momentum.

    Multi-start damped Newton on the shooting map (Jacobian by central
    finite differences), all starts advanced as one batch.  Among the
    converged roots the one with minimal terminal cost wins; ties within
    1e-12 break toward the smallest initial momentum.
    """
    if t <= T_MIN:
        raise PreconditionError(f"t must exceed {T_MIN:g}")
    x = as_point(x, HS.dim)
    y = as_point(y, HS.dim)
    n = HS.dim
    d = float(np.linalg.norm(y - x))
    if p_max is None:
        p_max = 2.0 * d / t + 5.0
    axes = [np.linspace(-p_max, p_max, grid_per_axis)] * n
    p_cur = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    B = p_cur.shape[0]
    tol_abs = newton_tol * max(1.0, d)

    def final_state(P):
        xi, _, uu = _lie_batch(HS, t, x, u, P, int(steps))
        return xi, uu

    xiT, uT = final_state(p_cur)
    miss = np.linalg.norm(xiT - y, axis=-1)
    alive = np.ones(B, dtype=bool)
    iters = 0

    for _ in range(max_newton):
        work = alive & (miss > tol_abs)
        if not work.any():
            break
        iters += 1
        idx = np.where(work)[0]
        P = p_cur[idx]
        W = len(idx)
        eps = 1e-6 * (1.0 + np.abs(P).max(axis=1))
        jac = np.empty((W, n, n))
        for jc in range(n):
            Pp = P.copy()
            Pp[:, jc] += eps
            Pm = P.copy()
            Pm[:, jc] -= eps
            xp, _ = final_state(Pp)
            xm, _ = final_state(Pm)
            jac[:, :, jc] = (xp - xm) / (2.0 * eps[:, None])
        resid = xiT[idx] - y
        dets = np.linalg.det(jac)
        good = np.isfinite(dets) & (np.abs(dets) > 1e-14)
        dp = np.zeros_like(P)
        if good.any():
            dp[good] = np.linalg.solve(jac[good], resid[good][..., None])[..., 0]
        alive[idx[~good]] = False

        alpha = np.ones(W)
        improved = np.zeros(W, dtype=bool)
        remaining = good.copy()
        newP, new_miss = P.copy(), miss[idx].copy()
        new_xi, new_u = xiT[idx].copy(), uT[idx].copy()
        for _bt in range(30):
            if not remaining.any():
                break
            rows = np.where(remaining)[0]
            cand = P[rows] - alpha[rows, None] * dp[rows]
            cxi, cu = final_state(cand)
            cmiss = np.linalg.norm(cxi - y, axis=-1)
            ok = cmiss < (1.0 - 1e-4 * alpha[rows]) * miss[idx][rows]
            hit = rows[ok]
            newP[hit] = cand[ok]
            new_miss[hit] = cmiss[ok]
            new_xi[hit] = cxi[ok]
            new_u[hit] = cu[ok]
            improved[hit] = True
            remaining[hit] = False
            alpha[np.where(remaining)[0]] *= 0.5
        alive[idx[good & ~improved]] = False
        p_cur[idx] = newP
        miss[idx] = new_miss
        xiT[idx] = new_xi
        uT[idx] = new_u

    root_mask = miss <= tol_abs
    if not root_mask.any():
        raise NoRootFound(
            "no shooting start reached the target endpoint; t may lie beyond "
            "the focal time or the momentum grid is too coarse")
    roots_p = p_cur[root_mask]
    roots_u = uT[root_mask]

    order = np.lexsort((np.linalg.norm(roots_p, axis=1), roots_u))
    kept = []
    for i in order:
        if all(np.linalg.norm(roots_p[i] - roots_p[j]) >
               1e-7 * (1.0 + np.linalg.norm(roots_p[j])) for j in kept):
            kept.append(i)
    u_min = min(roots_u[i] for i in kept)
    winners = [i for i in kept if roots_u[i] <= u_min + 1e-12]
    best = min(winners, key=lambda i: float(np.linalg.norm(roots_p[i])))
    p0_win = roots_p[best]

    stride = max(1, int(np.ceil(steps / segments)))
    steps_eff = segments * stride
    path_xi, _, path_u = _lie_batch(HS, t, x, u, p0_win[None, :], steps_eff, record=True)
    nodes = path_xi[::stride, 0, :]
    curve = Curve(t_final=t, nodes=nodes)
    traj = CostTrajectory(times=np.linspace(0.0, t, steps_eff + 1),
                          samples=path_u[:, 0].copy(), u0=float(u))
    A = float(path_u[-1, 0])
    return FundamentalResult(h=A - u, A=A, minimizer=curve, trajectory=traj,
                             iterations=iters, objective_history=np.array([A]),
                             converged=True, p0=p0_win)


def speed_envelope_check(xi: Curve, R: float, F) -> tuple:
    """Diagnostic against a user-supplied speed envelope F(t, R/t).

    Minimizers between endpoints at most R apart admit an essential speed
    bound of this shape, but no closed form for F is available in
    general; the check is therefore only exposed for caller-supplied
    envelopes.  Returns (max_speed, bound, within).
    """
    vmax = float(np.max(np.linalg.norm(xi.velocities, axis=-1)))
    bound = float(F(xi.t_final, R / xi.t_final))
    return vmax, bound, vmax <= bound * (1.0 + 1e-9)


# ---------------------------------------------------------------------------
# stationarity residual
# ---------------------------------------------------------------------------

def herglotz_residual(S: ContactSystem, xi: Curve, traj: CostTrajectory) -> float:
    """Max residual of d/ds L_v = L_x + L_u L_v at interior segment midpoints.

    L_v is sampled at segment midpoints (where the piecewise-constant
    velocity is unambiguous) and differentiated in s by central
    differences, a second-order probe of curve stationarity.
    """
    N = xi.segments
    if N < 4:
        raise PreconditionError("need at least 4 segments for the residual stencil")
    dt = xi.t_final / N
    mid_t = (np.arange(N) + 0.5) * dt
    mid_x = 0.5 * (xi.nodes[:-1] + xi.nodes[1:])
    vel = xi.velocities
    mid_u = np.asarray(traj.value_at(mid_t), dtype=float)

    q = np.asarray(S.Lv(mid_x, mid_u, vel), dtype=float)
    lx = np.asarray(S.Lx(mid_x, mid_u, vel), dtype=float)
    lu = np.asarray(S.Lu(mid_x, mid_u, vel), dtype=float)

    dq = (q[2:] - q[:-2]) / (2.0 * dt)
    rhs = lx[1:-1] + lu[1:-1, None] * q[1:-1]
    return float(np.max(np.abs(dq - rhs)))
