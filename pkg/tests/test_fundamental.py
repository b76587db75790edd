"""Fundamental solutions: direct minimization, characteristics, identities."""

import numpy as np
import pytest
from conftest import disc_A, disc_p0, rel

from contact_hj import (Curve, HamiltonianSystem, NoRootFound,
                        OptimizerParams, PreconditionError,
                        discounted_quadratic_hamiltonian,
                        discounted_quadratic_system, fundamental_direct,
                        fundamental_exponential, fundamental_shooting,
                        herglotz_residual, integrate_cost, lie_step_field,
                        quadratic_hamiltonian, quadratic_system,
                        quartic_system, shoot, speed_envelope_check,
                        trig_contact_system)
from contact_hj.cost_ode import integrate_cost_many
from contact_hj.fundamental import CharacteristicState


@pytest.fixture(scope="module")
def disc_direct_64():
    """Shared N=64 direct solve of the discounted reference problem."""
    S = discounted_quadratic_system(1.0)
    return S, fundamental_direct(S, 1.0, 0.0, 1.0, 2.0, segments=64,
                                 opt=OptimizerParams(substeps=2))


# ---------------------------------------------------------------------------
# direct minimization
# ---------------------------------------------------------------------------

def test_direct_quadratic_straight_line():
    S = quadratic_system()
    r = fundamental_direct(S, 1.0, 0.0, 1.0, 0.0, segments=16)
    assert abs(r.A - 0.5) <= 1e-9
    assert abs(r.h - 0.5) <= 1e-9
    straight = np.linspace(0, 1, 17)[:, None]
    assert np.max(np.abs(r.minimizer.nodes - straight)) <= 1e-6
    assert r.converged


def test_direct_discounted_matches_closed_form(disc_direct_64):
    _, r = disc_direct_64
    assert rel(r.A, disc_A(1.0, 1.0, 1.0, 2.0)) <= 1e-4
    assert r.converged


def test_direct_rest_point_when_endpoints_coincide():
    S = discounted_quadratic_system(1.0)
    r = fundamental_direct(S, 1.0, 0.0, 0.0, 1.0, segments=16)
    assert abs(r.A - np.exp(-1.0)) <= 1e-9
    assert np.max(np.abs(r.minimizer.nodes)) <= 1e-6


def test_direct_result_identity_and_history(disc_direct_64):
    _, r = disc_direct_64
    assert r.A - r.h == 2.0  # exact by construction
    assert r.iterations >= 1
    hist = r.objective_history
    assert hist[0] >= hist[-1]
    assert abs(hist[-1] - r.A) <= 1e-12
    assert np.array_equal(r.minimizer.nodes[[0, -1]], [[0.0], [1.0]])


def test_direct_minimizer_survives_random_perturbations(disc_direct_64):
    # local-minimality certificate: no perturbed curve beats the minimizer,
    # and no curve undercuts the continuum closed form.
    S, r = disc_direct_64
    rng = np.random.default_rng(17)
    base = r.minimizer.nodes[None]  # (1, 65, 1)
    ensembles = []
    for scale in (0.3, 0.03, 0.003):
        noise = rng.standard_normal((700, 65, 1)) * scale
        noise[:, 0] = 0.0
        noise[:, -1] = 0.0
        ensembles.append(base + noise)
    nodes = np.concatenate(ensembles, axis=0)
    finals = integrate_cost_many(S, 1.0, nodes, 2.0, 2)[:, -1]
    assert finals.min() >= r.A - 1e-9
    assert finals.min() >= disc_A(1.0, 1.0, 1.0, 2.0) - 1e-6


def test_direct_preconditions():
    S = quadratic_system()
    with pytest.raises(PreconditionError):
        fundamental_direct(S, 1e-7, 0.0, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        fundamental_direct(S, 1.0, 0.0, 1.0, 0.0, segments=1)
    with pytest.raises(PreconditionError):
        fundamental_direct(S, 1.0, 0.0, 1.0, np.inf)


def test_direct_quartic_constant_speed():
    # straight constant-speed travel is exactly optimal: A = d^4 / (4 t^3)
    S = quartic_system()
    r = fundamental_direct(S, 2.0, 0.0, 1.0, 0.0, segments=16)
    assert abs(r.A - 1.0 / 32.0) <= 1e-10
    assert r.converged


def test_direct_exhausted_iterations_raise():
    from contact_hj import NonConvergence
    S = discounted_quadratic_system(1.0)
    with pytest.raises(NonConvergence):
        fundamental_direct(S, 1.0, 0.0, 1.0, 0.0, segments=32,
                           opt=OptimizerParams(max_iter=1))


def test_direct_propagates_cost_overflow():
    from contact_hj import Overflow
    S = quartic_system()
    with pytest.raises(Overflow):
        fundamental_direct(S, 1.0, 0.0, 1e4, 0.0, segments=16)


# ---------------------------------------------------------------------------
# exponential-weight representation
# ---------------------------------------------------------------------------

def test_exponential_reduces_to_plain_action_when_value_free():
    S = quadratic_system()
    xi = Curve.straight(0.0, 1.0, 1.0, 8)
    val = fundamental_exponential(S, xi, 0.7)
    assert abs(val - (0.7 + 0.5)) <= 1e-12


def test_exponential_discounted_straight_line_closed_form():
    # weights e^{-lam (t-s)}: value (1 - e^{-1})/2 at u = 0
    S = discounted_quadratic_system(1.0)
    xi = Curve.straight(0.0, 1.0, 1.0, 16)
    val = fundamental_exponential(S, xi, 0.0, substeps_per_segment=8)
    assert abs(val - 0.31606027941427883) <= 1e-9


@pytest.mark.parametrize("make", [quadratic_system, quartic_system,
                                  trig_contact_system,
                                  lambda: discounted_quadratic_system(1.0)])
def test_exponential_equals_forward_integration_on_random_curves(make):
    S = make()
    rng = np.random.default_rng(23)
    for _ in range(5):
        nodes = np.cumsum(rng.uniform(-0.6, 0.6, (9, 1)), axis=0)
        xi = Curve(1.0, nodes)
        fwd = integrate_cost(S, xi, 0.7, substeps_per_segment=16).final
        expo = fundamental_exponential(S, xi, 0.7, substeps_per_segment=16)
        assert rel(expo, fwd) <= 1e-7


# ---------------------------------------------------------------------------
# characteristic system
# ---------------------------------------------------------------------------

def test_lie_field_rest_state():
    HS = discounted_quadratic_hamiltonian(1.0)
    dxi, dp, du = lie_step_field(HS, CharacteristicState(
        xi=np.array([0.0]), p=np.array([0.0]), u=1.0, s=0.0))
    assert np.allclose(dxi, 0.0) and np.allclose(dp, 0.0)
    assert abs(du - (-1.0)) <= 1e-14


def test_lie_field_free_motion():
    HS = quadratic_hamiltonian()
    dxi, dp, du = lie_step_field(HS, CharacteristicState(
        xi=np.array([0.0]), p=np.array([2.0]), u=0.0, s=0.0))
    assert abs(dxi[0] - 2.0) <= 1e-14
    assert abs(dp[0]) <= 1e-14
    assert abs(du - 2.0) <= 1e-14  # p^2 - p^2/2


def test_lie_field_discounted_plugin():
    HS = discounted_quadratic_hamiltonian(1.0)
    dxi, dp, du = lie_step_field(HS, CharacteristicState(
        xi=np.array([0.0]), p=np.array([1.0]), u=0.0, s=0.0))
    assert abs(dxi[0] - 1.0) <= 1e-14
    assert abs(dp[0] - (-1.0)) <= 1e-14
    assert abs(du - 0.5) <= 1e-14


def test_shoot_decoupled_decay():
    HS = discounted_quadratic_hamiltonian(1.0)
    end = shoot(HS, 1.0, 0.0, 1.0, 0.0, steps=128)
    assert np.allclose(end.xi, 0.0)
    assert np.allclose(end.p, 0.0)
    assert abs(end.u - np.exp(-1.0)) <= 1e-9


def test_shoot_straight_characteristic():
    HS = quadratic_hamiltonian()
    end = shoot(HS, 1.0, 0.0, 0.0, 1.0, steps=64)
    assert abs(end.xi[0] - 1.0) <= 1e-12
    assert abs(end.p[0] - 1.0) <= 1e-12
    assert abs(end.u - 0.5) <= 1e-12


def test_shoot_discounted_closed_form():
    # p(s) = e^{-s}, xi(s) = 1 - e^{-s}, u(s) = (e^{-s} - e^{-2s})/2
    HS = discounted_quadratic_hamiltonian(1.0)
    end = shoot(HS, 1.0, 0.0, 0.0, 1.0, steps=256)
    assert abs(end.xi[0] - 0.6321205588285577) <= 1e-9
    assert abs(end.p[0] - 0.36787944117144233) <= 1e-9
    assert abs(end.u - 0.11627207896741482) <= 1e-9


def test_shooting_quadratic():
    HS = quadratic_hamiltonian()
    r = fundamental_shooting(HS, 1.0, 0.0, 1.0, 0.0)
    assert abs(r.p0[0] - 1.0) <= 1e-8
    assert abs(r.A - 0.5) <= 1e-8
    assert r.converged


def test_shooting_discounted_frozen():
    HS = discounted_quadratic_hamiltonian(1.0)
    r = fundamental_shooting(HS, 1.0, 0.0, 1.0, 0.0)
    assert abs(r.p0[0] - disc_p0(1.0, 1.0, 1.0)) <= 1e-7
    assert abs(r.A - disc_A(1.0, 1.0, 1.0, 0.0)) <= 1e-7


def test_shooting_rest_characteristic():
    HS = discounted_quadratic_hamiltonian(0.7)
    r = fundamental_shooting(HS, 1.5, 0.3, 0.3, 0.0)
    assert abs(r.p0[0]) <= 1e-9
    assert abs(r.A) <= 1e-9


def test_shooting_agrees_with_direct():
    lam = 0.5
    S = discounted_quadratic_system(lam)
    HS = discounted_quadratic_hamiltonian(lam)
    for (t, d, u) in [(0.5, 1.0, 0.0), (1.0, 2.0, -1.0)]:
        direct = fundamental_direct(S, t, 0.0, d, u, segments=32,
                                    opt=OptimizerParams(substeps=2))
        shot = fundamental_shooting(HS, t, 0.0, d, u)
        assert rel(shot.A, direct.A) <= 1e-3


def test_shooting_unreachable_raises():
    # bounded characteristic speed |H_p| < 1 cannot bridge distance 3 in t=1
    def ham(x, u, p):
        return np.sqrt(1.0 + np.sum(np.asarray(p, float) ** 2, axis=-1))

    HS = HamiltonianSystem(dim=1, hamiltonian=ham, K=0.0)
    with pytest.raises(NoRootFound):
        fundamental_shooting(HS, 1.0, 0.0, 3.0, 0.0, max_newton=25)


def test_shooting_trajectory_consistent_with_cost_ode():
    # u along the winning characteristic solves the same cost ODE; the
    # piecewise-linear resampling of the curve costs O((t/segments)^2)
    # extra action (~2.4e-5 here), which bounds the agreement.
    lam = 1.0
    S = discounted_quadratic_system(lam)
    HS = discounted_quadratic_hamiltonian(lam)
    r = fundamental_shooting(HS, 1.0, 0.0, 1.0, 0.0, segments=32)
    re_int = integrate_cost(S, r.minimizer, 0.0, 8)
    assert rel(re_int.final, r.A) <= 1e-4
    assert re_int.final >= r.A - 1e-9  # resampling can only add cost


# ---------------------------------------------------------------------------
# stationarity residual
# ---------------------------------------------------------------------------

def test_residual_zero_for_free_motion():
    S = quadratic_system()
    xi = Curve.straight(0.0, 1.0, 1.0, 16)
    traj = integrate_cost(S, xi, 0.0)
    assert herglotz_residual(S, xi, traj) <= 1e-12


def test_residual_detects_non_minimizer():
    # straight line in the discounted system: |d/ds L_v - L_x - L_u L_v| = lam |v|
    S = discounted_quadratic_system(1.0)
    xi = Curve.straight(0.0, 1.0, 1.0, 16)
    traj = integrate_cost(S, xi, 0.0)
    res = herglotz_residual(S, xi, traj)
    assert 0.9 <= res <= 1.1


def test_residual_small_on_minimizer_and_improves(disc_direct_64):
    S, r64 = disc_direct_64
    res64 = herglotz_residual(S, r64.minimizer, r64.trajectory)
    assert res64 <= 1e-2
    r32 = fundamental_direct(S, 1.0, 0.0, 1.0, 2.0, segments=32,
                             opt=OptimizerParams(substeps=2))
    res32 = herglotz_residual(S, r32.minimizer, r32.trajectory)
    assert res64 <= res32 / 2.5


def test_residual_needs_four_segments():
    S = quadratic_system()
    xi = Curve.straight(0.0, 1.0, 1.0, 3)
    traj = integrate_cost(S, xi, 0.0)
    with pytest.raises(PreconditionError):
        herglotz_residual(S, xi, traj)


# ---------------------------------------------------------------------------
# dynamic programming
# ---------------------------------------------------------------------------

def test_dynamic_programming_split(disc_direct_64):
    S, r = disc_direct_64
    t = 1.0
    for frac in (0.25, 0.5, 0.75):
        s = frac * t
        node = r.minimizer.position(s)
        sub = fundamental_direct(S, s, 0.0, node, 2.0, segments=32,
                                 opt=OptimizerParams(substeps=2))
        assert rel(sub.A, float(r.trajectory.value_at(s))) <= 1e-3


def test_two_parameter_semigroup(disc_direct_64):
    S, r = disc_direct_64
    s1, s2 = 0.25, 0.5
    xi_s1 = r.minimizer.position(s1)
    xi_s12 = r.minimizer.position(s1 + s2)
    u_s1 = float(r.trajectory.value_at(s1))
    left = fundamental_direct(S, s1 + s2, 0.0, xi_s12, 2.0, segments=32,
                              opt=OptimizerParams(substeps=2))
    right = fundamental_direct(S, s2, xi_s1, xi_s12, u_s1, segments=32,
                               opt=OptimizerParams(substeps=2))
    assert rel(left.A, right.A) <= 1e-3


# ---------------------------------------------------------------------------
# two spatial dimensions
# ---------------------------------------------------------------------------

def test_direct_discounted_closed_form_2d():
    # isotropic system: only |y - x|^2 = 2 enters the closed form
    lam, t, u = 1.0, 1.0, 0.5
    S = discounted_quadratic_system(lam, dim=2)
    r = fundamental_direct(S, t, np.zeros(2), np.ones(2), u, segments=24,
                           opt=OptimizerParams(substeps=2))
    target = np.exp(-lam * t) * u + lam * 2.0 / (2.0 * np.expm1(lam * t))
    assert rel(r.A, target) <= 1e-3


def test_shooting_discounted_closed_form_2d():
    lam, t = 1.0, 1.0
    HS = discounted_quadratic_hamiltonian(lam, dim=2)
    r = fundamental_shooting(HS, t, np.zeros(2), np.ones(2), 0.0, steps=128,
                             segments=16)
    p_true = disc_p0(lam, t, 1.0)
    assert np.max(np.abs(r.p0 - p_true)) <= 1e-6
    assert rel(r.A, disc_A(lam, t, np.sqrt(2.0), 0.0)) <= 1e-6


def test_speed_envelope_hook():
    xi = Curve.straight(np.zeros(1), np.array([2.0]), 1.0, 8)
    vmax, bound, ok = speed_envelope_check(xi, 2.0, lambda t, r: r + 1.0)
    assert ok and vmax == 2.0 and bound == 3.0
    _, _, tight = speed_envelope_check(xi, 2.0, lambda t, r: 0.5 * r)
    assert not tight


# ---------------------------------------------------------------------------
# a-priori bounds
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("u", [-2.0, 0.0, 3.0])
def test_fundamental_bounds_discounted(u):
    lam, t = 1.0, 0.8
    S = discounted_quadratic_system(lam)
    r = fundamental_direct(S, t, 0.0, 1.2, u, segments=24,
                           opt=OptimizerParams(substeps=2))
    K, c0 = S.K, S.c0
    if u <= 0:
        assert r.A >= np.exp(K * t) * u - c0 * t * np.exp(K * t) - 1e-6
    if u >= 0:
        assert r.A >= np.exp(-K * t) * u - c0 * t * np.exp(K * t) - 1e-6
    # diagonal upper bound with C = theta0_bar(0)
    rd = fundamental_direct(S, t, 0.5, 0.5, u, segments=24,
                            opt=OptimizerParams(substeps=2))
    C = S.C_const
    if u <= 0:
        assert rd.A <= np.exp(-K * t) * u + C * t * np.exp(K * t) + 1e-6
    if u >= 0:
        assert rd.A <= np.exp(K * t) * u + C * t * np.exp(K * t) + 1e-6
