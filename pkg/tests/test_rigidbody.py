"""Tests for the free rigid body reduced to body coordinates.

Cross-checks: hand-worked momentum/Lagrangian values, an independent
high-accuracy scipy integration of the unreduced 12-dimensional ODE,
Richardson order measurement, and the conservation laws the continuous
system guarantees (energy, squared body momentum, spatial momentum).
"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from geomflow import liegroup as lg
from geomflow import rigidbody as rb


def _spec(diag=(1.0, 2.0, 3.0), mass=1.0):
    return rb.InertiaSpec(inertia=np.diag(diag), mass=mass)


def _state(w, v, R=None, r=(0.0, 0.0, 0.0), t=0.0):
    R = np.eye(3) if R is None else R
    return rb.RigidBodyState(
        pose=lg.GroupElementSE3(R, np.asarray(r, dtype=float)),
        velocity=lg.AlgebraElementSE3(np.asarray(w, dtype=float),
                                      np.asarray(v, dtype=float)),
        time=t,
    )


# ---------------------------------------------------------------------------
# inertia validation
# ---------------------------------------------------------------------------

def test_inertia_spec_accepts_spd():
    s = rb.InertiaSpec(np.array([[2.0, 0.1, 0.0], [0.1, 3.0, 0.2], [0.0, 0.2, 4.0]]), 1.5)
    w = np.array([1.0, -2.0, 0.5])
    assert np.abs(s.solve(s.apply(w)) - w).max() < 1e-12


def test_inertia_spec_rejects_asymmetric():
    M = np.diag([1.0, 2.0, 3.0])
    M[0, 1] = 1e-6
    with pytest.raises(ValueError):
        rb.InertiaSpec(M, 1.0)


def test_inertia_spec_rejects_indefinite():
    with pytest.raises(ValueError):
        rb.InertiaSpec(np.diag([1.0, -2.0, 3.0]), 1.0)


def test_inertia_spec_rejects_bad_mass():
    with pytest.raises(ValueError):
        rb.InertiaSpec(np.diag([1.0, 2.0, 3.0]), 0.0)
    with pytest.raises(ValueError):
        rb.InertiaSpec(np.diag([1.0, 2.0, 3.0]), -2.0)


# ---------------------------------------------------------------------------
# Lagrangian, momentum, equations of motion
# ---------------------------------------------------------------------------

def test_reduced_lagrangian_hand_value():
    xi = lg.AlgebraElementSE3(np.array([1.0, 1.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    # 0.5*(1+2+3) + 0.5*2*1 = 4
    assert rb.reduced_lagrangian(_spec(mass=2.0), xi) == pytest.approx(4.0, abs=1e-15)


def test_legendre_hand_value():
    xi = lg.AlgebraElementSE3(np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.0, -1.0]))
    mu = rb.legendre(_spec(mass=2.0), xi)
    assert np.allclose(mu.angmom, [1.0, 4.0, 9.0], atol=0.0)
    assert np.allclose(mu.linmom, [1.0, 0.0, -2.0], atol=0.0)


def test_legendre_pairing_doubles_lagrangian():
    rng = np.random.default_rng(5)
    s = rb.InertiaSpec(np.array([[2.0, 0.3, 0.0], [0.3, 3.0, 0.1], [0.0, 0.1, 5.0]]), 1.7)
    for _ in range(50):
        xi = lg.AlgebraElementSE3(rng.standard_normal(3), rng.standard_normal(3))
        lhs = lg.pairing(rb.legendre(s, xi), xi)
        assert abs(lhs - 2.0 * rb.reduced_lagrangian(s, xi)) < 1e-12


def test_ep_rhs_hand_value():
    xi = lg.AlgebraElementSE3(np.array([1.0, 1.0, 1.0]), np.zeros(3))
    out = rb.ep_rhs(_spec(), xi)
    assert np.abs(out.ang - np.array([-1.0, 1.0, -1.0 / 3.0])).max() < 1e-15
    assert np.array_equal(out.lin, np.zeros(3))


def test_ep_rhs_principal_axis_is_stationary():
    for axis in range(3):
        w = np.zeros(3)
        w[axis] = 2.0
        out = rb.ep_rhs(_spec(), lg.AlgebraElementSE3(w, np.zeros(3)))
        assert np.abs(out.ang).max() == 0.0


def test_ep_rhs_matches_coadjoint_route():
    """omega' must equal I^-1 of the angular slot of ad*_xi legendre(xi)."""
    rng = np.random.default_rng(11)
    s = rb.InertiaSpec(np.array([[2.0, 0.4, 0.1], [0.4, 3.0, 0.0], [0.1, 0.0, 4.0]]), 2.2)
    worst = 0.0
    for _ in range(100):
        xi = lg.AlgebraElementSE3(rng.standard_normal(3), rng.standard_normal(3))
        out = rb.ep_rhs(s, xi)
        mu = rb.legendre(s, xi)
        adm = lg.ad_star_se3(xi, mu)
        worst = max(worst, np.abs(out.ang - s.solve(adm.angmom)).max())
        worst = max(worst, np.abs(out.lin - adm.linmom / s.mass).max())
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def test_step_rejects_nonpositive_dt():
    st = _state([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(rb.InvalidStep):
        rb.step(_spec(), st, 0.0)
    with pytest.raises(rb.InvalidStep):
        rb.step(_spec(), st, -1e-3)


def test_step_principal_axis_spin():
    """Spin about a principal axis: omega frozen, R a pure z-rotation."""
    st = _state([0.0, 0.0, 1.0], [0.0, 0.0, 0.0])
    dt = 0.1
    out = rb.step(_spec(), st, dt)
    assert np.array_equal(out.velocity.ang, st.velocity.ang)
    c, s = math.cos(dt), math.sin(dt)
    want = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    assert np.abs(out.pose.rot - want).max() < 1e-13
    assert out.time == pytest.approx(dt)


def test_step_zero_linear_velocity_stays_zero():
    st = _state([0.4, -1.0, 0.7], [0.0, 0.0, 0.0])
    out = st
    for _ in range(50):
        out = rb.step(_spec(), out, 0.05)
    assert np.array_equal(out.velocity.lin, np.zeros(3))
    assert np.array_equal(out.pose.trans, np.zeros(3))


def test_step_group_invariants_preserved():
    st = _state([1.0, 0.6, -0.4], [0.3, -0.2, 0.5])
    s = _spec()
    for _ in range(200):
        st = rb.step(s, st, 1e-2)
        R = st.pose.rot
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-10
        assert abs(np.linalg.det(R) - 1.0) < 1e-10


def test_step_matches_independent_integrator():
    """Endpoint of T=1 against scipy RK45 on the unreduced 12-dim ODE."""
    s = _spec()
    Ib = np.diag([1.0, 2.0, 3.0])
    Iinv = np.diag([1.0, 0.5, 1.0 / 3.0])

    def odefun(_, y):
        R = y[:9].reshape(3, 3)
        w = y[9:12]
        v = y[12:15]
        dR = R @ np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
        dw = Iinv @ np.cross(Ib @ w, w)
        dv = np.cross(v, w)
        dr = R @ v
        return np.concatenate([dR.ravel(), dw, dv, dr])

    w0 = np.array([1.0, 0.6, -0.4])
    v0 = np.array([0.3, -0.2, 0.5])
    y0 = np.concatenate([np.eye(3).ravel(), w0, v0, np.zeros(3)])
    sol = solve_ivp(odefun, (0.0, 1.0), y0, rtol=1e-12, atol=1e-14, dense_output=False)
    yT = sol.y[:, -1]

    st = _state(w0, v0)
    for _ in range(1000):
        st = rb.step(s, st, 1e-3)
    assert np.abs(st.pose.rot.ravel() - yT[:9]).max() < 1e-8
    assert np.abs(st.velocity.ang - yT[9:12]).max() < 1e-8
    assert np.abs(st.velocity.lin - yT[12:15]).max() < 1e-8
    assert np.abs(st.pose.trans - yT[15:18]).max() < 1e-8


def test_step_fourth_order_convergence():
    s = _spec()
    w0 = np.array([1.0, 0.6, -0.4])
    v0 = np.array([0.3, -0.2, 0.5])

    def endpoint(dt):
        st = _state(w0, v0)
        n = round(1.0 / dt)
        for _ in range(n):
            st = rb.step(s, st, dt)
        return np.concatenate([st.pose.rot.ravel(), st.pose.trans,
                               st.velocity.ang, st.velocity.lin])

    x1 = endpoint(1e-2)
    x2 = endpoint(5e-3)
    x3 = endpoint(2.5e-3)
    d1 = np.linalg.norm(x1 - x2)
    d2 = np.linalg.norm(x2 - x3)
    order = math.log2(d1 / d2)
    assert 3.7 < order < 4.3


# ---------------------------------------------------------------------------
# trajectories and conservation
# ---------------------------------------------------------------------------

def test_simulate_zero_steps_returns_initial():
    st = _state([1.0, 0.0, 0.2], [0.5, 0.0, 0.0])
    traj = rb.simulate(_spec(), st, 1e-2, 0)
    assert len(traj) == 1
    got = traj.state(0)
    assert np.array_equal(got.pose.rot, st.pose.rot)
    assert np.array_equal(got.velocity.ang, st.velocity.ang)
    assert got.time == st.time


def test_simulate_single_step_equals_step():
    s = _spec()
    st = _state([1.0, 0.6, -0.4], [0.3, -0.2, 0.5])
    traj = rb.simulate(s, st, 1e-3, 1)
    direct = rb.step(s, st, 1e-3)
    got = traj.state(1)
    assert np.array_equal(got.pose.rot, direct.pose.rot)
    assert np.array_equal(got.pose.trans, direct.pose.trans)
    assert np.array_equal(got.velocity.ang, direct.velocity.ang)
    assert np.array_equal(got.velocity.lin, direct.velocity.lin)


def test_trajectory_uniform_spacing_enforced():
    times = np.array([0.0, 0.1, 0.25])
    with pytest.raises(ValueError):
        rb.RigidBodyTrajectory(
            times=times,
            rotations=np.repeat(np.eye(3)[None], 3, axis=0),
            translations=np.zeros((3, 3)),
            angular=np.zeros((3, 3)),
            linear=np.zeros((3, 3)),
        )


def test_conservation_short_horizon():
    s = _spec()
    st = _state([1.0, 0.01, 0.01], [1.0, 0.0, 0.0])
    traj = rb.simulate(s, st, 1e-3, 10_000)  # T = 10
    drifts = rb.trajectory_drifts(s, traj)
    assert drifts["energy"] < 1e-8
    assert drifts["casimir"] < 1e-8
    assert drifts["spatial_momentum"] < 1e-8


def test_spatial_linear_momentum_also_conserved():
    """R v is a Noether quantity of the same reduction; check it rides along."""
    s = _spec(mass=2.5)
    st = _state([1.0, 0.6, -0.4], [0.3, -0.2, 0.5])
    traj = rb.simulate(s, st, 1e-3, 2000)
    p0 = traj.rotations[0] @ traj.linear[0]
    pT = traj.rotations[-1] @ traj.linear[-1]
    assert np.abs(pT - p0).max() < 1e-10


def test_omega_series_independent_of_linear_velocity():
    s = _spec()
    st_a = _state([1.0, 0.01, 0.01], [1.0, 0.0, 0.0])
    st_b = _state([1.0, 0.01, 0.01], [-7.0, 3.0, 0.25])
    ta = rb.simulate(s, st_a, 1e-3, 2000)
    tb = rb.simulate(s, st_b, 1e-3, 2000)
    assert np.array_equal(ta.angular, tb.angular)


def test_diagnostics_on_relative_equilibrium():
    """Principal-axis spin: every diagnostic is constant to roundoff."""
    s = _spec()
    st = _state([0.0, 0.0, 2.0], [0.0, 0.0, 0.0])
    traj = rb.simulate(s, st, 1e-2, 500)
    e = rb.energy_series(s, traj)
    c = rb.casimir_series(s, traj)
    assert np.abs(e - e[0]).max() < 1e-13
    assert np.abs(c - c[0]).max() < 1e-13
    m = rb.spatial_momentum_series(s, traj)
    assert np.abs(m - m[0]).max() < 1e-13
