"""End-to-end acceptance gate.

Each test covers one headline guarantee at its stated tolerance and
prints a single verdict line (visible under ``pytest -s`` or on
failure).  Runtime bounds are asserted where a guarantee includes one.
"""

import math
import time

import numpy as np

from geomflow import fieldcalc as fc
from geomflow import fluid2d as fl
from geomflow import geodesic as gd
from geomflow import liegroup as lg
from geomflow import rigidbody as rb

TWO_PI = 2.0 * math.pi


def _verdict(label, detail, ok):
    print(f"[acceptance] {label}: {detail} -> {'PASS' if ok else 'FAIL'}",
          flush=True)
    assert ok, f"{label}: {detail}"


# ---------------------------------------------------------------------------
# dual pairing on se(3)
# ---------------------------------------------------------------------------

def test_pairing_identity_bulk():
    """<ad*_xi mu, zeta> == <mu, [xi, zeta]> on 1000 random triples."""
    rng = np.random.default_rng(2718)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        xi = lg.AlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        zeta = lg.AlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        mu = lg.CoAlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        lhs = lg.pairing(lg.ad_star_se3(xi, mu), zeta)
        rhs = lg.pairing(mu, lg.bracket_se3(xi, zeta))
        worst = max(worst, abs(lhs - rhs))
    wall = time.perf_counter() - start
    _verdict("pairing identity, 1000 triples",
             f"max residual {worst:.3e} (tol 1e-12), {wall:.2f}s (limit 1s)",
             worst < 1e-12 and wall < 1.0)


# ---------------------------------------------------------------------------
# free rigid body over a long horizon
# ---------------------------------------------------------------------------

def test_rigid_body_long_horizon_conservation():
    """Energy, |I w|^2, and R I w drift below 1e-8 over T=100, and the
    angular series does not feel the translational initial data."""
    spec = rb.InertiaSpec(np.diag([1.0, 2.0, 3.0]), 1.0)
    pose0 = lg.GroupElementSE3(np.eye(3), np.zeros(3))

    start = time.perf_counter()
    traj = rb.simulate(spec, rb.RigidBodyState(
        pose=pose0,
        velocity=lg.AlgebraElementSE3((1.0, 0.01, 0.01), (1.0, 0.0, 0.0)),
        time=0.0), 1e-3, 100000)
    wall = time.perf_counter() - start
    drifts = rb.trajectory_drifts(spec, traj)

    twin = rb.simulate(spec, rb.RigidBodyState(
        pose=pose0,
        velocity=lg.AlgebraElementSE3((1.0, 0.01, 0.01), (0.0, 0.0, 0.0)),
        time=0.0), 1e-3, 100000)
    split = float(np.abs(traj.angular - twin.angular).max())

    detail = (f"energy {drifts['energy']:.3e}, casimir {drifts['casimir']:.3e}, "
              f"momentum {drifts['spatial_momentum']:.3e} (tol 1e-8); "
              f"angular split vs v0 {split:.1e} (tol 1e-15); "
              f"{wall:.1f}s (limit 10s)")
    ok = (all(v < 1e-8 for v in drifts.values()) and split <= 1e-15
          and wall < 10.0)
    _verdict("rigid body conservation, T=100", detail, ok)


# ---------------------------------------------------------------------------
# divergence-free/gradient splitting in bulk
# ---------------------------------------------------------------------------

def test_splitting_residuals_bulk():
    """1000 seeded noise fields at n=64: reconstruction, projected
    divergence, and L2 orthogonality residuals."""
    grid = fc.Grid(64)
    rng = np.random.default_rng(31)
    start = time.perf_counter()
    recon = div = ortho = 0.0
    for _ in range(1000):
        field = fc.VectorField2.of(grid, rng.standard_normal((64, 64)),
                                   rng.standard_normal((64, 64)))
        v, g = fc.helmholtz_decompose(field)
        recon = max(recon,
                    np.abs(v.u.values + g.u.values - field.u.values).max(),
                    np.abs(v.w.values + g.w.values - field.w.values).max())
        div = max(div, np.abs(fc.divergence(v).values).max())
        ortho = max(ortho, abs(fc.inner_l2(v, g)))
    wall = time.perf_counter() - start
    detail = (f"reconstruction {recon:.3e} (tol 1e-13), divergence {div:.3e} "
              f"(tol 1e-11), orthogonality {ortho:.3e} (tol 1e-11); "
              f"{wall:.1f}s (limit 30s)")
    ok = (recon < 1e-13 and div < 1e-11 and ortho < 1e-11 and wall < 30.0)
    _verdict("splitting residuals, 1000 fields", detail, ok)


# ---------------------------------------------------------------------------
# directional derivative metric identity in bulk
# ---------------------------------------------------------------------------

def _band_limited_vector(rng, grid, kmax):
    n = grid.n
    kx = np.fft.fftfreq(n, 1.0 / n)[:, None]
    ky = np.arange(n // 2 + 1)[None, :]
    keep = (np.abs(kx) <= kmax) & (ky <= kmax)
    comps = []
    for _ in range(2):
        spec = fc._fwd(rng.standard_normal((n, n)))
        vals = fc._inv(np.where(keep, spec, 0.0), n)
        comps.append(vals / np.abs(vals).max())
    return fc.VectorField2.of(grid, *comps)


def test_directional_derivative_identity_bulk():
    """<(v.grad)u, u> == <v, grad|u|^2>/2 integrated, on 100 band-limited
    field pairs."""
    grid = fc.Grid(64)
    rng = np.random.default_rng(47)
    worst = 0.0
    for _ in range(100):
        v = _band_limited_vector(rng, grid, 5)
        u = _band_limited_vector(rng, grid, 5)
        lhs = fc.inner_l2(fc.covariant_derivative(v, u), u)
        speed2 = fc.ScalarField(grid, u.u.values ** 2 + u.w.values ** 2)
        rhs = 0.5 * fc.inner_l2(v, fc.gradient(speed2))
        worst = max(worst, abs(lhs - rhs))
    _verdict("directional derivative identity, 100 fields",
             f"max residual {worst:.3e} (tol 1e-10)", worst < 1e-10)


# ---------------------------------------------------------------------------
# ideal flow conservation over a long horizon
# ---------------------------------------------------------------------------

def test_euler_conservation_long_horizon():
    """Random band-limited flow at n=128 over T=10: energy and enstrophy
    drift below 1e-6; the steady cell at n=64 stays put in sup norm."""
    start = time.perf_counter()
    grid = fc.Grid(128)
    omega0 = fl.random_vorticity(grid, seed=0, max_mode=4)
    run = fl.simulate(omega0, dt=1e-3, n_steps=10000, store_every=10000)
    energy = np.array([d.energy for d in run.diagnostics])
    enstrophy = np.array([d.enstrophy for d in run.diagnostics])
    e_drift = float(np.abs(energy - energy[0]).max() / energy[0])
    z_drift = float(np.abs(enstrophy - enstrophy[0]).max() / enstrophy[0])

    g64 = fc.Grid(64)
    X, Y = g64.mesh()
    cell = fc.ScalarField(g64, 2.0 * np.sin(X) * np.sin(Y))
    steady = fl.simulate(cell, dt=1e-3, n_steps=10000, store_every=1000)
    sup = max(float(np.abs(s.omega.values - cell.values).max())
              for s in steady.states)
    wall = time.perf_counter() - start

    detail = (f"energy {e_drift:.3e}, enstrophy {z_drift:.3e}, steady-cell "
              f"sup {sup:.3e} (tol 1e-6); {wall:.0f}s (limit 300s)")
    ok = (e_drift < 1e-6 and z_drift < 1e-6 and sup < 1e-6 and wall < 300.0)
    _verdict("ideal flow conservation, T=10", detail, ok)


# ---------------------------------------------------------------------------
# mixed partials of a two-parameter rotation family
# ---------------------------------------------------------------------------

def test_rotation_mixed_partial_halving_ratio():
    """Halving the stencil width divides the commutator residual by ~4."""
    pairs = [((0.4, -0.2, 0.7), (0.3, 0.5, -0.1)),
             ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
             ((-0.6, 0.25, 0.1), (0.2, -0.8, 0.45))]
    ratios = []
    for a, b in pairs:
        coarse = gd.variation_check_so3(a, b, 1e-3)
        fine = gd.variation_check_so3(a, b, 5e-4)
        ratios.append(coarse / fine)
    detail = "ratios " + ", ".join(f"{r:.3f}" for r in ratios) + \
             " (window [3.5, 4.5])"
    _verdict("rotation mixed partials, order 2", detail,
             all(3.5 <= r <= 4.5 for r in ratios))


# ---------------------------------------------------------------------------
# action slope of solved flows against a non-solution control
# ---------------------------------------------------------------------------

# Perturbation strengths used for the slope fits.  The fit must read the
# quadratic response of a solution path above the floor where spatial
# truncation makes the discrete path miss exact criticality: below
# strengths of a few 1e-3 the measured action change picks up a tiny
# linear remnant (it survives dt-halving unchanged, so it is a grid
# artifact, not a time-stepping one), which biases fitted slopes upward.
# This window keeps all strengths above that floor while staying well
# inside the quadratic regime.
SLOPE_LADDER = (0.2, 0.1, 0.05, 0.025)

# Base flows are rescaled to peak speed 3: the linear action response of
# a *non*-solution path grows with the cube of the base speed relative
# to the perturbation's own kinetic energy, so a faster base is what
# makes the frozen-velocity control visibly first order.
BASE_SPEED = 3.0


def _scaled_base(grid, seed):
    omega = fl.random_vorticity(grid, seed=seed, max_mode=2)
    return fc.ScalarField(grid, BASE_SPEED * omega.values)


def test_action_slope_solutions_vs_frozen_control():
    """Solved flows respond quadratically (slope ~2) to divergence-free
    perturbations; a frozen-velocity non-solution responds linearly."""
    grid = fc.Grid(64)
    start = time.perf_counter()
    slopes = []
    for seed in range(6):
        spec = gd.PerturbationSpec(stream_seed=100 + seed, max_mode=2,
                                   epsilons=SLOPE_LADDER)
        report = gd.first_variation(_scaled_base(grid, seed), spec, dt=5e-3)
        slopes.append(report.fitted_slope)
    controls = []
    for seed in (0, 1):
        spec = gd.PerturbationSpec(stream_seed=100 + seed, max_mode=2,
                                   epsilons=SLOPE_LADDER)
        path = gd.frozen_velocity_path(_scaled_base(grid, seed), dt=5e-3)
        controls.append(gd.first_variation_of_path(path, spec).fitted_slope)
    wall = time.perf_counter() - start

    detail = ("solution slopes " + ", ".join(f"{s:.3f}" for s in slopes)
              + " (window [1.8, 2.2]); control slopes "
              + ", ".join(f"{c:.3f}" for c in controls)
              + f" (window [0.8, 1.2]); {wall:.0f}s (limit 600s)")
    ok = (all(1.8 <= s <= 2.2 for s in slopes)
          and all(0.8 <= c <= 1.2 for c in controls)
          and wall < 600.0)
    _verdict("action slope, 6 solved flows vs 2 controls", detail, ok)


# ---------------------------------------------------------------------------
# volume preservation along particle paths
# ---------------------------------------------------------------------------

def test_advected_quad_area_preservation():
    """Shoelace area of a small advected quadrilateral drifts below 1e-5
    relative over T=5 in the steady cell flow."""
    n = 1024
    grid = fc.Grid(n)
    X, Y = grid.mesh()
    u = np.sin(X) * np.cos(Y)
    w = -np.cos(X) * np.sin(Y)
    slices = fl.VelocitySlices(grid, np.array([0.0, 5.0]),
                               np.stack([u, u]), np.stack([w, w]))
    c = np.array([math.pi / 2, math.pi / 2])
    d = 5e-3
    corners = c + d * np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], float)
    fm = fl.FlowMap(corners, corners, 0.0)
    area0 = fl.quad_area(fm)
    worst = 0.0
    for _ in range(500):
        fm = fl.advect_flowmap(fm, slices, 1e-2)
        worst = max(worst, abs(fl.quad_area(fm) / area0 - 1.0))
    _verdict("advected quad area, T=5",
             f"max relative drift {worst:.3e} (tol 1e-5)", worst < 1e-5)
