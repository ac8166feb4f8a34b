"""Incompressible Euler flow on the flat 2-torus.

The solver evolves scalar vorticity with a pseudospectral right-hand side
(2/3-rule dealiasing, no viscosity) and classical RK4 in time.  Velocity is
reconstructed through the streamfunction, which makes the divergence
constraint exact by construction; pressure is recovered on demand from the
momentum balance.  A Lagrangian flow map advects labeled particles through
stored velocity slices (bicubic in space, linear in time), so volume
preservation and particle/field consistency can be checked directly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fieldcalc as fc
from .fieldcalc import Grid, ScalarField, VectorField2

TWO_PI = 2.0 * math.pi

#: particle CSV column layout
PARTICLE_HEADER = "id,label_x,label_y,x,y,t"

#: admissible residual divergence for pressure recovery
DIV_FREE_TOL = 1e-8


class CflViolation(ValueError):
    """Time step is not positive or exceeds the advective CFL bound."""


class NotDivergenceFree(ValueError):
    """Velocity handed to the pressure solver carries divergence."""


class TimeRangeError(ValueError):
    """Requested time lies outside the span of the stored velocity slices."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VorticityState:
    """Scalar vorticity field at a moment in time."""

    omega: ScalarField
    time: float

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise ValueError(f"time must be finite, got {self.time}")


@dataclass(frozen=True)
class FlowMap:
    """Labeled particles: where material points started and where they are.

    Positions are wrapped into [0, 2*pi)^2 on construction; labels keep the
    initial coordinates untouched.
    """

    positions: np.ndarray
    labels: np.ndarray
    time: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        lab = np.asarray(self.labels, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError(f"positions must be (P, 2) with P >= 1, got {pos.shape}")
        if lab.shape != pos.shape:
            raise ValueError(
                f"labels shape {lab.shape} does not match positions {pos.shape}")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(lab)):
            raise ValueError("particle coordinates must be finite")
        if not math.isfinite(self.time):
            raise ValueError(f"time must be finite, got {self.time}")
        object.__setattr__(self, "positions", pos % TWO_PI)
        object.__setattr__(self, "labels", lab.copy())


@dataclass(frozen=True)
class FluidDiagnostics:
    """Per-step conserved/monitored quantities of the Eulerian state."""

    energy: float
    enstrophy: float
    mean_vorticity: float
    max_divergence: float

    def __post_init__(self):
        if self.energy < 0.0 or self.enstrophy < 0.0:
            raise ValueError("energy and enstrophy are nonnegative by definition")


@dataclass(frozen=True)
class VelocitySlices:
    """Velocity snapshots on a common grid, indexed by strictly growing times.

    Acts as the time-dependent velocity source for particle advection:
    sampling blends the two bracketing slices linearly in time and each
    slice bicubically in space.
    """

    grid: Grid
    times: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.u, dtype=float)
        w = np.asarray(self.w, dtype=float)
        n = self.grid.n
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two time slices")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("slice times must be strictly increasing")
        if u.shape != (t.size, n, n) or w.shape != (t.size, n, n):
            raise ValueError(
                f"velocity stacks must have shape {(t.size, n, n)}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)

    def span(self):
        return float(self.times[0]), float(self.times[-1])

    def sample(self, pts, t):
        """Velocity at points pts (…, 2) and time t; raises TimeRangeError."""
        t0, t1 = self.span()
        tol = 1e-9 * max(1.0, t1 - t0)
        if t < t0 - tol or t > t1 + tol:
            raise TimeRangeError(
                f"t={t} outside stored velocity span [{t0}, {t1}]")
        tc = min(max(t, t0), t1)
        i = int(np.searchsorted(self.times, tc, side="right")) - 1
        i = min(max(i, 0), self.times.size - 2)
        tau = (tc - self.times[i]) / (self.times[i + 1] - self.times[i])
        n = self.grid.n
        px, py = np.asarray(pts)[..., 0], np.asarray(pts)[..., 1]
        ua = _bicubic(self.u[i], px, py, n)
        wa = _bicubic(self.w[i], px, py, n)
        if tau == 0.0:
            return np.stack([ua, wa], axis=-1)
        ub = _bicubic(self.u[i + 1], px, py, n)
        wb = _bicubic(self.w[i + 1], px, py, n)
        return np.stack([(1.0 - tau) * ua + tau * ub,
                         (1.0 - tau) * wa + tau * wb], axis=-1)


@dataclass(frozen=True)
class FluidRun:
    """Output bundle of simulate(): decimated states, aligned flow maps,
    and one diagnostics entry per time step (including the initial one)."""

    states: list
    flowmaps: list
    diagnostics: list


# ---------------------------------------------------------------------------
# spectral core
# ---------------------------------------------------------------------------

def _transport_hat(oh, n, s):
    """Dealiased -(v . grad omega) in spectral form, plus the stage velocity."""
    psi = oh * s.inv_k2d
    u = fc._inv(1j * s.dky * psi, n)
    w = fc._inv(-1j * s.dkx * psi, n)
    ox = fc._inv(1j * s.dkx * oh, n)
    oy = fc._inv(1j * s.dky * oh, n)
    return -(fc._fwd(u * ox + w * oy) * s.dealias), u, w


def _velocity(oh, n, s):
    """Physical velocity of a vorticity spectrum and its residual divergence."""
    psi = oh * s.inv_k2d
    u_hat = 1j * s.dky * psi
    w_hat = -1j * s.dkx * psi
    div_hat = 1j * (s.dkx * u_hat + s.dky * w_hat)
    u = fc._inv(u_hat, n)
    w = fc._inv(w_hat, n)
    maxdiv = float(np.abs(fc._inv(div_hat, n)).max())
    return u, w, maxdiv


def _check_cfl(dt, u, w, h):
    if dt <= 0.0:
        raise CflViolation(f"dt must be positive, got {dt}")
    speed = float(np.sqrt(u * u + w * w).max())
    if speed > 0.0 and dt > 0.5 * h / speed:
        raise CflViolation(
            f"dt={dt} exceeds the CFL bound 0.5*h/max|v|={0.5 * h / speed}")


def _rk4_hat(oh, dt, n, s, h=None):
    """One RK4 update of the vorticity spectrum.

    When h is given, the CFL precondition is enforced against the stage-1
    velocity before any further work.
    """
    k1, u, w = _transport_hat(oh, n, s)
    if h is not None:
        _check_cfl(dt, u, w, h)
    k2, _, _ = _transport_hat(oh + (0.5 * dt) * k1, n, s)
    k3, _, _ = _transport_hat(oh + (0.5 * dt) * k2, n, s)
    k4, _, _ = _transport_hat(oh + dt * k3, n, s)
    return oh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Eulerian operations
# ---------------------------------------------------------------------------

def velocity_from_vorticity(state: VorticityState) -> VectorField2:
    """Reconstruct v = (d_y psi, -d_x psi) with lap(psi) = -omega.

    The streamfunction is inverted with the derivative-consistent
    wavenumbers, so the divergence of the result vanishes mode by mode and
    the curl reproduces omega minus its mean for band-limited fields.
    Modes the derivative cannot see carry no velocity.
    """
    grid = state.omega.grid
    n = grid.n
    s = fc._spectral(n)
    oh = fc._fwd(state.omega.values)
    u, w, _ = _velocity(oh, n, s)
    return VectorField2.of(grid, u, w)


def vorticity_rhs(state: VorticityState) -> ScalarField:
    """Transport right-hand side -(v . grad omega), dealiased.

    The input spectrum is projected onto the 2/3-truncated space first;
    the solver operates entirely inside that space.
    """
    grid = state.omega.grid
    n = grid.n
    s = fc._spectral(n)
    oh = fc._fwd(state.omega.values) * s.dealias
    rhs_hat, _, _ = _transport_hat(oh, n, s)
    return ScalarField(grid, fc._inv(rhs_hat, n))


def step(state: VorticityState, dt: float) -> VorticityState:
    """Advance one RK4 step; raises CflViolation if dt > 0.5*h/max|v|."""
    grid = state.omega.grid
    n = grid.n
    s = fc._spectral(n)
    oh = fc._fwd(state.omega.values) * s.dealias
    oh = _rk4_hat(oh, dt, n, s, h=grid.spacing)
    return VorticityState(ScalarField(grid, fc._inv(oh, n)), state.time + dt)


def pressure_from_velocity(v: VectorField2) -> ScalarField:
    """Recover the zero-mean pressure from lap(p) = -div(grad_v v).

    The input must already satisfy the incompressibility constraint to
    DIV_FREE_TOL; the returned p balances the gradient part of the
    advection term, leaving a divergence-free residual force.
    """
    div = fc.divergence(v)
    worst = float(np.abs(div.values).max())
    if worst >= DIV_FREE_TOL:
        raise NotDivergenceFree(
            f"max |div v| = {worst}, above the {DIV_FREE_TOL} tolerance")
    grid = v.grid
    n = grid.n
    s = fc._spectral(n)
    adv = fc.covariant_derivative(v, v)
    div_adv_hat = 1j * (s.dkx * fc._fwd(adv.u.values)
                        + s.dky * fc._fwd(adv.w.values))
    p_hat = div_adv_hat * s.inv_k2d
    return ScalarField(grid, fc._inv(p_hat, n))


# ---------------------------------------------------------------------------
# interpolation and particle transport
# ---------------------------------------------------------------------------

def _cr_weights(sf):
    """Catmull-Rom weights for the four neighbors at fraction sf in [0,1)."""
    s2 = sf * sf
    s3 = s2 * sf
    return (
        -0.5 * sf + s2 - 0.5 * s3,
        1.0 - 2.5 * s2 + 1.5 * s3,
        0.5 * sf + 2.0 * s2 - 1.5 * s3,
        -0.5 * s2 + 0.5 * s3,
    )


def _bicubic(values, px, py, n):
    """Periodic 16-point Catmull-Rom interpolation of grid samples."""
    h = TWO_PI / n
    gx = np.asarray(px, dtype=float) / h
    gy = np.asarray(py, dtype=float) / h
    ix = np.floor(gx).astype(np.int64)
    iy = np.floor(gy).astype(np.int64)
    wx = _cr_weights(gx - ix)
    wy = _cr_weights(gy - iy)
    out = np.zeros(np.broadcast(gx, gy).shape, dtype=float)
    for a in range(4):
        rows = (ix + (a - 1)) % n
        acc = np.zeros_like(out)
        for b in range(4):
            cols = (iy + (b - 1)) % n
            acc += wy[b] * values[rows, cols]
        out += wx[a] * acc
    return out


def sample_scalar(f: ScalarField, pts) -> np.ndarray:
    """Bicubic samples of a scalar field at points (…, 2)."""
    p = np.asarray(pts, dtype=float)
    return _bicubic(f.values, p[..., 0], p[..., 1], f.grid.n)


def sample_vector(v: VectorField2, pts) -> np.ndarray:
    """Bicubic samples of both components, stacked along the last axis."""
    p = np.asarray(pts, dtype=float)
    n = v.grid.n
    return np.stack([_bicubic(v.u.values, p[..., 0], p[..., 1], n),
                     _bicubic(v.w.values, p[..., 0], p[..., 1], n)], axis=-1)


def advect_flowmap(fm: FlowMap, velocity_at: VelocitySlices, dt: float) -> FlowMap:
    """One RK4 step of every particle through the stored velocity.

    The source must span [fm.time, fm.time + dt]; stage positions are
    wrapped back onto the torus before each evaluation.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    t0, t1 = velocity_at.span()
    tol = 1e-9 * max(1.0, t1 - t0)
    if fm.time < t0 - tol or fm.time + dt > t1 + tol:
        raise TimeRangeError(
            f"advection window [{fm.time}, {fm.time + dt}] leaves the "
            f"stored span [{t0}, {t1}]")
    t = fm.time
    x = fm.positions
    k1 = velocity_at.sample(x, t)
    k2 = velocity_at.sample((x + (0.5 * dt) * k1) % TWO_PI, t + 0.5 * dt)
    k3 = velocity_at.sample((x + (0.5 * dt) * k2) % TWO_PI, t + 0.5 * dt)
    k4 = velocity_at.sample((x + dt * k3) % TWO_PI, t + dt)
    new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return FlowMap(new, fm.labels, t + dt)


def quad_area(fm: FlowMap) -> float:
    """Shoelace area of the particle polygon (vertices in cyclic order).

    Coordinates are unwrapped to the image nearest the first vertex, so the
    polygon must be small compared to the torus period.
    """
    if fm.positions.shape[0] < 3:
        raise ValueError("need at least three particles for an area")
    rel = (fm.positions - fm.positions[0] + math.pi) % TWO_PI - math.pi
    x, y = rel[:, 0], rel[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


# ---------------------------------------------------------------------------
# co-evolution driver
# ---------------------------------------------------------------------------

def simulate(omega0: ScalarField, dt: float, n_steps: int,
             particles: FlowMap = None, store_every: int = 1) -> FluidRun:
    """Evolve vorticity (and optionally particles) for n_steps of size dt.

    States and flow maps are stored at step 0, every store_every-th step,
    and the final step; diagnostics are recorded at every step.  Particle
    advection blends the two bracketing velocity slices of each step.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    if store_every < 1:
        raise ValueError(f"store_every must be at least 1, got {store_every}")
    grid = omega0.grid
    n = grid.n
    s = fc._spectral(n)
    t0 = 0.0
    oh = fc._fwd(omega0.values) * s.dealias

    u_cur, w_cur, div_cur = _velocity(oh, n, s)
    om_cur = fc._inv(oh, n)
    states = [VorticityState(omega0, t0)]
    fm = particles
    flowmaps = [fm] if fm is not None else []
    diagnostics = [_diagnose(om_cur, u_cur, w_cur, div_cur)]

    for k in range(1, n_steps + 1):
        oh = _rk4_hat(oh, dt, n, s, h=grid.spacing)
        u_next, w_next, div_next = _velocity(oh, n, s)
        t_prev = t0 + (k - 1) * dt
        t_now = t0 + k * dt
        if fm is not None:
            source = VelocitySlices(grid, np.array([t_prev, t_now]),
                                    np.stack([u_cur, u_next]),
                                    np.stack([w_cur, w_next]))
            fm = advect_flowmap(fm, source, dt)
        om_cur = fc._inv(oh, n)
        diagnostics.append(_diagnose(om_cur, u_next, w_next, div_next))
        if k % store_every == 0 or k == n_steps:
            states.append(VorticityState(ScalarField(grid, om_cur), t_now))
            if fm is not None:
                flowmaps.append(fm)
        u_cur, w_cur = u_next, w_next
    return FluidRun(states, flowmaps, diagnostics)


def _diagnose(om, u, w, maxdiv):
    cell = TWO_PI ** 2
    energy = 0.5 * float((u * u + w * w).mean()) * cell
    enstrophy = 0.5 * float((om * om).mean()) * cell
    return FluidDiagnostics(energy, enstrophy, float(om.mean()), maxdiv)


def solve_velocity_path(omega0: ScalarField, dt: float, t_end: float,
                        t_start: float = 0.0) -> VelocitySlices:
    """Run the solver over [t_start, t_end] and keep every velocity slice."""
    span = t_end - t_start
    n_steps = int(round(span / dt))
    if n_steps < 1 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"dt={dt} does not divide the time span {span}")
    grid = omega0.grid
    n = grid.n
    s = fc._spectral(n)
    oh = fc._fwd(omega0.values) * s.dealias
    us = np.empty((n_steps + 1, n, n))
    ws = np.empty((n_steps + 1, n, n))
    us[0], ws[0], _ = _velocity(oh, n, s)
    for k in range(1, n_steps + 1):
        oh = _rk4_hat(oh, dt, n, s, h=grid.spacing)
        us[k], ws[k], _ = _velocity(oh, n, s)
    times = t_start + dt * np.arange(n_steps + 1)
    times[-1] = t_start + span
    return VelocitySlices(grid, times, us, ws)


# ---------------------------------------------------------------------------
# seeded data
# ---------------------------------------------------------------------------

def random_vorticity(grid: Grid, seed: int, max_mode: int) -> ScalarField:
    """Band-limited zero-mean random vorticity with peak speed one.

    Fourier modes with |k_x| <= max_mode and k_y <= max_mode (excluding the
    mean) get independent Gaussian weights; the field is then rescaled so
    the reconstructed velocity has max |v| = 1, which makes CFL budgets
    and perturbation sizes comparable across seeds.
    """
    n = grid.n
    if not 1 <= max_mode <= n // 3:
        raise ValueError(
            f"max_mode must lie in [1, n//3] = [1, {n // 3}], got {max_mode}")
    rng = np.random.default_rng(seed)
    spec = fc._fwd(rng.standard_normal((n, n)))
    kx = np.fft.fftfreq(n, 1.0 / n)[:, None]
    ky = np.arange(n // 2 + 1)[None, :]
    keep = (np.abs(kx) <= max_mode) & (ky <= max_mode)
    keep[0, 0] = False
    vals = fc._inv(np.where(keep, spec, 0.0), n)
    state = VorticityState(ScalarField(grid, vals), 0.0)
    v = velocity_from_vorticity(state)
    peak = float(np.sqrt(v.u.values ** 2 + v.w.values ** 2).max())
    return ScalarField(grid, vals / peak)


# ---------------------------------------------------------------------------
# particle serialization
# ---------------------------------------------------------------------------

def save_particles(path, fm: FlowMap) -> None:
    """Write the flow map as CSV with columns id,label_x,label_y,x,y,t."""
    lines = [PARTICLE_HEADER]
    for i in range(fm.positions.shape[0]):
        lines.append("%d,%.17g,%.17g,%.17g,%.17g,%.17g" % (
            i, fm.labels[i, 0], fm.labels[i, 1],
            fm.positions[i, 0], fm.positions[i, 1], fm.time))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_particles(path) -> FlowMap:
    """Read a flow map written by save_particles."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != PARTICLE_HEADER:
            raise ValueError(f"unexpected particle CSV header: {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    t = data[:, 5]
    if np.any(t != t[0]):
        raise ValueError("particle rows carry inconsistent times")
    return FlowMap(data[:, 3:5], data[:, 1:3], float(t[0]))
