"""Variational tests for flows as critical points of kinetic energy.

Two finite-dimensional checks verify the mixed-partials identity for
reduced velocities of a two-parameter family of rotations, and the same
identity is checked for families of volume-preserving maps of the torus.
The centerpiece is the action slope test: a velocity path that solves the
incompressible equations is a critical point of the kinetic-energy action
among volume-preserving deformations with fixed endpoints, so perturbing
it by a small diffeomorphism changes the action at second order in the
perturbation size.  A path produced by any other dynamics loses the
cancellation and responds at first order.

The perturbations are flows of a seeded band-limited divergence-free
field w, switched on and off by s(t) = sin(pi t).  Deformed velocities
are built exactly from v_eps = psi_* v + eps*s'(t) w, where psi is the
flow of w for time eps*s(t): the backward map is integrated with RK4
against a closed-form mode sum for w, the Jacobian of the backward map
comes from spectral derivatives of its displacement, and the base
velocity is pulled back through bicubic interpolation.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from . import fieldcalc as fc
from . import fluid2d as fl
from . import liegroup as lg
from .fieldcalc import Grid, ScalarField, VectorField2

TWO_PI = 2.0 * math.pi

# time step of the backward-map integrator, in flow-time units
FLOW_SUBSTEP = 0.025

# action differences below this are treated as noise when fitting the slope
FIT_FLOOR = 1e-12

# stencil center (t, eps) shared by both variation checks
STENCIL_CENTER = (0.3, 0.2)

# peak speed of a perturbation field.  Small enough that the deformation
# stays in the regime where interpolation error is negligible, and that
# eps^2 times the perturbation's own kinetic energy does not swamp the
# first-order action response of non-solution paths at the default
# strengths; large enough to clear the fitting noise floor by orders of
# magnitude.
PERTURBATION_SPEED = 0.1

# default strength ladder: halving steps, largest first
DEFAULT_EPSILONS = (0.1, 0.05, 0.025, 0.0125)


class BandLimitExceeded(ValueError):
    """The requested perturbation band does not fit the grid."""


# ---------------------------------------------------------------------------
# recipe for a perturbation experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """Seeded recipe for a divergence-free perturbation and its strengths.

    The time profile is fixed to s(t) = sin(pi t), which vanishes at both
    endpoints so the perturbed paths agree with the base path at t = 0
    and t = 1.  Epsilons must be positive and strictly decreasing.
    """

    stream_seed: int
    max_mode: int
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS

    def __post_init__(self):
        if self.max_mode < 1:
            raise ValueError(f"max_mode must be at least 1, got {self.max_mode}")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("epsilons must not be empty")
        if any(e <= 0.0 for e in eps):
            raise ValueError(f"epsilons must be positive, got {eps}")
        if any(nxt >= prv for prv, nxt in zip(eps, eps[1:])):
            raise ValueError(f"epsilons must be strictly decreasing, got {eps}")
        object.__setattr__(self, "epsilons", eps)

    @staticmethod
    def s(t: float) -> float:
        return math.sin(math.pi * t)

    @staticmethod
    def s_dot(t: float) -> float:
        return math.pi * math.cos(math.pi * t)


@dataclass(frozen=True)
class ActionReport:
    """Action of a base path and of its perturbed versions.

    fitted_slope is the log-log exponent of |A(eps) - A(0)| against eps,
    fitted over the smallest strengths whose action difference is above
    the noise floor; it is NaN when fewer than two strengths qualify.
    """

    base_action: float
    perturbed_actions: Tuple[Tuple[float, float], ...]
    fitted_slope: float

    def __post_init__(self):
        base = float(self.base_action)
        if not math.isfinite(base):
            raise ValueError(f"base_action must be finite, got {base}")
        pairs = tuple((float(e), float(a)) for e, a in self.perturbed_actions)
        if not pairs:
            raise ValueError("perturbed_actions must not be empty")
        for e, a in pairs:
            if not (math.isfinite(e) and e > 0.0 and math.isfinite(a)):
                raise ValueError(f"bad perturbed action entry ({e}, {a})")
        object.__setattr__(self, "base_action", base)
        object.__setattr__(self, "perturbed_actions", pairs)
        object.__setattr__(self, "fitted_slope", float(self.fitted_slope))


# ---------------------------------------------------------------------------
# the matrix-group identity
# ---------------------------------------------------------------------------

# The check below differentiates twice with step h, which amplifies
# rounding noise by h^-2 (1e8 at h = 1e-4).  To keep the noise floor well
# under the h^2 signal, the rotation stencil is evaluated in extended
# precision; these are local long-double twins of exp_so3 and its inverse.
_LD = np.longdouble


def _hat_ld(w):
    z = _LD(0.0)
    return np.array([[z, -w[2], w[1]],
                     [w[2], z, -w[0]],
                     [-w[1], w[0], z]], dtype=_LD)


def _exp_so3_ld(w):
    t2 = w @ w
    if t2 < _LD(1e-12):
        ca = _LD(1.0) - t2 / _LD(6.0)
        cb = _LD(0.5) - t2 / _LD(24.0)
    else:
        t = np.sqrt(t2)
        ca = np.sin(t) / t
        cb = (_LD(1.0) - np.cos(t)) / t2
    W = _hat_ld(w)
    return np.eye(3, dtype=_LD) + ca * W + cb * (W @ W)


def _log_so3_ld(R):
    """Rotation vector of R (inverse Rodrigues) away from angle pi."""
    c = 0.5 * (np.trace(R) - _LD(1.0))
    c = min(_LD(1.0), max(_LD(-1.0), c))
    theta = np.arccos(c)
    v = 0.5 * np.array([R[2, 1] - R[1, 2],
                        R[0, 2] - R[2, 0],
                        R[1, 0] - R[0, 1]], dtype=_LD)  # sin(theta) * axis
    if theta < _LD(1e-6):
        return v * (_LD(1.0) + theta * theta / _LD(6.0))
    if theta > np.pi - 1e-3:
        raise ValueError("rotation angle too close to pi for a stable log")
    return v * (theta / np.sin(theta))


def variation_check_so3(a, b, h: float) -> float:
    """Residual of d(xi)/d(eps) - d(eta)/dt = [xi, eta] on rotations.

    The family is g(t, eps) = exp(t a^) exp(eps b^); xi and eta are the
    body-frame velocities g^-1 dg/dt and g^-1 dg/deps, extracted as
    central differences of the group-increment rotation vectors
    log(g^-1 g(t +- h)) / (2h).  The mixed derivatives of xi and eta are
    then central differences with the same step, so the residual at
    (t, eps) = (0.3, 0.2) decays as h^2.  (Differencing the raw matrix
    entries instead would be useless here: for this family the matrix
    quotients pick up matching sinc(h) factors on both sides of the
    identity and the residual collapses to rounding noise at any h.)
    """
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (3,) or b.shape != (3,):
        raise ValueError("a and b must be 3-vectors")
    al = a.astype(_LD)
    bl = b.astype(_LD)
    hl = _LD(h)
    t0 = _LD(STENCIL_CENTER[0])
    e0 = _LD(STENCIL_CENTER[1])

    def g(t, e):
        return _exp_so3_ld(t * al) @ _exp_so3_ld(e * bl)

    def body_vel(t, e, dt, de):
        gc = g(t, e).T
        fwd = _log_so3_ld(gc @ g(t + dt, e + de))
        bwd = _log_so3_ld(gc @ g(t - dt, e - de))
        return (fwd - bwd) / (2.0 * hl)

    xi = lambda t, e: body_vel(t, e, hl, _LD(0.0))
    eta = lambda t, e: body_vel(t, e, _LD(0.0), hl)
    dxi_de = (xi(t0, e0 + hl) - xi(t0, e0 - hl)) / (2.0 * hl)
    deta_dt = (eta(t0 + hl, e0) - eta(t0 - hl, e0)) / (2.0 * hl)
    resid = dxi_de - deta_dt - np.cross(xi(t0, e0), eta(t0, e0))
    return float(np.sqrt((resid * resid).sum()))


# ---------------------------------------------------------------------------
# seeded divergence-free perturbations
# ---------------------------------------------------------------------------

class _ModeVelocity:
    """Closed-form evaluator of (d_y chi, -d_x chi) for band-limited chi.

    Holds the nonzero Fourier modes of the streamfunction and sums them
    directly, so the velocity can be evaluated at arbitrary (unwrapped)
    points without interpolation error.  On grid points it reproduces the
    FFT-built field to rounding.
    """

    def __init__(self, chi_values: np.ndarray):
        n = chi_values.shape[0]
        spec = np.fft.fft2(chi_values) / (n * n)
        k = np.fft.fftfreq(n, 1.0 / n)
        KX, KY = np.meshgrid(k, k, indexing="ij")
        keep = np.abs(spec) > 1e-13 * np.abs(spec).max()
        self._kx = KX[keep]
        self._ky = KY[keep]
        self._cu = 1j * self._ky * spec[keep]
        self._cw = -1j * self._kx * spec[keep]

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * (pts[..., 0, None] * self._kx
                             + pts[..., 1, None] * self._ky))
        u = (phase * self._cu).sum(axis=-1).real
        w = (phase * self._cw).sum(axis=-1).real
        return np.stack([u, w], axis=-1)


def _perturbation_modes(spec: PerturbationSpec, grid: Grid):
    """Grid samples and mode-sum evaluator of the seeded perturbation."""
    n = grid.n
    if spec.max_mode > n // 3:
        raise BandLimitExceeded(
            f"max_mode={spec.max_mode} exceeds the dealiased band "
            f"n//3={n // 3} of an n={n} grid")
    sp = fc._spectral(n)
    rng = np.random.default_rng(spec.stream_seed)
    raw = fc._fwd(rng.standard_normal((n, n)))
    keep = (np.abs(sp.kx) <= spec.max_mode) & (sp.ky <= spec.max_mode)
    keep[0, 0] = False
    chi_hat = np.where(keep, raw, 0.0)
    u = fc._inv(1j * sp.dky * chi_hat, n)
    w = fc._inv(-1j * sp.dkx * chi_hat, n)
    scale = PERTURBATION_SPEED / float(np.sqrt(u * u + w * w).max())
    u *= scale
    w *= scale
    chi = fc._inv(chi_hat, n) * scale
    return VectorField2.of(grid, u, w), _ModeVelocity(chi)


def make_divfree_perturbation(spec: PerturbationSpec, grid: Grid) -> VectorField2:
    """Seeded band-limited divergence-free field, peak speed 0.1.

    The field is the rotated gradient (d_y chi, -d_x chi) of a random
    streamfunction with modes |k| <= max_mode, so its divergence vanishes
    mode by mode; the same seed always yields the same field.  The
    normalization to PERTURBATION_SPEED makes perturbation strengths
    comparable across seeds and grids.
    """
    w_field, _ = _perturbation_modes(spec, grid)
    return w_field


# ---------------------------------------------------------------------------
# pushforward of a velocity slice by the perturbation flow
# ---------------------------------------------------------------------------

def _backward_map(vel, tau: float, pts0: np.ndarray) -> np.ndarray:
    """Flow pts0 backward for time tau along vel (RK4, unwrapped)."""
    m = max(1, int(math.ceil(abs(tau) / FLOW_SUBSTEP)))
    dtau = -tau / m
    x = pts0.astype(float, copy=True)
    for _ in range(m):
        k1 = vel(x)
        k2 = vel(x + (0.5 * dtau) * k1)
        k3 = vel(x + (0.5 * dtau) * k2)
        k4 = vel(x + dtau * k3)
        x = x + (dtau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _pushed_values(sample, flow_vel, tau: float, grid: Grid, pts0=None):
    """Components of the pushforward of a field by the time-tau flow.

    For y on the grid, (psi_* v)(y) = DB(y)^-1 v(B(y)) with B the backward
    map psi^-1.  The displacement B(y) - y is smooth and periodic, so its
    Jacobian is taken spectrally, which avoids the O(h^2) bias a stencil
    would add on top of the interpolation error of sampling v at B(y).
    """
    if pts0 is None:
        X, Y = grid.mesh()
        pts0 = np.stack([X, Y], axis=-1)
    B = _backward_map(flow_vel, tau, pts0)
    d1 = ScalarField(grid, B[..., 0] - pts0[..., 0])
    d2 = ScalarField(grid, B[..., 1] - pts0[..., 1])
    a11 = 1.0 + fc.ddx(d1, "x").values
    a12 = fc.ddx(d1, "y").values
    a21 = fc.ddx(d2, "x").values
    a22 = 1.0 + fc.ddx(d2, "y").values
    det = a11 * a22 - a12 * a21
    vb = sample(B)
    pu = (a22 * vb[..., 0] - a12 * vb[..., 1]) / det
    pw = (-a21 * vb[..., 0] + a11 * vb[..., 1]) / det
    return pu, pw


# ---------------------------------------------------------------------------
# action of a velocity path
# ---------------------------------------------------------------------------

def _energy(u_vals: np.ndarray, w_vals: np.ndarray) -> float:
    return 0.5 * float(np.mean(u_vals * u_vals + w_vals * w_vals)) * TWO_PI ** 2


def _trapezoid(values: np.ndarray, dt: float) -> float:
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


def path_action(flow: Sequence[VectorField2], dt: float) -> float:
    """Trapezoidal quadrature of the kinetic energy along a velocity path.

    The samples must form a uniform time grid covering [0, 1] with
    spacing dt; the energy of each slice is (1/2) * inner_l2(v, v).
    """
    fields = list(flow)
    if len(fields) < 2:
        raise ValueError("need at least two velocity slices")
    if dt <= 0.0 or abs((len(fields) - 1) * dt - 1.0) > 1e-9:
        raise ValueError(
            f"{len(fields)} slices at dt={dt} do not cover [0, 1]")
    fc._require_same_grid(*(f.grid for f in fields))
    energies = np.array([_energy(f.u.values, f.w.values) for f in fields])
    return _trapezoid(energies, dt)


# ---------------------------------------------------------------------------
# first variation of the action
# ---------------------------------------------------------------------------

def _fit_slope(epsilons, deltas) -> float:
    """Log-log slope over the three smallest strengths above the floor."""
    usable = sorted((e, d) for e, d in zip(epsilons, deltas) if d > FIT_FLOOR)
    usable = usable[:3]
    if len(usable) < 2:
        return float("nan")
    le = np.log([e for e, _ in usable])
    ld = np.log([d for _, d in usable])
    return float(np.polyfit(le, ld, 1)[0])


def first_variation_of_path(slices: fl.VelocitySlices,
                            spec: PerturbationSpec) -> ActionReport:
    """Action response of a stored velocity path to seeded perturbations.

    For each strength eps the path is deformed slice by slice into
    v_eps = psi_* v + eps*s'(t) w with psi the flow of w for time
    eps*s(t); this is the exact velocity of the deformed particle paths,
    not a linearization.  The report carries the perturbed actions in the
    order of spec.epsilons and the fitted power of |A(eps) - A(0)|.
    """
    times = slices.times
    dt = float(times[1] - times[0])
    if abs(times[0]) > 1e-9 or abs(times[-1] - 1.0) > 1e-9:
        raise ValueError("velocity path must cover [0, 1]")
    if np.abs(np.diff(times) - dt).max() > 1e-9:
        raise ValueError("velocity path must be uniformly sampled")
    grid = slices.grid
    n = grid.n
    w_field, w_eval = _perturbation_modes(spec, grid)
    wu = w_field.u.values
    ww = w_field.w.values
    X, Y = grid.mesh()
    pts0 = np.stack([X, Y], axis=-1)

    base = np.array([_energy(slices.u[j], slices.w[j])
                     for j in range(times.size)])
    base_action = _trapezoid(base, dt)

    perturbed = []
    deltas = []
    for eps in spec.epsilons:
        energies = np.empty(times.size)
        for j, t in enumerate(times):
            tau = eps * spec.s(t)
            if abs(tau) < 1e-13:
                # below the resolution of the flow map: psi is the identity
                pu, pw = slices.u[j], slices.w[j]
            else:
                uj, wj = slices.u[j], slices.w[j]
                sample = lambda p: np.stack(
                    [fl._bicubic(uj, p[..., 0], p[..., 1], n),
                     fl._bicubic(wj, p[..., 0], p[..., 1], n)], axis=-1)
                pu, pw = _pushed_values(sample, w_eval, tau, grid, pts0)
            coef = eps * spec.s_dot(t)
            energies[j] = _energy(pu + coef * wu, pw + coef * ww)
        action = _trapezoid(energies, dt)
        perturbed.append((eps, action))
        deltas.append(abs(action - base_action))

    slope = _fit_slope(spec.epsilons, deltas)
    return ActionReport(base_action, tuple(perturbed), slope)


def first_variation(base_omega0: ScalarField, spec: PerturbationSpec,
                    dt: float) -> ActionReport:
    """Solve the flow over [0, 1] and report its action response.

    On a solution path the first-order terms cancel after time
    integration, so the fitted slope is close to 2; see
    frozen_velocity_path for a control path where it is close to 1.
    """
    slices = fl.solve_velocity_path(base_omega0, dt, 1.0)
    return first_variation_of_path(slices, spec)


def frozen_velocity_path(omega0: ScalarField, dt: float,
                         t_end: float = 1.0) -> fl.VelocitySlices:
    """Velocity path of vorticity advected by its frozen initial velocity.

    The transport velocity is locked to t = 0 while the reported path is
    still reconstructed from the evolving vorticity.  The result is a
    perfectly smooth path of divergence-free fields that does not solve
    the flow equations, so its action responds at first order.
    """
    span = float(t_end)
    n_steps = int(round(span / dt))
    if n_steps < 1 or abs(n_steps * dt - span) > 1e-9 * max(1.0, span):
        raise ValueError(f"dt={dt} does not divide the time span {span}")
    grid = omega0.grid
    n = grid.n
    s = fc._spectral(n)
    oh = fc._fwd(omega0.values) * s.dealias
    u0, w0, _ = fl._velocity(oh, n, s)
    fl._check_cfl(dt, u0, w0, grid.spacing)

    def rhs(ohc):
        ox = fc._inv(1j * s.dkx * ohc, n)
        oy = fc._inv(1j * s.dky * ohc, n)
        return -(fc._fwd(u0 * ox + w0 * oy) * s.dealias)

    us = np.empty((n_steps + 1, n, n))
    ws = np.empty((n_steps + 1, n, n))
    us[0], ws[0], _ = fl._velocity(oh, n, s)
    for k in range(1, n_steps + 1):
        k1 = rhs(oh)
        k2 = rhs(oh + (0.5 * dt) * k1)
        k3 = rhs(oh + (0.5 * dt) * k2)
        k4 = rhs(oh + dt * k3)
        oh = oh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        us[k], ws[k], _ = fl._velocity(oh, n, s)
    times = dt * np.arange(n_steps + 1)
    times[-1] = span
    return fl.VelocitySlices(grid, times, us, ws)


# ---------------------------------------------------------------------------
# the identity on volume-preserving maps
# ---------------------------------------------------------------------------

def flow_family(seed_a: int, seed_b: int, max_mode: int, grid: Grid):
    """Reduced velocities of the family phi(t, eps) = flow_a(t) o flow_b(eps).

    Returns callables (t, eps) -> VectorField2 for v = velocity in t and
    u = velocity in eps.  In this family v is constantly the generator a,
    and u is the pushforward of b by the time-t flow of a (independent of
    eps), mirroring the structure of the rotation-group family.  The
    generator b is evaluated in closed form at the backward-map points,
    so u carries no interpolation error.
    """
    wa_field, wa_eval = _perturbation_modes(
        PerturbationSpec(stream_seed=seed_a, max_mode=max_mode), grid)
    wb_field, wb_eval = _perturbation_modes(
        PerturbationSpec(stream_seed=seed_b, max_mode=max_mode), grid)

    def v_path(t: float, eps: float) -> VectorField2:
        return wa_field

    def u_path(t: float, eps: float) -> VectorField2:
        if abs(t) < 1e-13:
            return wb_field
        pu, pw = _pushed_values(wb_eval, wa_eval, t, grid)
        return VectorField2.of(grid, pu, pw)

    return v_path, u_path


def variation_check_sdiff(v_path: Callable[[float, float], VectorField2],
                          u_path: Callable[[float, float], VectorField2],
                          h: float) -> float:
    """Residual of d(v)/d(eps) - d(u)/dt = -[v, u] for a family of flows.

    Both derivatives are taken by central differences with step h at
    (t, eps) = (0.3, 0.2), so the two paths must be evaluable on that
    stencil.  Returns the sup norm of the residual field; for smooth
    families it decays as h^2 down to the interpolation floor.
    """
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")
    t0, e0 = STENCIL_CENTER
    v0 = v_path(t0, e0)
    u0 = u_path(t0, e0)
    fc._require_same_grid(v0.grid, u0.grid)
    vp = v_path(t0, e0 + h)
    vm = v_path(t0, e0 - h)
    up = u_path(t0 + h, e0)
    um = u_path(t0 - h, e0)
    br = fc.vf_bracket(v0, u0)
    ru = (vp.u.values - vm.u.values - up.u.values + um.u.values) / (2.0 * h) \
        + br.u.values
    rw = (vp.w.values - vm.w.values - up.w.values + um.w.values) / (2.0 * h) \
        + br.w.values
    return float(max(np.abs(ru).max(), np.abs(rw).max()))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_action_report(path, report: ActionReport) -> None:
    """Write (epsilon, action, |action - base|) rows as CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epsilon,action,abs_delta\n")
        for eps, action in report.perturbed_actions:
            delta = abs(action - report.base_action)
            fh.write(f"{eps:.17g},{action:.17g},{delta:.17g}\n")
