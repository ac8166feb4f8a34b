"""Command-line driver for seeded experiment runs.

``geomflow run <config> [--output-dir D] [--emit-svg]`` executes one
experiment described by a flat key = value file and writes its
artifacts (CSV data, a JSON report, optional SVG plots rendered from
the CSVs) into the output directory.  ``geomflow selftest`` runs a
quick cross-module invariant table.

Exit codes: 0 all checks passed, 1 usage or runtime error, 2 a
quantity missed its threshold.  Outputs are deterministic for a fixed
config: rerunning produces byte-identical CSV files.

The helmholtz experiment is report-only (three residual numbers); it
defines no figure, so --emit-svg is a no-op there.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from . import fieldcalc as fc
from . import fluid2d as fl
from . import geodesic as gd
from . import liegroup as lg
from . import rigidbody as rb

TRAJECTORY_HEADER = ("t,R00,R01,R02,R10,R11,R12,R20,R21,R22,"
                     "rx,ry,rz,wx,wy,wz,vx,vy,vz")

# pass thresholds, per experiment
RIGID_DRIFT_TOL = 1e-8
FLUID_DRIFT_TOL = 1e-6
HELMHOLTZ_TOLS = {"reconstruction": 1e-13, "divergence": 1e-11,
                  "orthogonality": 1e-11}
SLOPE_MIN = 1.8
RATIO_BOUNDS = (3.5, 4.5)

# spectral band of the seeded initial data
FLUID_MAX_MODE = 4
GEODESIC_MAX_MODE = 2

# peak speed of the geodesic-check base flow.  The quadratic action
# response of a solution grows with the base speed cubed relative to
# the perturbation's own kinetic energy, so a faster base keeps the
# fitted slope far from the noise of near-critical paths.
GEODESIC_BASE_SPEED = 3.0


# ---------------------------------------------------------------------------
# small artifact writers
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    """Write numeric rows under a header, shortest-exact float format."""
    lines = [header]
    for row in rows:
        lines.append(",".join("%.17g" % float(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_report(path, cfg, drifts, ok, wall):
    clean = {}
    for key, value in drifts.items():
        if isinstance(value, float) and not math.isfinite(value):
            value = None
        clean[key] = value
    report = {"config": cfg.as_dict(), "drifts": clean, "pass": bool(ok),
              "wall_time_s": round(wall, 3)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _steps(t_end, dt):
    n = int(round(t_end / dt))
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"dt={dt} does not divide t_end={t_end}")
    return n


# ---------------------------------------------------------------------------
# experiment runners: return (drifts, ok, csv file names)
# ---------------------------------------------------------------------------

def _run_rigidbody(cfg, outdir):
    I11, I12, I13, I22, I23, I33 = cfg.inertia
    inertia = np.array([[I11, I12, I13], [I12, I22, I23], [I13, I23, I33]])
    spec = rb.InertiaSpec(inertia, cfg.mass)
    state0 = rb.RigidBodyState(
        pose=lg.GroupElementSE3(np.eye(3), np.zeros(3)),
        velocity=lg.AlgebraElementSE3(np.array(cfg.omega0), np.array(cfg.v0)),
        time=0.0)
    traj = rb.simulate(spec, state0, cfg.dt, _steps(cfg.t_end, cfg.dt))

    rows = np.column_stack([traj.times,
                            traj.rotations.reshape(len(traj), 9),
                            traj.translations, traj.angular, traj.linear])
    _write_csv(os.path.join(outdir, "trajectory.csv"), TRAJECTORY_HEADER, rows)

    momentum = rb.spatial_momentum_series(spec, traj)
    cons = np.column_stack([traj.times, rb.energy_series(spec, traj),
                            rb.casimir_series(spec, traj), momentum])
    _write_csv(os.path.join(outdir, "conservation.csv"),
               "t,energy,casimir,mx,my,mz", cons)

    drifts = rb.trajectory_drifts(spec, traj)
    ok = all(v < RIGID_DRIFT_TOL for v in drifts.values())
    drifts["threshold"] = RIGID_DRIFT_TOL
    return drifts, ok, ["trajectory.csv", "conservation.csv"]


def _run_fluid2d(cfg, outdir):
    grid = fc.Grid(cfg.grid_n)
    omega0 = fl.random_vorticity(grid, cfg.seed, FLUID_MAX_MODE)
    n_steps = _steps(cfg.t_end, cfg.dt)
    run = fl.simulate(omega0, cfg.dt, n_steps, store_every=n_steps)
    times = cfg.dt * np.arange(n_steps + 1)
    energy = np.array([d.energy for d in run.diagnostics])
    enstrophy = np.array([d.enstrophy for d in run.diagnostics])
    _write_csv(os.path.join(outdir, "conservation.csv"), "t,energy,enstrophy",
               np.column_stack([times, energy, enstrophy]))

    drifts = {
        "energy": float(np.abs(energy - energy[0]).max() / abs(energy[0])),
        "enstrophy": float(
            np.abs(enstrophy - enstrophy[0]).max() / abs(enstrophy[0])),
    }
    ok = all(v < FLUID_DRIFT_TOL for v in drifts.values())
    drifts["threshold"] = FLUID_DRIFT_TOL
    return drifts, ok, ["conservation.csv"]


def _run_helmholtz(cfg, outdir):
    grid = fc.Grid(cfg.grid_n)
    rng = np.random.default_rng(cfg.seed)
    n = grid.n
    field = fc.VectorField2.of(grid, rng.standard_normal((n, n)),
                               rng.standard_normal((n, n)))
    div_free, grad_part = fc.helmholtz_decompose(field)

    recon = max(
        np.abs(div_free.u.values + grad_part.u.values - field.u.values).max(),
        np.abs(div_free.w.values + grad_part.w.values - field.w.values).max())
    divergence = float(np.abs(fc.divergence(div_free).values).max())
    ortho = abs(fc.inner_l2(div_free, grad_part))

    measured = {"reconstruction": float(recon), "divergence": divergence,
                "orthogonality": ortho}
    lines = ["quantity,value"]
    for key in ("reconstruction", "divergence", "orthogonality"):
        lines.append("%s,%.17g" % (key, measured[key]))
    with open(os.path.join(outdir, "residuals.csv"), "w",
              encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    ok = all(measured[k] < HELMHOLTZ_TOLS[k] for k in measured)
    drifts = dict(measured)
    drifts["thresholds"] = dict(HELMHOLTZ_TOLS)
    return drifts, ok, ["residuals.csv"]


def _run_geodesic(cfg, outdir):
    if abs(cfg.t_end - 1.0) > 1e-12:
        raise ValueError(
            f"geodesic-check paths live on the unit time interval; "
            f"t_end must be 1, got {cfg.t_end}")
    grid = fc.Grid(cfg.grid_n)
    base = fl.random_vorticity(grid, cfg.seed, GEODESIC_MAX_MODE)
    base = fc.ScalarField(grid, GEODESIC_BASE_SPEED * base.values)
    spec = gd.PerturbationSpec(stream_seed=cfg.seed + 100,
                               max_mode=GEODESIC_MAX_MODE,
                               epsilons=cfg.epsilons)
    report = gd.first_variation(base, spec, cfg.dt)
    gd.save_action_report(os.path.join(outdir, "action_report.csv"), report)

    slope = report.fitted_slope
    print(f"fitted_slope = {slope:.6f}")
    ok = math.isfinite(slope) and slope >= SLOPE_MIN
    drifts = {"fitted_slope": float(slope),
              "base_action": float(report.base_action),
              "slope_min": SLOPE_MIN}
    return drifts, ok, ["action_report.csv"]


def _run_variation_so3(cfg, outdir):
    rng = np.random.default_rng(cfg.seed)
    a = rng.uniform(-1.0, 1.0, 3)
    b = rng.uniform(-1.0, 1.0, 3)
    h = cfg.dt
    coarse = gd.variation_check_so3(a, b, h)
    fine = gd.variation_check_so3(a, b, h / 2.0)
    ratio = coarse / fine if fine > 0.0 else math.inf
    _write_csv(os.path.join(outdir, "residuals.csv"), "h,residual",
               [(h, coarse), (h / 2.0, fine)])

    lo, hi = RATIO_BOUNDS
    ok = math.isfinite(ratio) and lo <= ratio <= hi
    drifts = {"residual_h": float(coarse), "residual_half_h": float(fine),
              "ratio": float(ratio), "ratio_bounds": list(RATIO_BOUNDS)}
    return drifts, ok, ["residuals.csv"]


_RUNNERS = {
    "rigidbody": _run_rigidbody,
    "fluid2d": _run_fluid2d,
    "helmholtz": _run_helmholtz,
    "geodesic-check": _run_geodesic,
    "variation-so3": _run_variation_so3,
}

# figure renderers, keyed by (experiment, csv name); values name the
# plots.py function.  helmholtz deliberately has no entry.
_FIGURES = {
    ("rigidbody", "conservation.csv"): "plot_rigidbody_conservation",
    ("fluid2d", "conservation.csv"): "plot_fluid_conservation",
    ("geodesic-check", "action_report.csv"): "plot_action_response",
    ("variation-so3", "residuals.csv"): "plot_residual_orders",
}


def run(cfg: cfgmod.RunConfig) -> dict:
    """Execute one experiment; write artifacts; return the report dict."""
    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    start = time.perf_counter()
    drifts, ok, csv_files = _RUNNERS[cfg.experiment](cfg, outdir)
    wall = time.perf_counter() - start

    written = list(csv_files)
    if cfg.emit_svg:
        from . import plots  # deferred: matplotlib is slow to import
        for name in csv_files:
            func = _FIGURES.get((cfg.experiment, name))
            if func is None:
                continue
            svg = name.rsplit(".", 1)[0] + ".svg"
            getattr(plots, func)(os.path.join(outdir, name),
                                 os.path.join(outdir, svg))
            written.append(svg)

    _write_report(os.path.join(outdir, "report.json"), cfg, drifts, ok, wall)
    written.append("report.json")

    for key, value in drifts.items():
        if isinstance(value, float):
            print(f"  {key:<24} {value:.6e}")
    for name in written:
        print(f"wrote {os.path.join(outdir, name)}")
    print("PASS" if ok else "FAIL: threshold exceeded")
    return {"drifts": drifts, "pass": ok, "files": written}


# ---------------------------------------------------------------------------
# selftest
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
        comps.append(vals / max(np.abs(vals).max(), 1e-300))
    return fc.VectorField2.of(grid, *comps)


def _selftest_rows():
    rows = []

    # dual pairing against the bracket on se(3)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        xi = lg.AlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        zeta = lg.AlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        mu = lg.CoAlgebraElementSE3(*rng.uniform(-1, 1, (2, 3)))
        lhs = lg.pairing(lg.ad_star_se3(xi, mu), zeta)
        rhs = lg.pairing(mu, lg.bracket_se3(xi, zeta))
        worst = max(worst, abs(lhs - rhs))
    rows.append(("se(3) pairing identity (200 triples)", worst, 1e-12))

    # rigid body conservation over a short horizon, and rotation/translation
    # decoupling
    spec = rb.InertiaSpec(np.diag([1.0, 2.0, 3.0]), 1.0)
    pose0 = lg.GroupElementSE3(np.eye(3), np.zeros(3))
    runs = []
    for v0 in ((1.0, 0.0, 0.0), (0.0, 0.0, 0.0)):
        state0 = rb.RigidBodyState(
            pose=pose0,
            velocity=lg.AlgebraElementSE3((1.0, 0.01, 0.01), v0), time=0.0)
        runs.append(rb.simulate(spec, state0, 1e-3, 1000))
    drifts = rb.trajectory_drifts(spec, runs[0])
    rows.append(("rigid body drifts over T=1",
                 max(drifts.values()), RIGID_DRIFT_TOL))
    rows.append(("rotation rate decoupled from v0",
                 float(np.abs(runs[0].angular - runs[1].angular).max()),
                 1e-13))

    # divergence-free/gradient splitting on seeded noise
    grid = fc.Grid(64)
    rng = np.random.default_rng(1)
    recon = div = ortho = 0.0
    for _ in range(10):
        field = fc.VectorField2.of(grid, rng.standard_normal((64, 64)),
                                   rng.standard_normal((64, 64)))
        v, g = fc.helmholtz_decompose(field)
        recon = max(recon,
                    np.abs(v.u.values + g.u.values - field.u.values).max(),
                    np.abs(v.w.values + g.w.values - field.w.values).max())
        div = max(div, np.abs(fc.divergence(v).values).max())
        ortho = max(ortho, abs(fc.inner_l2(v, g)))
    rows.append(("splitting reconstruction (10 fields)", recon, 1e-13))
    rows.append(("projected-part divergence", div, 1e-11))
    rows.append(("splitting orthogonality", ortho, 1e-11))

    # metric compatibility of the directional derivative
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(10):
        v = _band_limited_vector(rng, grid, 5)
        u = _band_limited_vector(rng, grid, 5)
        lhs = fc.inner_l2(fc.covariant_derivative(v, u), u)
        speed2 = fc.ScalarField(grid, u.u.values ** 2 + u.w.values ** 2)
        rhs = 0.5 * fc.inner_l2(v, fc.gradient(speed2))
        worst = max(worst, abs(lhs - rhs))
    rows.append(("directional derivative metric identity", worst, 1e-10))

    # steady cellular flow: conservation and stationarity over T=0.5
    X, Y = grid.mesh()
    tg = fc.ScalarField(grid, 2.0 * np.sin(X) * np.sin(Y))
    run = fl.simulate(tg, 1e-2, 50, store_every=50)
    energy = np.array([d.energy for d in run.diagnostics])
    enstrophy = np.array([d.enstrophy for d in run.diagnostics])
    drift = max(np.abs(energy - energy[0]).max() / energy[0],
                np.abs(enstrophy - enstrophy[0]).max() / enstrophy[0])
    rows.append(("cellular flow conservation over T=0.5", float(drift),
                 FLUID_DRIFT_TOL))
    sup = max(np.abs(s.omega.values - tg.values).max() for s in run.states)
    rows.append(("cellular flow stationarity", float(sup), FLUID_DRIFT_TOL))

    # kinetic action of the steady cellular velocity path over [0, 1]
    tgv = fc.VectorField2.of(grid, np.sin(X) * np.cos(Y),
                             -np.cos(X) * np.sin(Y))
    action = gd.path_action([tgv, tgv], 1.0)
    rows.append(("steady cellular path action vs pi^2",
                 abs(action - math.pi ** 2), 1e-10))

    # second-order collapse of the rotation-group mixed-partial residual
    a = (0.4, -0.2, 0.7)
    b = (0.3, 0.5, -0.1)
    coarse = gd.variation_check_so3(a, b, 1e-3)
    fine = gd.variation_check_so3(a, b, 5e-4)
    ratio = coarse / fine if fine > 0.0 else math.inf
    rows.append(("rotation stencil halving ratio", ratio, RATIO_BOUNDS))
    return rows


def _cmd_selftest() -> int:
    rows = _selftest_rows()
    width = max(len(name) for name, _, _ in rows) + 2
    failed = 0
    for name, measured, bound in rows:
        if isinstance(bound, tuple):
            ok = bound[0] <= measured <= bound[1]
            bound_text = f"in [{bound[0]}, {bound[1]}]"
            value_text = f"{measured:11.3f}"
        else:
            ok = measured < bound
            bound_text = f"< {bound:g}"
            value_text = f"{measured:11.3e}"
        failed += not ok
        print(f"{name:<{width}} {value_text}  {bound_text:<16} "
              f"{'pass' if ok else 'FAIL'}")
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 2 if failed else 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="geomflow",
        description="Seeded geometric-mechanics experiments with CSV, "
                    "JSON, and optional SVG artifacts.")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute one configured experiment")
    runp.add_argument("config", help="path to a key = value config file")
    runp.add_argument("--output-dir", default=None,
                      help="artifact directory (overrides the config)")
    runp.add_argument("--emit-svg", action="store_true",
                      help="render SVG plots from the written CSVs")
    sub.add_parser("selftest", help="run the cross-module invariant table")
    return parser


def _cmd_run(args) -> int:
    cfg = cfgmod.load_config(args.config)
    updates = {}
    if args.output_dir is not None:
        updates["output_dir"] = args.output_dir
    if args.emit_svg:
        updates["emit_svg"] = True
    if updates:
        cfg = replace(cfg, **updates)
    result = run(cfg)
    return 0 if result["pass"] else 2


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; fold the
        # latter into this tool's usage-error code
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_selftest()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
