"""Command-line entry point.

Subcommands: run, limit, sweep, verify, mesh-info, bench.  Exit codes:
0 success, 2 validation error, 3 numerical abort, 4 bracket or sweep
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import bench, checks, driver, geometry
from .fem import MeshError
from .materials import MaterialError
from .scenario import ScenarioError, bundled_names, load_scenario, with_overrides
from .sph import NumericalError
from .units import UnitError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_SEARCH = 4


def _add_scenario_args(p, overrides=True):
    p.add_argument("--scenario", required=True,
                   help="bundled scenario name or path to a scenario file")
    if overrides:
        p.add_argument("--velocity", type=float, help="impact velocity [m/s]")
        p.add_argument("--friction", type=float, help="Coulomb coefficient")
        p.add_argument("--particle-distance", type=float,
                       help="particle spacing [m]")
        p.add_argument("--sph-radius", type=float,
                       help="particle-region radius [m]")
        p.add_argument("--resolution-scale", type=float,
                       help="multiply the particle spacing by this factor")
        p.add_argument("--snapshot-every", type=float,
                       help="snapshot interval [s]")
    p.add_argument("--out-dir", help="directory for histories and snapshots")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-wall-time", type=float,
                   help="per-run wall clock budget [s]")


def _load(args):
    scn = load_scenario(args.scenario)
    kwargs = {}
    for attr in ("velocity", "friction", "particle_distance", "sph_radius"):
        v = getattr(args, attr, None)
        if v is not None:
            kwargs[attr] = v
    scale = getattr(args, "resolution_scale", None)
    if scale is not None:
        if scale <= 0.0:
            raise ScenarioError("resolution scale must be positive")
        dp = kwargs.get("particle_distance", scn.target.particle_distance)
        r = kwargs.get("sph_radius", scn.target.sph_radius)
        # snap to a divisor of the particle-region radius
        kwargs["particle_distance"] = r / max(1, round(r / (dp * scale)))
    scn = with_overrides(scn, **kwargs)
    se = getattr(args, "snapshot_every", None)
    if se is not None:
        out = dataclasses.replace(scn.output, snapshot_every=se)
        scn = dataclasses.replace(scn, output=out)
    return scn


def _cmd_run(args):
    scn = _load(args)
    history, sim, report = driver.run_simulation(
        scn, threads=args.threads, out_dir=args.out_dir,
        max_wall_time=args.max_wall_time,
    )
    led = report["energy"]
    print(f"scenario        {scn.name}")
    print(f"terminated      {report['terminated']} "
          f"after {report['steps']} steps, t = {sim.time * 1e6:.1f} us")
    print(f"outcome         {report['outcome']}")
    print(f"v_initial       {report['v_initial']:.1f} m/s")
    print(f"v_residual      {report['v_residual']:.1f} m/s")
    print(f"max penetration {report['max_penetration'] * 1e3:.3f} mm")
    print(f"energy defect   {led['defect']:.3e} J "
          f"({abs(led['defect']) / max(led['initial'], 1e-30):.2%} of initial)")
    return EXIT_OK


def _cmd_limit(args):
    scn = _load(args)
    result = driver.ballistic_limit(
        scn, args.v_lo, args.v_hi, args.tol, threads=args.threads,
        max_wall_time=args.max_wall_time,
    )
    print(f"runs ({len(result.runs)}):")
    for v, vr, outcome in result.runs:
        print(f"  v_i = {v:7.2f} m/s  v_r = {vr:7.2f} m/s  {outcome}")
    print(f"ballistic limit {result.v_bl:.2f} m/s "
          f"(bracket {result.bracket_width:.2f} m/s)")
    return EXIT_OK


def _cmd_sweep(args):
    scn = _load(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    rows = driver.run_sweep(scn, args.axis, values, threads=args.threads,
                            out_dir=args.out_dir,
                            max_wall_time=args.max_wall_time)
    for row in rows:
        if row["error"]:
            print(f"{args.axis} = {row['value']:g}: FAILED {row['error']}")
        else:
            print(f"{args.axis} = {row['value']:g}: "
                  f"v_r = {row['v_residual']:.2f} m/s ({row['outcome']})")
    if args.out_dir:
        import os
        os.makedirs(args.out_dir, exist_ok=True)
        driver.write_sweep(rows, os.path.join(args.out_dir, "sweep.csv"))
    if any(row["error"] for row in rows):
        return EXIT_SEARCH
    return EXIT_OK


def _cmd_verify(args):
    results = checks.run_all()
    failed = 0
    for res in results:
        mark = "ok " if res["passed"] else "FAIL"
        print(f"[{mark}] {res['name']}: {res['detail']}")
        failed += not res["passed"]
    if failed:
        print(f"{failed} of {len(results)} checks failed")
        return EXIT_NUMERICAL
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def _cmd_mesh_info(args):
    scn = _load(args)
    model = geometry.build_model(scn, scn.cards(),
                                 max_particles=scn.numerics.max_particles)
    d = model.diagnostics
    full_vol = geometry.analytic_volume(scn.projectile)
    cards = scn.cards()
    analytic_quarter = 0.25 * full_vol * cards[scn.projectile.material_id].rho0
    print(f"scenario                 {scn.name}")
    print(f"particles                {d['n_particles']}")
    print(f"particle mass            {d['particle_mass'] * 1e3:.4f} g")
    print(f"target particle mass     {d['target_particle_mass_total'] * 1e3:.2f} g")
    print(f"annulus elements         {d['n_annulus_elems']}")
    print(f"annulus mass             {d['annulus_mass'] * 1e3:.2f} g")
    print(f"projectile elements      {d['n_projectile_elems']}")
    print(f"projectile mass (1/4)    {d['projectile_mass_quarter'] * 1e3:.2f} g")
    print(f"projectile mass analytic {analytic_quarter * 1e3:.2f} g "
          f"(error {abs(d['projectile_mass_quarter'] / analytic_quarter - 1):.2%})")
    print(f"interface particles      {len(model.interface_idx)}")
    return EXIT_OK


def _cmd_bench(args):
    result = bench.run_benchmark(n=args.n, repeat=args.repeat)
    print(bench.format_benchmark(result))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="impactsph",
        description="Coupled particle-element plate perforation solver. "
                    f"Bundled scenarios: {', '.join(bundled_names())}.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _add_scenario_args(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("limit", help="bisect for the ballistic limit")
    _add_scenario_args(p)
    p.add_argument("--v-lo", type=float, required=True,
                   help="non-perforating bracket velocity [m/s]")
    p.add_argument("--v-hi", type=float, required=True,
                   help="perforating bracket velocity [m/s]")
    p.add_argument("--tol", type=float, default=10.0,
                   help="bracket tolerance [m/s]")
    p.set_defaults(fn=_cmd_limit)

    p = sub.add_parser("sweep", help="parameter sweep")
    _add_scenario_args(p)
    p.add_argument("--axis", required=True, choices=driver.SWEEP_AXES)
    p.add_argument("--values", required=True,
                   help="comma-separated values (SI units)")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("verify", help="run the built-in verification checks")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("mesh-info", help="print discretization and mass audit")
    _add_scenario_args(p)
    p.set_defaults(fn=_cmd_mesh_info)

    p = sub.add_parser("bench", help="compare compiled vs numpy pair kernels")
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(fn=_cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, geometry.GeometryError, UnitError,
            MaterialError, geometry.ResourceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, MeshError) as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (driver.BracketError, driver.DriverError) as err:
        print(f"search failed: {err}", file=sys.stderr)
        return EXIT_SEARCH


if __name__ == "__main__":
    sys.exit(main())
