"""Command-line surface: reproducible experiment runs with file reports.

Every run is a pure function of its parsed configuration: reports carry no
timestamps, so identical invocations produce byte-identical JSON/CSV, and
--threads only changes how row blocks are scheduled, never an output bit.
stdout carries a single verdict line plus the report path; everything else
goes to the declared output path.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, dirichlet, experiments, integrate, mmspace, models
from .carnot import (
    Gauge,
    coordinate,
    fundamental_power,
    gauge_power,
    heisenberg,
    horizontal_sqnorm,
    layer2_coordinate,
)
from .fields import ConeTent, Monomial, ShiftedSquareNorm, Tent, harmonic_cubic
from .mmspace import InputError
from .models import CarnotSpace, Euclidean, FlatCone, HalfSpace


@dataclass
class RunConfig:
    command: str
    space: str | None = None
    field_name: str | None = None
    phi: str | None = None
    point: str | None = None
    region: str | None = None
    radii: str | None = None
    scheme: str | None = None
    seed: int = 0
    out: str | None = None
    tolerance: float | None = None
    threads: int = 1
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def parse_radii(spec: str) -> list[float]:
    """Either a comma list '0.5,0.25' or a geometric 'r0:count:ratio'."""
    if ":" in spec:
        tok = spec.split(":")
        if len(tok) != 3:
            raise InputError(f"geometric radii spec must be r0:count:ratio, got {spec!r}")
        return experiments.default_radii(float(tok[0]), int(tok[1]), float(tok[2]))
    return experiments.check_radii([float(v) for v in spec.split(",")])


def parse_point(spec: str) -> np.ndarray:
    return np.array([float(v) for v in spec.split(",")], dtype=np.float64)


def build_field(space, name: str):
    """Field catalog by CLI name; see README for the list."""
    tok = name.split(":")
    dim = space.dim
    if tok[0] in ("sq1", "sq2", "sq3"):
        i = int(tok[0][2]) - 1
        if i >= dim:
            raise InputError(f"{tok[0]} needs at least {i + 1} coordinates")
        exps = [0] * dim
        exps[i] = 2
        return Monomial(dim, exps)
    if tok[0] == "coord" and len(tok) == 2:
        return coordinate(dim, int(tok[1]) - 1)
    if tok[0] == "monomial" and len(tok) == 2:
        return Monomial(dim, [int(e) for e in tok[1].split(",")])
    if tok[0] == "harmonic3":
        return harmonic_cubic(dim)
    if tok[0] == "hsq":
        if isinstance(space, CarnotSpace):
            return horizontal_sqnorm(space.group)
        return ShiftedSquareNorm(dim, 0, dim)
    if isinstance(space, CarnotSpace):
        if tok[0] == "layer2" and len(tok) == 2:
            return layer2_coordinate(space.group, int(tok[1]) - 1)
        if tok[0] == "folland":
            return fundamental_power(space.group)
        if tok[0] == "gaugepow" and len(tok) == 2:
            return gauge_power(space.group, space.gauge, float(tok[1]))
    raise InputError(f"unknown field {name!r} for space kind {space.kind!r}")


def build_phi(space, name: str):
    tok = name.split(":")
    if tok[0] == "tent" and len(tok) == 4:
        return Tent(space.dim, parse_point(tok[1]), float(tok[2]), float(tok[3]))
    if tok[0] == "conetent" and len(tok) == 3:
        return ConeTent(float(tok[1]), float(tok[2]))
    raise InputError(f"unknown pairing function {name!r}")


def default_cloud(space, cells: int, seed: int, threads: int = 1):
    """Canned discretizations per space kind (see README)."""
    if isinstance(space, Euclidean):
        if space.dim != 2:
            raise InputError("canned clouds ship for 2-d spaces")
        return models.euclidean_cloud(space, [-1.5, -1.5], [1.5, 1.5], cells, seed, threads=threads)
    if isinstance(space, HalfSpace):
        if space.dim != 2:
            raise InputError("canned clouds ship for 2-d spaces")
        return models.half_space_cloud(
            space, hi=[2.0, 2.0], cells_per_axis=[cells // 2, cells], seed=seed, lo=[0.0, -2.0],
            threads=threads,
        )
    if isinstance(space, FlatCone):
        return models.cone_cloud(space, rho_max=1.4, n_rho=cells // 2, n_phi=cells, seed=seed,
                                 threads=threads)
    raise InputError(f"no canned cloud for the {space.kind} kind")


def _write_report(report: experiments.ExperimentReport, cfg: RunConfig) -> str:
    report.metadata["config"] = cfg.to_dict()
    report.metadata["version"] = __version__
    out = cfg.out or f"{cfg.command}.json"
    with open(out, "w") as f:
        f.write(report.to_json() + "\n")
    csv_path = out[:-5] + ".csv" if out.endswith(".json") else out + ".csv"
    with open(csv_path, "w") as f:
        f.write(report.to_csv())
    return out


def _finish(report, cfg: RunConfig) -> int:
    path = _write_report(report, cfg)
    print(f"{report.verdict.upper()} {cfg.command}: limit {report.fitted_limit!r} "
          f"(reference {report.reference!r}, tolerance {report.tolerance!r}) -> {path}")
    return 0 if report.verdict == "pass" else 1


def _auto_reference(space, u, x) -> float | None:
    """Known small-scale limits: trace Hessian / (2(n+2)) on flat space,
    group constant times the horizontal Laplacian on a Carnot group."""
    try:
        if isinstance(space, Euclidean):
            tr = float(np.trace(u.hessian(x[None, :])[0]))
            return tr / (2.0 * (space.dim + 2))
        if isinstance(space, CarnotSpace):
            from .carnot import sub_laplacian

            c = integrate.carnot_constant(space.group, space.gauge, integrate.GridScheme(24))
            return c.value * float(sub_laplacian(space.group, u, x[None, :])[0])
    except (NotImplementedError, InputError, models.NumericError):
        return None
    return None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_identities(args) -> int:
    cfg = RunConfig(
        command="identities",
        seed=args.seed,
        out=args.out,
        extras={"count": args.count, "size_max": args.size_max, "fault_inject": args.fault_inject},
    )
    summary = mmspace.run_identity_suite(args.count, args.size_max, args.seed, args.fault_inject)
    summary["config"] = cfg.to_dict()
    out = cfg.out or "identities.json"
    with open(out, "w") as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write("\n")
    worst = max(summary["worst"].values()) if summary["worst"] else 0.0
    status = "PASS" if summary["ok"] else "FAIL"
    print(f"{status} identities: {args.count} instances, worst residual {worst!r} -> {out}")
    return 0 if summary["ok"] else 1


def cmd_amv_sweep(args) -> int:
    cfg = RunConfig(
        command="amv-sweep", space=args.space, field_name=args.field, point=args.point,
        radii=args.radii, scheme=args.scheme, seed=args.seed, out=args.out,
        tolerance=args.tolerance, threads=args.threads,
    )
    space = models.parse_space(args.space)
    u = build_field(space, args.field)
    x = parse_point(args.point)
    radii = parse_radii(args.radii)
    scheme = integrate.parse_scheme(args.scheme)
    reference = args.reference if args.reference is not None else _auto_reference(space, u, x)
    report = experiments.amv_sweep(
        space, u, x, radii, scheme, reference=reference, tolerance=args.tolerance, threads=args.threads
    )
    return _finish(report, cfg)


def cmd_strong_scan(args) -> int:
    cfg = RunConfig(
        command="strong-scan", space=args.space, field_name=args.field, radii=args.radii,
        scheme=args.scheme, seed=args.seed, out=args.out, tolerance=args.tolerance,
        threads=args.threads,
        extras={"annulus": args.annulus, "grid_size": args.grid_size},
    )
    space = models.parse_space(args.space)
    if not isinstance(space, CarnotSpace):
        raise InputError("strong-scan grids are gauge annuli; use a carnot space")
    u = build_field(space, args.field)
    lo, hi = (float(v) for v in args.annulus.split(","))
    grid = experiments.gauge_annulus_grid(space, lo, hi, args.grid_size, args.seed)
    report = experiments.strong_amv_scan(
        space, u, grid, parse_radii(args.radii), integrate.parse_scheme(args.scheme),
        reference=args.reference, tolerance=args.tolerance, threads=args.threads,
    )
    return _finish(report, cfg)


def cmd_weak_sweep(args, sym: bool = False) -> int:
    name = "sym-vs-plain" if sym else "weak-sweep"
    cfg = RunConfig(
        command=name, space=args.space, field_name=args.field, phi=args.phi,
        radii=args.radii, seed=args.seed, out=args.out, tolerance=args.tolerance,
        threads=args.threads, extras={"cloud_cells": args.cloud_cells},
    )
    space = models.parse_space(args.space)
    cloud, pts, meta = default_cloud(space, args.cloud_cells, args.seed, args.threads)
    u = build_field(space, args.field)
    phi = build_phi(space, args.phi)
    radii = parse_radii(args.radii)
    fn = experiments.sym_vs_plain_sweep if sym else experiments.weak_amv_sweep
    report = fn(cloud, pts, meta, u, phi, radii, reference=args.reference, tolerance=args.tolerance)
    return _finish(report, cfg)


def cmd_mm_boundary(args) -> int:
    cfg = RunConfig(
        command="mm-boundary", space=args.space, region=args.region, radii=args.radii,
        out=args.out, tolerance=args.tolerance,
    )
    space = models.parse_space(args.space)
    region = models.parse_region(args.region)
    reference = args.reference
    if reference is None:
        if isinstance(space, (Euclidean, FlatCone)):
            reference = 0.0
        elif isinstance(space, HalfSpace) and region.kind == "unit":
            reference = 2.0 / (3.0 * math.pi)
    report = experiments.mm_boundary_sweep(
        space, region, parse_radii(args.radii), reference=reference, tolerance=args.tolerance
    )
    return _finish(report, cfg)


def cmd_carnot_constant(args) -> int:
    cfg = RunConfig(
        command="carnot-constant", space=f"carnot:{args.preset}:{args.gauge}",
        scheme=f"mc:{args.mc_n}:{args.seed}", seed=args.seed, out=args.out,
        extras={"grid_res": args.grid_res},
    )
    group, gauge = _parse_group_gauge(args.preset, args.gauge, args.beta)
    grid_est, mc_est = integrate.carnot_constant_checked(
        group, gauge, integrate.MCScheme(args.mc_n, integrate.SeedSpec(args.seed)),
        grid_res=args.grid_res, threads=args.threads,
    )
    out = cfg.out or "carnot-constant.json"
    payload = {
        "grid": json.loads(grid_est.to_json()),
        "mc": json.loads(mc_est.to_json()),
        "config": cfg.to_dict(),
    }
    with open(out, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
    print(f"PASS carnot-constant: grid {grid_est.value!r} mc {mc_est.value!r} -> {out}")
    return 0


def cmd_isotropy(args) -> int:
    cfg = RunConfig(
        command="isotropy", space=f"carnot:{args.preset}:{args.gauge}",
        scheme=args.scheme, seed=args.seed, out=args.out,
        extras={"directions": args.directions},
    )
    group, gauge = _parse_group_gauge(args.preset, args.gauge, args.beta)
    rng = np.random.default_rng(args.seed)
    dirs = rng.standard_normal((args.directions, group.v1))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    ests = integrate.isotropy_check(
        group, gauge, dirs, integrate.parse_scheme(args.scheme), threads=args.threads
    )
    vals = [e.value for e in ests]
    ratio = max(vals) / min(vals)
    out = cfg.out or "isotropy.json"
    payload = {
        "estimates": [json.loads(e.to_json()) for e in ests],
        "directions": dirs.tolist(),
        "max_over_min": ratio,
        "config": cfg.to_dict(),
    }
    with open(out, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
    ok = ratio <= 1.0 + args.tolerance
    print(f"{'PASS' if ok else 'FAIL'} isotropy: max/min {ratio!r} over {args.directions} directions -> {out}")
    return 0 if ok else 1


def cmd_dirichlet(args) -> int:
    cfg = RunConfig(
        command="dirichlet", out=args.out,
        extras={"space_file": args.space_file, "mask_file": args.mask_file, "r": args.r},
    )
    space = mmspace.load_space(args.space_file)
    boundary_idx = []
    boundary_val = []
    with open(args.mask_file) as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            tok = ln.split()
            if len(tok) != 2:
                raise InputError(f"boundary mask lines are '<index> <value>', got {ln!r}")
            boundary_idx.append(int(tok[0]))
            boundary_val.append(float(tok[1]))
    interior = np.setdiff1d(np.arange(space.n), np.asarray(boundary_idx, dtype=int))
    part = dirichlet.BoundaryPartition(interior, boundary_idx, boundary_val)
    u = dirichlet.solve(space, part, args.r)
    out = cfg.out or "dirichlet-solution.txt"
    mmspace.save_field(u, out)
    resid = dirichlet.residual(space, part, u, args.r)
    report_path = out + ".json"
    with open(report_path, "w") as f:
        json.dump(
            {"residual": resid, "interior": interior.tolist(), "config": cfg.to_dict()},
            f, sort_keys=True, indent=2,
        )
        f.write("\n")
    print(f"PASS dirichlet: residual {resid!r} -> {out}")
    return 0


def cmd_bpz_demo(args) -> int:
    cfg = RunConfig(
        command="bpz-demo", space=f"carnot:{args.preset}:{args.gauge}",
        field_name=args.field, seed=args.seed, out=args.out, tolerance=args.tolerance,
        extras={"R": args.R, "resolutions": args.resolutions, "level_radii": args.level_radii},
    )
    group, gauge = _parse_group_gauge(args.preset, args.gauge, args.beta)
    space = CarnotSpace(group, gauge)
    u = build_field(space, args.field)
    report = dirichlet.bpz_demo(
        group, gauge, u, args.R,
        [int(v) for v in args.resolutions.split(",")],
        [float(v) for v in args.level_radii.split(",")],
        seed=args.seed, tolerance=args.tolerance, threads=args.threads,
    )
    return _finish(report, cfg)


def _parse_group_gauge(preset: str, gauge_name: str, beta: float | None):
    tok = preset.split(":")
    if tok[0] != "heisenberg" or len(tok) != 2:
        raise InputError(f"unknown group preset {preset!r} (use heisenberg:n)")
    group = heisenberg(int(tok[1]))
    if gauge_name == "koranyi":
        return group, Gauge("koranyi")
    if gauge_name in ("scaled", "scaled_koranyi"):
        if beta is None:
            raise InputError("scaled gauge needs --beta")
        return group, Gauge("scaled_koranyi", beta)
    raise InputError(f"unknown gauge {gauge_name!r}")


# ---------------------------------------------------------------------------


def _common(p, scheme_default=None):
    p.add_argument("--radii", default="0.4:6:0.5", help="comma list or r0:count:ratio")
    if scheme_default:
        p.add_argument("--scheme", default=scheme_default, help="mc:n:seed or grid:res")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report path (JSON; CSV written alongside)")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=1,
                   help="row-block parallelism; never changes output bits")
    p.add_argument("--reference", type=float, default=None)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="amvlab",
        description="Finite-scale mean value calculus: operators, constants, and sweeps.",
    )
    ap.add_argument("--version", action="version", version=f"amvlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identities", help="exact operator-identity suite on random finite spaces")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--size-max", type=int, default=40)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None)
    p.add_argument("--fault-inject", action="store_true",
                   help="perturb one mass as a negative control (must exit 1)")
    p.set_defaults(fn=cmd_identities)

    p = sub.add_parser("amv-sweep", help="finite-scale laplacian at a point across radii")
    p.add_argument("space")
    p.add_argument("--field", required=True)
    p.add_argument("--point", required=True)
    _common(p, scheme_default="grid:16")
    p.set_defaults(fn=cmd_amv_sweep)

    p = sub.add_parser("strong-scan", help="sup over a gauge annulus grid per radius")
    p.add_argument("space")
    p.add_argument("--field", required=True)
    p.add_argument("--annulus", default="1.0,2.0")
    p.add_argument("--grid-size", type=int, default=50)
    _common(p, scheme_default="grid:14")
    p.set_defaults(fn=cmd_strong_scan)

    p = sub.add_parser("weak-sweep", help="pairing against the r-laplacian on a cloud")
    p.add_argument("space")
    p.add_argument("--field", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--cloud-cells", type=int, default=64)
    _common(p)
    p.set_defaults(fn=cmd_weak_sweep)

    p = sub.add_parser("sym-vs-plain", help="pairing against (plain - symmetrized) laplacian")
    p.add_argument("space")
    p.add_argument("--field", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--cloud-cells", type=int, default=64)
    _common(p)
    p.set_defaults(fn=lambda a: cmd_weak_sweep(a, sym=True))

    p = sub.add_parser("mm-boundary", help="scaled density-deficit mass across radii")
    p.add_argument("space")
    p.add_argument("--region", default="unit")
    _common(p)
    p.set_defaults(fn=cmd_mm_boundary)

    p = sub.add_parser("carnot-constant", help="mean value constant, grid and MC cross-checked")
    p.add_argument("preset", help="heisenberg:n")
    p.add_argument("gauge", help="koranyi or scaled")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--mc-n", type=int, default=10_000_000)
    p.add_argument("--grid-res", type=int, default=32)
    p.add_argument("--seed", type=int, default=20260809)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_carnot_constant)

    p = sub.add_parser("isotropy", help="directional second moments over the unit gauge ball")
    p.add_argument("preset")
    p.add_argument("gauge")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--scheme", default="mc:10000000:17")
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_isotropy)

    p = sub.add_parser("dirichlet", help="solve a boundary value problem from space + mask files")
    p.add_argument("space_file")
    p.add_argument("mask_file")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_dirichlet)

    p = sub.add_parser("bpz-demo", help="reproduce a harmonic field from gauge-ball boundary data")
    p.add_argument("preset")
    p.add_argument("gauge")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--field", default="coord:1")
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--resolutions", default="12,16,20")
    p.add_argument("--level-radii", default="0.5,0.44,0.38")
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=0.08)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bpz_demo)

    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, models.NumericError) as exc:
        print(f"ERROR {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
