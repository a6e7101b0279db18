"""Command-line front end: parse run configs, drive solves, write outputs.

Subcommands:
  run <config>        solve the configured problem, write CSV/VTK/JSON
  bench <id|all>      run registered benchmarks, print a table, write JSON
  partition <config>  geometry-only dry run: write the partition as VTK

The config file is YAML with a fixed schema (unknown keys are rejected and
diagnostics carry the offending key and line). Outputs are deterministic:
identical config and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

import numpy as np
import yaml

from . import bench as bench_mod
from .assembly import assemble_system
from .bench import ErrorReport, grid_cloud, random_rect_cloud, run_case
from .errors import FpmHeatError, IoError, SchemaError
from .geometry import (
    ConvexDomain,
    CrackSpec,
    FaceKind,
    HePolicy,
    PointCloud,
    apply_crack,
    build_partition,
    write_partition_vtk,
)
from .problem import (
    BoundaryData,
    BoundaryRegion,
    DirichletMode,
    MaterialField,
    ProblemSpec,
    Where,
    as_bdata,
    gradation_profile,
    heaviside,
)
from .timeint import BackwardEuler, ForwardEuler, Lvim, LvimConfig, march, solve_steady

_LINE_KEY = "__line__"


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that records the source line of every mapping."""

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[_LINE_KEY] = node.start_mark.line + 1
        return mapping


def _line(mapping, default="?"):
    return mapping.get(_LINE_KEY, default) if isinstance(mapping, dict) else default


def _fail(path: str, line, message: str):
    raise SchemaError(f"{path} (line {line}): {message}")


def _expect_mapping(obj, path, parent_line):
    if not isinstance(obj, dict):
        _fail(path, _line(obj, parent_line), "expected a mapping")
    return obj


def _check_keys(mapping, path, allowed):
    for key in mapping:
        if key == _LINE_KEY:
            continue
        if key not in allowed:
            _fail(f"{path}.{key}", _line(mapping), f"unknown key (allowed: {sorted(allowed)})")


def _require(mapping, path, key):
    if key not in mapping:
        _fail(f"{path}.{key}", _line(mapping), "missing required key")
    return mapping[key]


def _number(value, path, line, positive=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        _fail(path, line, "expected a number")
    if positive and not value > 0:
        _fail(path, line, "must be positive")
    return float(value)


@dataclass
class RunConfig:
    """Validated run configuration."""

    domain: ConvexDomain
    cloud: PointCloud
    problem: ProblemSpec
    crack: CrackSpec | None
    scheme: str
    eta1: float
    eta2: float | None
    he_policy: HePolicy
    lvim: LvimConfig
    dt: float | None
    t_final: float | None
    snapshots: list
    formats: list
    out_dir: str
    reference_benchmark: str | None
    echo: dict


def _build_domain(node, dim_hint=None):
    node = _expect_mapping(node, "domain", "?")
    _check_keys(node, "domain", {"box", "polygon", "vertices"})
    keys = [k for k in ("box", "polygon", "vertices") if k in node]
    if len(keys) != 1:
        _fail("domain", _line(node), "exactly one of box/polygon/vertices is required")
    if keys[0] == "box":
        box = _expect_mapping(node["box"], "domain.box", _line(node))
        _check_keys(box, "domain.box", {"lo", "hi"})
        lo = _require(box, "domain.box", "lo")
        hi = _require(box, "domain.box", "hi")
        if len(lo) != len(hi) or len(lo) not in (2, 3):
            _fail("domain.box", _line(box), "lo/hi must both have length 2 or 3")
        return ConvexDomain.from_box(lo, hi), (np.asarray(lo, float), np.asarray(hi, float))
    if keys[0] == "polygon":
        return ConvexDomain.from_polygon(node["polygon"]), None
    return ConvexDomain.from_convex_vertices(node["vertices"]), None


def _build_points(node, box, seed_override):
    node = _expect_mapping(node, "points", "?")
    _check_keys(node, "points", {"grid", "file", "random"})
    sources = [k for k in ("grid", "file", "random") if k in node]
    if len(sources) != 1:
        _fail("points", _line(node), "exactly one of grid/file/random is required")
    kind = sources[0]
    if kind == "file":
        return PointCloud.from_csv(node["file"])
    if box is None:
        _fail(f"points.{kind}", _line(node), "grid/random layouts need a box domain")
    lo, hi = box
    if kind == "grid":
        grid = _expect_mapping(node["grid"], "points.grid", _line(node))
        _check_keys(grid, "points.grid", {"counts", "include_boundary"})
        counts = _require(grid, "points.grid", "counts")
        if len(counts) != len(lo):
            _fail("points.grid.counts", _line(grid), "counts must match the domain dimension")
        return grid_cloud(lo, hi, counts, bool(grid.get("include_boundary", True)))
    rand = _expect_mapping(node["random"], "points.random", _line(node))
    _check_keys(rand, "points.random", {"n_interior", "per_side", "seed"})
    if len(lo) != 2:
        _fail("points.random", _line(rand), "random layouts are 2D only")
    seed = int(rand.get("seed", 0)) if seed_override is None else int(seed_override)
    return random_rect_cloud(
        lo,
        hi,
        n_interior=int(_require(rand, "points.random", "n_interior")),
        per_side=int(rand.get("per_side", 6)),
        seed=seed,
    )


def _scalar_or_profile(node, path, dim):
    """A scalar material coefficient: number or gradation profile."""
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return float(node)
    node = _expect_mapping(node, path, "?")
    _check_keys(node, path, {"profile"})
    prof = _expect_mapping(_require(node, path, "profile"), f"{path}.profile", _line(node))
    _check_keys(prof, f"{path}.profile", {"kind", "delta", "length", "axis"})
    fn = gradation_profile(
        str(_require(prof, f"{path}.profile", "kind")),
        _number(_require(prof, f"{path}.profile", "delta"), f"{path}.profile.delta", _line(prof)),
        _number(_require(prof, f"{path}.profile", "length"), f"{path}.profile.length", _line(prof), positive=True),
    )
    axis = int(prof.get("axis", 1))
    return lambda pts: fn(np.atleast_2d(pts)[:, axis])


def _tensor_entry(node, path, dim):
    """Conductivity: scalar, matrix, or profile-scaled base matrix."""
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return float(node) * np.eye(dim)
    if isinstance(node, list):
        mat = np.asarray(node, dtype=float)
        if mat.shape != (dim, dim):
            _fail(path, "?", f"matrix must be {dim}x{dim}")
        return mat
    node = _expect_mapping(node, path, "?")
    _check_keys(node, path, {"profile", "base"})
    base = np.asarray(node.get("base", np.eye(dim).tolist()), dtype=float)
    if base.shape != (dim, dim):
        _fail(f"{path}.base", _line(node), f"base must be {dim}x{dim}")
    scale = _scalar_or_profile({k: v for k, v in node.items() if k != "base"}, path, dim)
    return lambda pts: np.asarray(scale(pts))[:, None, None] * base[None, :, :]


def _halfspace_predicate(node, path):
    node = _expect_mapping(node, path, "?")
    _check_keys(node, path, {"halfspace"})
    hs = _expect_mapping(_require(node, path, "halfspace"), f"{path}.halfspace", _line(node))
    _check_keys(hs, f"{path}.halfspace", {"normal", "offset"})
    normal = np.asarray(_require(hs, f"{path}.halfspace", "normal"), dtype=float)
    offset = _number(_require(hs, f"{path}.halfspace", "offset"), f"{path}.halfspace.offset", _line(hs))
    return lambda pts: np.atleast_2d(pts) @ normal <= offset


def _build_material(node, dim):
    node = _expect_mapping(node, "material", "?")
    if "piecewise" in node:
        _check_keys(node, "material", {"piecewise"})
        pieces = node["piecewise"]
        if not isinstance(pieces, list) or not pieces:
            _fail("material.piecewise", _line(node), "expected a non-empty list")
        regions = []
        for i, piece in enumerate(pieces):
            path = f"material.piecewise[{i}]"
            piece = _expect_mapping(piece, path, _line(node))
            _check_keys(piece, path, {"where", "rho", "c", "k"})
            pred = _halfspace_predicate(piece["where"], f"{path}.where") if "where" in piece else None
            if pred is None and i != len(pieces) - 1:
                _fail(f"{path}.where", _line(piece), "only the last piece may omit 'where'")
            mat = MaterialField.from_fields(
                rho=_scalar_or_profile(_require(piece, path, "rho"), f"{path}.rho", dim),
                c=_scalar_or_profile(_require(piece, path, "c"), f"{path}.c", dim),
                k=_tensor_entry(_require(piece, path, "k"), f"{path}.k", dim),
                dim=dim,
            )
            regions.append((pred, mat))
        return MaterialField.piecewise(regions, dim=dim)
    _check_keys(node, "material", {"rho", "c", "k"})
    return MaterialField.from_fields(
        rho=_scalar_or_profile(_require(node, "material", "rho"), "material.rho", dim),
        c=_scalar_or_profile(_require(node, "material", "c"), "material.c", dim),
        k=_tensor_entry(_require(node, "material", "k"), "material.k", dim),
        dim=dim,
    )


def _data_entry(node, path, line):
    """Boundary/source data: a number or {heaviside: {scale: s}}."""
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return float(node)
    node = _expect_mapping(node, path, line)
    _check_keys(node, path, {"heaviside"})
    hs = _expect_mapping(node["heaviside"], f"{path}.heaviside", _line(node))
    _check_keys(hs, f"{path}.heaviside", {"scale"})
    scale = _number(hs.get("scale", 1.0), f"{path}.heaviside.scale", _line(hs))
    return lambda pts, t: np.full(len(np.atleast_2d(pts)), scale * heaviside(t))


def _build_where(node, path):
    node = _expect_mapping(node, path, "?")
    _check_keys(node, path, {"plane", "all"})
    if "all" in node:
        return Where.everywhere()
    plane = _expect_mapping(_require(node, path, "plane"), f"{path}.plane", _line(node))
    _check_keys(plane, f"{path}.plane", {"normal", "offset", "tol"})
    return Where.plane(
        _require(plane, f"{path}.plane", "normal"),
        _number(_require(plane, f"{path}.plane", "offset"), f"{path}.plane.offset", _line(plane)),
        tol=float(plane.get("tol", 1e-9)),
    )


def _build_bcs(node):
    if not isinstance(node, list) or not node:
        raise SchemaError("bcs (line ?): expected a non-empty list of regions")
    regions = []
    for i, item in enumerate(node):
        path = f"bcs[{i}]"
        item = _expect_mapping(item, path, "?")
        _check_keys(item, path, {"name", "kind", "where", "value", "flux", "h", "ambient"})
        kind = str(_require(item, path, "kind")).lower()
        name = str(item.get("name", f"region{i}"))
        where = _build_where(_require(item, path, "where"), f"{path}.where")
        line = _line(item)
        if kind == "dirichlet":
            regions.append(
                BoundaryRegion.dirichlet(name, where, _data_entry(_require(item, path, "value"), f"{path}.value", line))
            )
        elif kind == "neumann":
            regions.append(
                BoundaryRegion.neumann(name, where, _data_entry(item.get("flux", 0.0), f"{path}.flux", line))
            )
        elif kind == "robin":
            h = _number(_require(item, path, "h"), f"{path}.h", line)
            if h < 0:
                _fail(f"{path}.h", line, "Robin h must be non-negative")
            regions.append(
                BoundaryRegion.robin(name, where, h, _data_entry(_require(item, path, "ambient"), f"{path}.ambient", line))
            )
        elif kind == "symmetric":
            regions.append(BoundaryRegion.symmetric(name, where))
        else:
            _fail(f"{path}.kind", line, "must be dirichlet/neumann/robin/symmetric")
    return BoundaryData(regions=tuple(regions))


def _build_crack(node):
    if node is None:
        return None
    node = _expect_mapping(node, "crack", "?")
    _check_keys(node, "crack", {"segment", "polygon"})
    if "segment" in node:
        seg = node["segment"]
        if not isinstance(seg, list) or len(seg) != 2:
            _fail("crack.segment", _line(node), "expected [[x1,y1],[x2,y2]]")
        return CrackSpec.from_segment(seg[0], seg[1])
    return CrackSpec.from_polygon(node["polygon"])


_TOP_KEYS = {
    "domain",
    "points",
    "material",
    "bcs",
    "source",
    "initial",
    "solver",
    "output",
    "crack",
    "reference",
}


def parse_config(path, seed_override=None) -> RunConfig:
    """Read and validate a YAML run configuration."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        raise SchemaError(f"config is not valid YAML: {exc}") from exc
    raw = _expect_mapping(raw, "config", 1)
    _check_keys(raw, "config", _TOP_KEYS)

    domain, box = _build_domain(_require(raw, "config", "domain"))
    cloud = _build_points(_require(raw, "config", "points"), box, seed_override)
    dim = domain.dim
    if cloud.dim != dim:
        raise SchemaError(f"points (line {_line(raw)}): dimension differs from the domain")
    material = _build_material(_require(raw, "config", "material"), dim)
    bcs = _build_bcs(_require(raw, "config", "bcs"))
    crack = _build_crack(raw.get("crack"))

    solver = _expect_mapping(_require(raw, "config", "solver"), "solver", _line(raw))
    _check_keys(
        solver,
        "solver",
        {"scheme", "eta1", "eta2", "he", "nodes", "tol", "dt", "t_final", "dirichlet_mode"},
    )
    sline = _line(solver)
    scheme = str(solver.get("scheme", "lvim")).lower()
    if scheme not in ("lvim", "backward_euler", "forward_euler", "steady"):
        _fail("solver.scheme", sline, "must be lvim/backward_euler/forward_euler/steady")
    eta1 = _number(_require(solver, "solver", "eta1"), "solver.eta1", sline, positive=True)
    eta2 = solver.get("eta2")
    if eta2 is not None:
        eta2 = _number(eta2, "solver.eta2", sline, positive=True)
    he = str(solver.get("he", "face_measure")).lower()
    if he not in ("face_measure", "point_distance"):
        _fail("solver.he", sline, "must be face_measure or point_distance")
    mode = str(solver.get("dirichlet_mode", "strong")).lower()
    if mode not in ("strong", "penalty"):
        _fail("solver.dirichlet_mode", sline, "must be strong or penalty")
    dt = t_final = None
    if scheme != "steady":
        dt = _number(_require(solver, "solver", "dt"), "solver.dt", sline, positive=True)
        t_final = _number(_require(solver, "solver", "t_final"), "solver.t_final", sline, positive=True)
    lvim = LvimConfig(nodes=int(solver.get("nodes", 5)), tol=float(solver.get("tol", 1e-8)))

    source = raw.get("source")
    if source is not None:
        source = _data_entry(source, "source", _line(raw))
    initial = raw.get("initial", 0.0)
    if not isinstance(initial, (int, float)) or isinstance(initial, bool):
        _fail("initial", _line(raw), "expected a number")

    problem = ProblemSpec(
        material=material,
        bcs=bcs,
        source=source,
        initial=float(initial),
        dirichlet_mode=DirichletMode.STRONG if mode == "strong" else DirichletMode.PENALTY,
    )

    output = raw.get("output", {})
    output = _expect_mapping(output, "output", _line(raw)) if output else {}
    if output:
        _check_keys(output, "output", {"directory", "formats", "snapshots"})
    formats = [str(f).lower() for f in output.get("formats", ["csv", "json"])]
    for f in formats:
        if f not in ("csv", "json", "vtk"):
            _fail("output.formats", _line(output) if output else "?", f"unknown format {f!r}")
    snapshots = [float(s) for s in output.get("snapshots", [])]

    reference_benchmark = None
    if "reference" in raw:
        ref = _expect_mapping(raw["reference"], "reference", _line(raw))
        _check_keys(ref, "reference", {"benchmark"})
        reference_benchmark = str(_require(ref, "reference", "benchmark"))
        if reference_benchmark not in bench_mod.REGISTRY:
            _fail("reference.benchmark", _line(ref), f"unknown benchmark {reference_benchmark!r}")

    echo = json.loads(json.dumps(raw, default=str))
    return RunConfig(
        domain=domain,
        cloud=cloud,
        problem=problem,
        crack=crack,
        scheme=scheme,
        eta1=eta1,
        eta2=eta2,
        he_policy=HePolicy.FACE_MEASURE if he == "face_measure" else HePolicy.POINT_DISTANCE,
        lvim=lvim,
        dt=dt,
        t_final=t_final,
        snapshots=snapshots,
        formats=formats,
        out_dir=str(output.get("directory", "out")),
        reference_benchmark=reference_benchmark,
        echo=echo,
    )


def write_temperature_csv(path, partition, snapshots):
    """Nodal CSV: t,id,x,y[,z],u with full double precision."""
    d = partition.dim
    cols = ["t", "id", "x", "y"] + (["z"] if d == 3 else []) + ["u"]
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for t, u in snapshots:
            for i, (x, ui) in enumerate(zip(partition.points.coords, u)):
                coords = ",".join(f"{v:.17g}" for v in x)
                f.write(f"{t:.17g},{i},{coords},{ui:.17g}\n")


def _snapshot_list(trajectory, final, requested, scheme):
    if scheme == "steady":
        return [(0.0, final)]
    if not requested:
        return [(trajectory.times[-1], trajectory.values[-1])]
    return [(t, trajectory.at(t)) for t in requested]


def run(config: RunConfig, out_dir=None, formats=None, dry_run=False) -> dict:
    """Execute a validated config; returns the report dictionary."""
    import pathlib

    out = pathlib.Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = formats or config.formats

    t0 = time.perf_counter()
    partition = build_partition(config.cloud, config.domain)
    if config.crack is not None:
        partition = apply_crack(partition, config.crack)
    partition = config.problem.bcs.classify(partition)
    if dry_run or "vtk" in formats:
        write_partition_vtk(partition, out / "partition.vtk")
    if dry_run:
        return {"partition_vtk": str(out / "partition.vtk"), "points": partition.n}

    from .approximation import gfd_operators
    from .quadrature import build_quadrature

    ops = gfd_operators(partition, partition.points)
    quad = build_quadrature(partition)
    system = assemble_system(
        partition, config.problem, config.eta1, config.eta2, config.he_policy, ops=ops, quad=quad
    )
    t1 = time.perf_counter()

    trajectory = None
    if config.scheme == "steady":
        final = solve_steady(system)
    else:
        u0 = config.problem.initial_values(partition.points.coords)
        scheme_obj = {
            "lvim": Lvim(config.lvim),
            "backward_euler": BackwardEuler(),
            "forward_euler": ForwardEuler(),
        }[config.scheme]
        trajectory = march(system, u0, scheme_obj, dt=config.dt, t_final=config.t_final)
        final = trajectory.values[-1]
    t2 = time.perf_counter()

    report = {
        "points": partition.n,
        "scheme": config.scheme,
        "assemble_time_s": t1 - t0,
        "solve_time_s": t2 - t1,
        "iterations": list(trajectory.iterations) if trajectory is not None else [],
        "config": config.echo,
    }
    if config.reference_benchmark is not None:
        from .bench import Reference, build_case, error_norms

        case = build_case(config.reference_benchmark)
        ref = case.reference
        if callable(ref) and not isinstance(ref, Reference):
            ref = ref(trajectory.times if trajectory is not None else np.array([0.0]))
        t_eval = config.t_final if trajectory is not None else 0.0
        r0, r1 = error_norms(final, ref.value, partition, ops, t=t_eval, gradient=ref.gradient, quad=quad)
        report["r0"] = r0
        report["r1"] = r1

    snaps = _snapshot_list(trajectory, final, config.snapshots, config.scheme)
    if "csv" in formats:
        write_temperature_csv(out / "temperature.csv", partition, snaps)
        report["csv"] = str(out / "temperature.csv")
    if "vtk" in formats:
        for idx, (t, u) in enumerate(snaps):
            write_partition_vtk(partition, out / f"snapshot_{idx:03d}.vtk", {"temperature": u})
    if "json" in formats:
        with open(out / "report.json", "w") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
    return report


def _format_bench_table(reports: list[ErrorReport]) -> str:
    headers = ["id", "scheme", "points", "dt", "r0", "r1", "r0_bar", "iters", "wall_s"]
    rows = []
    for rep in reports:
        cfg = rep.config
        fmt = lambda v: "-" if v is None else f"{v:.3e}"
        rows.append(
            [
                rep.id,
                str(cfg.get("scheme", "?")),
                str(cfg.get("n", "")),
                str(cfg.get("dt", "-")),
                fmt(rep.r0),
                fmt(rep.r1),
                fmt(rep.r0_bar),
                str(max(rep.iterations) if rep.iterations else "-"),
                f"{rep.wall_time_s:.2f}",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fpmheat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a configured problem")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--seed", type=int, default=None, help="random layout seed override")
    p_run.add_argument("--format", default=None, help="comma-separated: csv,vtk,json")
    p_run.add_argument("--dry-run", action="store_true", help="partition only, no solve")

    p_bench = sub.add_parser("bench", help="run registered benchmarks")
    p_bench.add_argument("id", help="benchmark id or 'all'")
    p_bench.add_argument("--out", default=None, help="directory for the JSON report")
    p_bench.add_argument("--json", dest="json_path", default=None, help="JSON report path")

    p_part = sub.add_parser("partition", help="geometry-only dry run")
    p_part.add_argument("config")
    p_part.add_argument("--out", default=None)
    p_part.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config(args.config, seed_override=args.seed)
            formats = args.format.split(",") if args.format else None
            report = run(cfg, out_dir=args.out, formats=formats, dry_run=args.dry_run)
            print(json.dumps({k: v for k, v in report.items() if k != "config"}, indent=2, sort_keys=True))
            return 0
        if args.command == "partition":
            cfg = parse_config(args.config, seed_override=args.seed)
            report = run(cfg, out_dir=args.out, dry_run=True)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0
        ids = bench_mod.list_benchmarks() if args.id == "all" else [args.id]
        reports = [bench_mod.run_benchmark(cid) for cid in ids]
        print(_format_bench_table(reports))
        if args.json_path or args.out:
            import pathlib

            path = pathlib.Path(args.json_path or (pathlib.Path(args.out) / "bench.json"))
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as f:
                json.dump([r.to_dict() for r in reports], f, indent=2, sort_keys=True)
                f.write("\n")
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FpmHeatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
