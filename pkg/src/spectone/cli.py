"""Command-line entry point: ``spectone <verb> ...``."""

import argparse
import json
import sys
from pathlib import Path

from . import catalog, spectrum
from .errors import SpectoneError
from .mesh import read_mesh, write_mesh


def _write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report['scenario']}.json"
    path.write_text(catalog.report_to_json(report))
    for name in catalog.available_series(report):
        catalog.emit_plot_data(report, name, out / f"{report['scenario']}.{name}.csv")
    return path


def _summary(report):
    lines = [f"{report['scenario']}: {report['status']}"]
    if report.get("failure"):
        f = report["failure"]
        lines.append(f"  stage {f['stage']} failed: {f['error']}: {f['message']}")
    for key, v in sorted(report.get("verdicts", {}).items()):
        margin = v.get("margin")
        mtxt = "n/a" if margin is None else f"{margin:.6g}"
        lines.append(f"  {key:<34} {v['verdict']:<13} margin={mtxt} unc={v.get('uncertainty', 0.0):.3g}")
    for mm in report.get("expected_mismatches", []):
        lines.append(f"  expected {mm['verdict']} in {mm['expected']}, computed {mm['computed']}")
    return "\n".join(lines)


def cmd_run(args):
    reports = catalog.run_catalog(args.config, threads=args.threads)
    failed = False
    for ref, report in reports.items():
        print(_summary(report))
        if args.out:
            print(f"  report: {_write_report(report, args.out)}")
        failed |= report["status"] != "ok"
    return 1 if failed else 0


def cmd_list(args):
    for name, desc in catalog.list_scenarios():
        print(f"{name:<24} {desc}")
    return 0


def cmd_plot(args):
    report = json.loads(Path(args.report).read_text())
    text = catalog.emit_plot_data(report, args.series, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _scenario_mesh(ref, which, eps):
    from . import tone

    scen = catalog.load_scenario(ref)
    objs, _ = catalog._build(scen)
    cfg = scen.data.get("mesh", {})
    if which == "domain":
        if cfg.get("domain", "none") == "none":
            raise SpectoneError(f"scenario {scen.name} has no domain mesh")
        return objs, catalog._domain_meshes(objs, cfg)[0]
    report = catalog.run_scenario(scen, strict=True)
    cand = report["stages"]["candidate"]
    if cand["kind"] == "thm3":
        defining = tone.h_composed_defining(objs.imm, objs.spec, cand["R"])
    else:
        defining = tone.norm_xtop_defining(objs.imm, objs.fld, cand["R_used"])
    dom = tone.exhaustion_domain(objs.imm, defining, eps, int(cfg.get("band_along", 48)),
                                 int(cfg.get("band_across", 8)), axis=int(cfg.get("band_axis", 1)),
                                 center=cfg.get("band_center"))
    return objs, dom.mesh


def cmd_mesh(args):
    if args.action == "export":
        _, mesh = _scenario_mesh(args.config, args.which, args.eps)
        write_mesh(mesh, args.path)
        print(f"wrote {args.path}: {mesh.n_vertices} vertices, {len(mesh.cells)} cells")
        return 0
    mesh = read_mesh(args.path)
    print(f"{args.path}: m={mesh.m} vertices={mesh.n_vertices} cells={len(mesh.cells)} "
          f"boundary={int(mesh.boundary.sum())} h={mesh.h:.6g}")
    if args.config:
        objs, _ = catalog._build(catalog.load_scenario(args.config))
        res = spectrum.dirichlet_eigenvalue(objs.imm, mesh)
        print(f"lambda1={res.lambda1:.12g} residual={res.residual:.3e}")
    return 0


def cmd_tone(args):
    report = catalog.run_scenario(args.config)
    if report["status"] != "ok":
        print(_summary(report), file=sys.stderr)
    stages = report.get("stages", {})
    if args.action == "bound":
        if "exhaustion" in report.get("series", {}):
            sys.stdout.write(catalog.emit_plot_data(report, "exhaustion"))
        else:
            print(json.dumps({"candidate": stages.get("candidate"), "domain": stages.get("domain")}, indent=1,
                             sort_keys=True))
    elif args.action == "sweep":
        print(json.dumps(stages.get("cheeger"), indent=1, sort_keys=True))
    else:
        print(json.dumps({"tone": stages.get("tone"), "verdicts": report.get("verdicts")}, indent=1,
                         sort_keys=True))
    return 0 if report["status"] == "ok" else 1


def build_parser():
    p = argparse.ArgumentParser(prog="spectone", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run scenarios (built-in names or config files)")
    r.add_argument("config", nargs="+")
    r.add_argument("--out", help="directory for the report document and CSV side files")
    r.add_argument("--threads", type=int, default=None,
                   help=f"concurrent scenarios (default: ${catalog.THREADS_ENV} or 1)")
    r.set_defaults(func=cmd_run)

    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)

    pl = sub.add_parser("plot", help="extract a plot series from a report as CSV")
    pl.add_argument("report")
    pl.add_argument("series")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)

    m = sub.add_parser("mesh", help="export or import meshes in the vertex/cell text format")
    msub = m.add_subparsers(dest="action", required=True)
    me = msub.add_parser("export")
    me.add_argument("config")
    me.add_argument("path")
    me.add_argument("--which", choices=("domain", "band"), default="domain")
    me.add_argument("--eps", type=float, default=0.2)
    mi = msub.add_parser("import")
    mi.add_argument("path")
    mi.add_argument("--config", help="scenario whose immersion supplies the metric for an eigenvalue solve")
    m.set_defaults(func=cmd_mesh)

    t = sub.add_parser("tone", help="tone bounds, Cheeger sweeps and inequality reports")
    t.add_argument("action", choices=("bound", "sweep", "report"))
    t.add_argument("config")
    t.set_defaults(func=cmd_tone)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpectoneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
