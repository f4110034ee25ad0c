"""Command line front end and config runner.

Exit codes: 0 success, 1 a hard assertion failed, 2 bad input or config,
3 numerical failure (a diagnostic JSON is written to the output directory).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .builders import (FiniteMetricSpace, grid_graph, hyperbolic_approximation, integer_line,
                       product_graph, regular_tree, tree_children)
from .errors import HypGreenError, InputError
from .hyperbolic import (BoundaryRay, delta_four_point, phi_chain_along_geodesic, ray_between,
                         verify_phi_chain)
from .metric_graph import MetricGraph, read_graph, write_graph
from .potential import martin_convergence
from .schrodinger import (SchrodingerOperator, dirichlet_eigenvalue, green_dirichlet,
                          green_global, resolve_domain)
from . import unfold as uf
from . import verify as vf

EXIT_ASSERT, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3


# -- inputs --------------------------------------------------------------------------------

def load_graph(spec) -> MetricGraph:
    """A graph file, or ``tree:b:depth``, ``line:radius``, ``grid:rows:cols``,
    ``treeprod:b:depth``."""
    path = Path(str(spec))
    if path.exists():
        return read_graph(path)
    parts = str(spec).split(":")
    try:
        kind, args = parts[0], [int(p) for p in parts[1:]]
        if kind == "tree" and len(args) == 2:
            return regular_tree(*args)
        if kind == "line" and len(args) == 1:
            return integer_line(*args)
        if kind == "grid" and len(args) == 2:
            return grid_graph(*args)
        if kind == "treeprod" and len(args) == 2:
            t = regular_tree(*args)
            return product_graph(t, t)
    except ValueError as exc:
        raise InputError(f"cannot parse graph spec {spec!r}") from exc
    raise InputError(f"no graph file or spec {spec!r}")


def load_potential(spec, n):
    """A constant, or a file of ``V <vertex> <value>`` lines (default 0)."""
    if spec is None:
        return np.zeros(n)
    try:
        return np.full(n, float(spec))
    except ValueError:
        pass
    V = np.zeros(n)
    for lineno, raw in enumerate(Path(spec).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if len(line) != 3 or line[0] != "V":
            raise InputError(f"{spec}:{lineno}: expected 'V <vertex> <value>'")
        v = int(line[1])
        if not 0 <= v < n:
            raise InputError(f"{spec}:{lineno}: unknown vertex {v}")
        V[v] = float(line[2])
    return V


def vertex(g, token):
    """A vertex id, or ``down:c:d``: from the root take child ``c``, then
    first children down to depth ``d`` (trees only). ``origin`` and ``root``
    name the graph's base vertex."""
    token = str(token).strip()
    if token in ("origin", "root"):
        return int(g.meta.get("origin", g.meta.get("root", 0)))
    if token.startswith("down:"):
        _, c, d = token.split(":")
        root = g.meta.get("root", 0)
        if "depth" not in g.meta:
            raise InputError("down:c:d tokens need a tree")
        v = tree_children(g, root)[int(c)]
        for _ in range(int(d) - 1):
            kids = tree_children(g, v)
            if not kids:
                break
            v = kids[0]
        return int(v)
    return int(token)


def read_ray(path) -> list:
    return [int(t) for t in Path(path).read_text().split()]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def dump_json(obj, path=None):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def _out(args, name):
    if getattr(args, "out", None):
        p = Path(args.out)
        return p if p.is_absolute() or args.out_dir is None else Path(args.out_dir) / p
    return None


# -- subcommands --------------------------------------------------------------------------

def cmd_build(args):
    if args.kind == "tree":
        g = regular_tree(args.b, args.depth)
    elif args.kind == "hypapprox":
        if not args.space:
            raise InputError("--space is required")
        g = hyperbolic_approximation(FiniteMetricSpace.read(args.space).normalized(), args.levels)
    elif args.kind == "product":
        if not (args.left and args.right):
            raise InputError("--left and --right are required")
        g = product_graph(load_graph(args.left), load_graph(args.right))
    elif args.kind == "line":
        g = integer_line(args.depth)
    else:
        g = grid_graph(args.depth, args.depth)
    out = _out(args, "graph.txt") or Path(args.out_dir or ".") / f"{args.kind}.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_graph(g, out)
    dump_json({"vertices": g.n, "edges": g.m, "path": str(out)})
    return 0


def cmd_delta(args):
    g = load_graph(args.graph)
    d = delta_four_point(g, args.mode, int(float(args.n)), seed=args.seed)
    dump_json({"delta": d, "mode": args.mode, "seed": args.seed}, _out(args, "delta.json"))
    return 0


def cmd_phichain(args):
    g = load_graph(args.graph)
    chain = phi_chain_along_geodesic(g, vertex(g, args.source), vertex(g, args.target), args.delta)
    rep = verify_phi_chain(g, chain)
    rep.pop("samples")
    rep["track_points"] = chain.track_points
    dump_json(rep, _out(args, "chain.json"))
    return 0 if rep["ok"] else EXIT_ASSERT


def _operator(args, g):
    return SchrodingerOperator(g, potential=load_potential(args.potential, g.n))


def cmd_green(args):
    g = load_graph(args.graph)
    op = _operator(args, g)
    y = vertex(g, args.pole)
    if args.omega:
        table = green_dirichlet(op, args.omega, y)
    else:
        table = green_global(op, y, tol=args.tol, R_max=args.rmax)
    d = g.distances_from(y)
    rows = [(int(v), float(d[v]), float(table.values[v])) for v in table.domain]
    out = _out(args, "green.csv")
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["vertex", "distance_to_pole", "value"])
        for r in rows:
            w.writerow([r[0], repr(r[1]), repr(r[2])])
    finally:
        if out:
            fh.close()
    if not table.converged:
        sys.stderr.write("warning: exhaustion did not converge before rmax\n")
    return 0


def cmd_eig(args):
    g = load_graph(args.graph)
    lam = dirichlet_eigenvalue(_operator(args, g), args.omega)
    dump_json({"lambda1": lam, "omega": args.omega}, _out(args, "eig.json"))
    return 0


def cmd_martin(args):
    g = load_graph(args.graph)
    op = _operator(args, g)
    ray = BoundaryRay(int(args.base), read_ray(args.ray)).validate(g)
    depths = [int(t) for t in args.depths.split(",")]
    rep = martin_convergence(op, int(args.base), ray, depths, args.window, omega=args.omega)
    rep.pop("kernels")
    dump_json(rep, _out(args, "martin.json"))
    return 0


def cmd_verify(args):
    g = load_graph(args.graph)
    op = _operator(args, g)
    omega = args.omega or "default"
    if args.check in ("3g", "greenmetric", "growth"):
        chain = phi_chain_along_geodesic(g, vertex(g, args.source), vertex(g, args.target),
                                         args.delta)
        rep = vf.check_3g(op, chain, args.sigma, omega)
        if args.check == "growth":
            rep = vf.check_growth_recovery(op, args.eps, chain, args.sigma, omega)
        elif args.check == "greenmetric":
            pts = chain.track_points
            triples = [(pts[0], y, pts[-1]) for y in pts[1:-1]]
            rep = vf.green_metric_check(op, args.sigma, triples, omega, c3g=rep["c"])
    elif args.check == "decay":
        rep = vf.check_exponential_decay(op, sigma=args.sigma, eps=args.eps, omega=omega,
                                         seed=args.seed)
    elif args.check == "rmp":
        rep = vf.check_relative_max_principle(op, args.eps, vertex(g, args.x), args.r, omega=omega)
    else:  # bhi
        o = g.meta.get("root", 0)
        ray = ray_between(g, o, vertex(g, args.target))
        rep = vf.check_boundary_harnack(op, o, ray, args.i, vertex(g, args.p1),
                                        vertex(g, args.p2), omega=omega)
    dump_json(rep, _out(args, "report.json"))
    return 0


def cmd_unfold(args):
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    rep = unfold_report(args.domain, args.h, checks, seed=args.seed)
    dump_json(rep, _out(args, "unfold.json"))
    return 0


def unfold_report(spec, h, checks, seed=0):
    ds = uf.sample_domain(spec, h)
    op = uf.base_operator(ds)
    rep = {"domain": spec, "h": h, "samples": ds.n}
    for c in checks:
        if c == "uniformity":
            rep["uniformity"] = uf.check_uniformity(ds, seed=seed)
        elif c == "delta":
            rep["delta"] = uf.check_unfolding_hyperbolic(spec, h)
        elif c == "hardy":
            rep["hardy"] = {"C": uf.hardy_constant(op, ds)}
        elif c == "transfer":
            rep["transfer"] = {"residual": uf.transfer_residual(op, ds, seed=seed),
                               "form_defect": uf.form_transfer_defect(op, ds, seed=seed),
                               "max_Vdj2": uf.unfold_operator(op, ds).meta["max_Vdj2"]}
        else:
            raise InputError(f"unknown unfold check {c!r}")
    return rep


# -- config runner ---------------------------------------------------------------------------

def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _run_check(name, params, ctx):
    """One ``[check:NAME]`` section; returns (result, assertions)."""
    kind = params.get("kind", name)
    g, op, omega, seed = ctx.get("graph"), ctx.get("op"), ctx.get("omega"), ctx["seed"]
    asserts = []
    if kind == "delta":
        res = {"delta": delta_four_point(g, params.get("mode", "sampled"),
                                         int(float(params.get("n", 100000))), seed=seed)}
        if "max" in params:
            asserts.append(("delta_le_max", res["delta"] <= float(params["max"])))
    elif kind == "3g":
        chain = phi_chain_along_geodesic(g, vertex(g, params["from"]), vertex(g, params["to"]),
                                         float(params.get("delta", 0.0)))
        res = vf.check_3g(op, chain, float(params.get("sigma", 1.0)), omega)
        res["c_3g"] = res["c"]
        asserts.append(("c_at_least_1", res["c"] >= 1.0))
        if "max_c" in params:
            asserts.append(("c_le_max", res["c"] <= float(params["max_c"])))
    elif kind == "decay":
        res = vf.check_exponential_decay(op, eps=float(params.get("eps", 0.05)), omega=omega,
                                         n_poles=int(params.get("poles", 8)), seed=seed)
        for k in ("distances", "log_green"):
            res.pop(k)
        asserts.append(("alpha2_positive", res["alpha2"] > 0))
        asserts.append(("r2", res["r2"] >= float(params.get("min_r2", 0.95))))
    elif kind == "rmp":
        res = {"eta": {}}
        etas = []
        for eps in _floats(params.get("eps", "0.05 0.1")):
            r = vf.check_relative_max_principle(op, eps, vertex(g, params.get("x", 0)),
                                                float(params.get("r", 3)), omega=omega)
            res["eta"][repr(eps)] = r["eta"]
            etas.append(r["eta"])
        asserts.append(("eta_below_1", all(e < 1 for e in etas)))
        asserts.append(("eta_decreasing", all(b < a for a, b in zip(etas, etas[1:]))))
    elif kind == "bhi":
        o = g.meta.get("root", 0)
        ray = ray_between(g, o, vertex(g, params["ray"]))
        parent = ray.ray[-2]
        c3 = vf.check_3g(op, phi_chain_along_geodesic(g, o, parent, 0.0), omega=omega)["c"]
        res = vf.check_boundary_harnack(op, o, ray, int(params.get("i", 2)),
                                        vertex(g, params["p1"]), vertex(g, params["p2"]),
                                        omega=omega, c3g=c3)
        asserts.append(("hb_le_c3g_4", res["ok"]))
    elif kind == "greenmetric":
        chain = phi_chain_along_geodesic(g, vertex(g, params["from"]), vertex(g, params["to"]),
                                         float(params.get("delta", 0.0)))
        c3 = vf.check_3g(op, chain, omega=omega)["c"]
        pts = chain.track_points
        res = vf.green_metric_check(op, triples=[(pts[0], y, pts[-1]) for y in pts[1:-1]],
                                    omega=omega, c3g=c3)
        asserts.append(("defect_le_log_c", res["ok"]))
    elif kind == "martin":
        o = g.meta.get("root", 0)
        ray = ray_between(g, o, vertex(g, params["ray"]))
        res = martin_convergence(op, o, ray, [int(t) for t in _floats(params["depths"])],
                                 float(params.get("window", 4)))
        res.pop("kernels")
        asserts.append(("cauchy", res["cauchy"]))
    elif kind in ("hardy", "unfold_delta", "transfer", "uniformity"):
        spec, h = ctx["domain"], ctx["h"]
        sub = {"hardy": "hardy", "unfold_delta": "delta", "transfer": "transfer",
               "uniformity": "uniformity"}[kind]
        res = unfold_report(spec, h, [sub], seed=seed)[sub]
        if kind == "hardy":
            asserts.append(("hardy_positive", res["C"] > 0))
        elif kind == "unfold_delta":
            tol = float(params.get("stability", 0.25))
            asserts.append(("delta_stable", abs(res["ratio"] - 1) <= tol))
        elif kind == "transfer":
            asserts.append(("transfer_residual", res["residual"] < 1e-9))
        else:
            res.pop("pairs")
            if "max_c" in params:
                asserts.append(("worst_c_le_max", res["worst_c"] <= float(params["max_c"])))
    else:
        raise InputError(f"unknown check kind {kind!r}")
    return res, [{"check": name, "name": a, "ok": bool(ok)} for a, ok in asserts]


def load_config(path):
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text, source=str(path))
    return cp, text


def run_config(path, seed=None, threads=1, out_dir=None):
    """Execute a config; returns ``(report, exit_code)``."""
    cp, text = load_config(path)
    run = cp["run"] if cp.has_section("run") else {}
    name = run.get("name", Path(path).stem)
    seed = int(run.get("seed", 0)) if seed is None else int(seed)
    ctx = {"seed": seed}
    if cp.has_section("graph"):
        sec = cp["graph"]
        g = load_graph(sec.get("spec") or sec.get("path"))
        ctx["graph"] = g
        opsec = cp["operator"] if cp.has_section("operator") else {}
        ctx["op"] = SchrodingerOperator(g, potential=load_potential(opsec.get("potential"), g.n))
        ctx["omega"] = opsec.get("omega", "default")
    if cp.has_section("domain"):
        ctx["domain"] = cp["domain"].get("spec", "disc")
        ctx["h"] = float(cp["domain"].get("h", 0.04))
    checks = [(s.split(":", 1)[1], dict(cp[s])) for s in cp.sections() if s.startswith("check:")]
    if not checks:
        raise InputError("config has no [check:...] sections")
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        futures = [pool.submit(_run_check, n, p, ctx) for n, p in checks]
        outcomes = [f.result() for f in futures]
    results = {n: res for (n, _), (res, _) in zip(checks, outcomes)}
    asserts = [a for _, al in outcomes for a in al]
    report = {"config": name, "input_sha256": hashlib.sha256(text.encode()).hexdigest(),
              "seed": seed, "versions": {"hypgreen": __version__, "numpy": np.__version__,
                                         "scipy": scipy.__version__},
              "results": results, "assertions": asserts, "ok": all(a["ok"] for a in asserts)}
    out = Path(out_dir or ".") / f"{name}.report.json"
    dump_json(report, out)
    return report, (0 if report["ok"] else EXIT_ASSERT)


def bundled_config(name):
    return resources.files("hypgreen") / "configs" / name


def cmd_run(args):
    path = Path(args.config)
    if not path.exists():
        bundled = bundled_config(args.config)
        if not bundled.is_file():
            raise InputError(f"no config {args.config!r}")
        path = Path(str(bundled))
    report, code = run_config(path, args.seed, args.threads, args.out_dir)
    for a in report["assertions"]:
        print(f"{'PASS' if a['ok'] else 'FAIL'} {a['check']}.{a['name']}")
    return code


# -- parser ---------------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out-dir", default=None)

    p = argparse.ArgumentParser(prog="hypgreen", parents=[common],
                                description="Green functions and hyperbolicity on weighted graphs")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(func=func)
        return sp

    sp = add("build", cmd_build)
    sp.add_argument("kind", choices=["tree", "hypapprox", "product", "line", "grid"])
    sp.add_argument("--b", type=int, default=3)
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--space")
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--left")
    sp.add_argument("--right")
    sp.add_argument("--out")

    sp = add("delta", cmd_delta)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--mode", choices=["exhaustive", "sampled"], default="sampled")
    sp.add_argument("--n", default="1e6")
    sp.add_argument("--out")

    sp = add("phichain", cmd_phichain)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--from", dest="source", required=True)
    sp.add_argument("--to", dest="target", required=True)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--out")

    sp = add("green", cmd_green)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--pole", required=True)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--rmax", type=float, default=None)
    sp.add_argument("--omega")
    sp.add_argument("--potential")
    sp.add_argument("--out")

    sp = add("eig", cmd_eig)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--omega", required=True)
    sp.add_argument("--potential")
    sp.add_argument("--out")

    sp = add("martin", cmd_martin)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--base", type=int, default=0)
    sp.add_argument("--ray", required=True)
    sp.add_argument("--depths", required=True)
    sp.add_argument("--window", type=float, default=4)
    sp.add_argument("--omega", default="interior")
    sp.add_argument("--potential")
    sp.add_argument("--out")

    sp = add("verify", cmd_verify)
    sp.add_argument("check", choices=["3g", "bhi", "decay", "rmp", "greenmetric", "growth"])
    sp.add_argument("--graph", required=True)
    sp.add_argument("--potential")
    sp.add_argument("--omega")
    sp.add_argument("--from", dest="source")
    sp.add_argument("--to", dest="target")
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--x", default="0")
    sp.add_argument("--r", type=float, default=3.0)
    sp.add_argument("--i", type=int, default=2)
    sp.add_argument("--p1")
    sp.add_argument("--p2")
    sp.add_argument("--out")

    sp = add("unfold", cmd_unfold)
    sp.add_argument("--domain", default="disc")
    sp.add_argument("--h", type=float, default=0.04)
    sp.add_argument("--checks", default="uniformity,delta,hardy,transfer")
    sp.add_argument("--out")

    sp = add("run", cmd_run)
    sp.add_argument("config")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command != "run":
        args.seed = 0
    try:
        return args.func(args)
    except (InputError, configparser.Error, KeyError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except HypGreenError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        for attr in ("lambda1", "history"):
            if getattr(exc, attr, None) is not None:
                diag[attr] = getattr(exc, attr)
        if getattr(exc, "iterate", None) is not None:
            it = np.asarray(exc.iterate)
            diag["iterate_norm"] = float(np.linalg.norm(it))
            diag["iterate_head"] = it[:20]
        path = Path(args.out_dir or ".") / "diagnostic.json"
        dump_json(diag, path)
        sys.stderr.write(f"numerical failure: {exc} (details in {path})\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
