"""Empirical constants for the Green function inequalities.

Each check measures a constant (3G, growth recovery, decay rate,
maximum-principle rate, boundary Harnack, Green-metric defect) on a given
geometry and reports the sampled ratios alongside it.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import InputError
from .hyperbolic import BoundaryRay, PhiChain, effective_delta, phi_neighborhood_basis
from .schrodinger import GreenSolver, SchrodingerOperator, resolve_domain

GREEN_FLOOR = 1e-280


def default_domain(g):
    """Interior of a rooted truncation, otherwise the whole graph."""
    if "root" in g.meta or "origin" in g.meta:
        return "interior"
    return None


def _solver(op, omega, shift=0.0):
    if isinstance(omega, str) and omega == "default":
        omega = default_domain(op.graph)
    return GreenSolver(op, omega, shift=shift)


def _track(chain):
    pts = chain.track_points if isinstance(chain, PhiChain) else list(chain)
    return [int(p) for p in pts]


def _ball_measures(g, pts, sigma):
    return np.array([g.measure_of(g.ball(p, sigma)) for p in pts])


def _check_floor(*arrays):
    for a in arrays:
        if np.any(np.asarray(a) <= GREEN_FLOOR):
            raise InputError("Green value below solver resolution; increase exhaustion")


def check_3g(op: SchrodingerOperator, chain, sigma=1.0, omega="default", separation=0.0,
             solver=None) -> dict:
    """3G ratios ``G(x_m, x_1) / (mu(B_sigma(x_j)) G(x_m, x_j) G(x_j, x_1))``
    over the middle track points of a chain (or any list of vertices)."""
    g = op.graph
    pts = _track(chain)
    if len(pts) < 3:
        raise InputError("need at least three track points")
    D = g.distance_matrix(pts)
    off = D[~np.eye(len(pts), dtype=bool)]
    if separation and off.min() <= separation:
        raise InputError(f"track points closer than the separation {separation}")
    solver = solver or _solver(op, omega)
    cols = solver.columns([pts[0], pts[-1]])
    mid = pts[1:-1]
    g1, gm = cols[mid, 0], cols[mid, 1]
    gm1 = cols[pts[-1], 0]
    _check_floor(g1, gm, gm1)
    ratios = gm1 / (_ball_measures(g, mid, sigma) * gm * g1)
    lo, hi = float(ratios.min()), float(ratios.max())
    return {"c_lower": lo, "c_upper": hi, "c": max(1.0 / lo, hi), "ratios": ratios.tolist(),
            "track": pts, "length": len(pts)}


def check_growth_recovery(op: SchrodingerOperator, shifted, chain: PhiChain, sigma=1.0,
                          omega="default", flat_factor=1.5) -> dict:
    """Ratios ``G(z, x_1) / (mu(B(x_j)) G_-eps(z, x_j) G(x_{j+1}, x_1))``
    for ``z`` on the boundary of ``U_{j+1}``.

    ``shifted`` is ``eps`` or the operator ``L - eps``.
    """
    g = op.graph
    if isinstance(shifted, SchrodingerOperator):
        eps = float(np.max(op.potential - shifted.potential))
    else:
        eps = float(shifted)
    pts = _track(chain)
    m = len(pts)
    if m < 2:
        raise InputError("chain too short")
    solver = _solver(op, omega)
    dom = np.zeros(g.n, dtype=bool)
    dom[solver.domain] = True
    G1 = solver.column(pts[0])
    Geps = _solver(op, solver.domain, shift=eps).columns(pts[:-1])
    mus = _ball_measures(g, pts, sigma)
    per_j = []
    for j in range(m - 1):
        z = chain.boundary(g, j + 1)
        z = z[dom[z]]
        if len(z) == 0:
            per_j.append(float("nan"))
            continue
        _check_floor(Geps[z, j], G1[pts[j + 1]])
        ratio = G1[z] / (mus[j] * Geps[z, j] * G1[pts[j + 1]])
        per_j.append(float(ratio.max()))
    arr = np.array(per_j)
    finite = arr[np.isfinite(arr)]
    worst = float(finite.max())
    return {"eps": eps, "per_j": per_j, "max": worst,
            "flat": bool(worst <= flat_factor * finite[0])}


def check_exponential_decay(op: SchrodingerOperator, poles=None, sigma=1.0, eps=None,
                            omega="default", max_distance=None, n_poles=8, seed=0) -> dict:
    """Least-squares fit of ``ln G(x, y)`` against ``d(x, y)`` for ``d > 2 sigma``.

    With ``eps`` also fits ``ln(G / G_-eps)`` to report ``alpha_1``.
    """
    g = op.graph
    solver = _solver(op, omega)
    if poles is None:
        rng = np.random.default_rng(seed)
        poles = rng.choice(solver.domain, min(n_poles, len(solver.domain)), replace=False)
    poles = [int(p) for p in poles]
    cols = solver.columns(poles)
    ecols = _solver(op, solver.domain, shift=eps).columns(poles) if eps else None
    dist, logg, logr = [], [], []
    for k, p in enumerate(poles):
        d = g.distances_from(p)[solver.domain]
        keep = d > 2 * sigma
        if max_distance is not None:
            keep &= d <= max_distance
        vals = cols[solver.domain, k][keep]
        good = vals > GREEN_FLOOR
        dist.append(d[keep][good])
        logg.append(np.log(vals[good]))
        if ecols is not None:
            logr.append(np.log(vals[good] / ecols[solver.domain, k][keep][good]))
    d = np.concatenate(dist)
    y = np.concatenate(logg)
    if len(d) < 10:
        raise InputError("fewer than 10 pairs with d > 2 sigma")
    slope, intercept = np.polyfit(d, y, 1)
    resid = y - (slope * d + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
    out = {"alpha2": float(-slope), "B": float(math.exp(intercept)), "r2": r2, "pairs": int(len(d)),
           "distances": d.tolist(), "log_green": y.tolist()}
    if ecols is not None:
        yr = np.concatenate(logr)
        s1, i1 = np.polyfit(d, yr, 1)
        out.update(alpha1=float(-s1), A=float(math.exp(i1)), log_ratio_max=float(yr.max()))
    return out


def check_relative_max_principle(op: SchrodingerOperator, eps, x, r, p=None,
                                 omega="default") -> dict:
    """Rate ``eta = (u(x) / u_bar(x))^(1/r)`` with ``u = G(., p)`` and
    ``u_bar`` the resolvent ``G_-eps(., p)`` scaled down until it still
    dominates ``u`` on the sphere ``S_r(x)``.

    The inner region is the open ball ``{d(x, .) < r}``; the default pole
    is the first vertex of ``S_r(x)``.
    """
    g = op.graph
    d = g.distances_from(x)
    sphere = np.flatnonzero(np.abs(d - r) < 1e-9)
    if len(sphere) == 0:
        raise InputError("no vertices at distance r")
    if p is None:
        p = int(sphere[0])
    if d[p] < r - 1e-9:
        raise InputError("pole must lie outside the open ball")
    solver = _solver(op, omega)
    inner = np.flatnonzero(d < r - 1e-9)
    dom = np.zeros(g.n, dtype=bool)
    dom[solver.domain] = True
    if not dom[inner].all() or not dom[sphere].all():
        raise InputError("B_r(x) must lie inside the domain")
    u = solver.column(p)
    ue = _solver(op, solver.domain, shift=eps).column(p)
    scale = float((ue[sphere] / u[sphere]).min())
    ubar = ue / scale
    ratio = u[x] / ubar[x]
    eta = ratio ** (1.0 / r) if r > 0 else 1.0
    return {"eta": float(eta), "ratio": float(ratio), "eps": float(eps), "r": float(r),
            "pole": int(p), "ok": bool(eta < 1.0 or r < 1)}


def boundary_harnack_ratio(u, v, region) -> float:
    q = np.asarray(u)[region] / np.asarray(v)[region]
    return float(q.max() / q.min())


def check_boundary_harnack(op: SchrodingerOperator, o, ray: BoundaryRay, i, p1, p2, levels=None,
                           delta=0.0, c=None, omega="default", c3g=None) -> dict:
    """``HB = max_{x, y in N_{i+1}} u(x) v(y) / (u(y) v(x))`` for the Green
    functions ``u = G(., p1)``, ``v = G(., p2)``."""
    g = op.graph
    if levels is None:
        levels = i + 1
    sets, hubs, cc = phi_neighborhood_basis(g, o, ray, levels, delta=delta, c=c)
    solver = _solver(op, omega)
    region = sets[i] & np.isin(np.arange(g.n), solver.domain)
    if not region.any():
        raise InputError("N_{i+1} is empty")
    if sets[i - 1][p1] or sets[i - 1][p2]:
        raise InputError("poles must lie outside N_i")
    cols = solver.columns([p1, p2])
    hb = boundary_harnack_ratio(cols[:, 0], cols[:, 1], region)
    out = {"HB": hb, "i": int(i), "c": cc, "region_size": int(region.sum())}
    if c3g is not None:
        out.update(c3g=float(c3g), bound=float(c3g) ** 4, ok=bool(hb <= float(c3g) ** 4 * (1 + 1e-9)))
    return out


def green_metric(op, G, x, y, sigma=1.0):
    g = op.graph
    mx = g.measure_of(g.ball(x, sigma))
    my = g.measure_of(g.ball(y, sigma))
    return -math.log(G * math.sqrt(mx * my))


def sample_aligned_triples(g, n, separation, candidates=None, seed=0, max_tries=None):
    """Triples ``(x, y, z)`` with ``y`` on the geodesic ``x -> z`` and both
    sub-distances at least ``separation``."""
    rng = np.random.default_rng(seed)
    cand = np.arange(g.n) if candidates is None else np.asarray(candidates)
    out, tries = [], 0
    max_tries = max_tries or 200 * n
    while len(out) < n and tries < max_tries:
        tries += 1
        x, z = (int(v) for v in rng.choice(cand, 2, replace=False))
        if g.distance(x, z) < 2 * separation:
            continue
        path = g.geodesic(x, z)
        dx = g.distances_from(x)[path]
        ok = [v for v, t in zip(path, dx) if t >= separation and dx[-1] - t >= separation]
        ok = [v for v in ok if v in set(cand.tolist())]
        if ok:
            out.append((x, int(ok[rng.integers(len(ok))]), z))
    return out


def green_metric_check(op: SchrodingerOperator, sigma=1.0, triples=None, omega="default",
                       separation=None, n_triples=50, seed=0, c3g=None, general=None) -> dict:
    """Additivity defect ``|d_G(x,z) - d_G(x,y) - d_G(y,z)|`` on aligned
    triples, and the rough triangle slack on ``general`` triples."""
    g = op.graph
    solver = _solver(op, omega)
    if separation is None:
        separation = 22 * effective_delta(0.0)
    if triples is None:
        triples = sample_aligned_triples(g, n_triples, separation, solver.domain, seed)
    if not triples:
        raise InputError("no aligned triples at this separation")
    poles = sorted({t[0] for t in triples} | {t[1] for t in triples})
    cols = solver.columns(poles)
    col = {p: k for k, p in enumerate(poles)}

    def dG(a, b):
        val = cols[b, col[a]]
        _check_floor(val)
        return green_metric(op, val, a, b, sigma)

    defects = [abs(dG(x, z) - dG(x, y) - dG(y, z)) for x, y, z in triples]
    out = {"max_defect": float(max(defects)), "defects": defects, "triples": len(triples),
           "separation": float(separation)}
    if c3g is not None:
        out.update(bound=math.log(c3g), ok=bool(out["max_defect"] <= math.log(c3g) + 1e-6))
    if general:
        gp = sorted({t[0] for t in general} | {t[1] for t in general})
        gcols = solver.columns(gp)
        gc = {p: k for k, p in enumerate(gp)}
        logc = math.log(c3g) if c3g is not None else out["max_defect"]

        def dg2(a, b):
            return green_metric(op, gcols[b, gc[a]], a, b, sigma)

        slack = [dg2(x, y) + dg2(y, z) + logc - dg2(x, z) for x, y, z in general]
        out["triangle_min_slack"] = float(min(slack))
    return out
