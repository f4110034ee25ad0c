"""Grid samples of planar domains and their quasi-hyperbolic unfoldings.

A sample keeps the axis grid points ``h Z^N`` with boundary distance
``dj > h/2``. Grid neighbours that fall outside the sample are treated as
Dirichlet (zero) values; their links appear as a killing term in the base
operator so that ``E`` is the form of functions vanishing off the sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import spearmanr

from .errors import InputError
from .hyperbolic import _four_point_from_matrix, boundary_quasi_metric, BoundaryRay
from .metric_graph import MetricGraph
from .schrodinger import SchrodingerOperator, dirichlet_eigenvalue, dirichlet_solve, resolve_domain

L_SHAPE = np.array([(-1, -1), (0, -1), (0, 0), (1, 0), (1, 1), (-1, 1)], float)


# -- boundary distances -------------------------------------------------------------------

def _segment_distance(p, a, b):
    """Distance from points ``p`` (k, 2) to the segment ``a b``."""
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def _polyline_distance(p, verts, closed=True):
    segs = list(zip(verts, np.roll(verts, -1, axis=0))) if closed else \
        list(zip(verts[:-1], verts[1:]))
    return np.min([_segment_distance(p, a, b) for a, b in segs], axis=0)


def _inside_polygon(p, verts):
    """Even-odd rule; points on edges count as outside by the dj > 0 test anyway."""
    x, y = p[:, 0], p[:, 1]
    inside = np.zeros(len(p), dtype=bool)
    for (x1, y1), (x2, y2) in zip(verts, np.roll(verts, -1, axis=0)):
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


class _CuspBoundary:
    """Region ``{0 < x < 1, |y| < x^q}``; distance to the curved sides by a
    dense polyline refined around the nearest nodes."""

    def __init__(self, q, resolution=1e-4):
        self.q = q
        s = np.linspace(0.0, 1.0, int(1.0 / resolution) + 1) ** 1.5  # denser near the tip
        upper = np.column_stack([s, s ** q])
        self.curve = upper
        self.tree = cKDTree(upper)

    def distance(self, p):
        m = len(self.curve)
        mirrored = p.copy()
        mirrored[:, 1] = np.abs(p[:, 1])
        _, k = self.tree.query(mirrored, k=1)
        k = k % m
        best = np.full(len(p), np.inf)
        for off in (-1, 0):
            i = np.clip(k + off, 0, m - 2)
            a, b = self.curve[i], self.curve[i + 1]
            ab = b - a
            t = np.clip(np.einsum("ij,ij->i", mirrored - a, ab) / np.einsum("ij,ij->i", ab, ab),
                        0, 1)
            best = np.minimum(best, np.linalg.norm(mirrored - (a + t[:, None] * ab), axis=1))
        side = np.abs(1.0 - p[:, 0])
        capped = np.where(np.abs(p[:, 1]) <= 1.0, side, np.hypot(side, np.abs(p[:, 1]) - 1.0))
        return np.minimum(best, capped)

    def inside(self, p):
        return (p[:, 0] > 0) & (p[:, 0] < 1) & (np.abs(p[:, 1]) < p[:, 0] ** self.q)


def parse_domain(spec):
    """``disc``, ``square``, ``slit``, ``lshape``, ``interval`` or ``cusp:q``."""
    spec = str(spec).strip().lower()
    if spec.startswith("cusp"):
        parts = spec.split(":")
        q = float(parts[1]) if len(parts) > 1 else 2.0
        if q <= 1:
            raise InputError("cusp power must exceed 1")
        return "cusp", q
    if spec in ("disc", "square", "slit", "lshape", "interval"):
        return spec, None
    raise InputError(f"unknown domain {spec!r}")


def boundary_distance(spec, pts):
    """Exact distance to the boundary (``0`` outside the domain)."""
    kind, q = parse_domain(spec)
    pts = np.atleast_2d(np.asarray(pts, float))
    if kind == "interval":
        x = pts[:, 0]
        return np.clip(np.minimum(x, 1.0 - x), 0.0, None)
    if kind == "disc":
        return np.clip(1.0 - np.linalg.norm(pts, axis=1), 0.0, None)
    if kind == "square":
        x, y = pts[:, 0], pts[:, 1]
        return np.clip(np.minimum.reduce([x, 1 - x, y, 1 - y]), 0.0, None)
    if kind == "slit":
        disc = np.clip(1.0 - np.linalg.norm(pts, axis=1), 0.0, None)
        slit = _segment_distance(pts, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
        return np.minimum(disc, slit)
    if kind == "lshape":
        d = _polyline_distance(pts, L_SHAPE)
        return np.where(_inside_polygon(pts, L_SHAPE), d, 0.0)
    cusp = _CuspBoundary(q)
    return np.where(cusp.inside(pts), cusp.distance(pts), 0.0)


_BOXES = {"interval": ([0.0], [1.0]), "disc": ([-1.0, -1.0], [1.0, 1.0]),
          "square": ([0.0, 0.0], [1.0, 1.0]), "slit": ([-1.0, -1.0], [1.0, 1.0]),
          "lshape": ([-1.0, -1.0], [1.0, 1.0]), "cusp": ([0.0, -1.0], [1.0, 1.0])}


# -- samples ---------------------------------------------------------------------------------

@dataclass
class DomainSample:
    spec: str
    h: float
    points: np.ndarray
    dj: np.ndarray
    graph: MetricGraph
    killing: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n(self):
        return len(self.points)

    def nearest(self, p):
        """Sample index closest to ``p``."""
        return int(np.argmin(np.linalg.norm(self.points - np.asarray(p, float), axis=1)))


def sample_domain(spec, h) -> DomainSample:
    kind, _ = parse_domain(spec)
    if not h > 0:
        raise InputError("h must be positive")
    lo, hi = (np.array(v) for v in _BOXES[kind])
    axes = [np.arange(math.ceil(a / h - 1e-9), math.floor(b / h + 1e-9) + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    pts = grid * h
    dj = boundary_distance(spec, pts)
    keep = dj > h / 2
    grid, pts, dj = grid[keep], pts[keep], dj[keep]
    if len(pts) == 0:
        raise InputError("h too large: no sample points")
    offset = grid.min(axis=0) - 1
    local = grid - offset
    index = np.full(tuple(local.max(axis=0) + 2), -1, dtype=np.int64)
    index[tuple(local.T)] = np.arange(len(pts))
    edges, killing = [], np.zeros(len(pts))
    for ax in range(grid.shape[1]):
        for step in (1, -1):
            nb = local.copy()
            nb[:, ax] += step
            j = index[tuple(nb.T)]
            killing += j < 0
            if step == 1:
                ok = j >= 0
                edges.append(np.column_stack([np.flatnonzero(ok), j[ok]]))
    edges = np.vstack(edges)
    try:
        g = MetricGraph(len(pts), edges, np.full(len(edges), h), np.full(len(pts), h ** len(axes)))
    except InputError as exc:
        raise InputError(f"sample of {spec} is disconnected at h = {h}; use a smaller h") from exc
    g.meta.update(coords=pts, dj=dj)
    return DomainSample(str(spec), float(h), pts, dj, g, killing)


def base_operator(ds: DomainSample, potential=0.0) -> SchrodingerOperator:
    """Finite-difference operator on the sample: conductance ``h^(N-2)``,
    measure ``h^N`` and the Dirichlet links as killing ``k / h^2``."""
    N, h = ds.dim, ds.h
    V = np.broadcast_to(np.asarray(potential, float), (ds.n,)) + ds.killing / h ** 2
    return SchrodingerOperator(ds.graph, h ** (N - 2), V, np.full(ds.n, h ** N))


def _diagonal_edges(ds: DomainSample):
    """Pairs of samples at grid offset ``(1, +-1)`` (2D only)."""
    key = np.rint(ds.points / ds.h).astype(np.int64)
    offset = key.min(axis=0) - 1
    local = key - offset
    index = np.full(tuple(local.max(axis=0) + 2), -1, dtype=np.int64)
    index[tuple(local.T)] = np.arange(ds.n)
    out = []
    for dy in (1, -1):
        nb = local + np.array([1, dy])
        j = index[tuple(nb.T)]
        ok = j >= 0
        out.append(np.column_stack([np.flatnonzero(ok), j[ok]]))
    return np.vstack(out)


def quasi_hyperbolic_graph(ds: DomainSample, diagonals=True) -> MetricGraph:
    """Edge length ``|x - y| (1/dj(x) + 1/dj(y)) / 2``, measure ``h^N / dj^N``.

    In 2D the diagonal grid neighbours are joined as well, which removes
    most of the l1 anisotropy of the axis stencil from the metric.
    """
    e = ds.graph.edges
    if diagonals and ds.dim == 2:
        e = np.vstack([e, _diagonal_edges(ds)])
    euclid = np.linalg.norm(ds.points[e[:, 0]] - ds.points[e[:, 1]], axis=1)
    lengths = euclid * 0.5 * (1.0 / ds.dj[e[:, 0]] + 1.0 / ds.dj[e[:, 1]])
    mu = ds.h ** ds.dim / ds.dj ** ds.dim
    g = MetricGraph(ds.n, e, lengths, mu, validate=False)
    g.meta.update(coords=ds.points, dj=ds.dj, h=ds.h, spec=ds.spec)
    return g


def lipschitz_defect(ds: DomainSample) -> float:
    """``max (|dj(x) - dj(y)| - |x - y|)`` over edges; nonpositive when dj is 1-Lipschitz."""
    e = ds.graph.edges
    euclid = np.linalg.norm(ds.points[e[:, 0]] - ds.points[e[:, 1]], axis=1)
    return float((np.abs(ds.dj[e[:, 0]] - ds.dj[e[:, 1]]) - euclid).max(initial=-np.inf))


# -- uniformity ---------------------------------------------------------------------------------

def curve_constant(ds: DomainSample, path) -> tuple:
    """Smallest ``c`` for the length and double-cone conditions along ``path``."""
    p = ds.points[path]
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    chord = np.linalg.norm(p[-1] - p[0])
    c_len = total / chord if chord > 0 else 1.0
    c_cone = float((np.minimum(arc, total - arc) / ds.dj[path]).max())
    return float(c_len), c_cone


def default_pairs(ds: DomainSample, n_pairs=40, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.choice(ds.n, size=(n_pairs, 2))
    return [(int(a), int(b)) for a, b in idx if a != b]


def check_uniformity(ds: DomainSample, pairs=None, c=None, qh=None, n_pairs=40, seed=0) -> dict:
    """Worst uniformity constant over quasi-hyperbolic geodesics between pairs.

    Pairs may be sample indices or coordinates (mapped to the nearest sample).
    """
    qh = qh or quasi_hyperbolic_graph(ds)
    if pairs is None:
        pairs = default_pairs(ds, n_pairs, seed)
    resolved = []
    for a, b in pairs:
        a = a if np.isscalar(a) else ds.nearest(a)
        b = b if np.isscalar(b) else ds.nearest(b)
        resolved.append((int(a), int(b)))
    per = []
    for a, b in resolved:
        c_len, c_cone = curve_constant(ds, qh.geodesic(a, b))
        per.append(max(c_len, c_cone))
    per = np.array(per)
    out = {"worst_c": float(per.max()), "per_pair": per.tolist(), "pairs": resolved}
    if c is not None:
        out["uniform_fraction"] = float((per <= c).mean())
    return out


# -- hyperbolicity of the unfolding ------------------------------------------------------------

def anchor_pool(ds: DomainSample, size=60, levels=None, seed=0):
    """Deterministic spread of sample points over depth levels.

    Levels are geometric in ``dj`` from its maximum down to ``2h``; each
    level receives a farthest-point spread of samples near that depth.
    """
    dmax = float(ds.dj.max())
    dmin = max(2.0 * ds.h, dmax * 1e-6)
    if levels is None:
        levels = max(2, int(math.floor(math.log2(dmax / dmin))) + 1)
    depths = dmax * (dmin / dmax) ** (np.arange(levels) / max(levels - 1, 1))
    per = max(1, size // levels)
    chosen = []
    for dl in depths:
        band = np.flatnonzero(np.abs(np.log(ds.dj / dl)) < 0.35)
        if len(band) == 0:
            band = np.array([int(np.argmin(np.abs(ds.dj - dl)))])
        pick = [int(band[np.argmax(ds.dj[band])])]
        dmin_to = np.linalg.norm(ds.points[band] - ds.points[pick[0]], axis=1)
        while len(pick) < min(per, len(band)):
            k = int(np.argmax(dmin_to))
            if dmin_to[k] <= 0:
                break
            pick.append(int(band[k]))
            dmin_to = np.minimum(dmin_to, np.linalg.norm(ds.points[band] - ds.points[band[k]],
                                                         axis=1))
        chosen.extend(pick)
    pool = list(dict.fromkeys(chosen))[:size]
    return np.array(sorted(pool))


def unfolding_delta(ds: DomainSample, qh=None, pool=None, size=60) -> dict:
    qh = qh or quasi_hyperbolic_graph(ds)
    if pool is None:
        pool = anchor_pool(ds, size)
    D = qh.distance_matrix(pool)
    return {"delta": max(0.0, _four_point_from_matrix(D)), "pool": np.asarray(pool).tolist(),
            "diameter": float(D.max())}


def check_unfolding_hyperbolic(spec, h, size=60, factor=2.0) -> dict:
    """Four-point delta of the unfolding at ``h`` and ``h / factor``."""
    out = {"spec": str(spec), "h": [float(h), float(h / factor)], "delta": [], "diameter": []}
    for hh in (h, h / factor):
        r = unfolding_delta(sample_domain(spec, hh), size=size)
        out["delta"].append(r["delta"])
        out["diameter"].append(r["diameter"])
    d0, d1 = out["delta"]
    out["ratio"] = d1 / d0 if d0 > 0 else (1.0 if d1 == 0 else math.inf)
    return out


def boundary_correspondence(ds: DomainSample, n_rays=24, qh=None, center=(0.0, 0.0)) -> dict:
    """Spearman correlation between the boundary quasi-metric of radial
    rays and the Euclidean distance of their boundary endpoints."""
    qh = qh or quasi_hyperbolic_graph(ds)
    o = ds.nearest(center)
    angles = 2 * np.pi * np.arange(n_rays) / n_rays
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    ends = np.array(center) + dirs
    rays = []
    for p in ends:
        depth_pt = np.array(center) + (p - np.array(center)) * (1 - 2 * ds.h)
        tip = ds.nearest(depth_pt)
        rays.append(BoundaryRay(o, qh.geodesic(o, tip)))
    dq = boundary_quasi_metric(qh, o, rays)
    de = np.linalg.norm(ends[:, None] - ends[None, :], axis=2)
    iu = np.triu_indices(n_rays, 1)
    rho = spearmanr(dq[iu], de[iu]).statistic
    return {"spearman": float(rho), "rays": n_rays}


# -- Hardy inequality and the unfolded operator -------------------------------------------------

def hardy_constant(op: SchrodingerOperator, ds: DomainSample, tol=1e-9) -> float:
    """Smallest ``C`` with ``E(u, u) >= C sum u^2 dj^-2 mu`` (generalized eigenvalue)."""
    weight = op.mu / ds.dj ** 2
    scaled = SchrodingerOperator(op.graph, op.conductance, op.potential * op.mu / weight, weight)
    return dirichlet_eigenvalue(scaled, None, tol=tol)


def unfold_operator(op: SchrodingerOperator, ds: DomainSample, N=None, cap=None) -> SchrodingerOperator:
    """Operator of ``E'(u, v) = E(dj^-a u, dj^-a v)``, ``a = (N - 2)/2``, on
    ``L^2(dj^-N mu)``.

    ``cap`` bounds ``|V'| dj^2``; exceeding it is flagged in
    ``meta['vdj2_exceeds_cap']`` of the returned operator.
    """
    N = ds.dim if N is None else N
    a = (N - 2) / 2.0
    h = ds.dj ** (-a)
    e = op.graph.edges
    w = op.conductance * h[e[:, 0]] * h[e[:, 1]]
    Lh = op.apply(h)
    mu_h = h * h * op.mu
    mu_new = ds.dj ** (-N) * op.mu
    V_new = (Lh / h) * mu_h / mu_new
    out = SchrodingerOperator(op.graph, w, V_new, mu_new)
    vd2 = float(np.abs(V_new).max())  # V_new = (L h / h) dj^2
    out.meta.update({"N": N, "transfer_exponent": a, "max_Vdj2": vd2,
                     "vdj2_exceeds_cap": bool(cap is not None and vd2 > cap)})
    return out


def transfer_residual(op: SchrodingerOperator, ds: DomainSample, N=None, omega=None, seed=0,
                      trials=3) -> float:
    """Max relative unfold-residual of ``dj^a u`` for base-harmonic ``u``.

    ``u`` solves the base Dirichlet problem on ``omega`` (default: samples
    with ``dj > 4h``) with random positive data on the rest.
    """
    N = ds.dim if N is None else N
    a = (N - 2) / 2.0
    un = unfold_operator(op, ds, N)
    g = ds.graph
    dom = np.flatnonzero(ds.dj > 4 * ds.h) if omega is None else resolve_domain(g, omega)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        f = rng.uniform(0.5, 1.5, ds.n)
        u = dirichlet_solve(op, dom, f=f)
        v = ds.dj ** a * u
        scale = (abs(un.stiffness()) @ np.abs(v) / un.mu)[dom]
        worst = max(worst, float((np.abs(un.apply(v)[dom]) / scale).max()))
    return worst


def form_transfer_defect(op: SchrodingerOperator, ds: DomainSample, N=None, seed=0) -> float:
    """``|E'(u, v) - E(dj^-a u, dj^-a v)|`` relative, on random vectors."""
    N = ds.dim if N is None else N
    a = (N - 2) / 2.0
    un = unfold_operator(op, ds, N)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, ds.n))
    lhs = un.energy(u, v)
    s = ds.dj ** (-a)
    rhs = op.energy(s * u, s * v)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)
