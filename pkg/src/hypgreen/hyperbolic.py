"""Gromov products, hyperbolicity constants, boundary proxies and Phi-chains."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .metric_graph import LENGTH_RTOL, MetricGraph, distance_to_set

# Delta floor: with delta = 0 the 4*i*delta spacing of the chain collapses.
DELTA_FLOOR = 0.5
EXHAUSTIVE_LIMIT = 60


def effective_delta(delta):
    return max(float(delta), DELTA_FLOOR)


def gromov_product(g: MetricGraph, x, y, z) -> float:
    """``(x|y)_z = (d(z,x) + d(z,y) - d(x,y)) / 2``."""
    dz = g.distances_from(z)
    return 0.5 * (dz[x] + dz[y] - g.distance(x, y))


def gromov_products_from(g: MetricGraph, z, y) -> np.ndarray:
    """``(x|y)_z`` for every vertex ``x``."""
    dz = g.distances_from(z)
    return 0.5 * (dz + dz[y] - g.distances_from(y))


# -- hyperbolicity constants -------------------------------------------------

def _four_point_from_matrix(D):
    """Exhaustive four-point delta of a full distance matrix."""
    best = 0.0
    for z in range(D.shape[0]):
        P = 0.5 * (D[z][:, None] + D[z][None, :] - D)
        # min((x|w)_z, (w|y)_z) - (x|y)_z indexed [x, w, y]
        val = np.minimum(P[:, :, None], P[None, :, :]) - P[:, None, :]
        best = max(best, float(val.max()))
    return best


def delta_four_point(g: MetricGraph, mode="exhaustive", n_quadruples=1_000_000, seed=0,
                     pool=None, chunk=250_000) -> float:
    """Four-point hyperbolicity constant.

    ``exhaustive`` scans all quadruples (at most 60 vertices, or a given
    ``pool`` of at most 60 vertices). ``sampled`` draws ``n_quadruples``
    quadruples from ``pool`` (all vertices by default); the sample is
    generated up front so the result only depends on ``seed``.
    """
    if mode == "exhaustive":
        verts = np.arange(g.n) if pool is None else np.unique(np.asarray(pool))
        if len(verts) > EXHAUSTIVE_LIMIT:
            raise InputError(f"exhaustive mode is limited to {EXHAUSTIVE_LIMIT} vertices")
        return max(0.0, _four_point_from_matrix(g.distance_matrix(verts)))
    if mode != "sampled":
        raise InputError(f"unknown mode {mode!r}")
    verts = np.arange(g.n) if pool is None else np.unique(np.asarray(pool))
    if len(verts) < 4:
        return 0.0
    if len(verts) > 6000:
        raise InputError("sampling pool too large; pass an explicit pool of <= 6000 vertices")
    D = g.distance_matrix(verts) if len(verts) < g.n else g.distance_matrix()
    rng = np.random.default_rng(seed)
    quads = rng.integers(0, len(verts), size=(int(n_quadruples), 4))
    best = 0.0
    for start in range(0, len(quads), chunk):
        x, y, z, w = quads[start:start + chunk].T
        pxw = 0.5 * (D[z, x] + D[z, w] - D[x, w])
        pwy = 0.5 * (D[z, w] + D[z, y] - D[w, y])
        pxy = 0.5 * (D[z, x] + D[z, y] - D[x, y])
        best = max(best, float((np.minimum(pxw, pwy) - pxy).max()))
    return max(0.0, best)


def delta_thin_triangles(g: MetricGraph, triangles=None, n_samples=2000, seed=0) -> float:
    """Largest distance from a point on one side of a geodesic triangle to
    the union of the other two sides.

    ``triangles`` is an iterable of vertex triples; ``None`` samples
    ``n_samples`` random triples, or all of them when that is fewer.
    """
    if triangles is None:
        if math.comb(g.n, 3) <= n_samples:
            triangles = itertools.combinations(range(g.n), 3)
        else:
            rng = np.random.default_rng(seed)
            triangles = (tuple(rng.choice(g.n, 3, replace=False)) for _ in range(n_samples))
    worst = 0.0
    for a, b, c in triangles:
        sides = [g.geodesic(a, b), g.geodesic(b, c), g.geodesic(c, a)]
        for i in range(3):
            others = set(sides[(i + 1) % 3]) | set(sides[(i + 2) % 3])
            dist = distance_to_set(g, sorted(others))
            worst = max(worst, float(dist[sides[i]].max()))
    return worst


# -- boundary proxies --------------------------------------------------------

@dataclass
class BoundaryRay:
    """Finite geodesic from ``base``; its last vertex stands in for a
    Gromov boundary point."""

    base: int
    ray: list

    def __post_init__(self):
        self.ray = [int(v) for v in self.ray]
        if not self.ray or self.ray[0] != self.base:
            raise InputError("ray must start at its base")

    @property
    def depth(self):
        return len(self.ray) - 1

    @property
    def tip(self):
        return self.ray[-1]

    def validate(self, g: MetricGraph):
        d = g.distances_from(self.base)
        for u, v in zip(self.ray[:-1], self.ray[1:]):
            if g.adjacency[u, v] == 0:
                raise InputError(f"ray vertices {u}, {v} are not adjacent")
            if not d[v] > d[u]:
                raise InputError("ray distances from the base must increase")
        return self

    def point_at(self, g: MetricGraph, t):
        """Ray vertex whose distance from the base is closest to ``t``
        (the smaller one on ties)."""
        d = g.distances_from(self.base)[self.ray]
        return self.ray[int(np.argmin(np.abs(d - t) + 1e-12 * d))]


def ray_between(g: MetricGraph, a, b) -> BoundaryRay:
    return BoundaryRay(int(a), g.geodesic(a, b))


def boundary_quasi_metric(g: MetricGraph, o, rays) -> np.ndarray:
    """Matrix of ``exp(-(tip_i | tip_j)_o)``; zero on the diagonal."""
    rays = list(rays)
    for r in rays:
        if r.base != o:
            raise InputError("all rays must be based at o")
        if r.depth < 2:
            raise InputError("rays of depth < 2 are too short")
    tips = [r.tip for r in rays]
    D = g.distance_matrix(tips)
    do = g.distances_from(o)[tips]
    prod = 0.5 * (do[:, None] + do[None, :] - D)
    out = np.exp(-prod)
    np.fill_diagonal(out, 0.0)
    return out


# -- Phi-chains ----------------------------------------------------------------

@dataclass
class PhiChain:
    """Nested vertex sets with track points.

    ``sets[i]`` is a boolean mask over vertices. The boundary of a set is
    its outer vertex boundary, so track points lie outside their set and
    next to it.
    """

    sets: list
    track_points: list
    phi0: float
    alpha: float = 0.0
    beta: float = 0.0
    delta_used: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.track_points)

    def reversed(self, g: MetricGraph) -> "PhiChain":
        """Complements of the closures, in reverse order, same track points."""
        comps = []
        for s in self.sets[::-1]:
            closed = s.copy()
            closed[g.outer_boundary(s)] = True
            comps.append(~closed)
        return PhiChain(comps, self.track_points[::-1], self.phi0, self.alpha, self.beta,
                        self.delta_used, dict(self.meta, reversed=True))

    def boundary(self, g: MetricGraph, i):
        return g.outer_boundary(self.sets[i])

    def to_dict(self):
        return {"track_points": [int(x) for x in self.track_points], "phi0": self.phi0,
                "alpha": self.alpha, "beta": self.beta, "delta_used": self.delta_used,
                "sets": [np.flatnonzero(s).tolist() for s in self.sets]}


def _endpoint(b):
    return b.tip if isinstance(b, BoundaryRay) else int(b)


def phi_chain_along_geodesic(g: MetricGraph, a, b, delta) -> PhiChain:
    """Chain of sets ``{x : (x|b)_a > 4 i delta}`` with track points on the
    geodesic ``a -> b`` at parameters ``4 i delta``, ``i = 0..n-1`` where
    ``n = floor(d(a, b) / (4 delta))``. ``delta`` is floored at 1/2.
    """
    de = effective_delta(delta)
    step = 4 * de
    if isinstance(b, BoundaryRay):
        if b.base != a:
            raise InputError("ray must be based at a")
        path = b.ray
    else:
        path = g.geodesic(a, b)
    tip = _endpoint(b)
    length = g.distance(a, tip)
    if length < 2 * step:
        raise InputError(f"d(a, b) = {length} is below 8 * delta_eff = {2 * step}")
    n = int(math.floor(length / step + LENGTH_RTOL))
    if n * step >= length - LENGTH_RTOL * max(1.0, length):
        n -= 1  # the last set would be empty
    n += 1
    if n < 3:
        raise InputError("chain too short for 3G (fewer than 3 links)")
    prod = gromov_products_from(g, a, tip)
    ray = BoundaryRay(int(a), path)
    sets, track = [], []
    for i in range(n):
        sets.append(prod > i * step + LENGTH_RTOL * max(1.0, i * step))
        track.append(ray.point_at(g, i * step))
    dists = [g.distance(u, v) for u, v in zip(track[:-1], track[1:])]
    phi0 = max(dists) / 3.0
    return PhiChain(sets, track, phi0, delta_used=de,
                    meta={"a": int(a), "b": int(tip), "step": step})


def verify_phi_chain(g: MetricGraph, chain: PhiChain) -> dict:
    """Check the chain axioms and fit ``Phi(t) = alpha t + beta``.

    ``beta`` is the smallest admissible ``Phi_0`` (a third of the largest
    track spacing). ``alpha`` is the largest slope, capped at 1 by the
    triangle inequality, with ``alpha t + beta <= d(x, boundary of the
    neighbouring sets)`` at every boundary vertex ``x`` of every set,
    ``t = d(x, x_i)``. The chain is ok when the sets are nested, every
    track point lies on its set's boundary, the spacing is within
    ``[beta, 3 beta]`` and the fitted ``alpha`` and ``beta`` are positive.
    """
    m = len(chain.sets)
    if m < 2:
        raise InputError("need at least two sets")
    violations = []
    for i in range(m - 1):
        a, b = chain.sets[i], chain.sets[i + 1]
        if np.any(b & ~a) or not np.any(a & ~b):
            violations.append({"kind": "nesting", "i": i})
    bounds = [chain.boundary(g, i) for i in range(m)]
    for i, x in enumerate(chain.track_points):
        if x not in set(bounds[i].tolist()):
            violations.append({"kind": "track_point_not_on_boundary", "i": i, "x": int(x)})
    spacing = [g.distance(u, v) for u, v in zip(chain.track_points[:-1], chain.track_points[1:])]
    beta = max(spacing) / 3.0 if spacing else 0.0
    if spacing and min(spacing) < beta * (1 - 1e-12):
        violations.append({"kind": "spacing", "spacing": spacing})
    to_bd = [distance_to_set(g, bd) for bd in bounds]
    alpha = 1.0
    samples = []
    for i in range(m):
        dx = g.distances_from(chain.track_points[i])
        for j in (i - 1, i + 1):
            if not 0 <= j < m:
                continue
            for x in bounds[i]:
                t, s = float(dx[x]), float(to_bd[j][x])
                samples.append((i, j, int(x), t, s))
                if t <= 0:
                    if s < beta * (1 - 1e-12):
                        violations.append({"kind": "phi0", "i": i, "x": int(x), "s": s})
                else:
                    alpha = min(alpha, (s - beta) / t)
    ok = (not violations) and alpha > 0 and beta > 0
    if alpha <= 0:
        violations.append({"kind": "alpha", "alpha": alpha})
    return {"ok": bool(ok), "alpha": float(alpha), "beta": float(beta), "phi0": float(beta),
            "violations": violations, "samples": samples}


def phi_neighborhood_basis(g: MetricGraph, o, ray: BoundaryRay, levels, delta=0.0, c=None):
    """Sets ``N_i = {x : (x|tip)_o > c i}``, ``i = 1..levels``.

    The default ``c = 4 delta_eff``; on 0-hyperbolic graphs (trees) any
    ``c > 0`` gives a basis and ``c = 1`` is the finest one. Returns
    ``(sets, hubs, c)``; ``hubs[i - 1]``, the hub of ``(N_i, N_{i+1})``, is
    the ray vertex at parameter ``c (i + 1/2)``.
    """
    if ray.base != o:
        raise InputError("ray must be based at o")
    c = 4 * effective_delta(delta) if c is None else float(c)
    if c <= 0:
        raise InputError("c must be positive")
    depth = g.distance(o, ray.tip)
    if depth < c * levels:
        raise InputError(f"ray depth {depth} too small for {levels} levels (c = {c})")
    prod = gromov_products_from(g, o, ray.tip)
    sets = [prod > c * i + LENGTH_RTOL for i in range(1, levels + 1)]
    hubs = [ray.point_at(g, c * (i + 0.5)) for i in range(1, levels)]
    return sets, hubs, c
