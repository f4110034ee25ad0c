"""Benchmark graph families."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConstructionError, InputError
from .metric_graph import MetricGraph

DEFAULT_CAP = 2_000_000


class FiniteMetricSpace:
    """A finite metric space given by its distance matrix."""

    def __init__(self, dist, points=None, validate=True, atol=1e-12):
        self.dist = np.asarray(dist, dtype=float)
        n = self.dist.shape[0]
        self.points = list(range(n)) if points is None else list(points)
        if validate:
            d = self.dist
            if d.shape != (n, n) or n == 0:
                raise InputError("distance matrix must be square and nonempty")
            if not np.allclose(d, d.T, atol=atol) or np.any(np.abs(np.diag(d)) > atol):
                raise InputError("distance matrix must be symmetric with zero diagonal")
            off = d[~np.eye(n, dtype=bool)]
            if np.any(off <= 0):
                raise InputError("distinct points must have positive distance")
            # triangle inequality: d[i,k] <= d[i,j] + d[j,k]
            viol = d[:, None, :] - d[:, :, None] - d[None, :, :]
            if viol.max() > atol * max(1.0, d.max()):
                raise InputError("triangle inequality violated")

    @property
    def n(self):
        return len(self.points)

    @property
    def diameter(self):
        return float(self.dist.max())

    def normalized(self):
        dm = self.diameter
        if dm == 0:
            return self
        return FiniteMetricSpace(self.dist / dm, self.points, validate=False)

    @classmethod
    def read(cls, path):
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
        try:
            n = int(rows[0][0])
            mat = np.array([[float(t) for t in r] for r in rows[1:n + 1]])
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}: malformed metric space file") from exc
        if mat.shape != (n, n):
            raise InputError(f"{path}: expected {n} rows of {n} values")
        return cls(mat)

    def write(self, path):
        lines = [str(self.n)] + [" ".join(repr(float(v)) for v in row) for row in self.dist]
        Path(path).write_text("\n".join(lines) + "\n")


def circle_points(k, normalize=True) -> FiniteMetricSpace:
    """``k`` equally spaced points on a circle with the arc-length metric."""
    idx = np.arange(k)
    gap = np.abs(idx[:, None] - idx[None, :])
    arc = np.minimum(gap, k - gap) * (2 * np.pi / k)
    space = FiniteMetricSpace(arc)
    return space.normalized() if normalize else space


# -- elementary graphs -------------------------------------------------------

def path_graph(n, length=1.0) -> MetricGraph:
    e = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return MetricGraph(n, e, np.full(n - 1, float(length)))


def integer_line(radius) -> MetricGraph:
    """The segment ``{-radius..radius}`` of Z; vertex ``radius`` is the origin."""
    g = path_graph(2 * radius + 1)
    g.meta.update(origin=radius, coords=np.arange(-radius, radius + 1))
    return g


def cycle_graph(n) -> MetricGraph:
    e = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return MetricGraph(n, e)


def grid_graph(rows, cols) -> MetricGraph:
    vid = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()])
    vert = np.column_stack([vid[:-1, :].ravel(), vid[1:, :].ravel()])
    g = MetricGraph(rows * cols, np.vstack([horiz, vert]))
    g.meta["coords"] = np.column_stack(np.divmod(np.arange(rows * cols), cols))
    return g


def random_graph(n, p=0.15, seed=0, length_range=None) -> MetricGraph:
    """Erdos-Renyi graph plus a random spanning path, so it is connected."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    edges = {(min(a, b), max(a, b)) for a, b in zip(perm[:-1], perm[1:])}
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges |= set(zip(iu[keep].tolist(), ju[keep].tolist()))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    if length_range is None:
        lengths = np.ones(len(edges))
    else:
        lengths = rng.uniform(*length_range, size=len(edges))
    return MetricGraph(n, edges, lengths)


# -- benchmark families ------------------------------------------------------

def regular_tree(b, depth, cap=DEFAULT_CAP) -> MetricGraph:
    """Ball of radius ``depth`` in the ``b``-regular tree, root = vertex 0.

    Vertices are numbered breadth first; ``meta['depth']`` and
    ``meta['parent']`` record the rooted structure.
    """
    if b < 3 or depth < 1:
        raise InputError("regular_tree needs b >= 3 and depth >= 1")
    n = 1 + b * sum((b - 1) ** k for k in range(depth))
    if n > cap:
        raise InputError(f"tree would have {n} vertices (cap {cap})")
    parent = np.full(n, -1, dtype=np.int64)
    level = np.zeros(n, dtype=np.int64)
    frontier = [0]
    nxt = 1
    for d in range(1, depth + 1):
        new = []
        for v in frontier:
            kids = b if v == 0 else b - 1
            parent[nxt:nxt + kids] = v
            level[nxt:nxt + kids] = d
            new.extend(range(nxt, nxt + kids))
            nxt += kids
        frontier = new
    edges = np.column_stack([parent[1:], np.arange(1, n)])
    g = MetricGraph(n, edges, validate=False)
    g.meta.update(kind="tree", b=b, depth=level, parent=parent, radius=depth, root=0)
    return g


def tree_children(g: MetricGraph, v):
    parent = g.meta["parent"]
    return [int(u) for u in g.neighbors(v) if parent[u] == v]


def tree_leaf_below(g: MetricGraph, v, choice=0):
    """Follow child number ``choice`` (mod number of children) down to a leaf."""
    while True:
        kids = tree_children(g, v)
        if not kids:
            return int(v)
        v = kids[choice % len(kids)]


def _greedy_net(dist, candidates, r):
    chosen = []
    for p in candidates:
        if all(dist[p, q] > r for q in chosen):
            chosen.append(p)
    return chosen


def hyperbolic_approximation(Z: FiniteMetricSpace, levels) -> MetricGraph:
    """Level graph over greedy ``2^-k``-nets of ``Z``, ``k = 0..levels``.

    Level ``k`` keeps a point when it is farther than ``2^-k`` from all
    points already kept (id order). Horizontal edges join level-``k``
    vertices within ``4 * 2^-k``; vertical edges join levels ``k`` and
    ``k+1`` within ``2 * 2^-k``. All edges have unit length.
    """
    if Z.n < 1:
        raise InputError("empty metric space")
    if Z.diameter > 1 + 1e-12:
        raise InputError("normalize the metric space to diameter <= 1 first")
    d = Z.dist
    order = list(range(Z.n))
    nets = [_greedy_net(d, order, 2.0 ** -k) for k in range(levels + 1)]
    vid, owner, lvl = {}, [], []
    for k, net in enumerate(nets):
        for p in net:
            vid[(k, p)] = len(owner)
            owner.append(p)
            lvl.append(k)
    edges = []
    for k, net in enumerate(nets):
        r = 2.0 ** -k
        for i, p in enumerate(net):
            for q in net[i + 1:]:
                if d[p, q] <= 4 * r:
                    edges.append((vid[(k, p)], vid[(k, q)]))
            if k < levels:
                for q in nets[k + 1]:
                    if d[p, q] <= 2 * r:
                        edges.append((vid[(k, p)], vid[(k + 1, q)]))
    n = len(owner)
    try:
        g = MetricGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    except InputError as exc:
        raise ConstructionError(f"hyperbolic approximation failed: {exc}") from exc
    g.meta.update(kind="hypapprox", level=np.array(lvl), point=np.array(owner),
                  nets=nets, vid=vid, root=0, levels=levels)
    return g


def hypapprox_ray(g: MetricGraph, point):
    """Vertex path from the basepoint down to ``point``'s deepest vertex."""
    levels = g.meta["levels"]
    k = levels
    while (k, point) not in g.meta["vid"]:
        k -= 1
    return g.geodesic(0, g.meta["vid"][(k, point)])


def product_graph(g1: MetricGraph, g2: MetricGraph, cap=DEFAULT_CAP) -> MetricGraph:
    """Cartesian product; vertex ``(a, b)`` has id ``a * g2.n + b``."""
    n1, n2 = g1.n, g2.n
    if n1 * n2 > cap:
        raise InputError(f"product would have {n1 * n2} vertices (cap {cap})")
    a = np.arange(n1)[:, None]
    b = np.arange(n2)[None, :]
    e1 = [np.column_stack([(u * n2 + b).ravel(), (v * n2 + b).ravel()]) for u, v in g1.edges]
    l1 = [np.full(n2, ln) for ln in g1.lengths]
    e2 = [np.column_stack([(a * n2 + u).ravel(), (a * n2 + v).ravel()]) for u, v in g2.edges]
    l2 = [np.full(n1, ln) for ln in g2.lengths]
    edges = np.vstack(e1 + e2) if (e1 or e2) else np.zeros((0, 2), dtype=np.int64)
    lengths = np.concatenate(l1 + l2) if (l1 or l2) else np.zeros(0)
    mu = np.outer(g1.mu, g2.mu).ravel()
    g = MetricGraph(n1 * n2, edges, lengths, mu, validate=False)
    g.meta.update(kind="product", factors=(n1, n2))
    return g


def product_vertex(g: MetricGraph, a, b):
    return int(a) * g.meta["factors"][1] + int(b)
