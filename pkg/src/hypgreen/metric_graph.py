"""Weighted graphs viewed as geodesic metric measure spaces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import InputError

# Relative tolerance used when comparing path lengths (tie detection).
LENGTH_RTOL = 1e-9


@dataclass
class GeometryConstants:
    """Measured bounded-geometry constants of a graph/operator pair.

    These are reported estimates, never certified bounds.
    """

    sigma: float = 1.0
    N: float = 0.0
    C_P: float = 0.0
    C_D: float = 0.0
    k_bound: float = 0.0
    epsilon: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        for name in ("N", "C_P", "C_D", "k_bound", "epsilon", "delta"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative")


class MetricGraph:
    """Connected undirected graph with positive edge lengths and vertex measure.

    Vertices are ``0..n-1``. ``edges`` is an ``(m, 2)`` integer array with
    ``u < v`` and ``lengths`` the matching positive lengths. Builders may put
    structural information (tree depths, coordinates, factor sizes) in
    ``meta``.
    """

    def __init__(self, n, edges, lengths=None, mu=None, meta=None, validate=True):
        self.n = int(n)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if lengths is None:
            lengths = np.ones(len(edges))
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if mu is None:
            mu = np.ones(self.n)
        self.mu = np.asarray(mu, dtype=float).reshape(-1).copy()
        # canonical orientation u < v
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        self.edges = np.column_stack([lo, hi])
        self.lengths = lengths.copy()
        self.meta = dict(meta or {})
        if validate:
            self._validate()
        self._adj = sp.csr_matrix(
            (np.concatenate([self.lengths, self.lengths]),
             (np.concatenate([self.edges[:, 0], self.edges[:, 1]]),
              np.concatenate([self.edges[:, 1], self.edges[:, 0]]))),
            shape=(self.n, self.n))
        self._adj.sort_indices()
        self._rows: dict[int, np.ndarray] = {}
        self._all_pairs = None
        self.mu.setflags(write=False)
        self.edges.setflags(write=False)
        self.lengths.setflags(write=False)

    def _validate(self):
        if self.n < 1:
            raise InputError("graph needs at least one vertex")
        if len(self.mu) != self.n:
            raise InputError("mu must have one entry per vertex")
        if len(self.lengths) != len(self.edges):
            raise InputError("one length per edge required")
        if np.any(self.mu <= 0) or not np.all(np.isfinite(self.mu)):
            raise InputError("vertex measure must be positive")
        if len(self.edges):
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise InputError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise InputError("self-loops are not allowed")
            if np.any(self.lengths <= 0) or not np.all(np.isfinite(self.lengths)):
                raise InputError("edge lengths must be positive")
            key = self.edges[:, 0] * self.n + self.edges[:, 1]
            if len(np.unique(key)) != len(key):
                raise InputError("duplicate edges")
        if self.n > 1:
            ncomp, _ = csgraph.connected_components(
                sp.coo_matrix((np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
                              shape=(self.n, self.n)), directed=False)
            if ncomp != 1:
                raise InputError(f"graph is not connected ({ncomp} components)")

    # -- basic structure -------------------------------------------------

    @property
    def m(self):
        return len(self.edges)

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric CSR matrix of edge lengths."""
        return self._adj

    def neighbors(self, x):
        self._check(x)
        a = self._adj
        return a.indices[a.indptr[x]:a.indptr[x + 1]]

    def degree(self, x=None):
        deg = np.diff(self._adj.indptr)
        return deg if x is None else int(deg[x])

    def with_mu(self, mu):
        """Same graph with another vertex measure."""
        g = MetricGraph(self.n, self.edges, self.lengths, mu, self.meta, validate=False)
        if np.any(g.mu <= 0):
            raise InputError("vertex measure must be positive")
        return g

    def _check(self, x):
        if not (0 <= int(x) < self.n) or int(x) != x:
            raise InputError(f"unknown vertex id {x!r}")

    # -- distances -------------------------------------------------------

    def distances_from(self, x) -> np.ndarray:
        """Shortest-path distances from ``x`` to every vertex (cached)."""
        self._check(x)
        x = int(x)
        if self._all_pairs is not None:
            return self._all_pairs[x]
        row = self._rows.get(x)
        if row is None:
            row = csgraph.dijkstra(self._adj, directed=False, indices=x)
            row.setflags(write=False)
            if len(self._rows) > 4096:
                self._rows.clear()
            self._rows[x] = row
        return row

    def distance_matrix(self, vertices=None) -> np.ndarray:
        """Distances between the given vertices (all vertices by default)."""
        if vertices is None:
            if self._all_pairs is None:
                d = csgraph.dijkstra(self._adj, directed=False)
                d.setflags(write=False)
                self._all_pairs = d
            return self._all_pairs
        vertices = np.asarray(vertices, dtype=np.int64)
        if self._all_pairs is not None:
            return self._all_pairs[np.ix_(vertices, vertices)]
        missing = [int(v) for v in np.unique(vertices) if int(v) not in self._rows]
        if missing:
            rows = csgraph.dijkstra(self._adj, directed=False, indices=missing)
            for v, row in zip(missing, np.atleast_2d(rows)):
                row.setflags(write=False)
                self._rows[v] = row
        return np.array([self._rows[int(v)][vertices] for v in vertices])

    def distance(self, x, y) -> float:
        self._check(y)
        return float(self.distances_from(x)[int(y)])

    def eccentricity(self, x) -> float:
        return float(self.distances_from(x).max())

    def geodesic(self, x, y) -> list[int]:
        """A shortest path from ``x`` to ``y``.

        Walking back from ``y``, the smallest-id admissible predecessor is
        taken, so the result is deterministic.
        """
        self._check(y)
        dx = self.distances_from(x)
        x, y = int(x), int(y)
        tol = LENGTH_RTOL * max(1.0, dx[y])
        path = [y]
        cur = y
        a = self._adj
        while cur != x:
            lo, hi = a.indptr[cur], a.indptr[cur + 1]
            nbrs, lens = a.indices[lo:hi], a.data[lo:hi]
            ok = np.abs(dx[nbrs] + lens - dx[cur]) <= tol
            cand = nbrs[ok & (dx[nbrs] < dx[cur])]
            cur = int(cand.min())
            path.append(cur)
        return path[::-1]

    def path_length(self, path) -> float:
        path = list(path)
        total = 0.0
        for u, v in zip(path[:-1], path[1:]):
            w = self._adj[u, v]
            if w == 0:
                raise InputError(f"{u} and {v} are not adjacent")
            total += w
        return total

    # -- sets and measures -----------------------------------------------

    def ball(self, x, r) -> np.ndarray:
        """Sorted vertex ids of the closed ball ``{y : d(x, y) <= r}``."""
        if r < 0:
            raise InputError("radius must be nonnegative")
        d = self.distances_from(x)
        return np.flatnonzero(d <= r + LENGTH_RTOL * max(1.0, r))

    def sphere(self, x, r) -> np.ndarray:
        d = self.distances_from(x)
        return np.flatnonzero(np.abs(d - r) <= LENGTH_RTOL * max(1.0, r))

    def measure_of(self, vertices) -> float:
        return float(self.mu[np.asarray(list(vertices) if not isinstance(vertices, np.ndarray)
                                        else vertices, dtype=np.int64)].sum())

    def mask(self, vertices) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                     dtype=np.int64)] = True
        return m

    def outer_boundary(self, vertices) -> np.ndarray:
        """Vertices outside the set that have a neighbor inside it."""
        inside = vertices if (isinstance(vertices, np.ndarray) and vertices.dtype == bool) \
            else self.mask(vertices)
        touched = (self._adj @ inside.astype(float)) > 0
        return np.flatnonzero(touched & ~inside)

    def closure(self, vertices) -> np.ndarray:
        inside = vertices if (isinstance(vertices, np.ndarray) and vertices.dtype == bool) \
            else self.mask(vertices)
        out = inside.copy()
        out[self.outer_boundary(inside)] = True
        return np.flatnonzero(out)


def distance_to_set(g: MetricGraph, sources) -> np.ndarray:
    """Distance from every vertex to the nearest vertex of ``sources``."""
    sources = np.asarray(sources, dtype=np.int64)
    if len(sources) == 0:
        return np.full(g.n, np.inf)
    d = csgraph.dijkstra(g.adjacency, directed=False, indices=sources, min_only=True)
    return np.asarray(d)


def doubling_exponent(g: MetricGraph, sigma=1.0, centers=None, max_centers=400, seed=0):
    """Worst observed ``log2(mu(B_2r)/mu(B_r))`` for ``0 < r < sigma``.

    Radii run over the half-integer multiples of the shortest edge length.
    """
    if not sigma > 0:
        raise InputError("sigma must be positive")
    if centers is None:
        if g.n <= max_centers:
            centers = np.arange(g.n)
        else:
            centers = np.random.default_rng(seed).choice(g.n, max_centers, replace=False)
    step = 0.5 * float(g.lengths.min()) if g.m else 1.0
    radii = step * np.arange(1, max(1, math.ceil(sigma / step)))
    radii = radii[radii < sigma]
    if len(radii) == 0:
        radii = np.array([0.5 * sigma])
    worst = 0.0
    for x in centers:
        d = g.distances_from(int(x))
        order = np.argsort(d, kind="stable")
        csum = np.cumsum(g.mu[order])
        ds = d[order]
        for r in radii:
            small = csum[np.searchsorted(ds, r * (1 + LENGTH_RTOL), side="right") - 1]
            big = csum[np.searchsorted(ds, 2 * r * (1 + LENGTH_RTOL), side="right") - 1]
            worst = max(worst, math.log2(big / small))
    return worst


def poincare_estimate(g: MetricGraph, x, r):
    """Rayleigh-quotient estimate of the Poincare constant on ``B_r(x)``.

    Returns ``1 / (r^2 lambda_2)`` where ``lambda_2`` is the first nonzero
    Neumann eigenvalue of the unit-conductance Laplacian on ``B_2r(x)``;
    this bounds ``Var_{B_r}(u) <= C r^2 E_{B_2r}(u)`` from above.
    """
    from scipy.linalg import eigh

    ball = g.ball(x, 2 * r)
    if len(ball) < 2:
        return 0.0
    idx = {int(v): i for i, v in enumerate(ball)}
    k = len(ball)
    lap = np.zeros((k, k))
    for (u, v), ln in zip(g.edges, g.lengths):
        if u in idx and v in idx:
            i, j = idx[u], idx[v]
            w = 1.0 / ln
            lap[i, i] += w
            lap[j, j] += w
            lap[i, j] -= w
            lap[j, i] -= w
    vals = eigh(lap, np.diag(g.mu[ball]), eigvals_only=True, subset_by_index=[0, 1])
    lam2 = vals[1]
    return float(1.0 / (r * r * lam2)) if lam2 > 0 else math.inf


# -- text format -----------------------------------------------------------

def read_graph(path) -> MetricGraph:
    """Parse ``vertices n`` / ``edge u v len`` / ``mu v value`` lines."""
    n = None
    edges, lengths, mu_items = [], [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "vertices" and len(parts) == 2:
                n = int(parts[1])
            elif parts[0] == "edge" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2])))
                lengths.append(float(parts[3]))
            elif parts[0] == "mu" and len(parts) == 3:
                mu_items.append((int(parts[1]), float(parts[2])))
            else:
                raise ValueError(line)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: cannot parse {raw!r}") from exc
    if n is None:
        raise InputError(f"{path}: missing 'vertices' header")
    mu = np.ones(n)
    for v, val in mu_items:
        if not 0 <= v < n:
            raise InputError(f"{path}: mu for unknown vertex {v}")
        mu[v] = val
    return MetricGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), lengths, mu)


def write_graph(g: MetricGraph, path):
    lines = [f"vertices {g.n}"]
    lines += [f"edge {u} {v} {ln!r}" for (u, v), ln in zip(g.edges.tolist(), g.lengths.tolist())]
    lines += [f"mu {v} {m!r}" for v, m in enumerate(g.mu.tolist()) if m != 1.0]
    Path(path).write_text("\n".join(lines) + "\n")
