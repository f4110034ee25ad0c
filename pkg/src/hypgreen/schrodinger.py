"""Discrete Schrodinger operators ``L = L0 + V`` and their Green functions.

With conductances ``w`` and vertex measure ``mu``::

    (L u)(x) = (1/mu(x)) sum_{y~x} w_xy (u(x) - u(y)) + V(x) u(x)
    E(u, v)  = sum_e w_e du dv + sum_x V(x) u(x) v(x) mu(x)

so ``E(u, v) = u^T A v`` with the symmetric stiffness matrix
``A = Laplacian_w + diag(V mu)`` and ``L = diag(mu)^-1 A``. Green functions
use the normalisation ``L G(., y) = 1_y / mu(y)``, i.e. ``G = A^-1`` on the
domain, so that ``(G f)(x) = sum_y G(x, y) f(y) mu(y)`` inverts ``L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .errors import ConvergenceError, InputError, NotCoerciveError
from .metric_graph import GeometryConstants, MetricGraph, doubling_exponent, poincare_estimate

CG_RTOL = 1e-12
DENSE_LIMIT = 200


class SchrodingerOperator:
    """Conductances on the edges of ``graph``, a bounded potential and a
    vertex measure (the graph's measure unless given)."""

    def __init__(self, graph: MetricGraph, conductance=None, potential=None, mu=None):
        self.graph = graph
        if conductance is None:
            conductance = 1.0 / graph.lengths
        self.conductance = np.broadcast_to(np.asarray(conductance, float), (graph.m,)).copy()
        if potential is None:
            potential = 0.0
        self.potential = np.broadcast_to(np.asarray(potential, float), (graph.n,)).copy()
        self.mu = graph.mu.copy() if mu is None else \
            np.broadcast_to(np.asarray(mu, float), (graph.n,)).copy()
        if np.any(self.conductance <= 0) or not np.all(np.isfinite(self.conductance)):
            raise InputError("conductances must be positive")
        if np.any(self.mu <= 0):
            raise InputError("measure must be positive")
        if not np.all(np.isfinite(self.potential)):
            raise InputError("potential must be finite")
        for arr in (self.conductance, self.potential, self.mu):
            arr.setflags(write=False)
        self._lap = None
        self._stiff = None
        self.meta = {}

    @property
    def n(self):
        return self.graph.n

    @property
    def k_bound(self):
        return float(np.abs(self.potential).max())

    def with_potential(self, potential):
        return SchrodingerOperator(self.graph, self.conductance, potential, self.mu)

    def shifted(self, lam):
        """Operator of ``L - lam``."""
        return self.with_potential(self.potential - lam)

    def laplacian(self) -> sp.csr_matrix:
        """Weighted graph Laplacian (the ``E0`` part of the stiffness)."""
        if self._lap is None:
            e, w, n = self.graph.edges, self.conductance, self.n
            W = sp.coo_matrix((np.concatenate([w, w]),
                               (np.concatenate([e[:, 0], e[:, 1]]),
                                np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
            self._lap = (sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()
        return self._lap

    def stiffness(self) -> sp.csr_matrix:
        if self._stiff is None:
            self._stiff = (self.laplacian() + sp.diags(self.potential * self.mu)).tocsr()
        return self._stiff

    def apply(self, u) -> np.ndarray:
        """``L u`` at every vertex."""
        return (self.stiffness() @ np.asarray(u, float)) / self.mu

    def energy(self, u, v=None) -> float:
        u = np.asarray(u, float)
        v = u if v is None else np.asarray(v, float)
        return float(u @ (self.stiffness() @ v))

    def coefficients(self):
        return {"conductance": self.conductance, "potential": self.potential, "mu": self.mu}


# -- domains -------------------------------------------------------------------

def resolve_domain(g: MetricGraph, omega) -> np.ndarray:
    """Sorted vertex ids of a domain.

    ``omega`` may be ``None`` (all vertices), a boolean mask, an iterable of
    ids, ``"ball:o:r"`` or ``"interior"`` (vertices whose eccentricity-ball
    neighbours are all present, i.e. everything but the outermost sphere
    around ``meta['root']`` / ``meta['origin']``).
    """
    if omega is None:
        return np.arange(g.n)
    if isinstance(omega, str):
        parts = omega.split(":")
        if parts[0] == "ball" and len(parts) == 3:
            return g.ball(int(parts[1]), float(parts[2]))
        if parts[0] == "all":
            return np.arange(g.n)
        if parts[0] == "interior":
            o = g.meta.get("root", g.meta.get("origin", 0))
            return g.ball(o, g.eccentricity(o) - 0.5)
        raise InputError(f"cannot parse domain {omega!r}")
    arr = np.asarray(omega)
    if arr.dtype == bool:
        if arr.shape != (g.n,):
            raise InputError("domain mask has wrong length")
        return np.flatnonzero(arr)
    arr = np.unique(arr.astype(np.int64))
    if len(arr) == 0:
        raise InputError("domain is empty")
    if arr[0] < 0 or arr[-1] >= g.n:
        raise InputError("domain contains unknown vertices")
    return arr


@dataclass
class GreenTable:
    """Green function (or resolvent) of a domain with one pole."""

    domain: np.ndarray
    pole: int
    values: np.ndarray
    lambda_shift: float = 0.0
    converged: bool = True
    residual: float = 0.0
    radius: float | None = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, x):
        return self.values[x]


class GreenSolver:
    """Factorised ``A_omega - shift * M_omega`` for repeated Green solves.

    The factorisation uses symmetric pivoting only, so its pivots give the
    inertia: the domain is coercive (after the shift) exactly when all
    pivots are positive.
    """

    def __init__(self, op: SchrodingerOperator, omega=None, shift=0.0, method="direct",
                 check=True):
        self.op = op
        self.shift = float(shift)
        self.domain = resolve_domain(op.graph, omega)
        self.method = method
        idx = self.domain
        A = op.stiffness()[idx][:, idx].tocsc()
        if self.shift:
            A = (A - self.shift * sp.diags(op.mu[idx])).tocsc()
        self.A = A
        self._lu = None
        if method == "direct":
            try:
                self._lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                     options=dict(SymmetricMode=True))
            except RuntimeError:  # exactly singular
                self._not_coercive()
            if check:
                piv = self._lu.U.diagonal()
                symmetric = np.array_equal(self._lu.perm_r, self._lu.perm_c)
                scale = np.abs(A.diagonal()).max()
                if not symmetric or np.any(piv <= 1e-13 * scale):
                    self._not_coercive()
        elif method == "cg":
            d = A.diagonal()
            if check and np.any(d <= 0):
                self._not_coercive()
            self._jacobi = spla.LinearOperator(A.shape, matvec=lambda v: v / d)
            if check:
                lam1 = dirichlet_eigenvalue(op, idx, tol=1e-8)
                if lam1 - self.shift <= 0:
                    self._not_coercive(lam1)
        else:
            raise InputError(f"unknown method {method!r}")
        self._pos = np.full(op.n, -1, dtype=np.int64)
        self._pos[idx] = np.arange(len(idx))

    def _not_coercive(self, lam1=None):
        if lam1 is None:
            try:
                lam1 = dirichlet_eigenvalue(self.op, self.domain, tol=1e-8)
            except ConvergenceError:
                lam1 = float("nan")
        raise NotCoerciveError(
            f"not coercive on domain: lambda_1 = {lam1:.6g}, shift = {self.shift:.6g}", lam1)

    def solve(self, rhs):
        """Solve on the domain for a right-hand side indexed by the domain."""
        rhs = np.asarray(rhs, float)
        if self._lu is not None:
            return self._lu.solve(rhs)
        cols = rhs.reshape(len(self.domain), -1)
        out = np.empty_like(cols)
        for k in range(cols.shape[1]):
            sol, info = spla.cg(self.A, cols[:, k], rtol=CG_RTOL, atol=0.0, M=self._jacobi,
                                maxiter=100 * len(self.domain))
            if info != 0:
                raise ConvergenceError("conjugate gradients did not converge", sol)
            out[:, k] = sol
        return out.reshape(rhs.shape)

    def contains(self, x):
        return self._pos[int(x)] >= 0

    def columns(self, poles) -> np.ndarray:
        """``G(., y)`` on all vertices for each pole, shape ``(n, len(poles))``."""
        poles = [int(p) for p in poles]
        if any(not self.contains(p) for p in poles):
            raise InputError("pole outside the domain")
        rhs = np.zeros((len(self.domain), len(poles)))
        rhs[self._pos[poles], np.arange(len(poles))] = 1.0
        sol = self.solve(rhs)
        out = np.zeros((self.op.n, len(poles)))
        out[self.domain] = sol
        return out

    def column(self, y) -> np.ndarray:
        return self.columns([y])[:, 0]

    def matrix(self) -> np.ndarray:
        """Dense Green matrix indexed by the domain."""
        return self.solve(np.eye(len(self.domain)))

    def residual(self, values, y):
        """Max relative defect of ``(L - shift) G(., y) = 1_y / mu(y)`` on the domain."""
        op, idx = self.op, self.domain
        Lg = (op.stiffness() @ values)[idx] / op.mu[idx] - self.shift * values[idx]
        target = np.zeros(len(idx))
        target[self._pos[int(y)]] = 1.0 / op.mu[int(y)]
        return float(np.abs(Lg - target).max() / abs(target).max())

    def table(self, y) -> GreenTable:
        vals = self.column(y)
        return GreenTable(self.domain, int(y), vals, -self.shift, True, self.residual(vals, y))


# -- eigenvalues ---------------------------------------------------------------

def dirichlet_eigenvalue(op: SchrodingerOperator, omega=None, tol=1e-10, max_iter=20000,
                         return_vector=False):
    """Principal Dirichlet eigenvalue of ``L`` on ``omega`` (zero outside).

    Shifted inverse power iteration for ``A u = lambda M u``. The shift
    starts below ``min V`` (a lower bound, since ``E0 >= 0``) and is moved
    towards the Rayleigh quotient whenever the shifted matrix still has
    positive pivots, i.e. whenever the new shift is certified to lie below
    ``lambda_1``.
    """
    idx = resolve_domain(op.graph, omega)
    A = op.stiffness()[idx][:, idx].tocsc()
    mvec = op.mu[idx]
    if len(idx) == 1:
        lam = float(A[0, 0] / mvec[0])
        return (lam, np.ones(1)) if return_vector else lam
    lower = float(op.potential[idx].min())
    sigma = lower - 1e-3 * (1.0 + abs(lower))
    M = sp.diags(mvec)

    def factor(s):
        try:
            lu = spla.splu((A - s * M).tocsc(), permc_spec="MMD_AT_PLUS_A",
                           diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
        except RuntimeError:
            return None, False
        ok = np.array_equal(lu.perm_r, lu.perm_c) and np.all(lu.U.diagonal() > 0)
        return lu, ok

    lu, _ = factor(sigma)
    x = np.ones(len(idx))
    x /= math.sqrt(x @ (mvec * x))
    rho_old = math.inf
    history = []
    for it in range(1, max_iter + 1):
        y = lu.solve(mvec * x)
        x = y / math.sqrt(y @ (mvec * y))
        rho = float(x @ (A @ x))
        history.append(rho)
        if it > 2 and abs(rho - rho_old) <= tol * max(abs(rho), 1e-300):
            resid = np.linalg.norm(A @ x - rho * mvec * x) / max(abs(rho), 1.0)
            if resid < math.sqrt(tol) or abs(rho - rho_old) == 0.0:
                return (rho, x) if return_vector else rho
        rho_old = rho
        if it % 15 == 0:
            trial = sigma + 0.9 * (rho - sigma)
            lu_t, ok = factor(trial)
            if ok:
                sigma, lu = trial, lu_t
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps",
                           iterate=x, history=history)


def dirichlet_eigenvalue_dense(op: SchrodingerOperator, omega=None):
    """Dense generalized eigensolve; reference for small domains."""
    idx = resolve_domain(op.graph, omega)
    A = op.stiffness()[idx][:, idx].toarray()
    return float(eigh(A, np.diag(op.mu[idx]), eigvals_only=True, subset_by_index=[0, 0])[0])


def is_coercive(op: SchrodingerOperator, omega=None, margin=0.0) -> bool:
    try:
        GreenSolver(op, omega, shift=margin)
    except NotCoerciveError:
        return False
    return True


# -- Green functions -------------------------------------------------------------

def green_dirichlet(op: SchrodingerOperator, omega, y, method="direct") -> GreenTable:
    """Green function of ``omega`` with pole ``y`` and zero exterior values."""
    solver = GreenSolver(op, omega, method=method)
    if not solver.contains(y):
        raise InputError(f"pole {y} is not in the domain")
    return solver.table(y)


def resolvent(op: SchrodingerOperator, lam, omega, y, method="direct") -> GreenTable:
    """Green function of ``L - lam`` on ``omega``."""
    solver = GreenSolver(op, omega, shift=lam, method=method)
    if not solver.contains(y):
        raise InputError(f"pole {y} is not in the domain")
    return solver.table(y)


def green_global(op: SchrodingerOperator, y, tol=1e-8, R_max=None, o=None, R_start=None,
                 step=2, epsilon=None) -> GreenTable:
    """Green function of the whole (large, truncated) graph by exhaustion.

    Dirichlet Green functions of the balls ``B_R(o)``, ``R = R_start,
    R_start + step, ...``, increase with ``R``; iteration stops once the
    largest relative change on the window ``B_{R_start/2}(o)`` is below
    ``tol``. ``converged`` is False if ``R_max`` is reached first. With
    ``epsilon`` the last domain is also checked to have
    ``lambda_1 > epsilon`` (which then holds for every smaller ball).
    """
    g = op.graph
    if o is None:
        o = g.meta.get("origin", g.meta.get("root", int(y)))
    dy = g.distance(o, y)
    ecc = g.eccentricity(o)
    if R_start is None:
        R_start = max(2.0, 2.0 * dy)
    if R_max is None:
        R_max = ecc - 1.0  # the outermost sphere is where a truncation was cut
    window = g.ball(o, R_start / 2.0)
    prev, table = None, None
    monotone = True
    R = float(R_start)
    history = []
    while True:
        Rc = min(R, R_max)
        solver = GreenSolver(op, g.ball(o, Rc))
        vals = solver.column(y)
        if prev is not None:
            monotone &= bool(np.all(vals >= prev - 1e-12 * np.abs(vals).max()))
            change = float(np.max(np.abs(vals[window] - prev[window]) / vals[window]))
            history.append((Rc, change))
            if change < tol:
                table = GreenTable(solver.domain, int(y), vals, 0.0, True,
                                   solver.residual(vals, y), Rc)
                break
        prev = vals
        if Rc >= R_max or len(solver.domain) == g.n:
            table = GreenTable(solver.domain, int(y), vals, 0.0, False,
                               solver.residual(vals, y), Rc)
            break
        R += step
    table.meta.update(monotone=monotone, history=history, window_radius=R_start / 2.0)
    if epsilon is not None:
        GreenSolver(op, table.domain, shift=epsilon)
    return table


def check_resolvent_equation(op: SchrodingerOperator, lam, omega=None) -> dict:
    """Dense check of ``G_-lam = G + lam G M G_-lam`` and its two inequalities."""
    idx = resolve_domain(op.graph, omega)
    G = GreenSolver(op, idx).matrix()
    Gl = GreenSolver(op, idx, shift=lam).matrix()
    M = op.mu[idx]
    GMGl = G @ (M[:, None] * Gl)
    resid = np.abs(Gl - G - lam * GMGl) / np.abs(Gl)
    out = {"lambda": float(lam), "residual": float(resid.max()),
           "ineq31_min_slack": float((Gl - G).min())}
    if lam > 0:
        out["ineq32_min_slack"] = float((Gl / lam - GMGl).min())
    scale = np.abs(Gl).max()
    out["ok"] = bool(out["residual"] < 1e-9 and out["ineq31_min_slack"] >= -1e-12 * scale
                     and out.get("ineq32_min_slack", 0.0) >= -1e-12 * scale / max(lam, 1e-300))
    return out


# -- Dirichlet problems ----------------------------------------------------------

def _as_full(g, values, default=0.0):
    out = np.full(g.n, float(default))
    if values is None:
        return out
    if isinstance(values, dict):
        for k, v in values.items():
            out[int(k)] = v
        return out
    arr = np.asarray(values, float)
    if arr.ndim == 0:
        out[:] = float(arr)
        return out
    if arr.shape != (g.n,):
        raise InputError("vertex function has the wrong length")
    return arr.copy()


def _contraction_radius(op, idx):
    """Spectral radius of ``(L0_omega)^-1 V`` on the domain."""
    op0 = op.with_potential(0.0)
    solver = GreenSolver(op0, idx)
    scaled = op.potential[idx] * op.mu[idx]
    if len(idx) <= 1500:
        T = solver.solve(np.diag(scaled))
        return float(np.abs(np.linalg.eigvals(T)).max()), solver
    rng = np.random.default_rng(0)
    v = rng.random(len(idx))
    rate = 0.0
    for _ in range(200):
        w = solver.solve(scaled * v)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0, solver
        rate, v = nrm / np.linalg.norm(v), w / nrm
    return float(rate), solver


def dirichlet_solve(op: SchrodingerOperator, omega, f=None, phi=None, method="direct",
                    tol=1e-14, max_iter=10000) -> np.ndarray:
    """Solve ``L u = phi`` on ``omega`` with ``u = f`` off ``omega``.

    ``method="iterated"`` sums ``u_0 + u_1 + ...`` where ``L0 u_0 = phi``
    with boundary values ``f`` and ``L0 u_i = -V u_{i-1}`` with zero
    boundary values; it requires ``(L0_omega)^-1 V`` to be a contraction.
    """
    g = op.graph
    idx = resolve_domain(g, omega)
    f = _as_full(g, f)
    phi = _as_full(g, phi)
    inside = np.zeros(g.n, dtype=bool)
    inside[idx] = True
    ext = f.copy()
    ext[idx] = 0.0
    if method == "direct":
        solver = GreenSolver(op, idx)
        rhs = op.mu[idx] * phi[idx] - (op.stiffness() @ ext)[idx]
        u = ext
        u[idx] = solver.solve(rhs)
        return u
    if method != "iterated":
        raise InputError(f"unknown method {method!r}")
    radius, solver0 = _contraction_radius(op, idx)
    if radius >= 1.0:
        raise InputError(f"iteration does not contract (spectral radius {radius:.4g}); "
                         "use method='direct'")
    lap = op.laplacian()
    rhs0 = op.mu[idx] * phi[idx] - (lap @ ext)[idx]
    term = solver0.solve(rhs0)
    total = term.copy()
    scaled = op.potential[idx] * op.mu[idx]
    for _ in range(max_iter):
        term = solver0.solve(-scaled * term)
        total += term
        if np.abs(term).max() <= tol * max(np.abs(total).max(), 1e-300):
            u = ext
            u[idx] = total
            return u
    raise ConvergenceError("Dirichlet iteration did not converge", total)


def neumann_series_green(op: SchrodingerOperator, omega, y, tol=1e-12,
                         max_terms=10000) -> GreenTable:
    """Green function of ``L`` from the ``V = 0`` Green function ``G0``.

    ``G = G0 sum_i (-W)^i`` with the kernel ``W(x, z) = V(x) G0(x, z)`` and
    kernel products taken against ``mu``. Requires
    ``max_x sum_z |V(x)| G0(x, z) mu(z) < 1/2``.
    """
    g = op.graph
    idx = resolve_domain(g, omega)
    solver0 = GreenSolver(op.with_potential(0.0), idx)
    if not solver0.contains(y):
        raise InputError(f"pole {y} is not in the domain")
    Vd = op.potential[idx]
    mud = op.mu[idx]
    # row sums of |W| against mu: |V(x)| * (G0 mu)(x)
    bound = float(np.max(np.abs(Vd) * solver0.solve(mud)))
    if not bound < 0.5:
        raise InputError(f"sum_z |W(x, z)| mu(z) reaches {bound:.4g} >= 1/2")
    pos = solver0._pos[int(y)]
    v = np.zeros(len(idx))
    v[pos] = 1.0
    total = np.zeros(len(idx))
    nterms = 0
    for nterms in range(1, max_terms + 1):
        gi = solver0.solve(v)
        total += gi
        if np.abs(gi).max() <= tol * np.abs(total).max():
            break
        v = -mud * Vd * gi
        if not v.any():
            break
    else:
        raise ConvergenceError("Neumann series did not converge", total)
    vals = np.zeros(g.n)
    vals[idx] = total
    check = GreenSolver(op, idx, check=False)
    table = GreenTable(idx, int(y), vals, 0.0, True, check.residual(vals, y))
    table.meta.update(terms=nterms, w_bound=bound)
    return table


# -- h-transform -------------------------------------------------------------------

def h_transform(op: SchrodingerOperator, h) -> SchrodingerOperator:
    """``E^h(u, v) = E(u h, v h)``.

    Conductances become ``w h(x) h(y)``, the measure ``h^2 mu`` and the
    potential ``(L h) / h``.
    """
    h = np.asarray(h, float)
    if h.shape != (op.n,):
        raise InputError("h must have one value per vertex")
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        raise InputError("h must be positive")
    e = op.graph.edges
    w = op.conductance * h[e[:, 0]] * h[e[:, 1]]
    V = op.apply(h) / h
    return SchrodingerOperator(op.graph, w, V, h * h * op.mu)


# -- Harnack ---------------------------------------------------------------------------

def harnack_constant(op: SchrodingerOperator, x0, r, trials=100, seed=0, omega=None,
                     extremal=False, poles=None) -> float:
    """Empirical Harnack constant ``max sup_{B_r} u / inf_{B_r} u``.

    The positive ``L``-harmonic functions on ``B_2r(x0)`` sampled are Green
    functions of ``omega`` with poles outside ``B_2r(x0)`` and Dirichlet
    extensions of random nonnegative data on the outer boundary of
    ``B_2r(x0)``. Random data has a random number of nonzero entries, so
    single-vertex (extremal) data is drawn regularly; ``extremal=True``
    adds every single-vertex datum, which gives the exact maximum over
    boundary data.
    """
    g = op.graph
    dom = resolve_domain(g, omega)
    dom_mask = np.zeros(g.n, dtype=bool)
    dom_mask[dom] = True
    big = g.ball(x0, 2 * r)
    small = g.ball(x0, r)
    if not dom_mask[big].all():
        raise InputError("B_2r(x0) must lie inside the domain")
    bd = g.outer_boundary(big)
    if len(bd) == 0:
        raise InputError("B_2r(x0) has no boundary")
    solver = GreenSolver(op, big)
    stiff = op.stiffness()

    def extend(data):
        ext = np.zeros(g.n)
        ext[bd] = data
        u = ext.copy()
        u[big] = solver.solve(-(stiff @ ext)[big])
        return u

    ratios = []

    def record(u):
        vals = u[small]
        if vals.min() <= 0:
            raise NotCoerciveError("generated harmonic function is not positive")
        ratios.append(float(vals.max() / vals.min()))

    rng = np.random.default_rng(seed)
    for _ in range(int(trials)):
        k = min(len(bd), int(rng.geometric(0.35)))
        data = np.zeros(len(bd))
        data[rng.choice(len(bd), k, replace=False)] = rng.exponential(size=k)
        record(extend(data))
    if extremal:
        for i in range(len(bd)):
            data = np.zeros(len(bd))
            data[i] = 1.0
            record(extend(data))
    if poles is None:
        far = np.setdiff1d(dom, g.ball(x0, 2 * r))
        poles = far[:0] if len(far) == 0 else rng.choice(far, min(len(far), 5), replace=False)
    if len(poles):
        cols = GreenSolver(op, dom).columns(poles)
        for k in range(cols.shape[1]):
            record(cols[:, k])
    return max(ratios)


# -- bounded geometry summary ------------------------------------------------------------

def green_scale_bounds(op: SchrodingerOperator, sigma=1.0, omega=None, poles=None):
    """Min and max of ``G(x, y) mu(B_sigma(y))`` over pairs at distance sigma."""
    g = op.graph
    solver = GreenSolver(op, omega)
    if poles is None:
        poles = solver.domain
    poles = list(poles)
    lo, hi = math.inf, 0.0
    for start in range(0, len(poles), 256):
        chunk = poles[start:start + 256]
        cols = solver.columns(chunk)
        for k, y in enumerate(chunk):
            ring = g.sphere(y, sigma)
            ring = ring[solver._pos[ring] >= 0]
            if len(ring) == 0:
                continue
            vals = cols[ring, k] * g.measure_of(g.ball(y, sigma))
            lo, hi = min(lo, float(vals.min())), max(hi, float(vals.max()))
    return lo, hi


def estimate_geometry_constants(op: SchrodingerOperator, sigma=1.0, omega=None, centers=None,
                                epsilon=None, delta=0.0, seed=0) -> GeometryConstants:
    g = op.graph
    if centers is None:
        rng = np.random.default_rng(seed)
        centers = rng.choice(g.n, min(g.n, 20), replace=False)
    cp = max(poincare_estimate(g, int(x), sigma) for x in centers)
    cd = 0.0
    for x in centers:
        ball = g.ball(int(x), sigma)
        if len(ball) < g.n:
            lam = dirichlet_eigenvalue(op.with_potential(0.0), ball)
            cd = max(cd, 1.0 / (sigma * sigma * lam))
    if epsilon is None:
        epsilon = 0.5 * dirichlet_eigenvalue(op, omega)
    return GeometryConstants(sigma=sigma, N=doubling_exponent(g, sigma, centers=centers),
                             C_P=cp, C_D=cd, k_bound=op.k_bound, epsilon=max(0.0, epsilon),
                             delta=delta)
