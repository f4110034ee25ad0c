"""Reduits, Martin kernels and L-vanishing on finite truncations.

Finite truncations stand in for infinite graphs: the Dirichlet domain is
the truncation's interior and its outer vertex boundary (the leaves of a
tree ball) plays the part of the boundary at infinity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import nnls

from .errors import ConvergenceError, InputError
from .hyperbolic import BoundaryRay
from .schrodinger import GreenSolver, SchrodingerOperator, green_global, resolve_domain

SWEEP_TOL = 1e-10
NOISE_FLOOR = 1e-12


# -- reduit ------------------------------------------------------------------------

@numba.njit(cache=True)
def _psor(indptr, indices, data, diag, b, psi, v, omega, tol, max_sweeps):
    n = len(v)
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(n):
            s = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    s -= data[k] * v[j]
            new = (1.0 - omega) * v[i] + omega * s / diag[i]
            if new < psi[i]:
                new = psi[i]
            d = abs(new - v[i])
            if d > change:
                change = d
            v[i] = new
        if change <= tol:
            return sweep
    return -1


def _lcp_parts(op, u, A, omega, exterior):
    g = op.graph
    idx = resolve_domain(g, omega)
    u = np.asarray(u, float)
    if u.shape != (g.n,):
        raise InputError("u must have one value per vertex")
    amask = np.zeros(g.n, dtype=bool)
    if A is not None:
        arr = np.asarray(A)
        if arr.dtype == bool:
            amask[:] = arr
        else:
            amask[arr.astype(np.int64)] = True
    ext = np.zeros(g.n) if exterior is None else np.asarray(exterior, float).copy()
    ext[idx] = 0.0
    stiff = op.stiffness()
    Aomega = stiff[idx][:, idx].tocsr()
    b = -(stiff @ ext)[idx]
    psi = np.where(amask[idx], u[idx], 0.0)
    return idx, Aomega, b, psi, ext


def _polish(Aomega, b, psi, v, tol):
    """Exact solve on the contact set found by PSOR; ``None`` if infeasible."""
    from scipy.sparse.linalg import spsolve

    scale = max(np.abs(psi).max(), np.abs(v).max(), 1e-300)
    contact = v <= psi + 1e3 * tol * scale
    free = ~contact
    w = psi.copy()
    if free.any():
        rhs = b[free] - Aomega[free][:, contact] @ psi[contact]
        w[free] = np.atleast_1d(spsolve(Aomega[free][:, free].tocsc(), rhs))
    resid = Aomega @ w - b
    rscale = max(np.abs(b).max(), np.abs(Aomega @ psi).max(), 1e-300)
    if np.all(w >= psi - 1e-12 * scale) and np.all(resid >= -1e-9 * rscale):
        return w
    return None


def reduit(op: SchrodingerOperator, u, A, omega=None, exterior=None, relax=1.0,
           tol=SWEEP_TOL, max_sweeps=200_000, polish=True, check=True) -> np.ndarray:
    """``R_u^A``: smallest nonnegative L-superharmonic ``v`` on ``omega`` with
    ``v >= u`` on ``A``.

    Solves the obstacle problem ``v >= u 1_A``, ``L v >= 0``,
    ``(L v)(v - u 1_A) = 0`` on ``omega`` by projected SOR, sweeping in
    vertex order until successive sweeps differ by less than ``tol``
    (relative to ``max u``). Values off ``omega`` are ``exterior``
    (default zero). With ``polish`` the linear system on the contact set
    found by PSOR is then solved exactly and kept if it is feasible.
    """
    idx, Aomega, b, psi, ext = _lcp_parts(op, u, A, omega, exterior)
    if check:
        GreenSolver(op, idx)
        Lu = op.apply(np.asarray(u, float))[idx]
        scale = max(np.abs(np.asarray(u)[idx]).max(), 1e-300)
        if np.any(np.asarray(u)[idx] < -1e-12 * scale):
            raise InputError("u must be nonnegative")
        if np.any(Lu < -1e-9 * max(np.abs(Lu).max(), scale)):
            raise InputError("u is not L-superharmonic on the domain")
    v = np.maximum(psi, 0.0).copy()
    diag = Aomega.diagonal().copy()
    stop = tol * max(1.0, np.abs(psi).max())
    sweeps = _psor(Aomega.indptr, Aomega.indices, Aomega.data, diag, b, psi, v,
                   float(relax), stop, int(max_sweeps))
    if sweeps < 0:
        raise ConvergenceError("PSOR did not converge", iterate=v)
    if polish:
        w = _polish(Aomega, b, psi, v, stop)
        if w is not None:
            v = w
    out = ext
    out[idx] = v
    return out


def reduit_properties_check(op: SchrodingerOperator, omega=None, seed=0, trials=5) -> dict:
    """Randomised checks of the reduit calculus on ``omega``.

    Obstacles are Green functions and positive combinations of them
    (L-superharmonic by construction).
    """
    g = op.graph
    idx = resolve_domain(g, omega)
    rng = np.random.default_rng(seed)
    solver = GreenSolver(op, idx)
    report = {k: 0.0 for k in ("harmonic_off_A", "equal_on_A", "scaling", "zero_scaling",
                               "additivity", "subadditivity_slack", "green_symmetry")}
    report["subadditivity_slack"] = np.inf
    for _ in range(trials):
        k = max(1, len(idx) // 3)
        A = rng.choice(idx, k, replace=False)
        B = rng.choice(idx, k, replace=False)
        poles = rng.choice(idx, 2, replace=False)
        cols = solver.columns(poles)
        u = cols[:, 0] * rng.uniform(0.5, 2.0)
        v = cols[:, 1] * rng.uniform(0.5, 2.0)
        scale = np.abs(u).max()
        R = reduit(op, u, A, idx)
        Lr = op.apply(R)
        amask = np.zeros(g.n, dtype=bool)
        amask[A] = True
        off = idx[~amask[idx]]
        report["harmonic_off_A"] = max(report["harmonic_off_A"],
                                       float(np.abs(Lr[off]).max(initial=0.0) / scale))
        report["equal_on_A"] = max(report["equal_on_A"], float(np.abs(R[A] - u[A]).max() / scale))
        lam = rng.uniform(0.1, 3.0)
        report["scaling"] = max(report["scaling"],
                                float(np.abs(reduit(op, lam * u, A, idx) - lam * R).max()
                                      / (lam * scale)))
        report["zero_scaling"] = max(report["zero_scaling"],
                                     float(np.abs(reduit(op, 0 * u, A, idx)).max()))
        Rv = reduit(op, v, A, idx)
        Ruv = reduit(op, u + v, A, idx)
        report["additivity"] = max(report["additivity"],
                                   float(np.abs(Ruv - R - Rv).max() / np.abs(u + v).max()))
        RB = reduit(op, u, B, idx)
        RAB = reduit(op, u, np.union1d(A, B), idx)
        report["subadditivity_slack"] = min(report["subadditivity_slack"],
                                            float((R + RB - RAB).min() / scale))
        # R^A_{G(., y)}(x) = R^A_{G(x, .)}(y)
        x, y = poles
        Ry = reduit(op, cols[:, 1], A, idx)[x]
        Rx = reduit(op, cols[:, 0], A, idx)[y]
        report["green_symmetry"] = max(report["green_symmetry"],
                                       float(abs(Ry - Rx) / max(abs(Rx), 1e-300)))
    tol = 1e-8
    report["ok"] = bool(all(report[k] < tol for k in ("harmonic_off_A", "equal_on_A", "scaling",
                                                     "zero_scaling", "additivity",
                                                     "green_symmetry"))
                        and report["subadditivity_slack"] >= -tol)
    return report


# -- Martin kernels ----------------------------------------------------------------

@dataclass
class MartinKernel:
    base: int
    pole: object
    values: np.ndarray
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.values[x]

    def rebased(self, o2):
        """Same kernel normalised at another basepoint."""
        return MartinKernel(int(o2), self.pole, self.values / self.values[o2], self.residual,
                            dict(self.meta))


def _harmonic_residual(op, values, domain, skip=()):
    Lv = op.apply(values)
    mask = np.zeros(op.n, dtype=bool)
    mask[domain] = True
    mask[list(skip)] = False
    if not mask.any():
        return 0.0
    return float(np.abs(Lv[mask]).max() / np.abs(values).max())


def martin_kernel(op: SchrodingerOperator, o, x, omega=None, tol=1e-10) -> MartinKernel:
    """``K_x = G(., x) / G(o, x)``.

    With ``omega`` the Dirichlet Green function of ``omega`` is used,
    otherwise the exhaustion Green function.
    """
    if omega is None:
        t = green_global(op, x, tol=tol)
        vals, dom = t.values, t.domain
    else:
        solver = GreenSolver(op, omega)
        vals, dom = solver.column(x), solver.domain
    if not vals[o] > 0:
        raise InputError("G(o, x) vanishes; o and x are in different components")
    vals = vals / vals[o]
    return MartinKernel(int(o), int(x), vals, _harmonic_residual(op, vals, dom, [x]))


def leaf_kernel(op: SchrodingerOperator, o, leaf, omega="interior") -> MartinKernel:
    """Poisson kernel of a boundary vertex, normalised at ``o``.

    This is the harmonic function on ``omega`` with boundary values
    ``1_leaf`` divided by its value at ``o``; it is the limit of
    ``K_x`` as the pole ``x`` approaches ``leaf``.
    """
    g = op.graph
    idx = resolve_domain(g, omega)
    inside = np.zeros(g.n, dtype=bool)
    inside[idx] = True
    if inside[leaf]:
        raise InputError("leaf must lie outside the domain")
    solver = GreenSolver(op, idx)
    ext = np.zeros(g.n)
    ext[leaf] = 1.0
    vals = ext.copy()
    vals[idx] = solver.solve(-(op.stiffness() @ ext)[idx])
    if not vals[o] > 0:
        raise InputError("kernel vanishes at the basepoint")
    vals = vals / vals[o]
    return MartinKernel(int(o), int(leaf), vals, _harmonic_residual(op, vals, idx))


def martin_convergence(op, o, ray: BoundaryRay, depths, window, omega="interior", tol=1e-3,
                       noise=NOISE_FLOOR) -> dict:
    """Kernels along a ray and their successive sup-differences on ``B_window(o)``.

    ``op`` is either one operator, in which case the poles are the ray
    vertices at the given depths (a pole off ``omega`` gives its Poisson
    kernel), or a callable ``depth -> operator`` returning truncations; then
    each depth uses the Poisson kernel of the ray vertex at that depth on
    its own truncation. Differences below ``noise`` count as zero when
    checking monotone decay.
    """
    depths = [int(d) for d in depths]
    kernels, diffs = [], []
    family = callable(op) and not isinstance(op, SchrodingerOperator)
    win = None
    for d in depths:
        opd = op(d) if family else op
        g = opd.graph
        if win is None:
            win = g.ball(o, window)
        pole = ray.ray[d]
        dom = resolve_domain(g, omega)
        inside = np.zeros(g.n, dtype=bool)
        inside[dom] = True
        if inside[pole]:
            k = martin_kernel(opd, o, pole, omega=dom)
        else:
            k = leaf_kernel(opd, o, pole, omega=dom)
        kernels.append(k)
        if len(kernels) > 1:
            diffs.append(float(np.abs(k.values[win] - kernels[-2].values[win]).max()))
    clipped = [max(dd, noise) for dd in diffs]
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(clipped[:-1], clipped[1:]))
    rate = None
    real = [(depths[i + 1], dd) for i, dd in enumerate(diffs) if dd > noise]
    if len(real) >= 2:
        xs, ys = np.array([r[0] for r in real], float), np.log([r[1] for r in real])
        rate = float(-np.polyfit(xs, ys, 1)[0])
    final = diffs[-1] if diffs else 0.0
    return {"depths": depths, "window": float(window), "diffs": diffs, "monotone": monotone,
            "decay_rate": rate, "final": final, "cauchy": bool(monotone and final < tol),
            "kernels": kernels}


# -- L-vanishing ------------------------------------------------------------------------

def _harmonic_extension(op, inner, boundary_values):
    g = op.graph
    out = np.zeros(g.n) if boundary_values is None else boundary_values.copy()
    out[inner] = 0.0
    solver = GreenSolver(op, inner)
    out[inner] = solver.solve(-(op.stiffness() @ out)[inner])
    return out


def greatest_harmonic_minorant(op, p, inner, tol=1e-10, max_iter=10_000):
    """Decreasing iteration ``h <- extension of min(h, p)`` from the boundary
    of ``inner``, started at ``h = p``."""
    g = op.graph
    inner = resolve_domain(g, inner)
    bd = g.outer_boundary(inner)
    h = np.asarray(p, float).copy()
    for _ in range(max_iter):
        data = np.zeros(g.n)
        data[bd] = np.minimum(h[bd], p[bd])
        new = _harmonic_extension(op, inner, data)
        new = np.minimum(new, p)
        if np.abs(new - h).max() <= tol * max(np.abs(p).max(), 1e-300):
            return new
        h = new
    raise ConvergenceError("harmonic minorant iteration did not converge", iterate=h)


def l_vanishing_test(op: SchrodingerOperator, u, V_set, o=None, omega="interior", radii=None,
                     tol=1e-6) -> dict:
    """Does the reduit ``R_u^V`` have a vanishing harmonic part?

    For each radius ``R`` the reduit ``p_R`` of ``u`` over ``V_set`` within
    ``B_R(o)`` is computed on ``omega`` (values off ``omega`` are ``u``
    on ``V_set`` and zero elsewhere, restricted to ``B_R``); its greatest
    harmonic minorant on ``omega`` intersected with the interior of
    ``B_R(o)`` is evaluated at ``o``. The last radius covers the whole
    truncation, whose outer boundary stands in for infinity. ``u`` is
    L-vanishing on ``V_set`` iff the last score is at most ``tol * u(o)``.
    """
    g = op.graph
    if o is None:
        o = g.meta.get("root", g.meta.get("origin", 0))
    u = np.asarray(u, float)
    dom = resolve_domain(g, omega)
    vmask = np.zeros(g.n, dtype=bool)
    arr = np.asarray(V_set)
    if arr.dtype == bool:
        vmask[:] = arr
    else:
        vmask[arr.astype(np.int64)] = True
    ecc = g.eccentricity(o)
    if radii is None:
        radii = [r for r in (ecc / 4, ecc / 2, 3 * ecc / 4) if r >= 1]
    radii = sorted(set(float(r) for r in radii if r < ecc)) + [float(ecc)]
    dist = g.distances_from(o)
    dmask = np.zeros(g.n, dtype=bool)
    dmask[dom] = True
    scores = []
    for R in radii:
        A = vmask & (dist <= R + 1e-9)
        ext = np.where(A & ~dmask, u, 0.0)
        p = reduit(op, u, A & dmask, dom, exterior=ext, check=False)
        if R >= ecc:
            inner = dom
        else:
            inner = dom[dist[dom] < R - 1e-9]
            if len(inner) == 0 or not (inner == o).any():
                continue
        h = greatest_harmonic_minorant(op, p, inner)
        scores.append(float(h[o]))
    score = scores[-1]
    return {"vanishing": bool(score <= tol * u[o]), "score": score, "scores": scores,
            "radii": radii, "relative_score": score / u[o]}


# -- finite Martin representation on trees -----------------------------------------------

def boundary_vertices(g, omega="interior"):
    return g.outer_boundary(resolve_domain(g, omega))


def martin_decompose_tree(op: SchrodingerOperator, u, o=None, omega="interior", kernels=None,
                          tol=1e-6) -> dict:
    """Nonnegative weights ``w`` with ``u = sum_l w_l K_l`` over the leaf kernels."""
    g = op.graph
    if o is None:
        o = g.meta.get("root", 0)
    dom = resolve_domain(g, omega)
    leaves = boundary_vertices(g, dom)
    if kernels is None:
        kernels = [leaf_kernel(op, o, int(l), dom) for l in leaves]
    K = np.column_stack([k.values for k in kernels])
    u = np.asarray(u, float)
    scale = np.abs(u).max()
    w, _ = nnls(K / scale, u / scale, maxiter=50 * K.shape[1])
    resid = float(np.abs(K @ w - u).max() / scale)
    return {"leaves": np.array([k.pole for k in kernels]), "weights": w, "residual": resid,
            "ok": bool(resid <= tol)}
