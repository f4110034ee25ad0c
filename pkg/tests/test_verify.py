import math

import numpy as np
import pytest

from hypgreen import GreenSolver, InputError, SchrodingerOperator
from hypgreen.builders import integer_line, product_graph, product_vertex, regular_tree, \
    tree_leaf_below
from hypgreen.hyperbolic import phi_chain_along_geodesic, ray_between
from hypgreen.verify import (boundary_harnack_ratio, check_3g, check_boundary_harnack,
                             check_exponential_decay, check_growth_recovery,
                             check_relative_max_principle, green_metric_check,
                             sample_aligned_triples)

from conftest import descend
from oracles import line_root


def _tree_chain(t):
    return phi_chain_along_geodesic(t, descend(t, 0, 4), descend(t, 2, 3, 1), 0.0)


@pytest.fixture(scope="module")
def c3g_by_depth():
    out = {}
    for D in (8, 10, 12):
        t = regular_tree(3, D)
        out[D] = check_3g(SchrodingerOperator(t), _tree_chain(t))["c"]
    return out


def test_3g_single_middle_point(tree6):
    op = SchrodingerOperator(tree6)
    rep = check_3g(op, [descend(tree6, 0, 3), 0, descend(tree6, 1, 3)])
    assert rep["length"] == 3 and rep["c"] >= 1
    with pytest.raises(InputError):
        check_3g(op, [0, 5])
    with pytest.raises(InputError, match="separation"):
        check_3g(op, [descend(tree6, 0, 3), 0, descend(tree6, 1, 3)], separation=5)


def test_3g_tree_exact_value():
    # on a tree with V = 0 the middle ratio is the explicit ratio of path Green values
    t = regular_tree(3, 6)
    op = SchrodingerOperator(t)
    x, z = descend(t, 0, 3), descend(t, 1, 3)
    G = GreenSolver(op, "interior")
    cx, cz = G.column(x), G.column(z)
    rep = check_3g(op, [x, 0, z])
    assert rep["ratios"][0] == pytest.approx(cx[z] / (4 * cx[0] * cz[0]), rel=1e-12)


def test_3g_stable_across_depth(c3g_by_depth):
    assert c3g_by_depth[12] / c3g_by_depth[10] <= 1.25
    assert c3g_by_depth[10] / c3g_by_depth[8] <= 1.25
    assert all(c >= 1 for c in c3g_by_depth.values())
    assert c3g_by_depth[12] == pytest.approx(8 / 3, rel=2e-3)


@pytest.fixture(scope="module")
def product_setup():
    t = regular_tree(3, 6)
    p = product_graph(t, t)
    op = SchrodingerOperator(p, potential=0.2)
    # leaf -> root -> leaf in the first factor, a geodesic through 13 vertices
    path = [descend(t, 0, k) for k in range(6, -1, -1)] + [descend(t, 2, k) for k in range(6)]
    assert t.path_length(path) == t.distance(path[0], path[-1]) == 12
    return t, p, op, GreenSolver(op), path


def _chain(p, path, L, diagonal):
    """``L + 1`` consecutive path points centred at the root; the second
    coordinate stays at the root or follows the first one."""
    s = 6 - L // 2
    return [product_vertex(p, path[s + i], path[s + i] if diagonal else 0) for i in range(L + 1)]


@pytest.mark.parametrize("diagonal", [False, True])
def test_negative_control_grows(product_setup, diagonal):
    t, p, op, solver, path = product_setup
    c = {L: check_3g(op, _chain(p, path, L, diagonal), solver=solver)["c"] for L in (4, 6, 8, 12)}
    assert c[8] >= 1.5 * c[4]
    assert c[12] >= 1.5 * c[6]


def test_negative_control_exceeds_tree(product_setup, c3g_by_depth):
    t, p, op, solver, path = product_setup
    assert check_3g(op, _chain(p, path, 12, True), solver=solver)["c"] > 2 * c3g_by_depth[12]


def test_growth_recovery_flat(tree12):
    op = SchrodingerOperator(tree12)
    a, b = descend(tree12, 1, 7), descend(tree12, 2, 7, 1)
    chain = phi_chain_along_geodesic(tree12, a, b, 0.0)
    rep = check_growth_recovery(op, 0.05, chain)
    assert rep["flat"] and np.isfinite(rep["per_j"][0])
    back = check_growth_recovery(op, op.shifted(0.05), chain.reversed(tree12))
    assert back["eps"] == pytest.approx(0.05) and back["flat"]


def test_decay_line_exact():
    eps = 0.1
    op = SchrodingerOperator(integer_line(200), potential=eps)
    rep = check_exponential_decay(op, poles=[200], max_distance=60, eps=0.05)
    assert rep["alpha2"] == pytest.approx(-math.log(line_root(eps)), abs=1e-10)
    assert rep["r2"] > 0.999 and rep["alpha1"] >= 0


def test_decay_tree(tree12):
    rep = check_exponential_decay(SchrodingerOperator(tree12), eps=0.05)
    assert rep["alpha2"] > 0 and rep["r2"] >= 0.95 and rep["alpha1"] >= 0


def test_decay_needs_pairs():
    op = SchrodingerOperator(integer_line(3), potential=0.1)
    with pytest.raises(InputError):
        check_exponential_decay(op, poles=[3])


@pytest.mark.parametrize("e", [0.02, 0.05])
def test_rmp_line_matches_roots(e):
    eps = 0.1
    op = SchrodingerOperator(integer_line(200), potential=eps)
    rep = check_relative_max_principle(op, e, 200, 5)
    assert rep["eta"] == pytest.approx(line_root(eps) / line_root(eps - e), rel=1e-9)
    assert rep["ok"]


def test_rmp_tree_decreasing(tree12):
    op = SchrodingerOperator(tree12, potential=0.1)
    etas = [check_relative_max_principle(op, e, 0, 4)["eta"] for e in (0.05, 0.1, 0.2)]
    assert all(x < 1 for x in etas)
    assert etas[0] > etas[1] > etas[2]


def test_rmp_small_radius():
    op = SchrodingerOperator(integer_line(20), potential=0.1)
    rep = check_relative_max_principle(op, 0.05, 20, 0.5 + 0.5)
    assert rep["ratio"] <= 1


def test_bhi_identical_functions():
    u = np.random.default_rng(0).uniform(1, 2, 10)
    assert boundary_harnack_ratio(u, u, np.arange(10)) == 1.0


def test_bhi_tree(c3g_by_depth):
    out = []
    for D in (10, 12):
        t = regular_tree(3, D)
        ray = ray_between(t, 0, tree_leaf_below(t, 0))
        rep = check_boundary_harnack(SchrodingerOperator(t), 0, ray, 2, 5, 7,
                                     c3g=c3g_by_depth[D])
        assert rep["ok"] and rep["HB"] >= 1
        out.append(rep["HB"])
    assert abs(out[1] / out[0] - 1) <= 0.2


def test_bhi_rejects_poles_inside(tree6):
    ray = ray_between(tree6, 0, tree_leaf_below(tree6, 0))
    with pytest.raises(InputError):
        check_boundary_harnack(SchrodingerOperator(tree6), 0, ray, 2, ray.ray[5], 7)


def test_green_metric_tree(tree12, c3g_by_depth):
    op = SchrodingerOperator(tree12)
    chain = _tree_chain(tree12)
    pts = chain.track_points
    c = check_3g(op, chain)["c"]
    rep = green_metric_check(op, triples=[(pts[0], y, pts[-1]) for y in pts[1:-1]], c3g=c)
    assert rep["ok"] and rep["max_defect"] <= math.log(c) + 1e-6


def test_green_metric_rough_triangle(tree6):
    op = SchrodingerOperator(tree6, potential=0.05)
    aligned = sample_aligned_triples(tree6, 10, 3, seed=1)
    rng = np.random.default_rng(2)
    general = []
    while len(general) < 40:  # well separated, otherwise arbitrary
        tri = tuple(int(v) for v in rng.choice(tree6.n, 3, replace=False))
        if min(tree6.distance(a, b) for a, b in [tri[:2], tri[1:], tri[::2]]) >= 3:
            general.append(tri)
    x, z = descend(tree6, 1, 4), descend(tree6, 2, 4)
    c = check_3g(op, phi_chain_along_geodesic(tree6, x, z, 0.0), omega=None)["c"]
    rep = green_metric_check(op, triples=aligned, omega=None, general=general, c3g=c)
    assert rep["triangle_min_slack"] >= -1e-9
    for x, y, z in aligned:
        assert tree6.distance(x, y) + tree6.distance(y, z) == tree6.distance(x, z)


def test_green_metric_line_defect_is_constant():
    eps = 0.1
    op = SchrodingerOperator(integer_line(200), potential=eps)
    r = line_root(eps)
    defects = []
    for sep in (5, 10, 20):
        trip = [(200 - sep, 200, 200 + sep)]
        defects.append(green_metric_check(op, triples=trip, omega=None)["max_defect"])
    # the defect is |ln G(0)| - ln 3 for every separation; it does not decay
    np.testing.assert_allclose(defects, abs(math.log((1 / r - r) / 3)), rtol=1e-9)
