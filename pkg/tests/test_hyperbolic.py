import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypgreen import InputError
from hypgreen.builders import (cycle_graph, grid_graph, random_graph, regular_tree,
                               tree_leaf_below)
from hypgreen.hyperbolic import (BoundaryRay, PhiChain, boundary_quasi_metric, delta_four_point,
                                 delta_thin_triangles, gromov_product, phi_chain_along_geodesic,
                                 phi_neighborhood_basis, ray_between, verify_phi_chain)
from hypgreen.metric_graph import distance_to_set

from oracles import four_point_delta


def test_gromov_product_identities(tree6):
    assert gromov_product(tree6, 40, 40, 7) == tree6.distance(40, 7)
    assert gromov_product(tree6, 40, 90, 40) == 0


@pytest.mark.parametrize("x,y,z", [(100, 180, 0), (60, 61, 5), (22, 150, 3), (189, 4, 100)])
def test_tree_product_is_distance_to_geodesic(tree6, x, y, z):
    seg = tree6.geodesic(x, y)
    assert gromov_product(tree6, x, y, z) == distance_to_set(tree6, seg)[z]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 999), st.integers(0, 24), st.integers(0, 24), st.integers(0, 24))
def test_product_sum_identity(seed, x, y, z):
    g = random_graph(25, 0.12, seed=seed)
    assert gromov_product(g, x, y, z) + gromov_product(g, x, z, y) == \
        pytest.approx(g.distance(y, z))
    assert gromov_product(g, x, y, z) == pytest.approx(gromov_product(g, y, x, z))


@pytest.mark.parametrize("n", [5, 8, 12])
def test_cycle_delta_matches_brute_force(n):
    g = cycle_graph(n)
    d = delta_four_point(g, "exhaustive")
    assert d == pytest.approx(four_point_delta(g.distance_matrix()))
    if n == 12:
        assert d >= 1


def test_delta_zero_on_trees():
    assert delta_four_point(regular_tree(3, 3), "exhaustive") == 0.0
    t8 = regular_tree(3, 8)
    assert delta_four_point(t8, "sampled", 100_000, seed=5) == 0.0


def test_delta_scales_with_lengths():
    g = random_graph(14, 0.2, seed=2)
    h = type(g)(g.n, g.edges, 2.5 * g.lengths)
    assert delta_four_point(h) == pytest.approx(2.5 * delta_four_point(g))


def test_sampled_is_seed_deterministic():
    g = grid_graph(7, 7)
    a = delta_four_point(g, "sampled", 5000, seed=3)
    assert a == delta_four_point(g, "sampled", 5000, seed=3)
    assert a <= delta_four_point(g, "exhaustive")


def test_exhaustive_limit():
    with pytest.raises(InputError):
        delta_four_point(regular_tree(3, 5), "exhaustive")


def test_thin_triangles():
    assert delta_thin_triangles(regular_tree(3, 4)) == 0.0
    c = cycle_graph(12)
    brute = delta_thin_triangles(c, itertools.combinations(range(12), 3))
    assert brute > 0
    assert delta_thin_triangles(c, n_samples=10_000) == brute


@pytest.mark.parametrize("seed", range(3))
def test_thin_vs_four_point(seed):
    g = random_graph(14, 0.2, seed=seed)
    assert delta_thin_triangles(g) <= 8 * delta_four_point(g) + 2


def test_boundary_quasi_metric(tree6):
    r1 = ray_between(tree6, 0, tree_leaf_below(tree6, 1, 0))
    r2 = ray_between(tree6, 0, tree_leaf_below(tree6, 5))  # sibling of r1's second vertex
    Q = boundary_quasi_metric(tree6, 0, [r1, r2, r1])
    assert Q[0, 1] == pytest.approx(np.exp(-1))
    assert Q[0, 2] == pytest.approx(np.exp(-6))  # same tip twice off the diagonal
    assert Q[0, 0] == 0
    with pytest.raises(InputError):
        boundary_quasi_metric(tree6, 0, [BoundaryRay(0, [0, 1])])


def test_quasi_ultrametric():
    g = random_graph(40, 0.08, seed=4)
    delta = delta_four_point(g, "sampled", 50_000, seed=0)
    rays = [ray_between(g, 0, v) for v in range(1, 40) if g.distance(0, v) >= 2]
    Q = boundary_quasi_metric(g, 0, rays)
    k = len(rays)
    for a, b, c in itertools.permutations(range(k), 3):
        assert Q[a, c] <= np.exp(delta) * max(Q[a, b], Q[b, c]) * (1 + 1e-12)


def test_chain_on_tree():
    t = regular_tree(3, 10)
    leaf = tree_leaf_below(t, 1)
    chain = phi_chain_along_geodesic(t, 0, leaf, 0.0)
    assert len(chain) == 5 and chain.delta_used == 0.5
    rep = verify_phi_chain(t, chain)
    assert rep["ok"] and rep["alpha"] > 0 and rep["beta"] > 0
    assert all(np.all(b <= a) for a, b in zip(chain.sets, chain.sets[1:]))
    back = verify_phi_chain(t, chain.reversed(t))
    assert back["ok"]


def test_chain_degenerate():
    t = regular_tree(3, 6)
    with pytest.raises(InputError):
        phi_chain_along_geodesic(t, 5, 5, 0.0)
    with pytest.raises(InputError):
        phi_chain_along_geodesic(t, 0, 4, 0.0)


def test_non_nested_sets_fail():
    t = regular_tree(3, 4)
    a = np.zeros(t.n, bool)
    b = np.zeros(t.n, bool)
    a[[1, 4, 5]] = True
    b[[2, 6, 7]] = True
    assert not verify_phi_chain(t, PhiChain([a, b], [0, 0], 1.0))["ok"]


def _half_plane_chain(n):
    g = grid_graph(n, n)
    col = g.meta["coords"][:, 1]
    sets = [col > 5 + 4 * i for i in range(5)]
    track = [int((n // 2) * n + 5 + 4 * i) for i in range(5)]
    return verify_phi_chain(g, PhiChain(sets, track, 4 / 3))


def test_flat_grid_chain_does_not_grow():
    """Half-planes in a grid: boundaries stay parallel, so Phi cannot grow."""
    small, big = _half_plane_chain(30), _half_plane_chain(60)
    assert max(s for *_, s in big["samples"]) == 4  # separation never exceeds the spacing
    assert big["alpha"] < small["alpha"] < 0.25  # the slope is an artefact of the cut-off


def test_tree_chain_has_full_slope():
    # tree boundaries are single vertices, so (iii) holds with the maximal slope
    t = regular_tree(3, 10)
    rep = verify_phi_chain(t, phi_chain_along_geodesic(t, 0, tree_leaf_below(t, 1), 0.0))
    assert rep["alpha"] == 1.0 > _half_plane_chain(30)["alpha"]


def test_neighborhood_basis_on_tree():
    t = regular_tree(3, 9)
    ray = ray_between(t, 0, tree_leaf_below(t, 2))
    sets, hubs, c = phi_neighborhood_basis(t, 0, ray, 4)
    assert c == 2.0
    for i, s in enumerate(sets, start=1):
        v = ray.ray[int(c * i) + 1]  # (x|tip) > c i strictly
        below = t.distances_from(v) + t.meta["depth"][v] == t.meta["depth"]
        np.testing.assert_array_equal(s, below)
    assert all(np.all(b <= a) for a, b in zip(sets, sets[1:]))
    for i, h in enumerate(hubs):
        ring = sets[i] & ~np.isin(np.arange(t.n), t.closure(sets[i + 1]))
        assert ring[h]
    with pytest.raises(InputError):
        phi_neighborhood_basis(t, 0, ray, 5)
