import math

import numpy as np
import pytest

from hypgreen import InputError, SchrodingerOperator
from hypgreen.schrodinger import dirichlet_eigenvalue
from hypgreen.unfold import (base_operator, boundary_correspondence, boundary_distance,
                             check_uniformity, check_unfolding_hyperbolic, form_transfer_defect,
                             hardy_constant, lipschitz_defect, parse_domain,
                             quasi_hyperbolic_graph, sample_domain, transfer_residual,
                             unfold_operator)

SHAPES = ["disc", "square", "slit", "lshape", "cusp:2", "interval"]


def test_square_half_step():
    ds = sample_domain("square", 0.5)
    assert ds.n == 1
    np.testing.assert_allclose(ds.points[0], [0.5, 0.5])
    assert ds.dj[0] == 0.5


def test_disc_origin_depth():
    ds = sample_domain("disc", 0.1)
    assert ds.dj[ds.nearest((0, 0))] == pytest.approx(1.0)


@pytest.mark.parametrize("spec", SHAPES)
def test_lipschitz_and_positive(spec):
    ds = sample_domain(spec, 0.05 if spec != "cusp:2" else 0.01)
    assert ds.dj.min() > ds.h / 2
    assert lipschitz_defect(ds) <= 1e-12


@pytest.mark.parametrize("spec,pt,d", [
    ("disc", (0.3, 0.4), 0.5), ("square", (0.2, 0.7), 0.2), ("slit", (0.5, 0.1), 0.1),
    ("slit", (-0.5, 0.0), 0.5), ("lshape", (0.5, 0.5), 0.5), ("lshape", (-0.5, -0.5), 0.5),
    ("lshape", (0.5, -0.5), 0.0), ("interval", (0.3,), 0.3)])
def test_boundary_distance_values(spec, pt, d):
    assert boundary_distance(spec, [pt])[0] == pytest.approx(d)


def test_cusp_distance_against_brute_force():
    pts = np.array([[0.5, 0.0], [0.3, 0.02], [0.9, 0.3]])
    s = np.linspace(0, 1, 400_001)
    curve = np.column_stack([s, s ** 2])
    for p, d in zip(pts, boundary_distance("cusp:2", pts)):
        brute = min(np.linalg.norm(curve - [p[0], abs(p[1])], axis=1).min(), 1 - p[0])
        assert d == pytest.approx(brute, abs=1e-7)


def test_parse_errors():
    for bad in ("annulus", "cusp:1"):
        with pytest.raises(InputError):
            parse_domain(bad)
    with pytest.raises(InputError, match="smaller h"):
        sample_domain("slit", 0.53)
    with pytest.raises(InputError, match="no sample points"):
        sample_domain("lshape", 0.7)


# -- quasi-hyperbolic metric ---------------------------------------------------------------

def test_qh_edge_weights():
    ds = sample_domain("disc", 0.05)
    qh = quasi_hyperbolic_graph(ds)
    e = qh.edges
    eu = np.linalg.norm(ds.points[e[:, 0]] - ds.points[e[:, 1]], axis=1)
    assert np.all(qh.lengths > 0)
    assert np.all(qh.lengths >= eu / ds.dj.max() - 1e-15)
    np.testing.assert_allclose(qh.mu, ds.h ** 2 / ds.dj ** 2)
    # constant depth: length is h / d0
    sq = sample_domain("square", 0.1)
    q2 = quasi_hyperbolic_graph(sq, diagonals=False)
    i, j = sq.nearest((0.3, 0.5)), sq.nearest((0.3, 0.6))
    assert sq.dj[i] == sq.dj[j] == pytest.approx(0.3)
    assert q2.distance(i, j) == pytest.approx(0.1 / 0.3)


def test_radial_distance_is_log():
    ds = sample_domain("disc", 0.02)
    qh = quasi_hyperbolic_graph(ds)
    k = qh.distance(ds.nearest((0, 0)), ds.nearest((0, 0.9)))
    assert k == pytest.approx(math.log(10), rel=0.1)


def test_refinement_consistency():
    rng = np.random.default_rng(0)
    # endpoints on the coarse lattice, so both samples contain them exactly
    pairs = np.round(rng.uniform(-0.6, 0.6, size=(12, 2, 2)) / 0.04) * 0.04
    pairs = [p for p in pairs if np.linalg.norm(p[0] - p[1]) > 0.3]
    out = []
    for h in (0.04, 0.02):
        ds = sample_domain("disc", h)
        qh = quasi_hyperbolic_graph(ds)
        out.append(np.array([qh.distance(ds.nearest(a), ds.nearest(b)) for a, b in pairs]))
    assert np.max(np.abs(out[1] / out[0] - 1)) < 0.05


# -- uniformity -------------------------------------------------------------------------------

def test_diameter_pair_is_straight():
    ds = sample_domain("disc", 0.05)
    rep = check_uniformity(ds, pairs=[((-0.5, 0.0), (0.5, 0.0))])
    assert rep["worst_c"] == pytest.approx(1.0, abs=0.05)


def test_disc_uniform_and_stable():
    a = check_uniformity(sample_domain("disc", 0.04), c=10)
    b = check_uniformity(sample_domain("disc", 0.02), c=10)
    assert a["worst_c"] <= 10 and b["worst_c"] <= 10
    assert a["uniform_fraction"] == 1.0
    assert abs(b["worst_c"] / a["worst_c"] - 1) < 0.25


def _cusp_c(h):
    ds = sample_domain("cusp:2", h)
    tip = int(np.argmin(ds.points[:, 0]))
    return check_uniformity(ds, pairs=[(tip, ds.nearest((0.8, 0.0)))])["worst_c"]


def test_cusp_not_uniform():
    cs = [_cusp_c(h) for h in (0.02, 0.01, 0.005)]
    assert cs[0] < cs[1] < cs[2]
    assert cs[2] > 2 * cs[0]  # grows without bound as the tip is resolved


# -- hyperbolicity ---------------------------------------------------------------------------

@pytest.mark.parametrize("spec", ["disc", "square"])
def test_unfolding_delta_stable(spec):
    rep = check_unfolding_hyperbolic(spec, 0.04)
    assert abs(rep["ratio"] - 1) <= 0.25
    assert rep["diameter"][1] > rep["diameter"][0]  # finer samples reach deeper


def test_boundary_correspondence():
    assert boundary_correspondence(sample_domain("disc", 0.04))["spearman"] >= 0.9


# -- Hardy and transfer -----------------------------------------------------------------------

def test_hardy_1d_converges_slowly():
    cs = [hardy_constant(base_operator(ds), ds)
          for ds in (sample_domain("interval", h) for h in (1 / 50, 1 / 100, 1 / 200))]
    assert cs[0] > cs[1] > cs[2] > 0.25


def test_hardy_disc_positive_and_potential_increases():
    ds = sample_domain("disc", 0.04)
    c0 = hardy_constant(base_operator(ds), ds)
    c1 = hardy_constant(base_operator(ds, potential=1.0), ds)
    assert 0 < c0 < c1


def test_unfold_trivial_in_2d():
    ds = sample_domain("disc", 0.05)
    op = base_operator(ds)
    un = unfold_operator(op, ds)
    np.testing.assert_array_equal(un.conductance, op.conductance)
    np.testing.assert_allclose(un.mu, op.mu / ds.dj ** 2)
    np.testing.assert_allclose(un.potential, op.potential * ds.dj ** 2)
    assert un.meta["transfer_exponent"] == 0


def test_unfold_cap_flag():
    ds = sample_domain("disc", 0.05)
    un = unfold_operator(base_operator(ds, potential=50.0), ds, cap=10.0)
    assert un.meta["vdj2_exceeds_cap"]


@pytest.mark.parametrize("N", [2, 3])
def test_harmonic_transfer(N):
    ds = sample_domain("disc", 0.04)
    op = base_operator(ds, potential=0.3)
    assert transfer_residual(op, ds, N=N) < 1e-9
    assert form_transfer_defect(op, ds, N=N) < 1e-10


def test_unfolded_coercivity_equals_hardy():
    ds = sample_domain("disc", 0.04)
    op = base_operator(ds)
    C = hardy_constant(op, ds)
    lam = dirichlet_eigenvalue(unfold_operator(op, ds), None)
    assert lam >= C * (1 - 10 * ds.h)
    assert lam == pytest.approx(C, rel=1e-7)
