"""Green function on the 3-regular tree: exponential decay and the 3G constant.

Run: python3 demos/tree_green.py
"""
import numpy as np

from hypgreen import GreenSolver, SchrodingerOperator
from hypgreen.builders import product_graph, product_vertex, regular_tree, tree_children
from hypgreen.hyperbolic import delta_four_point, phi_chain_along_geodesic
from hypgreen.verify import check_3g, check_exponential_decay


def descend(t, v, k, choice=0):
    for _ in range(k):
        kids = tree_children(t, v)
        v = kids[choice % len(kids)]
    return v


small = regular_tree(3, 8)
print(f"tree(3,8): {small.n} vertices, sampled four-point delta {delta_four_point(small, 'sampled', 200_000)}")

t = regular_tree(3, 12)

op = SchrodingerOperator(t)
G = GreenSolver(op, "interior").column(0)
d = t.distances_from(0)
for r in range(0, 12, 2):
    print(f"  G(o, x) at |x| = {r:2d}: {G[d == r].mean():.3e}")

fit = check_exponential_decay(op, eps=0.05)
print(f"log-linear decay fit: alpha2 = {fit['alpha2']:.3f}, r^2 = {fit['r2']:.4f}")

# the 3G constant settles as the truncation grows
for D in (8, 10, 12):
    s = regular_tree(3, D)
    chain = phi_chain_along_geodesic(s, descend(s, 0, 4), descend(s, 2, 3, 1), 0.0)
    print(f"  depth {D:2d}: c_3G = {check_3g(SchrodingerOperator(s), chain)['c']:.4f}")

# on a product of trees it does not
s = regular_tree(3, 6)
p = product_graph(s, s)
pop = SchrodingerOperator(p, potential=0.2)
solver = GreenSolver(pop)
path = [descend(s, 0, k) for k in range(6, -1, -1)] + [descend(s, 2, k) for k in range(6)]
for L in (4, 8, 12):
    a = 6 - L // 2
    chain = [product_vertex(p, path[a + i], path[a + i]) for i in range(L + 1)]
    print(f"  product, diagonal chain of length {L:2d}: c = {check_3g(pop, chain, solver=solver)['c']:.3f}")
