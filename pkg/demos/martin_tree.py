"""Martin kernels along a tree ray, L-vanishing, and a synthetic decomposition."""
import numpy as np

from hypgreen import SchrodingerOperator
from hypgreen.builders import regular_tree, tree_leaf_below
from hypgreen.hyperbolic import phi_neighborhood_basis, ray_between
from hypgreen.potential import (boundary_vertices, l_vanishing_test, leaf_kernel,
                                martin_convergence, martin_decompose_tree)

t = regular_tree(3, 12)
op = SchrodingerOperator(t)
ray = ray_between(t, 0, tree_leaf_below(t, 0))
rep = martin_convergence(op, 0, ray, [2, 4, 6, 8, 10, 12], 4)
print("sup-differences of K_x on the window:", np.array2string(np.asarray(rep["diffs"]), precision=2))

small = regular_tree(3, 5)
sop = SchrodingerOperator(small)
leaves = [int(l) for l in boundary_vertices(small)]
tip = leaves[17]
sets, _, _ = phi_neighborhood_basis(small, 0, ray_between(small, 0, tip), 4, c=1)
passing = [l for l in leaves
           if all(l_vanishing_test(sop, leaf_kernel(sop, 0, l).values, ~N)["vanishing"]
                  for N in sets)]
print(f"leaves whose kernel vanishes off every neighbourhood of leaf {tip}: {passing}")

K = [leaf_kernel(sop, 0, l) for l in leaves]
w = np.zeros(len(K))
w[[2, 20, 40]] = [0.25, 0.25, 0.5]
out = martin_decompose_tree(sop, sum(a * k.values for a, k in zip(w, K)), kernels=K)
print("recovered weights:", {i: round(float(x), 8) for i, x in enumerate(out["weights"]) if x > 1e-9})
