"""Potential theory of Schrodinger operators on weighted graphs."""
from .errors import (ConstructionError, ConvergenceError, HypGreenError, InputError,
                     NotCoerciveError)
from .metric_graph import GeometryConstants, MetricGraph, read_graph, write_graph
from .builders import (FiniteMetricSpace, circle_points, grid_graph, hyperbolic_approximation,
                       integer_line, path_graph, product_graph, regular_tree)
from .hyperbolic import (BoundaryRay, PhiChain, boundary_quasi_metric, delta_four_point,
                         gromov_product, phi_chain_along_geodesic, phi_neighborhood_basis,
                         verify_phi_chain)
from .schrodinger import (GreenSolver, GreenTable, SchrodingerOperator, check_resolvent_equation,
                          dirichlet_eigenvalue, dirichlet_solve, green_dirichlet, green_global,
                          h_transform, harnack_constant, neumann_series_green, resolvent)

__version__ = "0.1.0"
