"""Bernoulli bond percolation on Cayley graphs: clusters, stabilizing functionals and Betti numbers."""

__version__ = "0.1.0"

from .groups import GroupElement, GroupModel
from .geometry import Ball, ball, growth_profile, induced_edges, boundaries, coset_window
from .ordering import EdgeOrderContext, fundamental_set, connected_prefix_order
from .percolation import (Configuration, sample_configuration, resample_edge, clusters,
                          classify_edge_event, tau_lower_bound)
from .complexes import RuleDescriptor, build, locality_audit, equivariance_check
from .homology import boundary_matrix, rank, betti, edge_delta_betti, stabilization_scan_betti
from .functionals import (FunctionalSpec, evaluate, difference, stabilization_scan,
                          estimate_sigma2, variance_scaling, clt_harness, ergodic_average)

__all__ = [
    "GroupElement", "GroupModel", "Ball", "ball", "growth_profile", "induced_edges",
    "boundaries", "coset_window", "EdgeOrderContext", "fundamental_set",
    "connected_prefix_order", "Configuration", "sample_configuration", "resample_edge",
    "clusters", "classify_edge_event", "tau_lower_bound", "RuleDescriptor", "build",
    "locality_audit", "equivariance_check", "boundary_matrix", "rank", "betti",
    "edge_delta_betti", "stabilization_scan_betti", "FunctionalSpec", "evaluate",
    "difference", "stabilization_scan", "estimate_sigma2", "variance_scaling",
    "clt_harness", "ergodic_average",
]
