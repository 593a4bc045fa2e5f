"""Feature-sparse entropic transport maps under elastic costs."""
from sparseot.costs import CostFamily, CostModel, cost_matrix, grad_tau, h_value, k_support_norm, prox_tau
from sparseot.maps import (
    DisplacementReport,
    FittedMap,
    GibbsWeights,
    bregman_centroid,
    bregman_descent_step,
    extend_potential,
    fit_map,
    flow,
    gibbs_weights,
    grad_f_eps,
    transport,
    wc_gradient_step,
)
from sparseot.metrics import nmse, rbo, sinkhorn_divergence, support_error
from sparseot.sinkhorn import DualPotentials, PointCloud, SolveConfig, epsilon_from_cost, solve_dual

__version__ = "0.1.0"

__all__ = [
    "CostFamily", "CostModel", "cost_matrix", "grad_tau", "h_value", "k_support_norm", "prox_tau",
    "DisplacementReport", "FittedMap", "GibbsWeights", "bregman_centroid", "bregman_descent_step",
    "extend_potential", "fit_map", "flow", "gibbs_weights", "grad_f_eps", "transport",
    "wc_gradient_step", "nmse", "rbo", "sinkhorn_divergence", "support_error", "DualPotentials",
    "PointCloud", "SolveConfig", "epsilon_from_cost", "solve_dual",
]
