"""Exact Hausdorff-type contents, covering selection and coarea checks on finite metric spaces."""
from .gauge import DomainError, Exponent, coarea_constant, omega, zeta, zeta_q
from .metricspace import (FiniteMetricSpace, LipschitzMapping, MetricAxiomError, PointSubset,
                          cantor, closed_ball, diam, generate, grid, lipschitz_constant,
                          product, random_points, sierpinski_carpet, validate)
from .content import (CandidateSet, ContentResult, CoverInstance, Uncoverable, Unbounded, TooLarge,
                      certified_bounds, fractional_cover, hausdorff_content, min_cover,
                      partition_dp_oracle, weighted_content, weighted_integral_step)
from .coverkit import (CandidateBall, EmptyFamily, InfeasibleCover, SelectionResult, WeightedCover,
                       block_select, nazarov_select, saturn_select)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "Exponent",
    "coarea_constant",
    "omega",
    "zeta",
    "zeta_q",
    "FiniteMetricSpace",
    "LipschitzMapping",
    "MetricAxiomError",
    "PointSubset",
    "cantor",
    "closed_ball",
    "diam",
    "generate",
    "grid",
    "lipschitz_constant",
    "product",
    "random_points",
    "sierpinski_carpet",
    "validate",
    "CandidateSet",
    "ContentResult",
    "CoverInstance",
    "Uncoverable",
    "Unbounded",
    "TooLarge",
    "certified_bounds",
    "fractional_cover",
    "hausdorff_content",
    "min_cover",
    "partition_dp_oracle",
    "weighted_content",
    "weighted_integral_step",
    "CandidateBall",
    "EmptyFamily",
    "InfeasibleCover",
    "SelectionResult",
    "WeightedCover",
    "block_select",
    "nazarov_select",
    "saturn_select",
]
