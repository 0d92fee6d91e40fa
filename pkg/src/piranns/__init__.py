"""Adaptive physics-informed randomized neural networks on box partitions of unity."""

from piranns.activation import TANH_DIFF, Activation, sigma
from piranns.sampling import FeatureParams, SampleDomain, sample_stratified, sample_uniform
from piranns.mesh import AffineMap, Domain, Element, Face, Partition
from piranns.features import Coefficients, FeatureSet
from piranns.linalg import LinearSystem, LMConfig, solve_lm, solve_min_norm
from piranns.assembly import CollocationPlan, PenaltyWeights, assemble_burgers_residual, assemble_linear
from piranns.adaptivity import AdaptiveConfig, IndicatorVector, adaptive_solve, estimate, mark
from piranns.problems import Problem

__version__ = "0.1.0"

__all__ = [
    "TANH_DIFF",
    "Activation",
    "sigma",
    "FeatureParams",
    "SampleDomain",
    "sample_stratified",
    "sample_uniform",
    "AffineMap",
    "Domain",
    "Element",
    "Face",
    "Partition",
    "Coefficients",
    "FeatureSet",
    "LinearSystem",
    "LMConfig",
    "solve_lm",
    "solve_min_norm",
    "CollocationPlan",
    "PenaltyWeights",
    "assemble_burgers_residual",
    "assemble_linear",
    "AdaptiveConfig",
    "IndicatorVector",
    "adaptive_solve",
    "estimate",
    "mark",
    "Problem",
]
