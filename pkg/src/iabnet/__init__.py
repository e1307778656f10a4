"""Stochastic-geometry performance analysis of multi-cell mmWave
full-duplex integrated-access-and-backhaul networks.

Closed-form SINR coverage, capacity with outage, and ergodic capacity for
hard-core-deployed donors with PPP relays and users, validated against an
internal Monte Carlo network simulator.
"""
from .config import (ArrayGeometry, LinkClass, SystemParams, default_params,
                     noise_power, pathloss_intercept, table_defaults, validate)
from .analysis import (CapacityResult, CoverageLink, CoverageResult,
                       capacity_with_outage, ergodic_capacity, link_coverage,
                       sinr_coverage)
from .geometry import AssociationResult, association_probabilities
from .montecarlo import McEstimate, Realization, associate, estimate, realize
from .pointprocess import MhcppSpec, PointPattern, sample_mhcpp2, sample_ppp

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "AssociationResult", "CapacityResult", "CoverageLink",
    "CoverageResult", "LinkClass", "McEstimate", "MhcppSpec", "PointPattern",
    "Realization", "SystemParams", "associate", "association_probabilities",
    "capacity_with_outage", "default_params", "ergodic_capacity", "estimate",
    "link_coverage", "noise_power", "pathloss_intercept", "realize",
    "sample_mhcpp2", "sample_ppp", "sinr_coverage", "table_defaults",
    "validate",
]
