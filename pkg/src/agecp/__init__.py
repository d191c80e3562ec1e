"""Simulator and Monte Carlo laboratory for the contact process with aging."""

from .lattice import Box, Config, Site, SpaceTimeBox, cube, centered_box, join, leq, neighbors, support
from .omega import (AgeProfile, ArrowEvent, HorizonExceededError, ModelParams,
                    Omega, constant_profile, thin)
from .engine import (StaircaseRegion, StaticRegion, Trajectory, box_region,
                     evolve, evolve_direct, export_trajectory_csv,
                     hold_semigroup_check, krone_params, richardson_evolve)

__version__ = "0.1.0"

__all__ = [
    "AgeProfile", "ArrowEvent", "Box", "Config", "HorizonExceededError",
    "ModelParams", "Omega", "Site", "SpaceTimeBox", "StaircaseRegion",
    "StaticRegion", "Trajectory", "box_region", "centered_box",
    "constant_profile", "cube", "evolve", "evolve_direct",
    "export_trajectory_csv", "hold_semigroup_check", "join", "krone_params",
    "leq", "neighbors", "richardson_evolve", "support", "thin",
]
