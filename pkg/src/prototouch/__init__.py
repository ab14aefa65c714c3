"""Whole-robot touch localization from proprioceptive joint sensors.

Pipeline: synthesize contact datasets from a kinematic model, train an MLP
localizer (regression or classification head), evaluate against KNN baselines,
run filtered live inference, and dispatch touch-region actions.
"""

from prototouch.kinematics import (
    KinematicChain,
    JointConfig,
    SurfacePoint,
    forward_kinematics,
    home_config,
    point_jacobian,
    preset_chain,
    validate_chain,
    world_point,
)

__all__ = [
    "KinematicChain",
    "JointConfig",
    "SurfacePoint",
    "forward_kinematics",
    "home_config",
    "point_jacobian",
    "preset_chain",
    "validate_chain",
    "world_point",
]

__version__ = "0.1.0"
