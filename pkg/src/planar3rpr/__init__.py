"""Kinematic analysis of analytic planar 3-RPR parallel manipulators."""

__version__ = "0.1.0"

from .geometry import (
    ClassVerdict,
    GeometryError,
    GeometryParams,
    check_analytic_class,
    geometry_from_dict,
    load_geometry,
)
from .kinematics import (
    CharacteristicCubic,
    FkSolutionSet,
    JointVector,
    KinematicsError,
    Pose,
    characteristic_cubic,
    forward_kinematics_analytic,
    forward_kinematics_reference,
    inverse_kinematics,
)

__all__ = [
    "__version__",
    "ClassVerdict",
    "GeometryError",
    "GeometryParams",
    "check_analytic_class",
    "geometry_from_dict",
    "load_geometry",
    "CharacteristicCubic",
    "FkSolutionSet",
    "JointVector",
    "KinematicsError",
    "Pose",
    "characteristic_cubic",
    "forward_kinematics_analytic",
    "forward_kinematics_reference",
    "inverse_kinematics",
]
