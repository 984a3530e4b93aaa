"""Parallel-singularity conditions in the workspace and the joint space.

Workspace side: the determinant of the constraint-gradient matrix is the
direct numeric singularity condition; for the analytic class it factors
into f1 = x + t*y (geometry independent) times a cubic-in-t factor f2.

Joint-space side: the repeated-orientation surface is the discriminant
of the characteristic cubic (degree 8 in the leg lengths); the
position-step tangency surface is evaluated as a numeric resultant, the
product of the tangency value over the three projective orientation
roots.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryParams
from .kinematics import (
    CharacteristicCubic,
    JointVector,
    Pose,
    characteristic_cubic,
    constraint_gradient_matrix,
)


@dataclass(frozen=True)
class WorkspaceSingularitySample:
    f1: float
    f2: float
    detM: float


@dataclass(frozen=True)
class JointSpaceSurfaceSample:
    delta: float
    branch: float


def jacobian_parallel_det(g: GeometryParams, p: Pose) -> float:
    """Determinant of the constraint-gradient matrix at pose p.

    Zero exactly at parallel singularities (for nonzero leg lengths).
    """
    m = constraint_gradient_matrix(g, p.x, p.y, p.phi)
    return float(np.linalg.det(m))


def workspace_singularity_factors(g: GeometryParams, p: Pose) -> tuple[float, float]:
    """The two factors (f1, f2) of the workspace singularity equation.

    f1 = x + t*y and f2 is linear in (x, y), cubic in t.  Near phi = pi
    the half-angle homogenized values are returned instead (same zero
    set, finite limit).
    """
    s = math.sin(0.5 * p.phi)
    c = math.cos(0.5 * p.phi)
    x, y = p.x, p.y
    c2, c3, d3 = g.c2, g.c3, g.d3
    f1h = x * c + y * s
    a = -2.0 * c3 * d3 + x * d3
    b = -2.0 * c3 * c3 + 2.0 * c2 * c3 + 2.0 * d3 * d3 - y * d3
    cc = 2.0 * c3 * d3 - 2.0 * c2 * d3 + x * d3
    dd = -d3 * y
    f2h = ((a * s + b * c) * s + cc * c * c) * s + dd * c ** 3
    if abs(c) > 1e-8:
        return f1h / c, f2h / c ** 3
    return f1h, f2h


def cubic_discriminant(cubic: CharacteristicCubic) -> float:
    a3, a2, a1, a0 = cubic.coefficients()
    return (
        18.0 * a3 * a2 * a1 * a0
        - 4.0 * a2 ** 3 * a0
        + a2 ** 2 * a1 ** 2
        - 4.0 * a3 * a1 ** 3
        - 27.0 * a3 ** 2 * a0 ** 2
    )


def discriminant_surface(g: GeometryParams, j: JointVector) -> float:
    """Discriminant of the orientation cubic; zero iff a repeated root.

    This is the joint-space surface containing the cusp points (degree 8
    in the leg lengths).
    """
    return cubic_discriminant(characteristic_cubic(g, j))


def discriminant_grid(g: GeometryParams, R1, R2, R3):
    """Vectorized discriminant over arrays of leg lengths."""
    from .kinematics import cubic_coefficients_from_squares

    a3, a2, a1, a0 = cubic_coefficients_from_squares(g, R1 ** 2, R2 ** 2, R3 ** 2)
    return (
        18.0 * a3 * a2 * a1 * a0
        - 4.0 * a2 ** 3 * a0
        + a2 ** 2 * a1 ** 2
        - 4.0 * a3 * a1 ** 3
        - 27.0 * a3 ** 2 * a0 ** 2
    )


def _tangency_value(g: GeometryParams, j: JointVector, s: complex, c: complex) -> complex:
    """Double-root condition of the position solve at a projective root.

    (s, c) are half-angle homogeneous coordinates (possibly complex)
    normalized to s^2 + c^2 = 1; the returned value vanishes exactly
    when the circle/line intersection is tangent at that orientation.
    """
    cph = c * c - s * s
    sph = 2.0 * s * c
    cb = math.cos(g.beta)
    sb = math.sin(g.beta)
    cpb = cph * cb - sph * sb
    spb = sph * cb + cph * sb
    q1 = j.rho1 ** 2

    R = 2.0 * (g.l2 * cph - g.c2)
    S = 2.0 * g.l2 * sph
    Q = g.l2 ** 2 + g.c2 ** 2 - 2.0 * g.l2 * g.c2 * cph - (j.rho2 ** 2 - q1)
    ux = g.l3 * cpb - g.c3
    uy = g.l3 * spb - g.d3
    U = 2.0 * ux
    V = 2.0 * uy
    W = ux * ux + uy * uy - (j.rho3 ** 2 - q1)

    n4 = abs(R) ** 2 + abs(S) ** 2
    n5 = abs(U) ** 2 + abs(V) ** 2
    if n4 >= n5:
        return Q * Q - q1 * (R * R + S * S)
    return W * W - q1 * (U * U + V * V)


def branch_surface(g: GeometryParams, j: JointVector, eps: float = 1e-9) -> float:
    """Numeric resultant of the tangency condition over orientation roots.

    Product of the tangency value over the three projective roots of the
    characteristic cubic (complex roots pair up, so the product is
    real).  Its zero set is the union of the quadratic-branch surfaces
    of the joint space; the sign tracks transversal crossings.
    """
    cubic = characteristic_cubic(g, j)
    coeffs = list(cubic.coefficients())
    amax = max(abs(cf) for cf in coeffs)
    if amax == 0.0:
        return 0.0
    inf_mult = 0
    while len(coeffs) > 1 and abs(coeffs[0]) < eps * amax:
        coeffs.pop(0)
        inf_mult += 1

    vals: list[complex] = []
    if len(coeffs) > 1:
        for z in np.roots(coeffs):
            t = complex(z)
            den = cmath.sqrt(1.0 + t * t)
            if abs(den) > 1e-12:
                s, c = t / den, 1.0 / den
            else:
                s, c = t, 1.0  # isotropic direction; unnormalized fallback
            vals.append(_tangency_value(g, j, s, c))
    for _ in range(inf_mult):
        vals.append(_tangency_value(g, j, 1.0, 0.0))

    prod = complex(1.0, 0.0)
    for v in vals:
        prod *= v
    return prod.real


def joint_space_sample(g: GeometryParams, j: JointVector) -> JointSpaceSurfaceSample:
    return JointSpaceSurfaceSample(
        delta=discriminant_surface(g, j), branch=branch_surface(g, j)
    )


def local_scale(f, point, h: float = 1e-3) -> float:
    """Max |f| over the point and its +/-h coordinate perturbations.

    Used to classify a sample as "on" a surface: polynomial surface
    values vary over orders of magnitude across a map, so thresholds are
    taken relative to this local magnitude estimate.
    """
    point = list(point)
    best = abs(f(*point))
    for k in range(len(point)):
        for sgn in (-1.0, 1.0):
            q = list(point)
            q[k] += sgn * h
            best = max(best, abs(f(*q)))
    return best
