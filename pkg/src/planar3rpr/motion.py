"""Branch tracking along joint-space paths and cusp-encircling loops.

A forward-kinematics solution branch is followed by predictor-corrector
continuation: at each densified path point the pose is Newton-corrected
on the three leg constraints from the previous pose.  Encircling a cusp
point with such a loop changes the assembly mode without the tracked
pose ever meeting a singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryParams
from .kinematics import (
    JointVector,
    Pose,
    constraint_gradient_matrix,
    constraint_residuals,
    forward_kinematics_analytic,
    ik_residual,
)
from .singularity import branch_surface, discriminant_surface

#: Consecutive corrected poses must stay within this pose-metric step.
MAX_POSE_STEP = 0.05

#: |detM| floor, relative to the running median along the path.
DET_FLOOR_REL = 1e-6

#: Pose distance above which start and end count as different modes.
MODE_CHANGE_TOL = 1e-6


class MotionError(RuntimeError):
    pass


class StartNotOnBranch(MotionError):
    """The start pose does not solve the first waypoint's kinematics."""


class SingularApproach(MotionError):
    """|detM| fell below the floor along the path."""


class BranchJump(MotionError):
    """Newton could not be kept within the trust radius by subdivision."""


class LoopCrossesOtherSurface(MotionError):
    """The loop meets a singularity surface not tied to the encircled cusp."""


@dataclass
class JointPath:
    """Ordered joint-space waypoints; closed paths repeat the first point."""

    waypoints: np.ndarray
    closed: bool = False

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 3:
            raise ValueError("waypoints must be an (N, 3) array")
        if np.any(self.waypoints < 0) or not np.all(np.isfinite(self.waypoints)):
            raise ValueError("waypoints must be finite and non-negative")
        if self.closed and not np.allclose(self.waypoints[0], self.waypoints[-1]):
            raise ValueError("closed path must end at its first waypoint")


@dataclass
class TransitReport:
    start_pose: Pose
    end_pose: Pose
    min_abs_detM: float
    mode_changed: bool
    samples: list[tuple[JointVector, Pose, float]] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "start_pose": self.start_pose.to_dict(),
            "end_pose": self.end_pose.to_dict(),
            "min_abs_detM": self.min_abs_detM,
            "mode_changed": self.mode_changed,
            "samples": len(self.samples),
        }


def make_cusp_loop(
    g: GeometryParams,
    cusp,
    radius: float,
    steps: int = 720,
    check_surfaces: bool = True,
) -> JointPath:
    """Closed circle in the (rho1, rho3) plane around a cusp at fixed rho2.

    Rejects loops that cross the position-tangency surface or more than
    the two discriminant branches that meet at the encircled cusp.
    """
    if radius <= 0:
        raise ValueError("loop radius must be positive")
    angles = np.linspace(0.0, 2.0 * math.pi, int(steps) + 1)[:-1]
    r1 = cusp.rho1 + radius * np.cos(angles)
    r3 = cusp.rho3 + radius * np.sin(angles)
    if np.any(r1 <= 0) or np.any(r3 <= 0):
        raise ValueError("loop leaves the positive joint quadrant")
    joints = [JointVector(a, cusp.rho2, b) for a, b in zip(r1, r3)]
    dvals = np.array([discriminant_surface(g, jv) for jv in joints])

    if check_surfaces:
        gvals = np.array([branch_surface(g, jv) for jv in joints])
        if _sign_changes_cyclic(gvals) > 0:
            raise LoopCrossesOtherSurface("loop crosses a position-tangency surface")
        if _sign_changes_cyclic(dvals) > 2:
            raise LoopCrossesOtherSurface(
                "loop crosses a repeated-root branch not emanating from this cusp"
            )

    # Start the traversal deep inside the three-root wedge (max
    # discriminant): branches started there survive both fold crossings,
    # whereas a start in the single-root region dies at the exit fold.
    shift = int(np.argmax(dvals))
    r1 = np.roll(r1, -shift)
    r3 = np.roll(r3, -shift)
    waypoints = np.stack(
        [np.append(r1, r1[0]), np.full(len(r1) + 1, cusp.rho2), np.append(r3, r3[0])],
        axis=1,
    )
    return JointPath(waypoints, closed=True)


def make_circle_loop(center: JointVector, radius: float, steps: int = 720) -> JointPath:
    """Closed circle in the (rho1, rho3) plane around any joint vector.

    No surface checks; use make_cusp_loop for cusp-encircling loops.
    """
    if radius <= 0:
        raise ValueError("loop radius must be positive")
    angles = np.linspace(0.0, 2.0 * math.pi, int(steps) + 1)
    r1 = center.rho1 + radius * np.cos(angles)
    r3 = center.rho3 + radius * np.sin(angles)
    if np.any(r1 <= 0) or np.any(r3 <= 0):
        raise ValueError("loop leaves the positive joint quadrant")
    waypoints = np.stack([r1, np.full_like(r1, center.rho2), r3], axis=1)
    waypoints[-1] = waypoints[0]
    return JointPath(waypoints, closed=True)


def _sign_changes_cyclic(values: np.ndarray) -> int:
    """Number of sign transitions around a cyclic sequence (zeros skipped)."""
    s = np.sign(values)
    s = s[s != 0]
    if len(s) < 2:
        return 0
    return int(np.sum(s != np.roll(s, -1)))


def _newton_correct(g: GeometryParams, joints: JointVector, pose: np.ndarray, iters: int = 30):
    """Correct (x, y, phi) onto the constraint manifold; None on failure."""
    x, y, phi = pose
    scale = (1.0 + joints.norm) ** 2
    for _ in range(iters):
        f = constraint_residuals(g, x, y, phi, joints)
        if np.max(np.abs(f)) < 1e-15 * scale:
            break
        m = constraint_gradient_matrix(g, x, y, phi)
        try:
            step = np.linalg.solve(m, f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > 5.0:
            return None
        x -= step[0]
        y -= step[1]
        phi -= step[2]
    f = constraint_residuals(g, x, y, phi, joints)
    if np.max(np.abs(f)) >= 1e-12 * scale:
        return None
    return np.array([x, y, phi])


def _pose_step(a: np.ndarray, b: np.ndarray) -> float:
    dphi = abs(math.remainder(a[2] - b[2], 2.0 * math.pi))
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]), dphi)


def track_branch(
    g: GeometryParams,
    path: JointPath,
    start: Pose,
    max_pose_step: float = MAX_POSE_STEP,
    det_floor_rel: float = DET_FLOOR_REL,
    max_subdivision: int = 24,
) -> TransitReport:
    """Follow one FK branch along the path by Newton continuation.

    Segments are subdivided until consecutive corrected poses stay
    within max_pose_step, which prevents branch jumping where two
    branches approach; aborts when |detM| falls below the relative
    floor.
    """
    joints0 = JointVector(*path.waypoints[0])
    if ik_residual(g, start, joints0) >= 1e-8 * (1.0 + joints0.norm):
        raise StartNotOnBranch("start pose does not solve the first waypoint")

    pose = np.array([start.x, start.y, start.phi])
    det0 = float(np.linalg.det(constraint_gradient_matrix(g, *pose)))
    dets = [abs(det0)]
    samples = [(joints0, start, det0)]
    min_abs_det = abs(det0)

    for a, b in zip(path.waypoints[:-1], path.waypoints[1:]):
        lam = 0.0
        dlam = 1.0
        while lam < 1.0 - 1e-12:
            dlam = min(dlam, 1.0 - lam)
            target = a + (lam + dlam) * (b - a)
            joints = JointVector(*target)
            corrected = _newton_correct(g, joints, pose)
            if corrected is None or _pose_step(corrected, pose) > max_pose_step:
                dlam *= 0.5
                if dlam < 2.0 ** (-max_subdivision):
                    raise BranchJump("trust radius exceeded; segment not trackable")
                continue
            lam += dlam
            dlam = min(2.0 * dlam, 1.0)
            pose = corrected
            det = float(np.linalg.det(constraint_gradient_matrix(g, *pose)))
            dets.append(abs(det))
            min_abs_det = min(min_abs_det, abs(det))
            samples.append((joints, Pose(*pose), det))
            if len(dets) >= 20:
                floor = det_floor_rel * float(np.median(dets))
                if abs(det) < floor:
                    raise SingularApproach(
                        f"|detM|={abs(det):.3e} fell below floor {floor:.3e}"
                    )

    end_pose = Pose(*pose)
    same_joints = np.allclose(path.waypoints[0], path.waypoints[-1], atol=1e-12)
    mode_changed = bool(same_joints and start.distance(end_pose) > MODE_CHANGE_TOL)
    return TransitReport(
        start_pose=start,
        end_pose=end_pose,
        min_abs_detM=min_abs_det,
        mode_changed=mode_changed,
        samples=samples,
    )


def loop_permutation(g: GeometryParams, path: JointPath) -> list[int | None]:
    """Assembly-mode permutation induced by traversing a closed path.

    Entry i is the index of the solution that branch i lands on, or None
    when that branch could not be tracked around the loop.
    """
    joints0 = JointVector(*path.waypoints[0])
    sols = forward_kinematics_analytic(g, joints0)
    perm: list[int | None] = []
    for p in sols.poses:
        try:
            rep = track_branch(g, path, p)
        except MotionError:
            perm.append(None)
            continue
        match = None
        for i, q in enumerate(sols.poses):
            if rep.end_pose.distance(q) < 1e-5:
                match = i
                break
        perm.append(match)
    return perm
