"""Inverse and forward kinematics of the analytic planar 3-RPR class.

Forward kinematics proceeds in two stages: the platform orientation is a
real root of a cubic in t = tan(phi/2), and for each orientation the
position comes from intersecting the circle x^2 + y^2 = rho1^2 with a
line in (x, y).  The t-parametrization misses phi = pi; a vanishing
cubic leading coefficient encodes that branch (a "root at infinity") and
it is solved directly with cos(phi) = -1, sin(phi) = 0.

A brute-force reference solver (grid scan over phi plus Newton polish)
provides an independent oracle for any geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryParams, check_analytic_class, wrap_angle

#: Orientation parameter value standing for phi = pi.
T_INFINITY = math.inf

#: Poses closer than this in max(|dx|, |dy|, |wrap(dphi)|) are merged.
POSE_DEDUP_TOL = 1e-7

#: Relative clustering tolerance for cubic root multiplicity detection.
ROOT_CLUSTER_EPS = 1e-9


class KinematicsError(ValueError):
    pass


class NonAnalyticGeometry(KinematicsError):
    """The geometry violates the analytic-class conditions."""


class AllCoefficientsZero(KinematicsError):
    """Every cubic coefficient vanishes: a continuum of orientations."""


class BothEquationsDegenerate(KinematicsError):
    """Both linear position equations degenerate to 0 = 0."""


@dataclass(frozen=True)
class Pose:
    """Platform output: position (x, y) and orientation phi in (-pi, pi]."""

    x: float
    y: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.phi)):
            raise KinematicsError("pose fields must be finite")
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def t(self) -> float:
        """Half-angle parameter tan(phi/2); infinite at phi = pi."""
        if self.phi == math.pi:
            return T_INFINITY
        return math.tan(0.5 * self.phi)

    def distance(self, other: "Pose") -> float:
        dphi = abs(wrap_angle(self.phi - other.phi))
        return max(abs(self.x - other.x), abs(self.y - other.y), dphi)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "phi": self.phi}


@dataclass(frozen=True)
class JointVector:
    """Actuated leg lengths (rho1, rho2, rho3), all non-negative."""

    rho1: float
    rho2: float
    rho3: float

    def __post_init__(self):
        vals = (self.rho1, self.rho2, self.rho3)
        if not all(math.isfinite(v) for v in vals):
            raise KinematicsError("joint lengths must be finite")
        if any(v < 0 for v in vals):
            raise KinematicsError("joint lengths must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.rho1, self.rho2, self.rho3])

    @property
    def norm(self) -> float:
        return math.hypot(self.rho1, math.hypot(self.rho2, self.rho3))


@dataclass(frozen=True)
class LinearReduction:
    """Coefficients of the two linear position equations.

    R*x + S*y + Q = 0 comes from subtracting the leg-1 constraint from
    leg 2, U*x + V*y + W = 0 from subtracting it from leg 3.
    """

    R: float
    S: float
    Q: float
    U: float
    V: float
    W: float


@dataclass(frozen=True)
class CharacteristicCubic:
    """Coefficients (a3, a2, a1, a0) of the orientation cubic in t."""

    a3: float
    a2: float
    a1: float
    a0: float

    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.a3, self.a2, self.a1, self.a0)

    def eval(self, t: float) -> float:
        return ((self.a3 * t + self.a2) * t + self.a1) * t + self.a0

    def eval_d1(self, t: float) -> float:
        return (3.0 * self.a3 * t + 2.0 * self.a2) * t + self.a1

    def eval_d2(self, t: float) -> float:
        return 6.0 * self.a3 * t + 2.0 * self.a2


@dataclass
class CubicRoots:
    """Real roots with multiplicities, plus the projective root at infinity."""

    finite: list[tuple[float, int]]
    infinity_multiplicity: int = 0

    @property
    def root_at_infinity(self) -> bool:
        return self.infinity_multiplicity > 0

    def branches(self) -> list[tuple[float, int]]:
        """Finite roots plus (inf, mult) when the infinity branch is present."""
        out = list(self.finite)
        if self.infinity_multiplicity:
            out.append((T_INFINITY, self.infinity_multiplicity))
        return out


@dataclass
class FkSolutionSet:
    """Forward-kinematics solutions with per-pose diagnostics."""

    poses: list[Pose] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    t_params: list[float] = field(default_factory=list)
    multiplicities: list[int] = field(default_factory=list)
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.poses)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "poses": [
                {
                    "x": p.x,
                    "y": p.y,
                    "phi": p.phi,
                    "t_or_inf": ("inf" if math.isinf(t) else t),
                    "residual": r,
                    "multiplicity": m,
                }
                for p, r, t, m in zip(self.poses, self.residuals, self.t_params, self.multiplicities)
            ],
            "degenerate": self.degenerate,
        }


# ---------------------------------------------------------------------------
# basic operations


def trig_from_t(t: float) -> tuple[float, float]:
    """(cos phi, sin phi) from t = tan(phi/2), stable for large |t|."""
    if math.isinf(t):
        return -1.0, 0.0
    if abs(t) <= 1.0:
        den = 1.0 + t * t
        return (1.0 - t * t) / den, 2.0 * t / den
    u = 1.0 / t
    den = u * u + 1.0
    return (u * u - 1.0) / den, 2.0 * u / den


def phi_from_t(t: float) -> float:
    return math.pi if math.isinf(t) else 2.0 * math.atan(t)


def inverse_kinematics(g: GeometryParams, p: Pose) -> JointVector:
    """Leg lengths that realize the pose p (always well defined)."""
    b2x, b2y, b3x, b3y = g.platform_offsets(p.phi)
    rho1 = math.hypot(p.x, p.y)
    rho2 = math.hypot(p.x + b2x - g.c2, p.y + b2y)
    rho3 = math.hypot(p.x + b3x - g.c3, p.y + b3y - g.d3)
    return JointVector(rho1, rho2, rho3)


def ik_residual(g: GeometryParams, p: Pose, j: JointVector) -> float:
    """max_i |rho_i(p) - rho_i| round-trip residual."""
    back = inverse_kinematics(g, p)
    return max(
        abs(back.rho1 - j.rho1),
        abs(back.rho2 - j.rho2),
        abs(back.rho3 - j.rho3),
    )


def linear_reduction(g: GeometryParams, t: float, j: JointVector) -> LinearReduction:
    """Coefficients of the two linear equations at orientation t.

    For the analytic class RV - SU vanishes identically, so the two
    lines coincide whenever both are non-degenerate.
    """
    cph, sph = trig_from_t(t)
    cb = math.cos(g.beta)
    sb = math.sin(g.beta)
    cpb = cph * cb - sph * sb
    spb = sph * cb + cph * sb
    R = 2.0 * (g.l2 * cph - g.c2)
    S = 2.0 * g.l2 * sph
    Q = g.l2 ** 2 + g.c2 ** 2 - 2.0 * g.l2 * g.c2 * cph - (j.rho2 ** 2 - j.rho1 ** 2)
    ux = g.l3 * cpb - g.c3
    uy = g.l3 * spb - g.d3
    U = 2.0 * ux
    V = 2.0 * uy
    W = ux * ux + uy * uy - (j.rho3 ** 2 - j.rho1 ** 2)
    return LinearReduction(R, S, Q, U, V, W)


def class_degeneracy(g: GeometryParams, t: float, j: JointVector) -> float:
    """RV - SU at orientation t; identically zero on the analytic class."""
    lr = linear_reduction(g, t, j)
    return lr.R * lr.V - lr.S * lr.U


# ---------------------------------------------------------------------------
# characteristic cubic


def cubic_coefficients_from_squares(
    g: GeometryParams, q1, q2, q3
):
    """Cubic coefficients as functions of the squared joint lengths.

    Accepts scalars or numpy arrays; returns (a3, a2, a1, a0).
    """
    c2, c3, d3 = g.c2, g.c3, g.d3
    a3 = c3 * (q1 - q2 + 4.0 * c2 * c2 - 4.0 * c3 * c2) + c2 * (q3 - q1)
    a2 = d3 * (8.0 * c3 * c2 - 4.0 * c2 * c2 + q2 - q1)
    a1 = c3 * (q1 - q2) + q3 * c2 - 4.0 * d3 * d3 * c2 - q1 * c2
    a0 = d3 * (q2 - q1)
    return a3, a2, a1, a0


def cubic_coefficient_gradients(g: GeometryParams) -> np.ndarray:
    """d(a_i)/d(q_k) for rows (a3, a2, a1, a0), columns (q1, q2, q3)."""
    c2, c3, d3 = g.c2, g.c3, g.d3
    return np.array(
        [
            [c3 - c2, -c3, c2],
            [-d3, d3, 0.0],
            [c3 - c2, -c3, c2],
            [-d3, d3, 0.0],
        ]
    )


def characteristic_cubic(
    g: GeometryParams, j: JointVector, class_tol: float = 1e-9
) -> CharacteristicCubic:
    """Orientation cubic of the analytic class; rejects other geometries."""
    verdict = check_analytic_class(g, tol=class_tol)
    if not verdict.is_analytic:
        names = ", ".join(n for n, _ in verdict.violations)
        raise NonAnalyticGeometry(f"geometry violates analytic-class conditions: {names}")
    a3, a2, a1, a0 = cubic_coefficients_from_squares(
        g, j.rho1 ** 2, j.rho2 ** 2, j.rho3 ** 2
    )
    return CharacteristicCubic(a3, a2, a1, a0)


def _poly_scale(coeffs: list[float], t: float) -> float:
    """Magnitude scale of a polynomial evaluation at t (sum of |terms|)."""
    s = 0.0
    p = 1.0
    for c in reversed(coeffs):
        s += abs(c) * p
        p *= abs(t) if math.isfinite(t) else 1.0
    return s + max(abs(c) for c in coeffs)


def _newton_polish(coeffs: list[float], t: float, iters: int = 4) -> float:
    n = len(coeffs) - 1
    for _ in range(iters):
        p = 0.0
        dp = 0.0
        for c in coeffs:
            dp = dp * t + p
            p = p * t + c
        if dp == 0.0:
            break
        step = p / dp
        if not math.isfinite(step):
            break
        t -= step
    return t


def cubic_real_roots(
    cubic: CharacteristicCubic,
    eps: float = ROOT_CLUSTER_EPS,
    scale_hint: float = 1.0,
) -> CubicRoots:
    """Real roots with multiplicities, classified via derivative criteria.

    Multiplicity detection uses the critical points of the polynomial
    (roots of P' and P'') rather than clustering of eigenvalue output,
    which keeps exact multiple roots exact under coefficient round-off.
    The root at infinity appears when the leading coefficient is
    negligible relative to the largest one.
    """
    a = list(cubic.coefficients())
    amax = max(abs(c) for c in a)
    if amax <= eps * scale_hint:
        raise AllCoefficientsZero("all characteristic coefficients vanish")

    coeffs = a[:]
    inf_mult = 0
    while len(coeffs) > 1 and abs(coeffs[0]) < eps * amax:
        coeffs.pop(0)
        inf_mult += 1

    deg = len(coeffs) - 1
    if deg == 0:
        return CubicRoots([], inf_mult)
    if deg == 1:
        return CubicRoots([(-coeffs[1] / coeffs[0], 1)], inf_mult)

    if deg == 2:
        b2, b1, b0 = coeffs
        disc = b1 * b1 - 4.0 * b2 * b0
        dscale = b1 * b1 + 4.0 * abs(b2 * b0) + (eps * amax) ** 2
        if abs(disc) < eps * dscale:
            return CubicRoots([(-b1 / (2.0 * b2), 2)], inf_mult)
        if disc < 0.0:
            return CubicRoots([], inf_mult)
        sq = math.sqrt(disc)
        # stable quadratic formula
        qq = -0.5 * (b1 + math.copysign(sq, b1))
        r1 = qq / b2
        r2 = b0 / qq if qq != 0.0 else -b1 / b2
        roots = sorted([r1, r2])
        return CubicRoots([(r, 1) for r in roots], inf_mult)

    a3, a2, a1, a0 = coeffs
    # triple root: common zero of P'' and P' and P
    t2 = -a2 / (3.0 * a3)
    p_t2 = cubic.eval(t2)
    p1_t2 = cubic.eval_d1(t2)
    if abs(p_t2) < eps * _poly_scale(coeffs, t2) and abs(p1_t2) < eps * _poly_scale(
        [3 * a3, 2 * a2, a1], t2
    ):
        return CubicRoots([(t2, 3)], inf_mult)

    # double root: a real critical point where P nearly vanishes
    dd = (2.0 * a2) ** 2 - 12.0 * a3 * a1
    if dd >= 0.0:
        sq = math.sqrt(dd)
        for r in ((-2.0 * a2 + sq) / (6.0 * a3), (-2.0 * a2 - sq) / (6.0 * a3)):
            if abs(cubic.eval(r)) < eps * _poly_scale(coeffs, r):
                r = _newton_polish([3 * a3, 2 * a2, a1], r)
                third = -a2 / a3 - 2.0 * r
                third = _newton_polish(coeffs, third)
                finite = sorted([(r, 2), (third, 1)])
                return CubicRoots(finite, inf_mult)

    # three simple (possibly complex) roots
    rr = np.roots(coeffs)
    finite = []
    for z in rr:
        if abs(z.imag) <= 1e-8 * (1.0 + abs(z.real)):
            finite.append((_newton_polish(coeffs, float(z.real)), 1))
    finite.sort()
    return CubicRoots(finite, inf_mult)


# ---------------------------------------------------------------------------
# position solve


def orientation_to_positions(
    g: GeometryParams,
    j: JointVector,
    t: float,
    res_tol: float | None = None,
) -> list[tuple[float, float, float]]:
    """Positions (x, y) compatible with joints j at orientation t.

    Picks whichever of the two linear equations has the larger
    coefficient norm and intersects it with the leg-1 circle by solving
    a*cos(z) + b*sin(z) = c.  Every candidate is verified by an inverse
    kinematics round trip; returns (x, y, residual) triples.
    """
    scale = 1.0 + j.norm
    if res_tol is None:
        res_tol = 1e-8 * scale
    lr = linear_reduction(g, t, j)
    n4 = math.hypot(lr.R, lr.S)
    n5 = math.hypot(lr.U, lr.V)
    lin_tol = 1e-12 * (1.0 + scale * scale)

    rho1 = j.rho1
    if rho1 < 1e-14 * scale:
        candidates = [(0.0, 0.0)]
    else:
        if max(n4, n5) < lin_tol:
            if max(abs(lr.Q), abs(lr.W)) < lin_tol * scale:
                raise BothEquationsDegenerate(
                    "both position equations reduce to 0 = 0: continuum of positions"
                )
            return []  # inconsistent: nonzero constant, vanishing coefficients
        if n4 >= n5:
            a, b, const = lr.R, lr.S, lr.Q
        else:
            a, b, const = lr.U, lr.V, lr.W
        amp = rho1 * math.hypot(a, b)
        c = -const
        if abs(c) > amp * (1.0 + 1e-9) + lin_tol:
            return []
        ratio = min(1.0, max(-1.0, c / amp))
        z0 = math.atan2(b, a)
        dz = math.acos(ratio)
        zs = [z0 + dz]
        if dz > 1e-12 and math.pi - dz > 1e-12:
            zs.append(z0 - dz)
        candidates = [(rho1 * math.cos(z), rho1 * math.sin(z)) for z in zs]

    phi = phi_from_t(t)
    out = []
    for x, y in candidates:
        r = ik_residual(g, Pose(x, y, phi), j)
        if r < res_tol:
            out.append((x, y, r))
    return out


def _dedup_append(
    result: FkSolutionSet, pose: Pose, residual: float, t: float, mult: int
) -> None:
    for i, p in enumerate(result.poses):
        if pose.distance(p) < POSE_DEDUP_TOL:
            result.multiplicities[i] = max(result.multiplicities[i], mult)
            result.residuals[i] = min(result.residuals[i], residual)
            return
    result.poses.append(pose)
    result.residuals.append(residual)
    result.t_params.append(t)
    result.multiplicities.append(mult)


def _sorted_solution_set(result: FkSolutionSet) -> FkSolutionSet:
    order = sorted(
        range(len(result.poses)),
        key=lambda i: (result.poses[i].x, result.poses[i].y, result.poses[i].phi),
    )
    return FkSolutionSet(
        poses=[result.poses[i] for i in order],
        residuals=[result.residuals[i] for i in order],
        t_params=[result.t_params[i] for i in order],
        multiplicities=[result.multiplicities[i] for i in order],
        degenerate=result.degenerate,
        warnings=result.warnings,
    )


def forward_kinematics_analytic(
    g: GeometryParams, j: JointVector, eps: float = ROOT_CLUSTER_EPS
) -> FkSolutionSet:
    """All assembly modes via the cubic + trigonometric position solve."""
    cubic = characteristic_cubic(g, j)
    geom_scale = 1.0 + max(g.c2 ** 2, g.c3 ** 2 + g.d3 ** 2, g.l2 ** 2, g.l3 ** 2)
    scale_hint = geom_scale * (1.0 + j.norm ** 2)
    result = FkSolutionSet()
    try:
        roots = cubic_real_roots(cubic, eps=eps, scale_hint=scale_hint)
    except AllCoefficientsZero:
        result.degenerate = True
        result.warnings.append("characteristic cubic vanished identically")
        return result
    for t, mult in roots.branches():
        try:
            positions = orientation_to_positions(g, j, t)
        except BothEquationsDegenerate:
            result.degenerate = True
            result.warnings.append(f"continuum of positions at t={t!r}")
            continue
        phi = phi_from_t(t)
        for x, y, r in positions:
            _dedup_append(result, Pose(x, y, phi), r, t, mult)
    return _sorted_solution_set(result)


# ---------------------------------------------------------------------------
# brute-force reference oracle


def constraint_residuals(g: GeometryParams, x: float, y: float, phi: float, j: JointVector):
    """Half squared-length residuals of the three leg constraints."""
    b2x, b2y, b3x, b3y = g.platform_offsets(phi)
    f1 = 0.5 * (x * x + y * y - j.rho1 ** 2)
    w2x = x + b2x - g.c2
    w2y = y + b2y
    f2 = 0.5 * (w2x * w2x + w2y * w2y - j.rho2 ** 2)
    w3x = x + b3x - g.c3
    w3y = y + b3y - g.d3
    f3 = 0.5 * (w3x * w3x + w3y * w3y - j.rho3 ** 2)
    return np.array([f1, f2, f3])


def constraint_gradient_matrix(g: GeometryParams, x: float, y: float, phi: float) -> np.ndarray:
    """Rows are gradients of rho_i^2 / 2 with respect to (x, y, phi)."""
    b2x, b2y, b3x, b3y = g.platform_offsets(phi)
    w2x = x + b2x - g.c2
    w2y = y + b2y
    w3x = x + b3x - g.c3
    w3y = y + b3y - g.d3
    return np.array(
        [
            [x, y, 0.0],
            [w2x, w2y, -w2x * b2y + w2y * b2x],
            [w3x, w3y, -w3x * b3y + w3y * b3x],
        ]
    )


def _newton_pose(
    g: GeometryParams, j: JointVector, x: float, y: float, phi: float, iters: int = 50
):
    """Newton on the full 3-equation system in (x, y, phi); None on failure."""
    scale = (1.0 + j.norm) ** 2
    for _ in range(iters):
        f = constraint_residuals(g, x, y, phi, j)
        if np.max(np.abs(f)) < 1e-15 * scale:
            return x, y, phi
        m = constraint_gradient_matrix(g, x, y, phi)
        try:
            step = np.linalg.solve(m, f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > 10.0:
            return None
        x -= step[0]
        y -= step[1]
        phi -= step[2]
    f = constraint_residuals(g, x, y, phi, j)
    if np.max(np.abs(f)) < 1e-12 * scale:
        return x, y, phi
    return None


def forward_kinematics_reference(
    g: GeometryParams, j: JointVector, phi_samples: int = 3600
) -> FkSolutionSet:
    """Brute-force oracle: phi grid scan, circle intersection, Newton polish.

    Works for any geometry (analytic or not) and serves as ground truth
    for forward_kinematics_analytic.
    """
    r1 = j.rho1
    n = int(phi_samples)
    phis = -math.pi + (np.arange(n) + 1.0) * (2.0 * math.pi / n)
    idx = np.arange(n)
    scale = (1.0 + j.norm) ** 2

    # Two independent scans: intersect circle 1 with circle 2 (residual on
    # leg 3) and with circle 3 (residual on leg 2).  Whenever one pair is
    # concentric at some phi (e.g. the class degeneracy l2 = c2 at phi=0
    # with rho1 = rho2) the other pair still resolves the intersection.
    cos_b2 = g.l2 * np.cos(phis)
    sin_b2 = g.l2 * np.sin(phis)
    cos_b3 = g.l3 * np.cos(phis + g.beta)
    sin_b3 = g.l3 * np.sin(phis + g.beta)
    scans = [
        # (center_x, center_y, other_radius, residual offsets)
        (g.c2 - cos_b2, -sin_b2, j.rho2, cos_b3 - g.c3, sin_b3 - g.d3, j.rho3),
        (g.c3 - cos_b3, g.d3 - sin_b3, j.rho3, cos_b2 - g.c2, sin_b2, j.rho2),
    ]

    seeds = []  # (x, y, phi, origin key)
    for scan_no, (cx, cy, r2, wx_off, wy_off, r_chk) in enumerate(scans):
        d = np.hypot(cx, cy)
        with np.errstate(invalid="ignore", divide="ignore"):
            valid = (d > 1e-12) & (d <= r1 + r2) & (d >= abs(r1 - r2))
            aa = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
            h = np.sqrt(np.clip(r1 * r1 - aa * aa, 0.0, None))
            bx = aa * cx / d
            by = aa * cy / d
            ox = -h * cy / d
            oy = h * cx / d

        for sign in (1.0, -1.0):
            px = bx + sign * ox
            py = by + sign * oy
            gv = (px + wx_off) ** 2 + (py + wy_off) ** 2 - r_chk * r_chk
            gv[~valid] = np.nan
            gnext = np.roll(gv, -1)
            gprev = np.roll(gv, 1)
            with np.errstate(invalid="ignore"):
                sign_change = (~np.isnan(gv)) & (~np.isnan(gnext)) & (gv * gnext <= 0.0)
                # local minima of |g| catch tangential solutions and branch ends
                absg = np.abs(gv)
                local_min = (
                    (~np.isnan(gv))
                    & (absg < 0.01 * scale)
                    & (np.isnan(gprev) | (absg <= np.abs(gprev)))
                    & (np.isnan(gnext) | (absg <= np.abs(gnext)))
                )
            for i in idx[sign_change | local_min]:
                seeds.append((float(px[i]), float(py[i]), float(phis[i]), (scan_no, sign, int(i))))

    result = FkSolutionSet()
    res_tol = 1e-8 * (1.0 + j.norm)
    origin_cells = []
    for x0, y0, phi0, origin in seeds:
        polished = _newton_pose(g, j, x0, y0, phi0)
        if polished is None:
            continue
        x, y, phi = polished
        pose = Pose(x, y, phi)
        r = ik_residual(g, pose, j)
        if r >= res_tol:
            continue
        before = len(result.poses)
        _dedup_append(result, pose, r, pose.t, 1)
        if len(result.poses) > before:
            origin_cells.append(origin)
    if len(set(origin_cells)) < len(origin_cells):
        result.warnings.append("GridTooCoarse: two solutions originated from one phi cell")
    return _sorted_solution_set(result)


def match_solution_sets(
    a: FkSolutionSet, b: FkSolutionSet, tol: float = 1e-6
) -> bool:
    """True when the two sets have equal cardinality and pair off within tol."""
    if a.count != b.count:
        return False
    used = [False] * b.count
    for p in a.poses:
        found = False
        for i, q in enumerate(b.poses):
            if not used[i] and p.distance(q) < tol:
                used[i] = True
                found = True
                break
        if not found:
            return False
    return True
