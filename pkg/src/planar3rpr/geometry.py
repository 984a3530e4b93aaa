"""Manipulator geometry and the analytic-class membership test.

The base triangle sits at A1=(0,0), A2=(c2,0), A3=(c3,d3); the moving
platform is described by the side lengths l2, l3 and the angle beta at
the operation point P.  The manipulator is "analytic" when the base and
platform triangles are congruent with the platform reflected, i.e.

    l2 = c2,   l3*sin(beta) = -d3,   l3*cos(beta) = c3
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

#: Default absolute tolerance for the three class conditions.  They are
#: exact algebraic identities; the tolerance only absorbs float parsing.
CLASS_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric parameters or a malformed geometry file."""


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class GeometryParams:
    """The six geometric constants of a planar 3-RPR manipulator.

    beta is normalized into (-pi, pi] on construction.
    """

    c2: float
    c3: float
    d3: float
    l2: float
    l3: float
    beta: float

    def __post_init__(self):
        vals = (self.c2, self.c3, self.d3, self.l2, self.l3, self.beta)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("geometry parameters must be finite")
        if self.l2 <= 0 or self.l3 <= 0 or self.c2 <= 0:
            raise GeometryError("l2, l3 and c2 must be positive")
        object.__setattr__(self, "beta", wrap_angle(self.beta))

    def platform_offsets(self, phi: float) -> tuple[float, float, float, float]:
        """Offsets of the platform points B2, B3 relative to P at orientation phi."""
        b2x = self.l2 * math.cos(phi)
        b2y = self.l2 * math.sin(phi)
        b3x = self.l3 * math.cos(phi + self.beta)
        b3y = self.l3 * math.sin(phi + self.beta)
        return b2x, b2y, b3x, b3y

    def to_dict(self) -> dict:
        return {
            "c2": self.c2,
            "c3": self.c3,
            "d3": self.d3,
            "l2": self.l2,
            "l3": self.l3,
            "beta": self.beta,
        }


@dataclass
class ClassVerdict:
    """Outcome of the analytic-class membership check."""

    is_analytic: bool
    violations: list[tuple[str, float]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "is_analytic": self.is_analytic,
            "violations": [{"condition": n, "residual": r} for n, r in self.violations],
            "warnings": list(self.warnings),
        }


def check_analytic_class(g: GeometryParams, tol: float = CLASS_TOL) -> ClassVerdict:
    """Check the three congruent-reflected-platform conditions.

    Residuals are |l2-c2|, |l3*sin(beta)+d3| and |l3*cos(beta)-c3|; the
    geometry belongs to the analytic class iff all three are below tol.
    """
    residuals = [
        ("l2 = c2", abs(g.l2 - g.c2)),
        ("l3*sin(beta) = -d3", abs(g.l3 * math.sin(g.beta) + g.d3)),
        ("l3*cos(beta) = c3", abs(g.l3 * math.cos(g.beta) - g.c3)),
    ]
    violations = [(name, r) for name, r in residuals if not r < tol]
    warnings = []
    if g.d3 <= 0:
        # d3 <= 0 makes sin(beta) >= 0: the platform is not the reflected
        # configuration the class was derived for.  Accepted, but flagged.
        warnings.append("d3 <= 0: platform is not reflected (sin(beta) >= 0)")
    return ClassVerdict(is_analytic=not violations, violations=violations, warnings=warnings)


_GEOMETRY_KEYS = ("c2", "c3", "d3", "l2", "l3", "beta")


def geometry_from_dict(data: dict) -> GeometryParams:
    missing = [k for k in _GEOMETRY_KEYS if k not in data]
    if missing:
        raise GeometryError(f"geometry file missing keys: {', '.join(missing)}")
    vals = {}
    for k in _GEOMETRY_KEYS:
        v = data[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise GeometryError(f"geometry key {k!r} must be a finite number")
        vals[k] = float(v)
    return GeometryParams(**vals)


def load_geometry(path: str) -> GeometryParams:
    """Load a geometry from a JSON file with keys c2, c3, d3, l2, l3, beta."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise GeometryError(f"cannot read geometry file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GeometryError(f"geometry file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise GeometryError(f"geometry file {path} must contain a JSON object")
    return geometry_from_dict(data)
