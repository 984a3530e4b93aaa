"""Second-order singularities: triple orientation roots in joint space.

A cusp point is a joint vector where the characteristic cubic and its
first two t-derivatives vanish simultaneously.  Cusps are located by
multistart Newton on that 3-equation system, batched over a seed grid;
the Jacobians are analytic (everything is polynomial in t and in the
squared leg lengths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, GeometryParams
from .kinematics import (
    JointVector,
    characteristic_cubic,
    cubic_coefficient_gradients,
    cubic_coefficients_from_squares,
)

#: Default seed counts per axis (t, first free joint, second free joint).
DEFAULT_SEEDS = 40

#: Default t seed range; tan(phi/2) rarely exceeds |10| for meaningful cusps.
DEFAULT_T_RANGE = (-10.0, 10.0)

#: Converged points must drive all three residuals below this (relative).
RESIDUAL_TOL = 1e-10

#: Points closer than this in the free joint coordinates are merged.
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class CuspPoint:
    """A joint-space point whose orientation cubic has a triple root."""

    rho1: float
    rho2: float
    rho3: float
    t_triple: float
    residuals: tuple[float, float, float]

    @property
    def joints(self) -> JointVector:
        return JointVector(self.rho1, self.rho2, self.rho3)

    def to_dict(self) -> dict:
        return {
            "rho1": self.rho1,
            "rho2": self.rho2,
            "rho3": self.rho3,
            "t_triple": self.t_triple,
            "residuals": list(self.residuals),
        }


@dataclass
class CuspSearchResult:
    points: list[CuspPoint]
    seeds_total: int
    seeds_converged: int
    seeds_discarded: int


@dataclass
class ProjectionProbe:
    """Projection of the cusp curve onto (rho1, rho3) at fixed rho1."""

    rho1: float
    rho3_values: list[float]
    rho2_values: list[float]
    cubic_in_r3: list[float] | None  # monic coefficients over R3 = rho3^2


def triple_root_residuals(
    g: GeometryParams, j: JointVector, t: float
) -> tuple[float, float, float]:
    """(P, P', P'') of the characteristic cubic at t."""
    cubic = characteristic_cubic(g, j)
    return cubic.eval(t), cubic.eval_d1(t), cubic.eval_d2(t)


def _newton_triple_batch(
    g: GeometryParams,
    t0: np.ndarray,
    rho0: np.ndarray,
    free: tuple[int, int],
    iters: int = 60,
):
    """Batched Newton on (P, P', P'') = 0 in (t, rho_free1, rho_free2).

    rho0 has shape (N, 3); the non-free column stays fixed.  Returns the
    final (t, rho, relative residual) arrays.
    """
    t = np.array(t0, dtype=float)
    rho = np.array(rho0, dtype=float)
    n = len(t)
    gq = cubic_coefficient_gradients(g)

    def residuals(t, rho):
        q = rho ** 2
        a3, a2, a1, a0 = cubic_coefficients_from_squares(g, q[:, 0], q[:, 1], q[:, 2])
        p = ((a3 * t + a2) * t + a1) * t + a0
        p1 = (3.0 * a3 * t + 2.0 * a2) * t + a1
        p2 = 6.0 * a3 * t + 2.0 * a2
        return (a3, a2, a1, a0), p, p1, p2

    for _ in range(iters):
        (a3, a2, a1, a0), p, p1, p2 = residuals(t, rho)
        jac = np.empty((n, 3, 3))
        jac[:, 0, 0] = p1
        jac[:, 1, 0] = p2
        jac[:, 2, 0] = 6.0 * a3
        for col, k in enumerate(free, start=1):
            da = gq[:, k][:, None] * (2.0 * rho[:, k])[None, :]  # (4, N)
            jac[:, 0, col] = ((da[0] * t + da[1]) * t + da[2]) * t + da[3]
            jac[:, 1, col] = (3.0 * da[0] * t + 2.0 * da[1]) * t + da[2]
            jac[:, 2, col] = 6.0 * da[0] * t + 2.0 * da[1]
        f = np.stack([p, p1, p2], axis=1)[:, :, None]
        det = np.linalg.det(jac)
        ok = np.isfinite(det) & (np.abs(det) > 1e-300)
        step = np.zeros((n, 3))
        if np.any(ok):
            step[ok] = np.linalg.solve(jac[ok], f[ok])[:, :, 0]
        t = t - step[:, 0]
        for col, k in enumerate(free, start=1):
            rho[:, k] = rho[:, k] - step[:, col]
        bad = ~(np.isfinite(t) & np.all(np.isfinite(rho), axis=1))
        t[bad] = np.nan
        rho[bad] = np.nan

    (a3, a2, a1, a0), p, p1, p2 = residuals(np.nan_to_num(t), np.nan_to_num(rho))
    amax = np.maximum.reduce([np.abs(a3), np.abs(a2), np.abs(a1), np.abs(a0)])
    tt = np.nan_to_num(np.abs(t))
    scale = (
        np.abs(a3) * tt ** 3 + np.abs(a2) * tt ** 2 + np.abs(a1) * tt + np.abs(a0) + amax + 1e-30
    )
    res = np.maximum.reduce([np.abs(p), np.abs(p1), np.abs(p2)]) / scale
    res[~(np.isfinite(t) & np.all(np.isfinite(rho), axis=1))] = np.inf
    return t, rho, res


def _dedup_points(cands: list[tuple[float, float, float]]) -> list[tuple[float, float, float]]:
    """Merge converged points closer than DEDUP_TOL in the free coordinates."""
    cands = sorted(cands)
    out: list[tuple[float, float, float]] = []
    for c in cands:
        if out and abs(c[0] - out[-1][0]) < DEDUP_TOL and abs(c[1] - out[-1][1]) < DEDUP_TOL:
            continue
        out.append(c)
    return out


def find_cusps_in_section(
    g: GeometryParams,
    rho2: float,
    box: tuple[tuple[float, float], tuple[float, float]] = ((0.1, 4.0), (0.1, 4.0)),
    seeds_per_axis: int = DEFAULT_SEEDS,
    t_range: tuple[float, float] = DEFAULT_T_RANGE,
    t_seeds: int = DEFAULT_SEEDS,
) -> CuspSearchResult:
    """All cusp points in the (rho1, rho3) box of the rho2 section.

    Deterministic multistart Newton from a regular seed grid; converged
    points are filtered to the box and the positive quadrant, polished
    to relative residuals below RESIDUAL_TOL and deduplicated.
    """
    (r1lo, r1hi), (r3lo, r3hi) = box
    if r1lo <= 0 or r3lo <= 0:
        raise ValueError("search box must lie in the positive quadrant")
    ts = np.linspace(t_range[0], t_range[1], t_seeds)
    r1s = np.linspace(r1lo, r1hi, seeds_per_axis)
    r3s = np.linspace(r3lo, r3hi, seeds_per_axis)
    tg, g1, g3 = np.meshgrid(ts, r1s, r3s, indexing="ij")
    t0 = tg.ravel()
    rho0 = np.stack([g1.ravel(), np.full(t0.shape, float(rho2)), g3.ravel()], axis=1)

    t, rho, res = _newton_triple_batch(g, t0, rho0, free=(0, 2))
    conv = res < RESIDUAL_TOL
    inside = (
        conv
        & (rho[:, 0] > 0.0)
        & (rho[:, 2] > 0.0)
        & (rho[:, 0] >= r1lo - DEDUP_TOL)
        & (rho[:, 0] <= r1hi + DEDUP_TOL)
        & (rho[:, 2] >= r3lo - DEDUP_TOL)
        & (rho[:, 2] <= r3hi + DEDUP_TOL)
    )
    cands = [
        (float(rho[i, 0]), float(rho[i, 2]), float(t[i])) for i in np.nonzero(inside)[0]
    ]
    points = []
    for r1, r3, tt in _dedup_points(cands):
        jv = JointVector(r1, float(rho2), r3)
        pres = triple_root_residuals(g, jv, tt)
        points.append(CuspPoint(r1, float(rho2), r3, tt, pres))
    return CuspSearchResult(
        points=points,
        seeds_total=len(t0),
        seeds_converged=int(conv.sum()),
        seeds_discarded=int(len(t0) - conv.sum()),
    )


def cusp_projection_probe(
    g: GeometryParams,
    rho1: float,
    rho_range: tuple[float, float] = (0.1, 5.0),
    seeds_per_axis: int = 30,
    t_range: tuple[float, float] = DEFAULT_T_RANGE,
    t_seeds: int = DEFAULT_SEEDS,
) -> ProjectionProbe:
    """rho3 values on the cusp-curve projection at fixed rho1 (c2 = 1).

    Searches (t, rho2, rho3) by the same multistart Newton; the distinct
    squared rho3 values double as roots of the cubic the projection
    satisfies, returned as monic coefficients for structural checks.
    """
    if abs(g.c2 - 1.0) > 1e-9:
        raise GeometryError("projection probe expects geometry rescaled to c2 = 1")
    lo, hi = rho_range
    ts = np.linspace(t_range[0], t_range[1], t_seeds)
    r2s = np.linspace(lo, hi, seeds_per_axis)
    r3s = np.linspace(lo, hi, seeds_per_axis)
    tg, g2, g3 = np.meshgrid(ts, r2s, r3s, indexing="ij")
    t0 = tg.ravel()
    rho0 = np.stack([np.full(t0.shape, float(rho1)), g2.ravel(), g3.ravel()], axis=1)

    t, rho, res = _newton_triple_batch(g, t0, rho0, free=(1, 2))
    conv = (
        (res < RESIDUAL_TOL)
        & (rho[:, 1] > 0.0)
        & (rho[:, 2] > 0.0)
        & (rho[:, 1] <= hi + 1.0)
        & (rho[:, 2] <= hi + 1.0)
    )
    cands = [
        (float(rho[i, 2]), float(rho[i, 1]), float(t[i])) for i in np.nonzero(conv)[0]
    ]
    uniq = _dedup_points(cands)
    rho3_values = [c[0] for c in uniq]
    rho2_values = [c[1] for c in uniq]

    r3sq = []
    for v in rho3_values:
        if not any(abs(v * v - u) < 10 * DEDUP_TOL for u in r3sq):
            r3sq.append(v * v)
    cubic = list(np.poly(r3sq)) if 1 <= len(r3sq) <= 3 else None
    return ProjectionProbe(
        rho1=float(rho1),
        rho3_values=rho3_values,
        rho2_values=rho2_values,
        cubic_in_r3=cubic,
    )
