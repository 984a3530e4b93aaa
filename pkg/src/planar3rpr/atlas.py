"""Solution-count maps of joint-space sections and workspace aspects.

classify_section colours a (rho1, rho3) section of the joint space by
the number of assembly modes, with a boundary mask along the
discriminant and tangency surfaces.  count_aspects flood-fills the
non-singular part of a bounded (x, y, phi) workspace grid, with the
phi = -pi and phi = pi faces glued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import GeometryParams
from .kinematics import JointVector, forward_kinematics_analytic
from .singularity import branch_surface, discriminant_grid

#: Relative threshold of the "on a surface" band (against a local
#: stencil maximum; surface values vary over orders of magnitude).
SURFACE_BAND_REL = 1e-6

#: Components smaller than this fraction of the non-singular cells are
#: discretization slivers, not aspects.
COMPONENT_NOISE_FLOOR = 0.005


@dataclass
class SectionMap:
    """FK solution counts over a (rho1, rho3) grid at fixed rho2."""

    rho2: float
    rho1: np.ndarray
    rho3: np.ndarray
    counts: np.ndarray
    boundary_mask: np.ndarray
    degenerate_mask: np.ndarray
    delta: np.ndarray
    branch: np.ndarray


@dataclass
class AspectReport:
    """Connected non-singular workspace components (phi-glued)."""

    component_count: int
    component_sizes: list[int]
    grid_shape: tuple[int, int, int]
    box: tuple[tuple[float, float], tuple[float, float]]
    threshold: float
    nonsingular_cells: int
    labels: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "component_count": self.component_count,
            "component_sizes": self.component_sizes,
            "grid_shape": list(self.grid_shape),
            "box": [list(b) for b in self.box],
            "threshold": self.threshold,
            "nonsingular_cells": self.nonsingular_cells,
        }


def _sign_change_mask(v: np.ndarray) -> np.ndarray:
    """Cells whose value changes sign against any 4-neighbor."""
    m = np.zeros(v.shape, dtype=bool)
    m[:-1, :] |= v[:-1, :] * v[1:, :] < 0
    m[1:, :] |= v[:-1, :] * v[1:, :] < 0
    m[:, :-1] |= v[:, :-1] * v[:, 1:] < 0
    m[:, 1:] |= v[:, :-1] * v[:, 1:] < 0
    return m


def _near_zero_mask(v: np.ndarray) -> np.ndarray:
    local = ndimage.maximum_filter(np.abs(v), size=3, mode="nearest")
    return np.abs(v) < SURFACE_BAND_REL * local


def classify_section(
    g: GeometryParams,
    rho2: float,
    rho1_range: tuple[float, float] = (0.1, 4.0),
    rho3_range: tuple[float, float] = (0.1, 4.0),
    resolution: tuple[int, int] = (200, 200),
    threads: int = 1,
) -> SectionMap:
    """FK solution count at every cell center, plus surface boundary mask.

    Cells are independent; threads > 1 distributes rows over a thread
    pool (results are written by index, so output stays deterministic).
    """
    n1, n3 = resolution
    r1 = np.linspace(rho1_range[0], rho1_range[1], n1)
    r3 = np.linspace(rho3_range[0], rho3_range[1], n3)
    g1, g3 = np.meshgrid(r1, r3, indexing="ij")

    delta = discriminant_grid(g, g1, np.full_like(g1, rho2), g3)
    branch = np.empty_like(delta)
    for i in range(n1):
        for k in range(n3):
            branch[i, k] = branch_surface(g, JointVector(r1[i], rho2, r3[k]))

    boundary = (
        _sign_change_mask(delta)
        | _sign_change_mask(branch)
        | _near_zero_mask(delta)
        | _near_zero_mask(branch)
    )

    counts = np.zeros((n1, n3), dtype=int)
    degenerate = np.zeros((n1, n3), dtype=bool)

    def fill_row(i: int):
        for k in range(n3):
            sol = forward_kinematics_analytic(g, JointVector(r1[i], rho2, r3[k]))
            counts[i, k] = sol.count
            degenerate[i, k] = sol.degenerate

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(n1)))
    else:
        for i in range(n1):
            fill_row(i)
    return SectionMap(
        rho2=float(rho2),
        rho1=r1,
        rho3=r3,
        counts=counts,
        boundary_mask=boundary,
        degenerate_mask=degenerate,
        delta=delta,
        branch=branch,
    )


def workspace_det_grid(g: GeometryParams, X, Y, PHI):
    """Vectorized constraint-gradient determinant over workspace arrays."""
    cph = np.cos(PHI)
    sph = np.sin(PHI)
    cpb = np.cos(PHI + g.beta)
    spb = np.sin(PHI + g.beta)
    b2x = g.l2 * cph
    b2y = g.l2 * sph
    b3x = g.l3 * cpb
    b3y = g.l3 * spb
    w2x = X + b2x - g.c2
    w2y = Y + b2y
    r2p = -w2x * b2y + w2y * b2x
    w3x = X + b3x - g.c3
    w3y = Y + b3y - g.d3
    r3p = -w3x * b3y + w3y * b3x
    # det of [[X, Y, 0], [w2x, w2y, r2p], [w3x, w3y, r3p]]
    return X * (w2y * r3p - r2p * w3y) - Y * (w2x * r3p - r2p * w3x)


def count_aspects(
    g: GeometryParams,
    box: tuple[tuple[float, float], tuple[float, float]] = ((-3.0, 3.0), (-3.0, 3.0)),
    resolution: tuple[int, int, int] = (60, 60, 72),
    threshold: float = 0.05,
) -> AspectReport:
    """Number of singularity-free workspace components with phi gluing.

    Cells are non-singular when |detM| exceeds the threshold; connected
    components are labeled separately for detM > 0 and detM < 0 (an
    aspect cannot contain a sign change, and the sign split stops flood
    fill from leaking through thin zero bands), using a 6-neighborhood
    with the phi seam glued.  Components below the noise floor are
    dropped.
    """
    (xlo, xhi), (ylo, yhi) = box
    nx, ny, nphi = resolution
    xs = np.linspace(xlo, xhi, nx)
    ys = np.linspace(ylo, yhi, ny)
    phis = -math.pi + (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    X, Y, PHI = np.meshgrid(xs, ys, phis, indexing="ij")
    det = workspace_det_grid(g, X, Y, PHI)

    struct = ndimage.generate_binary_structure(3, 1)
    sizes: list[int] = []
    total_free = 0
    merged_labels = np.zeros(det.shape, dtype=int)
    next_label = 0
    for mask in (det > threshold, det < -threshold):
        total_free += int(mask.sum())
        lab, nl = ndimage.label(mask, structure=struct)
        if nl == 0:
            continue
        # glue the phi = -pi / phi = pi faces
        parent = list(range(nl + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        first = lab[:, :, 0]
        last = lab[:, :, -1]
        both = (first > 0) & (last > 0)
        for la, lb in zip(first[both].ravel(), last[both].ravel()):
            ra, rb = find(int(la)), find(int(lb))
            if ra != rb:
                parent[ra] = rb
        roots = np.array([find(l) for l in range(nl + 1)])
        glued = roots[lab]
        ids, cnt = np.unique(glued[glued > 0], return_counts=True)
        remap = np.zeros(nl + 1, dtype=int)
        for gid, c in zip(ids, cnt):
            next_label += 1
            sizes.append(int(c))
            remap[gid] = next_label
        merged_labels[glued > 0] = remap[glued[glued > 0]]

    floor = COMPONENT_NOISE_FLOOR * max(total_free, 1)
    big = sorted((s for s in sizes if s >= floor), reverse=True)
    return AspectReport(
        component_count=len(big),
        component_sizes=big,
        grid_shape=(nx, ny, nphi),
        box=box,
        threshold=threshold,
        nonsingular_cells=total_free,
        labels=merged_labels,
    )


def aspect_label_of(report: AspectReport, box, x: float, y: float, phi: float) -> int:
    """Label of the grid cell containing (x, y, phi); 0 when singular-band."""
    (xlo, xhi), (ylo, yhi) = box
    nx, ny, nphi = report.grid_shape
    i = int(round((x - xlo) / (xhi - xlo) * (nx - 1)))
    k = int(round((y - ylo) / (yhi - ylo) * (ny - 1)))
    m = int((phi + math.pi) / (2.0 * math.pi) * nphi) % nphi
    if not (0 <= i < nx and 0 <= k < ny):
        return 0
    return int(report.labels[i, k, m])
