import math

import numpy as np
import pytest

from planar3rpr.atlas import (
    aspect_label_of,
    classify_section,
    count_aspects,
    workspace_det_grid,
)
from planar3rpr.geometry import GeometryParams
from planar3rpr.kinematics import JointVector, Pose, forward_kinematics_analytic
from planar3rpr.singularity import jacobian_parallel_det

SQ2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def small_section():
    g = GeometryParams(c2=1.0, c3=0.0, d3=1.0, l2=1.0, l3=1.0, beta=-math.pi / 2)
    return classify_section(g, 1.0, resolution=(80, 80))


def test_section_contains_all_even_counts(small_section):
    free = small_section.counts[~small_section.boundary_mask]
    assert {2, 4, 6}.issubset(set(np.unique(free)))


def test_section_counts_are_even(small_section):
    free = small_section.counts[~small_section.boundary_mask]
    assert np.all(free % 2 == 0)
    assert free.max() <= 6


def test_unreachable_corner_cell(example_geometry):
    sols = forward_kinematics_analytic(example_geometry, JointVector(3.9, 1.0, 0.15))
    assert sols.count == 0


def test_six_count_at_symmetric_joints(example_geometry):
    section = classify_section(
        example_geometry,
        SQ2,
        rho1_range=(1.3, 1.6),
        rho3_range=(1.3, 1.6),
        resolution=(7, 7),
    )
    i = int(np.argmin(np.abs(section.rho1 - SQ2)))
    k = int(np.argmin(np.abs(section.rho3 - SQ2)))
    assert section.counts[i, k] == 6


def test_threaded_section_matches_sequential(example_geometry):
    a = classify_section(example_geometry, 1.0, resolution=(24, 24), threads=1)
    b = classify_section(example_geometry, 1.0, resolution=(24, 24), threads=4)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.boundary_mask, b.boundary_mask)


def test_workspace_det_grid_matches_scalar(example_geometry, rng):
    pts = rng.uniform(-2, 2, size=(20, 3))
    det = workspace_det_grid(example_geometry, pts[:, 0], pts[:, 1], pts[:, 2])
    for k in range(len(pts)):
        scalar = jacobian_parallel_det(example_geometry, Pose(*pts[k]))
        assert det[k] == pytest.approx(scalar, rel=1e-12, abs=1e-12)


def test_two_aspects(example_geometry):
    report = count_aspects(example_geometry)
    assert report.component_count == 2
    assert report.nonsingular_cells > 0
    assert sum(report.component_sizes) <= report.nonsingular_cells


def test_zero_aspects_above_max_threshold(example_geometry):
    report = count_aspects(example_geometry, resolution=(20, 20, 24), threshold=1e9)
    assert report.component_count == 0


def test_aspect_count_stable_under_box_change(example_geometry):
    report = count_aspects(
        example_geometry, box=((-2.5, 2.5), (-2.5, 2.5)), resolution=(50, 50, 60)
    )
    assert report.component_count == 2


def test_two_assembly_modes_share_an_aspect(example_geometry):
    # Two FK solutions of one joint vector lying in the same aspect.
    report = count_aspects(example_geometry)
    sols = forward_kinematics_analytic(example_geometry, JointVector(SQ2, SQ2, SQ2))
    labels = [
        aspect_label_of(report, report.box, p.x, p.y, p.phi)
        for p in sols.poses
        if abs(jacobian_parallel_det(example_geometry, p)) > 0.5
    ]
    labels = [l for l in labels if l > 0]
    assert len(labels) >= 2
    assert len(set(labels)) < len(labels)


def test_adjacent_count_change_has_surface_crossing(small_section):
    # Every adjacent pair of cells with different counts must straddle a
    # sign change of delta or of the branch surface (which is exactly
    # what boundary_mask records), except where a cell is unreachable
    # (count 0 region borders arise from the branch surface as well).
    s = small_section
    diff = s.counts[:-1, :] != s.counts[1:, :]
    d_change = s.delta[:-1, :] * s.delta[1:, :] < 0
    b_change = s.branch[:-1, :] * s.branch[1:, :] < 0
    masked = s.boundary_mask[:-1, :] | s.boundary_mask[1:, :]
    assert int(diff.sum()) > 0
    unexplained = diff & ~(d_change | b_change | masked)
    assert not unexplained.any()
