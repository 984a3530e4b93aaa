import math

import numpy as np
import pytest

from planar3rpr.geometry import GeometryParams
from planar3rpr.kinematics import (
    AllCoefficientsZero,
    CharacteristicCubic,
    JointVector,
    KinematicsError,
    NonAnalyticGeometry,
    Pose,
    T_INFINITY,
    characteristic_cubic,
    class_degeneracy,
    cubic_real_roots,
    forward_kinematics_analytic,
    forward_kinematics_reference,
    ik_residual,
    inverse_kinematics,
    linear_reduction,
    match_solution_sets,
    orientation_to_positions,
)

SQ2 = math.sqrt(2.0)
SQ3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# inverse kinematics


def test_ik_unit_pose(example_geometry):
    j = inverse_kinematics(example_geometry, Pose(1.0, 1.0, 0.0))
    assert j.as_array() == pytest.approx([SQ2, SQ2, SQ2])


def test_ik_origin_any_orientation(example_geometry):
    j = inverse_kinematics(example_geometry, Pose(0.0, 0.0, 0.7))
    assert j.rho1 == 0.0


def test_ik_on_x_axis(example_geometry):
    j = inverse_kinematics(example_geometry, Pose(2.0, 0.0, 0.0))
    assert j.as_array() == pytest.approx([2.0, 2.0, math.sqrt(8.0)])


def test_joint_vector_rejects_negative():
    with pytest.raises(KinematicsError):
        JointVector(-1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# linear reduction


def test_linear_reduction_degenerate_first_line(example_geometry):
    lr = linear_reduction(example_geometry, 0.0, JointVector(SQ2, SQ2, SQ2))
    assert (lr.R, lr.S, lr.Q) == pytest.approx((0.0, 0.0, 0.0), abs=1e-14)
    assert (lr.U, lr.V, lr.W) == pytest.approx((0.0, -4.0, 4.0), abs=1e-14)


def test_linear_reduction_coincident_lines(example_geometry):
    lr = linear_reduction(example_geometry, -1.0, JointVector(SQ2, SQ2, SQ2))
    assert (lr.R, lr.S, lr.Q) == pytest.approx((-2.0, -2.0, 2.0), abs=1e-12)
    assert (lr.U, lr.V, lr.W) == pytest.approx((-2.0, -2.0, 2.0), abs=1e-12)


def test_class_degeneracy_identity(example_geometry, rng):
    worst = 0.0
    for _ in range(200):
        t = math.tan(0.5 * rng.uniform(-3.0, 3.0))
        j = JointVector(*rng.uniform(0.1, 4.0, size=3))
        worst = max(worst, abs(class_degeneracy(example_geometry, t, j)))
    assert worst < 1e-9


def test_class_degeneracy_broken_by_perturbation(example_geometry, rng):
    g = GeometryParams(c2=1.0, c3=0.0, d3=1.0, l2=1.1, l3=1.0, beta=example_geometry.beta)
    vals = [
        abs(class_degeneracy(g, math.tan(0.5 * rng.uniform(-3.0, 3.0)),
                             JointVector(*rng.uniform(0.5, 3.0, size=3))))
        for _ in range(200)
    ]
    assert max(vals) > 1e-3


# ---------------------------------------------------------------------------
# characteristic cubic


def test_cubic_symmetric_joints(example_geometry):
    cubic = characteristic_cubic(example_geometry, JointVector(SQ2, SQ2, SQ2))
    assert cubic.coefficients() == pytest.approx((0.0, -4.0, -4.0, 0.0), abs=1e-14)


def test_cubic_triple_root_joints(example_geometry):
    cubic = characteristic_cubic(example_geometry, JointVector(SQ3, 1.0, 1.0))
    assert cubic.coefficients() == pytest.approx((-2.0, -6.0, -6.0, -2.0), abs=1e-13)


def test_cubic_equal_joints_annihilate_outer_coefficients(example_geometry, rng):
    for rho in rng.uniform(0.2, 3.0, size=10):
        cubic = characteristic_cubic(example_geometry, JointVector(rho, rho, rho))
        assert cubic.a3 == pytest.approx(0.0, abs=1e-13)
        assert cubic.a0 == pytest.approx(0.0, abs=1e-13)


def test_cubic_rejects_non_analytic_geometry():
    g = GeometryParams(c2=1.0, c3=0.0, d3=1.0, l2=1.2, l3=1.0, beta=-math.pi / 2)
    with pytest.raises(NonAnalyticGeometry):
        characteristic_cubic(g, JointVector(1.0, 1.0, 1.0))


# ---------------------------------------------------------------------------
# root classification


def test_roots_with_infinity_branch():
    roots = cubic_real_roots(CharacteristicCubic(0.0, -4.0, -4.0, 0.0))
    assert roots.root_at_infinity
    finite = dict(roots.finite)
    assert set(finite.values()) == {1}
    assert sorted(finite) == pytest.approx([-1.0, 0.0])


def test_roots_exact_triple():
    roots = cubic_real_roots(CharacteristicCubic(-2.0, -6.0, -6.0, -2.0))
    assert roots.finite == [(-1.0, 3)]
    assert not roots.root_at_infinity


def test_roots_triple_survives_coefficient_noise():
    eps = 1e-15
    roots = cubic_real_roots(CharacteristicCubic(-2.0 + eps, -6.0 - eps, -6.0, -2.0 + eps))
    assert len(roots.finite) == 1
    t, mult = roots.finite[0]
    assert mult == 3
    assert t == pytest.approx(-1.0, abs=1e-5)


def test_roots_monomial_triple():
    roots = cubic_real_roots(CharacteristicCubic(1.0, 0.0, 0.0, 0.0))
    assert roots.finite == [(0.0, 3)]


def test_roots_all_zero_raises():
    with pytest.raises(AllCoefficientsZero):
        cubic_real_roots(CharacteristicCubic(0.0, 0.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# position solve


def test_positions_at_t_zero(example_geometry):
    pts = orientation_to_positions(example_geometry, JointVector(SQ2, SQ2, SQ2), 0.0)
    xy = sorted((round(x, 10), round(y, 10)) for x, y, _ in pts)
    assert xy == pytest.approx([(-1.0, 1.0), (1.0, 1.0)])


def test_positions_at_t_minus_one(example_geometry):
    pts = orientation_to_positions(example_geometry, JointVector(SQ2, SQ2, SQ2), -1.0)
    xy = np.array(sorted((x, y) for x, y, _ in pts))
    expect = np.array(
        sorted([((1 - SQ3) / 2, (1 + SQ3) / 2), ((1 + SQ3) / 2, (1 - SQ3) / 2)])
    )
    assert np.allclose(xy, expect, atol=1e-10)


def test_positions_at_infinity_root(example_geometry):
    pts = orientation_to_positions(example_geometry, JointVector(SQ2, SQ2, SQ2), T_INFINITY)
    xy = sorted((round(x, 10), round(y, 10)) for x, y, _ in pts)
    assert xy == pytest.approx([(1.0, -1.0), (1.0, 1.0)])


# ---------------------------------------------------------------------------
# forward kinematics


EXPECTED_SIX = [
    Pose(1.0, 1.0, 0.0),
    Pose(-1.0, 1.0, 0.0),
    Pose((1 + SQ3) / 2, (1 - SQ3) / 2, -math.pi / 2),
    Pose((1 - SQ3) / 2, (1 + SQ3) / 2, -math.pi / 2),
    Pose(1.0, 1.0, math.pi),
    Pose(1.0, -1.0, math.pi),
]


def test_fk_six_solution_case(example_geometry):
    sols = forward_kinematics_analytic(example_geometry, JointVector(SQ2, SQ2, SQ2))
    assert sols.count == 6
    assert not sols.degenerate
    for expected in EXPECTED_SIX:
        assert any(expected.distance(p) < 1e-8 for p in sols.poses)
    assert all(r < 1e-8 for r in sols.residuals)


def test_fk_unreachable_joints(example_geometry):
    sols = forward_kinematics_analytic(example_geometry, JointVector(10.0, 1.0, 1.0))
    assert sols.count == 0


def test_fk_triple_root_pose(example_geometry):
    sols = forward_kinematics_analytic(example_geometry, JointVector(SQ3, 1.0, 1.0))
    target = Pose(1 + SQ2 / 2, 1 - SQ2 / 2, -math.pi / 2)
    hits = [i for i, p in enumerate(sols.poses) if target.distance(p) < 1e-8]
    assert len(hits) == 1
    assert sols.multiplicities[hits[0]] == 3


def test_fk_serialization_marks_infinity(example_geometry):
    sols = forward_kinematics_analytic(example_geometry, JointVector(SQ2, SQ2, SQ2))
    d = sols.to_dict()
    assert d["count"] == 6
    assert sum(1 for p in d["poses"] if p["t_or_inf"] == "inf") == 2


def test_fk_roundtrip_sample(example_geometry, rng):
    for _ in range(300):
        p = Pose(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-math.pi, math.pi))
        j = inverse_kinematics(example_geometry, p)
        sols = forward_kinematics_analytic(example_geometry, j)
        assert any(p.distance(q) < 1e-7 for q in sols.poses)


# ---------------------------------------------------------------------------
# reference oracle


def test_oracle_six_solution_case(example_geometry):
    ref = forward_kinematics_reference(example_geometry, JointVector(SQ2, SQ2, SQ2))
    assert ref.count == 6
    ana = forward_kinematics_analytic(example_geometry, JointVector(SQ2, SQ2, SQ2))
    assert match_solution_sets(ana, ref)


def test_oracle_contains_ik_inverse(example_geometry):
    ref = forward_kinematics_reference(
        example_geometry, JointVector(2.0, 2.0, math.sqrt(8.0))
    )
    assert any(Pose(2.0, 0.0, 0.0).distance(p) < 1e-8 for p in ref.poses)


def test_oracle_tiny_joints_infeasible(example_geometry):
    ref = forward_kinematics_reference(example_geometry, JointVector(0.01, 0.01, 0.01))
    assert ref.count == 0


def test_oracle_works_for_non_analytic_geometry(rng):
    g = GeometryParams(c2=1.0, c3=0.3, d3=0.8, l2=1.4, l3=0.9, beta=0.5)
    p = Pose(0.7, 0.9, 0.3)
    j = inverse_kinematics(g, p)
    ref = forward_kinematics_reference(g, j)
    assert any(p.distance(q) < 1e-7 for q in ref.poses)


def test_oracle_agreement_random_sample(example_geometry, rng):
    for _ in range(20):
        j = JointVector(*rng.uniform(0.2, 4.0, size=3))
        ana = forward_kinematics_analytic(example_geometry, j)
        ref = forward_kinematics_reference(example_geometry, j)
        assert match_solution_sets(ana, ref), f"mismatch at {j}"


def test_every_pose_satisfies_all_constraints(example_geometry, rng):
    for _ in range(50):
        j = JointVector(*rng.uniform(0.2, 4.0, size=3))
        sols = forward_kinematics_analytic(example_geometry, j)
        for p in sols.poses:
            assert ik_residual(example_geometry, p, j) < 1e-8 * (1.0 + j.norm)
