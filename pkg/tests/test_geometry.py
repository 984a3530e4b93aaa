import json
import math

import pytest

from planar3rpr.geometry import (
    GeometryError,
    GeometryParams,
    check_analytic_class,
    geometry_from_dict,
    load_geometry,
    wrap_angle,
)


def test_example_geometry_is_analytic(example_geometry):
    verdict = check_analytic_class(example_geometry)
    assert verdict.is_analytic
    assert verdict.violations == []
    assert verdict.warnings == []


def test_perturbed_l2_violates_class(example_geometry):
    g = GeometryParams(
        c2=1.0, c3=0.0, d3=1.0, l2=1.1, l3=1.0, beta=example_geometry.beta
    )
    verdict = check_analytic_class(g)
    assert not verdict.is_analytic
    names = [name for name, _ in verdict.violations]
    assert "l2 = c2" in names
    # residual magnitude reported, not just a flag
    res = dict(verdict.violations)["l2 = c2"]
    assert res == pytest.approx(0.1)


def test_non_reflected_platform_is_warned_not_rejected():
    # Mirror geometry: d3 < 0 with beta = +pi/2 still satisfies all three
    # identities, but it is not the reflected configuration.
    g = GeometryParams(c2=1.0, c3=0.0, d3=-1.0, l2=1.0, l3=1.0, beta=math.pi / 2)
    verdict = check_analytic_class(g)
    assert verdict.is_analytic
    assert any("not reflected" in w for w in verdict.warnings)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(c2=0.0, c3=0.0, d3=1.0, l2=1.0, l3=1.0, beta=0.0),
        dict(c2=1.0, c3=0.0, d3=1.0, l2=-1.0, l3=1.0, beta=0.0),
        dict(c2=1.0, c3=0.0, d3=1.0, l2=1.0, l3=0.0, beta=0.0),
        dict(c2=1.0, c3=float("nan"), d3=1.0, l2=1.0, l3=1.0, beta=0.0),
        dict(c2=1.0, c3=0.0, d3=float("inf"), l2=1.0, l3=1.0, beta=0.0),
    ],
)
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(GeometryError):
        GeometryParams(**kwargs)


def test_beta_normalized_into_half_open_interval():
    g = GeometryParams(c2=1.0, c3=0.0, d3=1.0, l2=1.0, l3=1.0, beta=3.5 * math.pi)
    assert -math.pi < g.beta <= math.pi
    assert g.beta == pytest.approx(-0.5 * math.pi)


def test_wrap_angle_endpoints():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(0.0) == 0.0


def test_platform_offsets(example_geometry):
    b2x, b2y, b3x, b3y = example_geometry.platform_offsets(0.0)
    assert (b2x, b2y) == pytest.approx((1.0, 0.0))
    assert (b3x, b3y) == pytest.approx((0.0, -1.0))


def test_load_geometry_roundtrip(tmp_path, example_geometry):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(example_geometry.to_dict()))
    g = load_geometry(str(path))
    assert g == example_geometry


def test_load_geometry_missing_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"c2": 1.0}')
    with pytest.raises(GeometryError, match="missing keys"):
        load_geometry(str(path))


def test_load_geometry_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json")
    with pytest.raises(GeometryError, match="not valid JSON"):
        load_geometry(str(path))


def test_geometry_from_dict_rejects_bool():
    data = dict(c2=1.0, c3=0.0, d3=1.0, l2=1.0, l3=1.0, beta=True)
    with pytest.raises(GeometryError, match="finite number"):
        geometry_from_dict(data)
