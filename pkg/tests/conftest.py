import json
import math

import numpy as np
import pytest

from planar3rpr.geometry import GeometryParams


@pytest.fixture
def example_geometry() -> GeometryParams:
    """The reference analytic geometry used throughout the tests."""
    return GeometryParams(c2=1.0, c3=0.0, d3=1.0, l2=1.0, l3=1.0, beta=-math.pi / 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)


@pytest.fixture
def geometry_file(tmp_path, example_geometry):
    path = tmp_path / "geometry.json"
    g = example_geometry
    path.write_text(
        json.dumps(
            {"c2": g.c2, "c3": g.c3, "d3": g.d3, "l2": g.l2, "l3": g.l3, "beta": g.beta}
        )
    )
    return str(path)
