import math

import numpy as np
import pytest

from exceptions import UnknownIdentifierError
from manifold_models import build_model
from quadrature import boundary_grid, gaussian_tail_bound, grid_from_spec, sample_grid, volume_grid


def volume(model, grid, weight=lambda x: 1.0):
    return sum(w * model.volume_factor(x) * weight(x) for x, w in zip(grid.points, grid.weights))


class TestVolumeGrids:
    @pytest.mark.parametrize("name,expected", [
        ("sphere-spherical", 4.0 * math.pi),
        ("hemisphere", 2.0 * math.pi),
        ("circle", 2.0 * math.pi),
        ("slab", 2.0 * math.pi),
    ])
    def test_areas(self, name, expected):
        model = build_model(name, dim=2)
        assert volume(model, volume_grid(model, 12)) == pytest.approx(expected, rel=1e-12)

    def test_three_sphere_area(self):
        model = build_model("sphere-spherical", dim=3)
        assert volume(model, volume_grid(model, 10)) == pytest.approx(2.0 * math.pi ** 2, rel=1e-10)

    def test_gaussian_mass_within_the_tail_bound(self):
        model = build_model("gaussian-chart", dim=2, truncation=6.0)
        grid = volume_grid(model, 48)
        mass = volume(model, grid, lambda x: math.exp(-0.5 * float(x @ x)))
        assert abs(mass - 2.0 * math.pi) <= grid.tail_bound + 1e-10
        assert grid.tail_bound < 1e-7

    def test_tail_bound_shrinks_with_the_box(self):
        assert gaussian_tail_bound(2, 8.0) < gaussian_tail_bound(2, 4.0)

    def test_unknown_rule(self):
        with pytest.raises(UnknownIdentifierError):
            volume_grid(build_model("circle"), 8, rule="simpson")


class TestSampleGrids:
    def test_sphere_samples_avoid_the_poles(self):
        model = build_model("sphere-spherical", dim=2)
        grid = sample_grid(model, 6, pole_band=0.1)
        assert np.all(grid.points[:, 0] >= 0.1)
        assert np.all(grid.points[:, 0] <= math.pi - 0.1)

    def test_samples_lie_in_the_chart(self):
        model = build_model("hemisphere", dim=2)
        grid = sample_grid(model, 5)
        assert len(grid) > 0
        assert all(model.contains(x) for x in grid)


class TestBoundaryGrids:
    def test_interval_boundary_is_two_points(self):
        bgrid = boundary_grid(build_model("interval", lower=-1.0, upper=2.0))
        assert bgrid.names == ["lower", "upper"]
        assert len(bgrid) == 2

    def test_closed_models_have_no_boundary(self):
        assert len(boundary_grid(build_model("sphere-spherical", dim=2))) == 0

    def test_equator_length(self):
        model = build_model("hemisphere", dim=2)
        (equator,) = boundary_grid(model, 16).components
        assert equator.name == "equator"
        assert float(np.sum(equator.weights)) == pytest.approx(2.0 * math.pi)
        np.testing.assert_allclose(equator.points[:, 0], math.pi / 2)

    def test_grid_from_spec_defaults(self):
        grid, bgrid = grid_from_spec(build_model("slab", dim=2), {"nodes": 6, "boundary_nodes": 8})
        assert len(grid) == 36
        assert bgrid.names == ["bottom", "top"]
        assert len(bgrid) == 16
