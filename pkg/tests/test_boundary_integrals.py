import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boundary_integrals import (
    boundary_area_identity,
    gauss_reduction_check,
    pohozaev_schoen,
    surface_gravity,
    thm1_estimate,
    weighted_areas,
    weighted_volume_integral,
)
from exceptions import PotentialNotVanishingError
from manifold_models import build_model
from quadrature import BoundaryComponentGrid, BoundaryGrid, boundary_grid, volume_grid
from random_fields import field_generator, random_tensor, random_vector
from tensor_calculus import gradient_field, metric_tensor_field
from weighted_calculus import WeightedSpace, bakry_emery_ricci_field, field_from_preset

HEMISPHERE = build_model("hemisphere", dim=2)
HEMISPHERE_SPACE = WeightedSpace(HEMISPHERE, field_from_preset(HEMISPHERE, "zero"))
HEMISPHERE_VOLUME = volume_grid(HEMISPHERE, 24)
HEMISPHERE_BOUNDARY = boundary_grid(HEMISPHERE, 48)


def height(ws):
    return field_from_preset(ws.model, "linear", vector=[0, 0, 1], label="u")


class TestHemisphere:
    def test_equator_length(self, hemisphere):
        assert weighted_areas(hemisphere, boundary_grid(hemisphere.model, 64)) == {
            "equator": pytest.approx(2.0 * math.pi, rel=1e-12)}

    def test_surface_gravity_is_one(self, hemisphere):
        (gravity,) = surface_gravity(hemisphere, height(hemisphere), boundary_grid(hemisphere.model, 64))
        assert gravity.component == "equator"
        assert gravity.kappa == pytest.approx(1.0, abs=1e-10)
        assert gravity.certified

    def test_boundary_area_identity(self, hemisphere):
        model = hemisphere.model
        report = boundary_area_identity(hemisphere, height(hemisphere), volume_grid(model, 32), boundary_grid(model, 64))
        assert report.lhs == pytest.approx(2.0 * math.pi, rel=1e-10)
        assert report.rhs == pytest.approx(2.0 * math.pi, rel=1e-10)
        assert report.passed
        assert report.hypothesis_ok
        assert report.diagnostics["flux_gap"] < 1e-8
        assert report.diagnostics["published_sign_gap"] > 1.0

    def test_potential_must_vanish_on_the_boundary(self, hemisphere):
        u = field_from_preset(hemisphere.model, "linear", vector=[1, 0, 0])
        with pytest.raises(PotentialNotVanishingError):
            surface_gravity(hemisphere, u, boundary_grid(hemisphere.model, 16))

    def test_gauss_reduction_on_the_equator(self, hemisphere):
        report = gauss_reduction_check(hemisphere, height(hemisphere), boundary_grid(hemisphere.model, 16))
        assert report.hypothesis_ok
        assert report.passed
        assert report.diagnostics["second_fundamental_form_norm"] < 1e-6

    def test_area_estimate_sides_are_evaluated(self, hemisphere):
        model = hemisphere.model
        report = thm1_estimate(hemisphere, height(hemisphere), None, None, volume_grid(model, 16),
                               boundary_grid(model, 32))
        # ℛ_f = 2 and f = 0: lhs = 2·2π, rhs = 0
        assert report.evaluated
        assert report.lhs == pytest.approx(4.0 * math.pi, rel=1e-8)
        assert report.rhs == pytest.approx(0.0, abs=1e-4)
        assert not report.holds

    def test_area_gap_grows_away_from_the_kernel(self, hemisphere):
        model = hemisphere.model
        grid, bgrid = volume_grid(model, 24), boundary_grid(model, 32)
        gaps = []
        for amplitude in (0.0, 0.01, 0.1, 1.0):
            # cos³θ vanishes on the equator with zero normal derivative
            u = field_from_preset(model, "expr", expression=f"cos(theta) + {amplitude}*cos(theta)**3", label="u")
            gaps.append(boundary_area_identity(hemisphere, u, grid, bgrid).gap)
        assert gaps[0] < 1e-8
        assert gaps[1] < gaps[2] < gaps[3]

    def test_gauss_reduction_ignores_the_equator_parameterization(self):
        ws = WeightedSpace(HEMISPHERE, field_from_preset(HEMISPHERE, "expr", expression="0.3*sin(theta)**3*cos(phi)"))
        forward = boundary_grid(HEMISPHERE, 16)
        (equator,) = forward.components
        component = HEMISPHERE.boundary.component(equator.name)
        params = -equator.params
        backward = BoundaryGrid((BoundaryComponentGrid(equator.name, params, np.stack([component.point(s) for s in params]),
                                                       equator.weights),))
        first = gauss_reduction_check(ws, None, forward)
        second = gauss_reduction_check(ws, None, backward)
        assert first.hypothesis_ok and second.hypothesis_ok
        assert second.sup_residual == pytest.approx(first.sup_residual, abs=1e-8)
        assert second.diagnostics["full_identity_residual"] == pytest.approx(
            first.diagnostics["full_identity_residual"], abs=1e-8)

    def test_pohozaev_with_the_weighted_ricci_tensor(self):
        ws = WeightedSpace(HEMISPHERE, field_from_preset(HEMISPHERE, "expr", expression="0.2*cos(theta)**2"))
        X = gradient_field(HEMISPHERE, height(ws))
        report = pohozaev_schoen(ws, bakry_emery_ricci_field(ws), X, HEMISPHERE_VOLUME, HEMISPHERE_BOUNDARY,
                                 tolerance=1e-5)
        assert report.passed, (report.lhs, report.rhs)

    @given(seed=st.integers(min_value=0, max_value=2 ** 20))
    @settings(max_examples=10, deadline=None)
    def test_weighted_divergence_theorem(self, seed):
        X = random_vector(HEMISPHERE, field_generator(seed))
        report = pohozaev_schoen(HEMISPHERE_SPACE, metric_tensor_field(HEMISPHERE), X, HEMISPHERE_VOLUME,
                                 HEMISPHERE_BOUNDARY)
        assert report.passed, (report.lhs, report.rhs)


class TestSlab:
    @pytest.fixture
    def slab(self):
        model = build_model("slab", dim=2)
        return WeightedSpace(model, field_from_preset(model, "zero"))

    def test_volume(self, slab):
        assert weighted_volume_integral(slab, lambda x: 1.0, volume_grid(slab.model, 8)) == pytest.approx(2.0 * math.pi)

    def test_gauss_reduction_is_trivial(self, slab):
        report = gauss_reduction_check(slab, None, boundary_grid(slab.model, 16))
        assert report.passed
        assert report.hypothesis_ok

    @pytest.mark.parametrize("seed", [3, 4])
    def test_pohozaev_schoen(self, slab, seed):
        rng = field_generator(seed)
        T, _ = random_tensor(slab.model, rng)
        X = random_vector(slab.model, rng)
        report = pohozaev_schoen(slab, T, X, volume_grid(slab.model, 24), boundary_grid(slab.model, 48))
        assert report.passed, (report.lhs, report.rhs)
