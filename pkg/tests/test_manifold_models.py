import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import ChartDomainError, MalformedScenarioError, MetricNotPositiveDefiniteError, UnknownIdentifierError
from finite_differences import convergence_order
from manifold_models import build_model, spherical_from_embedding, stereographic_transition
from random_fields import field_generator, random_scalar
from settings import MODEL_NAMES
from tensor_calculus import christoffel, hessian, local_geometry, ricci, scalar_curvature

SPHERE = build_model("sphere-spherical", dim=2)


class TestBuiltinModels:
    @pytest.mark.parametrize("name,point,expected", [
        ("sphere-spherical", [1.1, 0.4], 2.0),
        ("sphere-stereo", [0.3, -0.8], 2.0),
        ("hemisphere", [0.7, 2.0], 2.0),
        ("euclidean", [0.2, 0.3], 0.0),
        ("gaussian-chart", [1.0, -2.0], 0.0),
        ("slab", [0.5, 1.0], 0.0),
    ])
    def test_scalar_curvature(self, name, point, expected):
        model = build_model(name, dim=2)
        assert scalar_curvature(model, point) == pytest.approx(expected, abs=1e-9)

    def test_sphere_ricci_is_the_metric(self):
        model = build_model("sphere-spherical", dim=3)
        x = [0.9, 1.2, 0.3]
        np.testing.assert_allclose(ricci(model, x), 2.0 * local_geometry(model, x).g, atol=1e-9)

    def test_hyperbolic_diag_family(self):
        model = build_model("diag-family", expressions=["1", "exp(2*x)"], coordinates=["x", "y"],
                            lower=0.5, upper=1.5)
        assert model.dim == 2
        assert scalar_curvature(model, [1.0, 0.7]) == pytest.approx(-2.0, abs=1e-9)

    def test_fd_fallback_agrees_with_analytic_partials(self):
        model = build_model("sphere-spherical", dim=2)
        x = [1.0, 0.5]
        exact = scalar_curvature(model, x)
        assert scalar_curvature(model.without_derivatives(), x) == pytest.approx(exact, abs=1e-5)

    @pytest.mark.parametrize("name, point", [("sphere-spherical", [1.0, 0.5]), ("sphere-stereo", [0.3, -0.8])])
    def test_fd_curvature_converges_at_second_order(self, name, point):
        model = build_model(name, dim=2)
        exact = scalar_curvature(model, point)
        fd = model.without_derivatives()
        errors = [abs(scalar_curvature(fd.with_fd_policy(fd.fd_policy.coarse(h)), point) - exact) for h in (0.04, 0.02)]
        order = convergence_order(errors[0], errors[1], 2.0)
        assert order is not None and order >= 1.9, errors

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_every_registry_name_builds(self, name):
        kwargs = {"expressions": ["1", "1"]} if name == "diag-family" else {}
        model = build_model(name, **kwargs)
        assert model.name == name


class TestChristoffel:
    def test_flat_metric_has_no_connection(self):
        np.testing.assert_allclose(christoffel(build_model("euclidean", dim=3), [0.1, -0.4, 0.7]), 0.0, atol=1e-12)

    def test_polar_chart(self):
        model = build_model("diag-family", expressions=["1", "r**2"], coordinates=["r", "theta"])
        r = 2.0
        gamma = christoffel(model, [r, 0.3])
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -r
        expected[1, 0, 1] = expected[1, 1, 0] = 1.0 / r
        np.testing.assert_allclose(gamma, expected, atol=1e-10)

    def test_spherical_chart(self):
        theta = 1.1
        gamma = christoffel(build_model("sphere-spherical", dim=2), [theta, 0.4])
        assert gamma[0, 1, 1] == pytest.approx(-math.sin(theta) * math.cos(theta), abs=1e-10)
        assert gamma[1, 0, 1] == pytest.approx(1.0 / math.tan(theta), abs=1e-10)
        assert gamma[0, 0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_fd_metric_partials_reproduce_the_connection(self):
        model = build_model("sphere-spherical", dim=2)
        x = [0.8, 2.0]
        np.testing.assert_allclose(christoffel(model.without_derivatives(), x), christoffel(model, x), atol=1e-6)


class TestHessian:
    @given(seed=st.integers(min_value=0, max_value=2 ** 20),
           theta=st.floats(min_value=0.2, max_value=2.9),
           phi=st.floats(min_value=0.0, max_value=6.2))
    @settings(max_examples=30, deadline=None)
    def test_hessian_norm_bounds_the_laplacian(self, seed, theta, phi):
        u = random_scalar(SPHERE, field_generator(seed))
        x = np.array([theta, phi])
        mixed = local_geometry(SPHERE, x).ginv @ hessian(SPHERE, u, x)
        trace = float(np.trace(mixed))
        assert float(np.trace(mixed @ mixed)) >= trace ** 2 / SPHERE.dim - 1e-9 * (1.0 + trace ** 2)


class TestChartErrors:
    def test_unknown_model(self):
        with pytest.raises(UnknownIdentifierError):
            build_model("torus")

    def test_point_outside_chart(self):
        model = build_model("interval", lower=0.0, upper=1.0)
        with pytest.raises(ChartDomainError):
            model.metric([2.0])

    def test_indefinite_metric(self):
        model = build_model("diag-family", expressions=["1", "x - 1"], coordinates=["x", "y"], lower=0.0, upper=2.0)
        with pytest.raises((MetricNotPositiveDefiniteError, ChartDomainError)):
            model.metric([0.5, 0.5])

    def test_bad_interval(self):
        with pytest.raises(MalformedScenarioError):
            build_model("interval", lower=1.0, upper=0.0)


class TestChartTransitions:
    def test_stereographic_charts_agree_on_the_overlap(self):
        north = build_model("sphere-stereo", dim=2, pole="north")
        south = build_model("sphere-stereo", dim=2, pole="south")
        y = np.array([0.6, -0.3])
        np.testing.assert_allclose(north.embed(y), south.embed(stereographic_transition(y)), atol=1e-12)

    def test_transition_is_an_involution(self):
        y = np.array([0.2, 1.7])
        np.testing.assert_allclose(stereographic_transition(stereographic_transition(y)), y)

    def test_origin_has_no_image(self):
        with pytest.raises(ChartDomainError):
            stereographic_transition([0.0, 0.0])

    def test_spherical_round_trip_through_the_embedding(self):
        model = build_model("sphere-spherical", dim=2)
        x = np.array([0.8, 2.5])
        np.testing.assert_allclose(spherical_from_embedding(model.embed(x)), x, atol=1e-12)

    def test_curvature_is_chart_independent(self):
        stereo = build_model("sphere-stereo", dim=2)
        spherical = build_model("sphere-spherical", dim=2)
        y = np.array([0.4, 0.5])
        x = spherical_from_embedding(stereo.embed(y))
        assert scalar_curvature(stereo, y) == pytest.approx(scalar_curvature(spherical, x), abs=1e-9)
