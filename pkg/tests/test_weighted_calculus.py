import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import MalformedScenarioError, UnknownIdentifierError
from fields import linear_combination
from manifold_models import build_model
from tensor_calculus import local_geometry
from weighted_calculus import (
    WeightedSpace,
    adjoint_operator,
    bakry_emery_ricci,
    drift_laplacian,
    drift_laplacian_divergence_form,
    field_from_preset,
    kernel_residual,
    perelman_scalar,
    trace_identity_residual,
)

FLAT_MODEL = build_model("euclidean", dim=2)
FLAT_SPACE = WeightedSpace(FLAT_MODEL, field_from_preset(FLAT_MODEL, "expr", expression="x1**2 + sin(x2)"))


class TestGaussianSpace:
    def test_perelman_scalar(self, gaussian_space):
        x = np.array([0.6, -1.1])
        assert perelman_scalar(gaussian_space, x) == pytest.approx(4.0 - x @ x, abs=1e-10)

    def test_bakry_emery_ricci_is_the_metric(self, gaussian_space):
        np.testing.assert_allclose(bakry_emery_ricci(gaussian_space, [0.3, 0.2]), np.eye(2), atol=1e-10)

    def test_coordinate_functions_are_eigenfunctions(self, gaussian_space):
        u = field_from_preset(gaussian_space.model, "linear", vector=[1.0, 0.0], label="u")
        x = np.array([0.8, 0.5])
        assert drift_laplacian(gaussian_space, u, x) == pytest.approx(-0.8, abs=1e-10)

    def test_coordinate_functions_span_the_kernel(self, gaussian_space, samples):
        u = field_from_preset(gaussian_space.model, "linear", vector=[0.3, -0.7], label="u")
        assert kernel_residual(gaussian_space, u, samples(gaussian_space)) < 1e-9

    def test_constants_are_not_in_the_kernel(self, gaussian_space):
        one = field_from_preset(gaussian_space.model, "constant", value=1.0, label="u")
        assert kernel_residual(gaussian_space, one, [[0.0, 0.0]]) > 0.5


class TestWeightedSphere:
    def test_linear_density_uses_the_embedding(self, weighted_sphere):
        theta = 0.9
        assert weighted_sphere.density([theta, 1.3]) == pytest.approx(math.cos(theta))

    def test_perelman_scalar(self, weighted_sphere):
        z = math.cos(1.2)
        assert perelman_scalar(weighted_sphere, [1.2, 0.4]) == pytest.approx(1.0 - 4.0 * z + z * z, abs=1e-9)

    def test_drift_laplacian_of_x(self, weighted_sphere):
        u = field_from_preset(weighted_sphere.model, "linear", vector=[1, 0, 0], label="u")
        x = [1.1, 0.7]
        z = math.cos(1.1)
        assert drift_laplacian(weighted_sphere, u, x) == pytest.approx((z - 2.0) * u(x), abs=1e-9)

    @pytest.mark.parametrize("vector", [[1, 0, 0], [0, 1, 0], [0.6, -0.8, 0]])
    def test_horizontal_coordinates_are_in_the_kernel(self, weighted_sphere, samples, vector):
        u = field_from_preset(weighted_sphere.model, "linear", vector=vector, label="u")
        assert kernel_residual(weighted_sphere, u, samples(weighted_sphere)) < 1e-8

    def test_density_direction_is_not(self, weighted_sphere, samples):
        u = field_from_preset(weighted_sphere.model, "linear", vector=[0, 0, 1], label="u")
        assert kernel_residual(weighted_sphere, u, samples(weighted_sphere)) > 1e-2


class TestDriftLaplacianForms:
    @pytest.mark.parametrize("expression", ["sin(theta)*cos(phi)**2", "cos(theta)**3 + sin(theta)*sin(phi)"])
    def test_divergence_form_agrees(self, weighted_sphere, expression):
        u = field_from_preset(weighted_sphere.model, "expr", expression=expression, label="u")
        for x in ([0.7, 0.2], [2.0, 4.0]):
            assert drift_laplacian(weighted_sphere, u, x) == pytest.approx(
                drift_laplacian_divergence_form(weighted_sphere, u, x), abs=1e-9)

    @given(st.floats(min_value=-2.0, max_value=2.0), st.floats(min_value=-2.0, max_value=2.0))
    @settings(max_examples=20, deadline=None)
    def test_linear_in_u(self, a, b):
        ws = FLAT_SPACE
        u = field_from_preset(ws.model, "expr", expression="x1*x2", label="u")
        v = field_from_preset(ws.model, "expr", expression="cos(x1)", label="v")
        w = linear_combination([u, v], [a, b])
        x = [0.3, -0.4]
        expected = a * drift_laplacian(ws, u, x) + b * drift_laplacian(ws, v, x)
        assert drift_laplacian(ws, w, x) == pytest.approx(expected, abs=1e-9)


class TestTraceIdentity:
    def test_trace_of_the_adjoint(self, weighted_sphere):
        u = field_from_preset(weighted_sphere.model, "expr", expression="cos(theta)**2 + sin(theta)*cos(phi)",
                              label="u")
        x = [0.9, 1.7]
        trace = float(np.einsum('ij,ij->', local_geometry(weighted_sphere.model, x).ginv,
                                adjoint_operator(weighted_sphere, u, x)))
        assert trace_identity_residual(weighted_sphere, u, x) == pytest.approx(trace, abs=1e-7)


class TestPresets:
    def test_unknown_preset(self, gaussian_space):
        with pytest.raises(UnknownIdentifierError):
            field_from_preset(gaussian_space.model, "quadratic")

    def test_linear_needs_a_vector(self, gaussian_space):
        with pytest.raises(MalformedScenarioError):
            field_from_preset(gaussian_space.model, "linear")

    def test_vector_length_must_match_the_embedding(self, weighted_sphere):
        with pytest.raises(MalformedScenarioError):
            field_from_preset(weighted_sphere.model, "linear", vector=[1, 0])

    def test_expression_with_unknown_names(self, gaussian_space):
        with pytest.raises(MalformedScenarioError):
            field_from_preset(gaussian_space.model, "expr", expression="x1 + y")
