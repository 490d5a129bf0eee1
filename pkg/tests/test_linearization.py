import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import PerturbationNotPositiveDefiniteError, UnsupportedBoundaryError
from linearization import (
    MetricPerturbation,
    adjoint_duality_check,
    check_perturbation,
    linearized_perelman,
    linearized_perelman_expanded,
    numeric_variation,
    variation_gradnorm,
    variation_oracle_residuals,
)
from manifold_models import build_model
from quadrature import sample_grid, volume_grid
from random_fields import field_generator, random_scalar, random_tensor
from settings import VARIATION_QUANTITIES
from tensor_calculus import metric_tensor_field
from weighted_calculus import WeightedSpace, field_from_preset

SPHERE = build_model("sphere-spherical", dim=2)
HYPERBOLIC = build_model("diag-family", expressions=["1", "exp(2*x)"], coordinates=["x", "y"])
SPACES = {
    "weighted-sphere": WeightedSpace(SPHERE, field_from_preset(SPHERE, "linear", vector=[0, 0, 0.3])),
    "hyperbolic": WeightedSpace(HYPERBOLIC, field_from_preset(HYPERBOLIC, "expr", expression="0.2*x*y")),
}
SAMPLES = {name: sample_grid(ws.model, 3).points for name, ws in SPACES.items()}
SPHERE_VOLUME = volume_grid(SPHERE, 20)


def perturbation(ws, seed, scale=0.1):
    h, compact = random_tensor(ws.model, field_generator(seed), scale=scale)
    return MetricPerturbation(h, compact_support=compact)


class TestClosedForms:
    def test_oracle_agrees_on_the_weighted_sphere(self, weighted_sphere, samples):
        pert = perturbation(weighted_sphere, 21)
        residuals = variation_oracle_residuals(weighted_sphere, pert, samples(weighted_sphere, 3).points)
        assert sorted(residuals) == sorted(VARIATION_QUANTITIES)
        for name, values in residuals.items():
            assert float(np.max(values)) < 1e-5, name

    @given(name=st.sampled_from(sorted(SPACES)), seed=st.integers(min_value=0, max_value=2 ** 20),
           index=st.integers(min_value=0, max_value=8))
    @settings(max_examples=100, deadline=None)
    def test_oracle_agrees_on_seeded_triples(self, name, seed, index):
        ws = SPACES[name]
        points = SAMPLES[name]
        residuals = variation_oracle_residuals(ws, perturbation(ws, seed), [points[index % len(points)]])
        worst = max(float(np.max(values)) for values in residuals.values())
        assert worst < 1e-5, residuals

    def test_expanded_form_matches(self, weighted_sphere, samples):
        pert = perturbation(weighted_sphere, 22)
        for x in samples(weighted_sphere, 3):
            assert linearized_perelman(weighted_sphere, pert, x) == pytest.approx(
                linearized_perelman_expanded(weighted_sphere, pert, x), abs=1e-8)

    def test_conformal_direction_scales_the_gradient(self, gaussian_space):
        pert = MetricPerturbation(metric_tensor_field(gaussian_space.model))
        x = np.array([0.5, -0.2])
        assert variation_gradnorm(gaussian_space, pert, x) == pytest.approx(-float(x @ x), abs=1e-12)
        assert numeric_variation(gaussian_space, pert, "grad-norm", x) == pytest.approx(-float(x @ x), abs=1e-8)

    def test_scaling_the_metric_scales_scalar_curvature(self, round_sphere):
        # R(g + t g) = R / (1 + t), so δ_g R = -R
        pert = MetricPerturbation(metric_tensor_field(round_sphere.model))
        assert numeric_variation(round_sphere, pert, "scalar-curvature", [1.0, 2.0]) == pytest.approx(-2.0, abs=1e-7)


class TestAdjointDuality:
    @given(seed=st.integers(min_value=0, max_value=2 ** 20))
    @settings(max_examples=20, deadline=None)
    def test_duality_on_the_weighted_sphere(self, seed):
        ws = SPACES["weighted-sphere"]
        rng = field_generator(seed)
        u = random_scalar(ws.model, rng)
        h, _ = random_tensor(ws.model, rng, scale=0.1)
        report = adjoint_duality_check(ws, u, MetricPerturbation(h), SPHERE_VOLUME)
        assert report.passed, report.diagnostics

    def test_open_models_need_compact_support(self):
        model = build_model("euclidean", dim=2)
        ws = WeightedSpace(model, field_from_preset(model, "gaussian"))
        h = metric_tensor_field(ws.model)
        u = random_scalar(ws.model, field_generator(1))
        with pytest.raises(UnsupportedBoundaryError):
            adjoint_duality_check(ws, u, MetricPerturbation(h), volume_grid(ws.model, 4))


class TestPerturbationGuards:
    def test_t_step_must_be_positive(self, round_sphere):
        with pytest.raises(ValueError):
            MetricPerturbation(metric_tensor_field(round_sphere.model), t_step=0.0)

    def test_indefinite_perturbation_is_rejected(self, round_sphere):
        huge = metric_tensor_field(round_sphere.model).scaled(-2e4)
        with pytest.raises(PerturbationNotPositiveDefiniteError):
            check_perturbation(round_sphere.model, MetricPerturbation(huge), [[1.0, 1.0]])
