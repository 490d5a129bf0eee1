import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import DegenerateDensityError, UnknownIdentifierError
from identity_suite import (
    IdentityContext,
    ResidualReport,
    check_divf_gtrace,
    check_divf_hessian,
    check_kernel_consequence,
    check_weighted_bianchi,
    eigen_relation_residual,
    extract_sigma,
    fit_affine,
    run_identities,
    run_identity,
)
from manifold_models import build_model
from quadrature import sample_grid
from random_fields import field_generator, random_scalar
from settings import IDENTITY_IDS
from weighted_calculus import WeightedSpace, field_from_preset

SPHERE = build_model("sphere-spherical", dim=2)
HEIGHT_WEIGHTED_SPHERE = WeightedSpace(SPHERE, field_from_preset(SPHERE, "linear", vector=[0, 0, 1]))


def coordinate(ws, vector, label="u"):
    return field_from_preset(ws.model, "linear", vector=vector, label=label)


class TestResidualReport:
    def test_nan_points_are_masked(self):
        report = ResidualReport.from_residuals("weighted-bianchi", [1e-9, float("nan")], 1e-6)
        assert report.passed
        assert report.masked_fraction == pytest.approx(0.5)
        assert report.sup_residual == pytest.approx(1e-9)

    def test_fully_masked_report_fails(self):
        report = ResidualReport.from_residuals("log-identity", [float("nan")] * 3, 1e-6)
        assert not report.passed
        assert report.message == "no unmasked points"

    def test_pass_is_strict(self):
        assert not ResidualReport.scalar("adjoint-duality", 1e-6, 1e-6).passed

    def test_slow_convergence_fails(self):
        report = ResidualReport.scalar("weighted-bianchi", 1e-8, 1e-4).with_convergence(0.4)
        assert not report.passed
        assert "resolution too coarse" in report.message
        assert ResidualReport.scalar("weighted-bianchi", 1e-8, 1e-4).with_convergence(2.0).passed


class TestGaussianIdentities:
    def test_divergence_identities_hold(self, gaussian_space, samples):
        u = random_scalar(gaussian_space.model, field_generator(5))
        grid = samples(gaussian_space)
        assert check_divf_gtrace(gaussian_space, u, grid).passed
        assert check_divf_hessian(gaussian_space, u, grid).passed

    def test_bianchi_identity(self, gaussian_space, samples):
        report = check_weighted_bianchi(gaussian_space, samples(gaussian_space))
        assert report.passed
        assert report.fd_path
        assert report.tolerance == 1e-4

    def test_bianchi_is_judged_at_the_fd_tolerance(self, gaussian_space, samples):
        strict = check_weighted_bianchi(gaussian_space, samples(gaussian_space), fd_tolerance=1e-300, measure=False)
        assert strict.tolerance == 1e-300
        assert strict.passed == (strict.sup_residual < 1e-300)

    def test_coordinate_is_a_drift_eigenfunction(self, gaussian_space, samples):
        u = coordinate(gaussian_space, [1, 0])
        grid = samples(gaussian_space)
        assert eigen_relation_residual(gaussian_space, u, -1.0, grid).passed
        assert not eigen_relation_residual(gaussian_space, u, -2.0, grid).passed

    def test_kernel_consequence_with_member(self, gaussian_space, samples):
        report = check_kernel_consequence(gaussian_space, coordinate(gaussian_space, [1, 0]), samples(gaussian_space))
        assert report.passed
        assert report.hypothesis_ok


class TestWeightedSphereIdentities:
    def test_kernel_consequence(self, weighted_sphere, samples):
        u = coordinate(weighted_sphere, [1, 0, 0])
        report = check_kernel_consequence(weighted_sphere, u, samples(weighted_sphere))
        assert report.passed
        assert report.hypothesis_ok

    def test_height_is_not_in_the_kernel(self, weighted_sphere, samples):
        u = coordinate(weighted_sphere, [0, 0, 1])
        report = check_kernel_consequence(weighted_sphere, u, samples(weighted_sphere))
        assert not report.hypothesis_ok

    def test_sigma_is_two_minus_height(self, weighted_sphere, samples):
        grid = samples(weighted_sphere)
        sigma, report = extract_sigma(weighted_sphere, coordinate(weighted_sphere, [1, 0, 0]), grid)
        assert report.passed
        for x in grid:
            assert sigma(x) == pytest.approx(2.0 - math.cos(x[0]), abs=1e-8)

    # |df|_g = sin θ; the sample nodes keep sin θ above 0.86
    @given(a=st.floats(min_value=1e-8, max_value=0.8), b=st.floats(min_value=1e-8, max_value=0.8))
    @settings(max_examples=8, deadline=None)
    def test_masking_grows_with_the_threshold(self, a, b):
        low, high = sorted((a, b))
        ws = HEIGHT_WEIGHTED_SPHERE
        u = coordinate(ws, [1, 0, 0])
        grid = sample_grid(SPHERE, 4)
        _, loose = extract_sigma(ws, u, grid, threshold=low, measure=False)
        _, strict = extract_sigma(ws, u, grid, threshold=high, measure=False)
        assert strict.masked_fraction >= loose.masked_fraction

    def test_sigma_needs_a_nonconstant_density(self, round_sphere, samples):
        with pytest.raises(DegenerateDensityError):
            extract_sigma(round_sphere, coordinate(round_sphere, [1, 0, 0]), samples(round_sphere))


class TestCatalog:
    def test_runs_in_catalog_order_once(self, gaussian_space, samples):
        ctx = IdentityContext(gaussian_space, samples(gaussian_space), u=coordinate(gaussian_space, [1, 0]))
        reports = run_identities(["divf-hessian", "weighted-bianchi", "divf-hessian"], ctx)
        assert [r.identity_id for r in reports] == ["weighted-bianchi", "divf-hessian"]

    def test_unknown_id_lists_the_valid_ones(self, gaussian_space, samples):
        ctx = IdentityContext(gaussian_space, samples(gaussian_space))
        with pytest.raises(UnknownIdentifierError) as info:
            run_identities(["bianchi"], ctx)
        assert all(i in str(info.value) for i in IDENTITY_IDS)

    def test_missing_potential_becomes_a_failing_report(self, gaussian_space, samples):
        report = run_identity("divf-gtrace", IdentityContext(gaussian_space, samples(gaussian_space)))
        assert not report.passed
        assert "u field" in report.message


@pytest.mark.parametrize("a0, a1", [(3.0, 2.0), (-1.0, 0.5), (0.0, -4.0)])
def test_fit_affine_recovers_coefficients(a0, a1):
    f = np.linspace(-1.0, 2.0, 7)
    assert fit_affine(a0 + a1 * f, f) == pytest.approx((a0, a1), abs=1e-12)


def test_fit_affine_on_constant_density():
    assert fit_affine([1.0, 3.0], [0.5, 0.5]) == (2.0, 0.0)
