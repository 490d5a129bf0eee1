import math

import numpy as np
import pytest

from discrete_bases import build_basis
from exceptions import MalformedScenarioError, UnknownIdentifierError
from manifold_models import build_model


@pytest.fixture(scope="module")
def sphere():
    return build_model("sphere-spherical", dim=2)


class TestLabels:
    def test_fourier(self):
        basis = build_basis("fourier-circle", build_model("circle"), 5)
        assert basis.labels == ("1", "cos1", "sin1", "cos2", "sin2")

    def test_harmonics_count(self, sphere):
        assert len(build_basis("sphere-harmonic-chart", sphere, 3)) == 16

    def test_dirichlet_harmonics_are_odd_about_the_equator(self):
        basis = build_basis("sphere-harmonic-chart", build_model("hemisphere", dim=2), 2)
        assert basis.labels == ("Y1,0", "Y2,1c", "Y2,1s")

    def test_hermite_graded_order(self):
        basis = build_basis("hermite-chart", build_model("gaussian-chart", dim=2), 2)
        assert basis.labels == ("He0,0", "He1,0", "He0,1", "He2,0", "He1,1", "He0,2")


class TestOrthonormality:
    def test_harmonics(self, sphere):
        basis = build_basis("sphere-harmonic-chart", sphere, 3)
        grid = basis.collocation_grid(sphere)
        V, _, _ = basis.tabulate(grid.points)
        mu = grid.weights * np.sin(grid.points[:, 0])
        gram = V.T @ (mu[:, None] * V)
        assert np.max(np.abs(gram - np.eye(len(basis)))) < 1e-12

    def test_hermite_against_the_standard_gaussian(self):
        model = build_model("gaussian-chart", dim=2)
        basis = build_basis("hermite-chart", model, 4)
        grid = basis.collocation_grid(model)
        V, _, _ = basis.tabulate(grid.points)
        mu = grid.weights * np.exp(-0.5 * np.sum(grid.points ** 2, axis=1)) / (2.0 * math.pi)
        assert np.max(np.abs(V.T @ (mu[:, None] * V) - np.eye(len(basis)))) < 1e-10

    @pytest.mark.parametrize("family", ["sine", "legendre"])
    def test_interval_functions_vanish_at_the_ends(self, family):
        basis = build_basis("interval-dirichlet", build_model("interval", lower=-1.0, upper=2.0), 6, family)
        V, _, _ = basis.tabulate(np.array([[-1.0], [2.0]]))
        assert np.max(np.abs(V)) < 1e-12


class TestDerivatives:
    @pytest.mark.parametrize("kind, name, size", [
        ("sphere-harmonic-chart", "sphere-spherical", 3),
        ("hermite-chart", "gaussian-chart", 3),
    ])
    def test_first_partials_match_differences(self, kind, name, size):
        model = build_model(name, dim=2)
        basis = build_basis(kind, model, size)
        x = np.array([0.9, 1.3])
        _, D1, _ = basis.tabulate(x[None, :])
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (basis.tabulate((x + e)[None, :])[0] - basis.tabulate((x - e)[None, :])[0]) / (2 * h)
            assert np.allclose(D1[0, :, i], fd[0], atol=1e-7)

    def test_legendre_second_partials(self):
        basis = build_basis("interval-dirichlet", build_model("interval", lower=0.0, upper=1.0), 5, "legendre")
        u = basis.field(np.arange(1.0, 6.0))
        x = np.array([0.37])
        h = 1e-4
        fd = (u(x + h) - 2 * u(x) + u(x - h)) / h ** 2
        assert u.second_partials(x)[0, 0] == pytest.approx(fd, rel=1e-4)


class TestRegistry:
    def test_unknown_kind(self, sphere):
        with pytest.raises(UnknownIdentifierError):
            build_basis("chebyshev", sphere, 4)

    @pytest.mark.parametrize("kind", ["fourier-circle", "interval-dirichlet", "hermite-chart", "grid-fd"])
    def test_incompatible_model(self, sphere, kind):
        with pytest.raises(MalformedScenarioError):
            build_basis(kind, sphere, 4)

    def test_size_must_be_positive(self, sphere):
        with pytest.raises(MalformedScenarioError):
            build_basis("sphere-harmonic-chart", sphere, 0)

    def test_grid_fd_only_at_nodes(self):
        basis = build_basis("grid-fd", build_model("interval", lower=0.0, upper=1.0), 9)
        V, _, _ = basis.tabulate(basis.nodes[:, None])
        assert np.array_equal(V, np.eye(9))
        with pytest.raises(ValueError):
            basis.tabulate(np.array([[0.123]]))
