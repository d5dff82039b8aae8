import json
import math

import numpy as np
import pytest

from crdi._backend import jnp
from crdi.diff import jacobian
from crdi.errors import ConfigError, NotNormalizable, SingularSpinor
from crdi.inversion import invert_covariant
from crdi.solutions import SolutionConfig, build_solution
from crdi.verify import (
    GridSpec,
    QuadratureSpec,
    dirac_residual,
    grid_points,
    grid_report,
    hydrogen_norm_integral,
    normalization_integral,
    normalize,
)

from .conftest import FINE

SMALL = GridSpec(count=40, seed=1, ranges=[(0, 1), (0.2, 5), (0.2, math.pi - 0.2), (-math.pi, math.pi)])


def test_free_spinor_solves_with_zero_potential(free_rest):
    p = free_rest.point([0.5, 1.0, 1.0, 0.3])
    assert dirac_residual(free_rest.field, np.zeros(4), free_rest.consts, p, "analytic") < 1e-12
    assert dirac_residual(free_rest.field, np.zeros(4), free_rest.consts, p, "fd") < 1e-8


def test_wrong_potential_leaves_a_residual(hydrogen):
    p = hydrogen.point([0.0, 1.0, 1.0, 0.3])
    good = invert_covariant(hydrogen.field, hydrogen.consts, p).A
    assert dirac_residual(hydrogen.field, good, hydrogen.consts, p) < 1e-10
    assert dirac_residual(hydrogen.field, np.zeros(4), hydrogen.consts, p) > 1e-3


@pytest.mark.parametrize("mode", ["analytic", "fd"])
@pytest.mark.parametrize("name", ["hydrogen", "zero_beta", "coulomb_solenoid", "planar"])
def test_reports_pass_for_shipped_families(request, name, mode):
    sol = request.getfixturevalue(name)
    grid = SMALL if sol.chart.kind == "spherical" else GridSpec(count=40, seed=1)
    report = grid_report(sol, grid, mode, field_checks=False)
    assert report.passed, report.checks
    assert report.n_points == 40


def test_perturbed_potential_fails(hydrogen):
    report = grid_report(hydrogen, SMALL, "fd", perturbation={"A_t": 0.01})
    assert not report.checks["dirac"]
    assert report.metrics["dirac"]["max"] > 1e-6


def test_report_is_deterministic_and_locates_maxima(hydrogen):
    one = grid_report(hydrogen, SMALL, "fd").to_json()
    two = grid_report(hydrogen, SMALL, "fd").to_json()
    assert one == two
    data = json.loads(one)
    points = grid_points(SMALL, "spherical").tolist()
    for metric in data["metrics"].values():
        assert metric["argmax"] in points
    assert data["schema_version"] == 1


def test_seed_changes_the_grid():
    assert not np.array_equal(grid_points(GridSpec(seed=1), "spherical"), grid_points(GridSpec(seed=2), "spherical"))


@pytest.mark.parametrize("spec", [GridSpec(count=0), GridSpec(kind="regular", counts=[1, 0, 3, 3])])
def test_empty_grid_is_a_config_error(spec):
    with pytest.raises(ConfigError):
        grid_points(spec, "spherical")


def test_unknown_tolerance_and_perturbation_keys(hydrogen):
    with pytest.raises(ConfigError):
        grid_report(hydrogen, SMALL, tolerances={"bogus": 1.0})
    with pytest.raises(ConfigError):
        grid_report(hydrogen, SMALL, perturbation={"A_9": 0.1})


def test_singular_spinor_reported():
    sol = build_solution(SolutionConfig(family="general_ansatz", rho="0*r"))
    with pytest.raises(SingularSpinor):
        grid_report(sol, SMALL, "analytic")


def test_loop_presets_report_field_diagnostics(uniform_b):
    report = grid_report(uniform_b, GridSpec(count=20, seed=2, ranges=SMALL.ranges), "fd")
    diag = report.diagnostics
    assert diag["B_theta_derived_deviation"]["max"] < 1e-6
    assert diag["B_r_derived_deviation"]["max"] < 1e-6
    # the axial field is not uniform for this potential, so the spread is far from zero
    assert diag["axial_B_spread"]["max"] > 1e-2


def test_finite_differences_are_second_order(hydrogen):
    x = jnp.asarray([0.1, 1.3, 0.9, 0.4])
    exact = np.asarray(jacobian(hydrogen.field.matrix, x, "analytic"))
    errs = [np.abs(np.asarray(jacobian(hydrogen.field.matrix, x, "fd", h)) - exact).max() for h in (2e-3, 1e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


# ---------------------------------------------------------------- normalization


@pytest.fixture(scope="module")
def hydrogen_integral(hydrogen):
    return normalization_integral(hydrogen)


def test_hydrogen_normalization_oracle(hydrogen_integral):
    assert hydrogen_integral == pytest.approx(hydrogen_norm_integral(1.0, FINE), rel=1e-8)


def test_normalize_is_idempotent(hydrogen):
    kappa = normalize(hydrogen)
    again = build_solution(hydrogen.config.model_copy(update={"kappa": kappa}))
    assert normalize(again) == pytest.approx(kappa, rel=1e-10)
    assert normalization_integral(again) == pytest.approx(1.0, rel=1e-8)


def test_normalization_scales_with_density(hydrogen_integral):
    doubled = build_solution(SolutionConfig(family="hydrogen", kappa=2.0))
    assert normalization_integral(doubled) == pytest.approx(4.0 * hydrogen_integral, rel=1e-10)


def test_heavier_hydrogen_oracle():
    sol = build_solution(SolutionConfig(family="hydrogen", Z=20.0))
    assert normalization_integral(sol) == pytest.approx(hydrogen_norm_integral(20.0, FINE), rel=1e-8)


def test_growing_density_is_not_normalizable():
    sol = build_solution(SolutionConfig(family="zero_beta", G="-3*log(r)"))
    with pytest.raises(NotNormalizable):
        normalization_integral(sol, QuadratureSpec(theta_nodes=8, phi_nodes=2))


def test_confined_zero_beta_normalizes(zero_beta):
    kappa = normalize(zero_beta)
    assert math.isfinite(kappa) and kappa > 0
