"""Verification-layer tests.

Residual checks are exercised against data where the answer is known in
closed form: flat space (identically zero), constant mean curvature on a
flat metric, and the smoothed Schwarzschild family whose exterior is
exact.  Mass estimators are cross-checked against each other and against
the parameterized construction they measure.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from vacuumdata import (
    Dimension,
    InvalidArgumentError,
    NoTailError,
    RadialProfile,
    adm_mass_radial,
    adm_mass_surface,
    assemble_initial_data,
    build_grid,
    build_solution,
    check_solution,
    constraint_report,
    decay_exponents,
    default_sample_points,
    hamiltonian_residual,
    momentum_residual,
    smooth_schwarzschild_phi,
    tail_limit_check,
)
from vacuumdata.verify import _sphere_quadrature, sphere_area

DIM3 = Dimension(3)


@pytest.fixture(scope="module")
def work_grid():
    return build_grid(4000, 1e4, 1.01)


@pytest.fixture(scope="module")
def flat_data(work_grid):
    sol = build_solution(DIM3, RadialProfile(work_grid, np.ones(len(work_grid))))
    return sol, assemble_initial_data(sol)


@pytest.fixture(scope="module")
def mass_like_data(work_grid):
    r = work_grid.nodes
    phi = RadialProfile(work_grid, 1.0 - 0.5 / np.sqrt(1.0 + r * r))
    sol = build_solution(DIM3, phi)
    return sol, assemble_initial_data(sol)


@pytest.fixture(scope="module")
def schwarzschild(work_grid):
    sol = build_solution(DIM3, smooth_schwarzschild_phi(DIM3, 1.0, work_grid))
    return sol, assemble_initial_data(sol)


@pytest.fixture(scope="module")
def sample_points():
    return default_sample_points(DIM3)


class TestSamplePoints:
    def test_deterministic(self):
        a = default_sample_points(DIM3)
        b = default_sample_points(DIM3)
        assert np.array_equal(a, b)
        assert a.shape == (64, 3)

    def test_radii_span_requested_range(self):
        pts = default_sample_points(DIM3, count=16, r_lo=0.5, r_hi=20.0)
        radii = np.linalg.norm(pts, axis=1)
        assert radii[0] == pytest.approx(0.5)
        assert radii[-1] == pytest.approx(20.0)
        assert np.all(np.diff(radii) > 0)


class TestConstraintResiduals:
    def test_flat_data_is_bitwise_zero(self, flat_data, sample_points):
        _, data = flat_data
        assert np.all(hamiltonian_residual(data, sample_points) == 0.0)
        assert np.all(momentum_residual(data, sample_points) == 0.0)

    def test_constant_mean_curvature_momentum(self, work_grid, sample_points):
        t = 0.37
        ones = RadialProfile(work_grid, np.ones(len(work_grid)))
        tau = RadialProfile(work_grid, np.full(len(work_grid), t))
        data = assemble_initial_data(build_solution(DIM3, ones, tau))
        assert float(np.max(np.abs(momentum_residual(data, sample_points)))) < 1e-10

    def test_constant_mean_curvature_hamiltonian(self, work_grid, sample_points):
        # flat metric with k = (t/3) I: R = 0, so the residual must equal
        # (tr k)^2 - |k|^2 = 2 t^2 / 3 exactly
        t = 0.37
        ones = RadialProfile(work_grid, np.ones(len(work_grid)))
        tau = RadialProfile(work_grid, np.full(len(work_grid), t))
        data = assemble_initial_data(build_solution(DIM3, ones, tau))
        res = hamiltonian_residual(data, sample_points)
        assert float(np.max(np.abs(res - 2.0 * t * t / 3.0))) < 1e-14

    def test_derived_data_satisfies_both_constraints(self, mass_like_data, sample_points):
        _, data = mass_like_data
        assert float(np.max(np.abs(hamiltonian_residual(data, sample_points)))) < 1e-6
        assert float(np.max(np.abs(momentum_residual(data, sample_points)))) < 1e-5

    def test_schwarzschild_exterior_residuals_small(self, schwarzschild, sample_points):
        _, data = schwarzschild
        radii = np.linalg.norm(sample_points, axis=1)
        ext = radii > 2.0
        ham = hamiltonian_residual(data, sample_points[ext])
        mom = momentum_residual(data, sample_points[ext])
        assert float(np.max(np.abs(ham))) < 1e-8
        assert float(np.max(np.abs(mom))) < 1e-6

    def test_report_records_protocol(self, mass_like_data, sample_points):
        _, data = mass_like_data
        rep = constraint_report(data, sample_points[::8], h=2e-3)
        assert rep.stencil_h == 2e-3
        assert rep.convergence_order is None
        assert rep.hamiltonian_sup > 0
        assert rep.momentum_sup > 0


class TestRadialMass:
    def test_flat_mass_is_zero(self, flat_data):
        sol, _ = flat_data
        rep = adm_mass_radial(DIM3, sol.phi)
        assert rep.mass_standard == 0.0
        assert rep.mass_paper_radial == 0.0
        assert not rep.diverges

    def test_schwarzschild_standard_mass(self, schwarzschild):
        sol, _ = schwarzschild
        rep = adm_mass_radial(DIM3, sol.phi)
        assert rep.mass_standard == pytest.approx(-1.0, abs=1e-6)
        assert rep.extrapolated

    def test_convention_ratio_is_exact(self, schwarzschild):
        sol, _ = schwarzschild
        rep = adm_mass_radial(DIM3, sol.phi)
        assert rep.mass_paper_radial / rep.mass_standard == pytest.approx(0.5, rel=1e-12)

    def test_mass_scales_linearly(self, work_grid):
        rep = adm_mass_radial(
            DIM3, smooth_schwarzschild_phi(DIM3, 2.0, work_grid)
        )
        assert rep.mass_standard == pytest.approx(-2.0, abs=1e-5)

    def test_divergent_tail_detected(self, work_grid):
        r = work_grid.nodes
        slow = RadialProfile(work_grid, 1.0 - 0.1 * (1.0 + r * r) ** -0.3)
        rep = adm_mass_radial(DIM3, slow)
        assert rep.diverges
        assert rep.mass_standard == -math.inf
        assert rep.mass_paper_radial == -math.inf

    def test_oscillating_far_field_rejected(self, work_grid):
        osc = RadialProfile(work_grid, 1.0 + 1e-3 * np.cos(work_grid.nodes))
        with pytest.raises(NoTailError):
            adm_mass_radial(DIM3, osc)


class TestSurfaceMass:
    def test_sphere_rule_integrates_constants_exactly(self):
        for n in (3, 4, 5):
            _, weights = _sphere_quadrature(n)
            assert float(np.sum(weights)) == pytest.approx(sphere_area(n), rel=1e-13)

    def test_unit_sphere_areas(self):
        assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
        assert sphere_area(4) == pytest.approx(2.0 * math.pi**2, rel=1e-15)

    def test_schwarzschild_extrapolated_mass(self, schwarzschild):
        _, data = schwarzschild
        rep = adm_mass_surface(data, (1e3, 2e3, 4e3))
        assert rep.extrapolated
        assert rep.mass_standard == pytest.approx(-1.0, abs=1e-8)
        assert rep.mass_paper_surface / rep.mass_standard == pytest.approx(2.0, rel=1e-12)

    def test_single_radius_reports_raw_flux_value(self, schwarzschild):
        # without extrapolation the estimate carries the O(1/r) bias of
        # the finite sphere: -phi(r)^3 for this family
        _, data = schwarzschild
        rep = adm_mass_surface(data, (2500.0,))
        assert not rep.extrapolated
        phi = float(data.conformal_factor_at(2500.0))
        assert rep.mass_standard == pytest.approx(-(phi**3), rel=1e-8)

    def test_agrees_with_radial_estimator(self, mass_like_data):
        sol, data = mass_like_data
        radial = adm_mass_radial(DIM3, sol.phi)
        surface = adm_mass_surface(data, (1e3, 2e3, 4e3))
        assert surface.mass_standard == pytest.approx(radial.mass_standard, rel=1e-6)

    def test_empty_radii_rejected(self, schwarzschild):
        _, data = schwarzschild
        with pytest.raises(InvalidArgumentError):
            adm_mass_surface(data, ())


class TestDecayExponents:
    def test_schwarzschild_exponents(self, schwarzschild):
        _, data = schwarzschild
        rep = decay_exponents(data)
        assert rep.metric_exponent == pytest.approx(1.0, abs=0.02)
        assert rep.k_exponent == pytest.approx(1.5, abs=0.02)
        assert rep.tau_exponent == pytest.approx(1.5, abs=0.02)

    def test_windows_recorded_and_respected(self, schwarzschild):
        _, data = schwarzschild
        win = (50.0, 5000.0)
        rep = decay_exponents(data, {"metric": win})
        assert rep.windows["metric"] == win
        assert rep.windows["tau"] != win


class TestTailLimit:
    def test_flat_limit_is_zero(self, flat_data):
        sol, _ = flat_data
        assert tail_limit_check(DIM3, sol.phi, 0.0, 1.5) == 0.0

    def test_schwarzschild_limit_matches_prediction(self, schwarzschild):
        sol, _ = schwarzschild
        c = 3.0 / math.sqrt(2.0)
        measured = tail_limit_check(DIM3, sol.phi, c, 1.5)
        predicted = (c * 1.0 / (2.0 * (3.0 - 1.5))) ** 2
        assert measured == pytest.approx(predicted, rel=1e-6)


class TestCheckSolution:
    def test_flat_solution_all_zero(self, flat_data):
        sol, _ = flat_data
        chk = check_solution(sol)
        assert chk.monotone
        assert chk.identity_residual == 0.0
        assert chk.lw_identity == 0.0
        assert chk.divw_identity == 0.0
        assert chk.lichnerowicz_sup == 0.0
        assert chk.notes == ()

    def test_schwarzschild_passes_battery(self, schwarzschild):
        sol, _ = schwarzschild
        chk = check_solution(sol)
        assert chk.monotone
        assert chk.identity_residual < 1e-12
        assert chk.lw_identity < 1e-12
        assert chk.divw_identity < 1e-6
        assert chk.lichnerowicz_sup < 1e-5

    def test_failures_are_recorded_not_raised(self, work_grid):
        r = work_grid.nodes
        decreasing = RadialProfile(work_grid, 1.0 + np.exp(-r))
        zero = RadialProfile(work_grid, np.zeros(len(work_grid)))
        sol = build_solution(DIM3, decreasing, zero)
        chk = check_solution(sol)
        assert not chk.monotone
        assert chk.identity_residual == math.inf
        assert any("identity" in note for note in chk.notes)
