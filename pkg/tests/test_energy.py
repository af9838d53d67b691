import math

import numpy as np
import pytest

from cylpar.cauchy import Scenario, solve
from cylpar.energy import (EnergySpec, Potential, bistable_potential, coercivity_check,
                           damped_sine_potential, dissipation_ledger, gronwall_audit,
                           longtime_experiment, quadratic_potential, sliding_energy,
                           truncated_energy, window_convergence)
from cylpar.lab import plateau
from cylpar.semigroup import assemble
from cylpar.spaces import Field, Grid1D, Weight
from cylpar.transverse import make_bounded, make_dirichlet_laplacian


def test_zero_field_energy_is_potential_floor_times_weight_mass():
    g = Grid1D(40.0, 2048)
    B = make_bounded(1)
    v0 = 0.3
    P = Potential(lambda y, s: v0 + 0 * s, lambda y, s: 0 * s)
    w = Weight(0.5)
    E = truncated_energy(Field.zeros(g, 1), P, EnergySpec(w), B)
    assert E == pytest.approx(v0 * g.dx * np.sum(w.values(g)), rel=1e-14)


@pytest.mark.parametrize("j", [1, 3])
def test_single_mode_flat_energy_closed_form(j):
    g = Grid1D(4 * math.pi, 256)
    B = make_dirichlet_laplacian(3, math.pi)
    c = 0.7
    u = Field.from_profile(g, lambda x: c * np.sin(x), 3, mode=j)
    # (1/2) int (c cos)^2 + (c sin)^2 + lambda_j (c sin)^2 over a whole number of periods
    expected = 0.5 * c ** 2 * g.L * (2 + j ** 2)
    assert truncated_energy(u, None, EnergySpec(), B) == pytest.approx(expected, rel=1e-13)


def test_energy_is_quadratic_without_potential():
    g = Grid1D(16.0, 256)
    B = make_dirichlet_laplacian(2, math.pi)
    u = Field.from_profile(g, lambda x: np.exp(-x ** 2), 2)
    spec = EnergySpec.truncated(0.2, 1.0)
    assert truncated_energy(2 * u, None, spec, B) == pytest.approx(4 * truncated_energy(u, None, spec, B),
                                                                   rel=1e-14)


def test_formal_energy_drops_mass_term():
    g = Grid1D(4 * math.pi, 256)
    B = make_dirichlet_laplacian(1, math.pi)
    u = Field.from_profile(g, np.sin, 1)
    full = truncated_energy(u, None, EnergySpec(), B)
    formal = truncated_energy(u, None, EnergySpec.formal(), B)
    assert full - formal == pytest.approx(0.5 * g.L, rel=1e-13)


def test_flat_linear_ledger_reduces_to_dissipation_terms():
    g = Grid1D(16.0, 256)
    B = make_dirichlet_laplacian(2, math.pi)
    kappa = 1.5
    P = quadratic_potential(kappa)
    u = Field.from_profile(g, lambda x: np.exp(-x ** 2 / 4), 2)
    ut = Field.from_profile(g, lambda x: x * np.exp(-x ** 2 / 4), 2, mode=2)
    led = dissipation_ledger(u, ut, P, EnergySpec(), B)
    assert led.weight_time == 0.0 and led.weight_mass == 0.0
    dx = g.dx
    cx = u.derivative().coeffs
    assert led.time_derivative == pytest.approx(-dx * np.sum(ut.coeffs ** 2), rel=1e-13)
    assert led.gradient == pytest.approx(-dx * np.sum(cx ** 2), rel=1e-13)
    assert led.transverse == pytest.approx(-dx * np.sum(B.eigenvalues * u.coeffs ** 2), rel=1e-13)
    assert led.potential == pytest.approx(-kappa * dx * np.sum(u.coeffs ** 2), rel=1e-12)


def test_ledger_of_zero_field_vanishes():
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(2, math.pi)
    z = Field.zeros(g, 2)
    led = dissipation_ledger(z, z, bistable_potential(), EnergySpec.truncated(0.1), B)
    assert all(v == 0.0 for v in led.as_dict().values())


def test_ledger_rejects_mismatched_fields():
    B = make_dirichlet_laplacian(2, math.pi)
    with pytest.raises(ValueError):
        dissipation_ledger(Field.zeros(Grid1D(16.0, 128), 2), Field.zeros(Grid1D(16.0, 64), 2),
                           None, EnergySpec(), B)


def test_gronwall_bound_saturated_by_its_own_profile():
    nu, E0 = 0.8, 3.0
    t = np.linspace(0, 30, 301)
    E = np.exp(-nu * t) * E0 + 1 / nu ** 2
    rep = gronwall_audit(t, E, nu)
    assert rep.holds
    # bound - E = exp(-nu t) / nu^2, tight as t grows
    assert rep.worst_margin == pytest.approx(math.exp(-nu * 30) / nu ** 2, rel=1e-6)
    assert rep.nu_max == pytest.approx(nu, rel=1e-3)


def test_gronwall_decreasing_series_passes_for_small_nu():
    t = np.linspace(0, 5, 51)
    rep = gronwall_audit(t, 2.0 * np.exp(-t), 0.1)
    assert rep.holds and rep.nu_max > 0.1


def test_gronwall_rejects_empty_series():
    with pytest.raises(ValueError):
        gronwall_audit([], [])


def test_gronwall_on_linear_gradient_flow():
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(2, math.pi)
    P = quadratic_potential(1.0)
    op = assemble(g, B)
    u0 = Field.from_profile(g, lambda x: plateau(x, 0.0, 8.0, 2.0), 2)
    spec = EnergySpec.truncated(0.1)
    rec = solve(Scenario(op, P.nonlinearity(), u0, "ETD2RK", 0.05, 5.0,
                         {"E": lambda u: truncated_energy(u, P, spec, B)}))
    rep = gronwall_audit(rec.times, rec.column("E"))
    assert rep.nu_max > 0
    assert gronwall_audit(rec.times, rec.column("E"), rep.nu_max).holds


def test_quadratic_potential_is_exactly_coercive():
    rep = coercivity_check(quadratic_potential(1.7))
    assert rep.kappa_fit == pytest.approx(1.7, rel=1e-9)
    assert rep.delta_fit == pytest.approx(0.0, abs=1e-9)
    assert rep.passed


def _coercivity_oracle(grad, s, kappas):
    """Largest kappa - delta_min(kappa) over a kappa grid, and the largest kappa attaining it."""
    nz = s != 0
    pairing = grad(0.0, s[nz]) * s[nz]
    score = np.array([k - max(0.0, np.max((k * s[nz] ** 2 - pairing) / np.abs(s[nz])))
                      for k in kappas])
    best = score.max()
    return best, kappas[score >= best - 1e-9].max()


def test_bistable_fit_matches_grid_oracle():
    P = bistable_potential()
    s = np.linspace(-3.0, 3.0, 601)
    best, k_star = _coercivity_oracle(P.grad, s, np.linspace(0.0, 4.0, 40001))
    rep = coercivity_check(P, s)
    assert rep.kappa_fit - rep.delta_fit == pytest.approx(best, abs=1e-8)
    assert rep.kappa_fit == pytest.approx(k_star, abs=2e-4)
    assert rep.declared_ok and rep.passed


def test_negative_pairing_is_not_coercive():
    P = Potential(lambda y, s: -0.5 * s ** 2, lambda y, s: -s, kappa=1.0)
    rep = coercivity_check(P)
    assert not rep.declared_ok
    assert not rep.passed


@pytest.mark.parametrize("P", [quadratic_potential(2.0), bistable_potential(), damped_sine_potential()])
def test_potential_gradient_is_consistent(P):
    assert P.primitive_defect(np.linspace(-3, 3, 61)) < 1e-12


def test_sliding_energy_peaks_near_mass():
    g = Grid1D(32.0, 512)
    B = make_dirichlet_laplacian(1, math.pi)
    u = Field.from_profile(g, lambda x: np.exp(-(x + 10) ** 2), 1)
    E = sliding_energy(u, None, 0.5, B)
    assert abs(g.x[np.argmax(E)] + 10) <= 2 * g.dx


def test_longtime_linear_coercive_case_stays_bounded():
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(2, math.pi)
    P = quadratic_potential(1.0)
    op = assemble(g, B)
    u0 = Field.from_profile(g, lambda x: plateau(x, 0.0, 4.0, 2.0), 2)
    rep = longtime_experiment(Scenario(op, P.nonlinearity(), u0, "ETD2RK", 0.05, 2.0), P)
    assert rep.status == "completed"
    # linear decay: the supremum is attained at the first recorded time
    assert rep.sup_2T == rep.sup_T
    assert rep.norms[-1] < 1e-2 * rep.norms[0]
    assert rep.passed


def test_window_convergence_of_constant_trajectory():
    g = Grid1D(16.0, 128)
    B = make_bounded(1)
    u = Field.from_profile(g, np.cos, 1)
    rep = window_convergence([(t, u) for t in (0.0, 1.0, 2.0)], (-2.0, 2.0), 0.0, B)
    assert np.all(rep.consecutive == 0.0) and rep.converged


def test_window_convergence_follows_linear_decay():
    g = Grid1D(16.0, 128)
    B = make_bounded(1, 2.0)
    u0 = Field.from_profile(g, np.ones_like, 1)
    snaps = [(t, Field(g, u0.coeffs * math.exp(-2.0 * t))) for t in np.arange(6) * 0.5]
    rep = window_convergence(snaps, (-2.0, 2.0), 0.5, B)
    ratios = rep.consecutive[1:] / rep.consecutive[:-1]
    np.testing.assert_allclose(ratios, math.exp(-2.0 * 0.5), rtol=1e-12)


def test_window_convergence_needs_three_snapshots():
    g = Grid1D(16.0, 128)
    u = Field.zeros(g, 1)
    with pytest.raises(ValueError):
        window_convergence([(0.0, u), (1.0, u)], (-1.0, 1.0), 0.0, make_bounded(1))


def test_two_well_settling_has_decreasing_modulus():
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(1, 4.0)
    P = bistable_potential()
    op = assemble(g, B)
    u0 = Field.from_profile(g, lambda x: 0.5 * plateau(x, 0.0, 8.0, 2.0), 1)
    rec = solve(Scenario(op, P.nonlinearity(), u0, "ETD2RK", 0.01, 6.0, snapshot_stride=50))
    rep = window_convergence(rec.snapshots[-6:], (-4.0, 4.0), 0.0, B)
    assert np.all(np.diff(rep.modulus) < 0)
