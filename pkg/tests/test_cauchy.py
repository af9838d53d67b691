import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from cylpar.cauchy import (Nonlinearity, Scenario, admissible_beta, detect_blowup, picard_probe,
                           solve, step, zero_nonlinearity)
from cylpar.semigroup import assemble, semigroup_exact
from cylpar.spaces import Field, Grid1D, flat_norm, ul_norm
from cylpar.transverse import make_bounded, make_dirichlet_laplacian


def constant_field(grid, value, modes=1):
    return Field.from_profile(grid, lambda x: np.full_like(x, value), modes)


def scalar_op(eta):
    """A single transverse mode with symbol eta on x-constant data."""
    return assemble(Grid1D(8.0, 16), make_bounded(1, eta))


def power(p, scale=1.0):
    return Nonlinearity(lambda c: scale * c ** p, kind="mode_polynomial", gamma=p - 1, degree=p)


def test_linear_step_is_the_exact_semigroup(rng):
    g = Grid1D(16.0, 128)
    op = assemble(g, make_dirichlet_laplacian(3, math.pi))
    u = Field(g, rng.standard_normal((128, 3)))
    for scheme in ("ETD1", "ETD2RK"):
        out = step(u, 0.05, scheme, op)
        np.testing.assert_allclose(out.coeffs, semigroup_exact(op, 0.05, u).coeffs,
                                   rtol=0, atol=1e-14)


def test_etd1_is_exact_for_constant_forcing():
    eta, c, dt = 2.0, 0.7, 0.3
    op = scalar_op(eta)
    F = Nonlinearity(lambda coeffs: np.full_like(coeffs, c), kind="mode_polynomial")
    u = constant_field(op.grid, 0.4)
    out = step(u, dt, "ETD1", op, F)
    expected = math.exp(-eta * dt) * 0.4 + (1 - math.exp(-eta * dt)) * c / eta
    np.testing.assert_allclose(out.coeffs, expected, rtol=1e-14)


def _logistic_final(dt, scheme, T=1.0):
    op = scalar_op(1.0)
    s = Scenario(op, power(2), constant_field(op.grid, 0.5), scheme, dt, T, record_stride=10 ** 9)
    return solve(s).final.coeffs[0, 0]


@pytest.mark.parametrize("scheme,order", [("ETD1", 1), ("ETD2RK", 2)])
def test_order_against_refined_reference(scheme, order):
    dts = [0.1 / 2 ** i for i in range(4)]
    ref = _logistic_final(dts[-1] / 64, scheme)
    errs = [abs(_logistic_final(dt, scheme) - ref) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(order, abs=0.1)


def test_eigenvector_trajectory_decays_exponentially():
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(3, math.pi)
    op = assemble(g, B)
    u0 = Field.from_profile(g, lambda x: np.cos(np.pi * x / 8), 3, mode=2)
    eta = (np.pi / 8) ** 2 + 4.0
    s = Scenario(op, None, u0, "ETD2RK", 0.01, 1.0,
                 {"amp": lambda u: u.coeffs[g.n_x // 2, 1]})
    rec = solve(s)
    np.testing.assert_allclose(rec.column("amp"), np.exp(-eta * np.asarray(rec.times)),
                               rtol=1e-12)


def test_heat_flow_does_not_increase_ul_norm():
    g = Grid1D(16.0, 256)
    op = assemble(g, make_dirichlet_laplacian(2, math.pi))
    u0 = Field.from_profile(g, lambda x: np.exp(-x ** 2) + 0.5 * np.exp(-(x - 4) ** 2), 2)
    rec = solve(Scenario(op, None, u0, "ETD1", 0.02, 2.0, {"ul": ul_norm}))
    assert np.all(np.diff(rec.column("ul")) <= 1e-14)


def test_solve_is_deterministic():
    g = Grid1D(16.0, 128)
    op = assemble(g, make_dirichlet_laplacian(2, math.pi), a=lambda x: 1 + 0.2 * np.cos(np.pi * x / 16))
    u0 = Field.from_profile(g, lambda x: np.exp(-x ** 2), 2)
    F = Nonlinearity(lambda y, s: np.sin(s), K=1.0)
    runs = [solve(Scenario(op, F, u0, "ETD2RK", 0.01, 0.5)).final.coeffs for _ in range(2)]
    assert np.array_equal(runs[0], runs[1])


def test_picard_fixed_point_matches_etd1():
    g = Grid1D(16.0, 128)
    op = assemble(g, make_dirichlet_laplacian(2, math.pi))
    u0 = Field.from_profile(g, lambda x: np.exp(-x ** 2 / 4), 2)
    F = Nonlinearity(lambda y, s: 0.2 * np.sin(s), K=0.2)
    etd = solve(Scenario(op, F, u0, "ETD1", 0.01, 0.5)).final
    picard = solve(Scenario(op, F, u0, "Picard", 0.01, 0.5, picard_iterations=5)).final
    assert flat_norm(picard - etd) <= 1e-6 * flat_norm(etd)


def test_continuity_at_initial_time():
    g = Grid1D(16.0, 256)
    op = assemble(g, make_dirichlet_laplacian(2, math.pi))
    u0 = Field.from_profile(g, lambda x: np.exp(-x ** 2), 2)
    s = Scenario(op, None, u0, "ETD1", 1e-4, 1e-3, {"dist": lambda u: ul_norm(u - u0)})
    rec = solve(s)
    t, d = np.asarray(rec.times[1:]), rec.column("dist")[1:]
    assert rec.first_step_distance["ul"] == pytest.approx(d[0])
    assert np.polyfit(np.log(t), np.log(d), 1)[0] >= 0.9


def test_nemytskii_identity_rule_reproduces_modes(rng):
    B = make_dirichlet_laplacian(4, math.pi)
    c = rng.standard_normal((16, 4))
    F = Nonlinearity(lambda y, s: s)
    np.testing.assert_allclose(F.evaluate(c, B), c, atol=1e-12)


def test_dealiasing_rule_follows_degree():
    assert Nonlinearity(lambda c: c, degree=None).dealias_rule == "none"
    assert Nonlinearity(lambda c: c, degree=3).dealias_rule == "two_thirds"
    assert Nonlinearity(lambda c: c, degree=5).dealias_rule == "pad2"
    assert Nonlinearity(lambda c: c, degree=5, dealias="none").dealias_rule == "none"


def test_padded_evaluation_is_exact_for_band_limited_square():
    g = Grid1D(8.0, 32)
    x = g.x
    c = np.cos(np.pi * x / 8)[:, None]
    F = Nonlinearity(lambda coeffs: coeffs ** 2, kind="mode_polynomial", degree=2, dealias="pad2")
    np.testing.assert_allclose(F.evaluate(c, make_bounded(1)), c ** 2, atol=1e-13)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_ends_with_error_status():
    op = scalar_op(0.0)
    s = Scenario(op, power(2), constant_field(op.grid, 1.0), "ETD1", 0.1, 5.0)
    rec = solve(s)
    assert rec.status == "error"
    assert detect_blowup(rec, 1e6).flagged


def test_scenario_validation():
    op = scalar_op(1.0)
    u0 = constant_field(op.grid, 1.0)
    with pytest.raises(ValueError):
        Scenario(op, None, u0, dt=0.0)
    with pytest.raises(ValueError):
        Scenario(op, None, u0, scheme="RK4")
    with pytest.raises(ValueError):
        Scenario(op, None, constant_field(Grid1D(8.0, 32), 1.0))


def test_trajectory_csv_round_trips(tmp_path):
    op = scalar_op(1.0)
    rec = solve(Scenario(op, power(2), constant_field(op.grid, 0.5), "ETD2RK", 0.1, 1.0,
                         {"value": lambda u: u.coeffs[0, 0] / 3}))
    rec.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["time", "blowup_norm", "value"]
    assert [float(r[2]) for r in rows[1:]] == rec.diagnostics["value"]


def test_picard_probe_with_zero_nonlinearity():
    op = assemble(Grid1D(8.0, 16), make_dirichlet_laplacian(1, math.pi))
    assert picard_probe(op, zero_nonlinearity(), 1.0, horizon=0.1) == 0.0


def test_picard_probe_rejects_bad_input():
    op = assemble(Grid1D(8.0, 16), make_dirichlet_laplacian(1, math.pi))
    with pytest.raises(ValueError):
        picard_probe(op, zero_nonlinearity(), 0.0)
    with pytest.raises(ValueError):
        picard_probe(op, power(3), 1.0)


def test_admissible_beta_examples():
    w = admissible_beta(0, 2, 3)
    assert w.interval == (Fraction(1, 2), Fraction(1))
    assert w.cauchy_ok
    for alpha in (0, Fraction(1, 3), 0.5):
        lip = admissible_beta(alpha, 0, 2)
        assert lip.interval == (Fraction(str(alpha)) if isinstance(alpha, float) else alpha, 1)
        assert lip.cauchy_ok and lip.gradient_ok


def test_gradient_condition_threshold_in_three_dimensions():
    assert admissible_beta(0, Fraction(399, 100), 3).gradient_ok
    assert not admissible_beta(0, 4, 3).gradient_ok
    assert not admissible_beta(0, Fraction(401, 100), 3).gradient_ok


def test_admissible_beta_sub_window():
    w = admissible_beta(0, 1, 1)
    assert w.sub_window == (Fraction(1, 2), Fraction(3, 4))
    # (1 + gamma)(2 beta - 1) = 1 at the right end
    assert (1 + 1) * (2 * w.sub_window[1] - 1) == 1


def test_admissible_beta_input_checks():
    with pytest.raises(ValueError):
        admissible_beta(1, 0, 1)
    with pytest.raises(ValueError):
        admissible_beta(0, -1, 1)
    with pytest.raises(ValueError):
        admissible_beta(0, 1, 4)
    assert admissible_beta(Fraction(9, 10), 2, 3).interval is None


def test_stable_linear_run_never_flags():
    op = scalar_op(1.0)
    rec = solve(Scenario(op, None, constant_field(op.grid, 1.0), "ETD1", 0.1, 5.0))
    assert not detect_blowup(rec, 10.0).flagged


def test_quadratic_blowup_time_matches_closed_form():
    op = scalar_op(0.0)
    s = Scenario(op, power(2), constant_field(op.grid, 1.0), "ETD2RK", 1e-4, 2.0,
                 blowup_threshold=1e6)
    rec = solve(s)
    status = detect_blowup(rec, 1e6)
    assert rec.status == "blowup"
    assert status.hitting_time == pytest.approx(1 - 1e-6, abs=5e-4)


def test_cubic_blowup_comes_sooner_for_larger_data():
    g = Grid1D(16.0, 128)
    op = assemble(g, make_bounded(1, 0.0))
    times = []
    for amp in (1.0, 2.0, 4.0):
        u0 = Field.from_profile(g, lambda x: amp * np.exp(-x ** 2 / 4), 1)
        rec = solve(Scenario(op, power(3), u0, "ETD2RK", 1e-4, 2.0, blowup_threshold=1e3))
        times.append(detect_blowup(rec, 1e3).hitting_time)
    assert times[0] > times[1] > times[2]


def test_detect_blowup_window_and_threshold_checks():
    op = scalar_op(0.0)
    rec = solve(Scenario(op, power(2), constant_field(op.grid, 1.0), "ETD2RK", 1e-3, 0.9))
    assert detect_blowup(rec, 5.0).flagged
    assert not detect_blowup(rec, 5.0, window=(0.0, 0.5)).flagged
    with pytest.raises(ValueError):
        detect_blowup(rec, 0.0)
