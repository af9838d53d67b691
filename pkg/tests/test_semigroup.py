import math

import numpy as np
import pytest

from cylpar.semigroup import (ContourError, ContourSpec, EllipticityError, HypothesisError,
                              SectorParams, apply_operator, assemble, integrated_semigroup,
                              intermediate_norm, resolvent_apply, resolvent_norm, semigroup,
                              semigroup_contour, semigroup_exact, ul_operator_check,
                              verify_sectorial)
from cylpar.spaces import Field, Grid1D, flat_norm, sup_weighted_norm
from cylpar.transverse import make_bounded, make_dirichlet_laplacian

# max_s (1 - exp(-s)) / s^(1/2), golden-section search (scipy.optimize.minimize_scalar), s* = 1.2564
G_STAR_HALF = 0.6381726863389514


def smooth_random(grid, modes, rng, cutoff=4.0):
    raw = rng.standard_normal((grid.n_x, modes))
    hat = np.fft.rfft(raw, axis=0) * np.exp(-(grid.k / cutoff) ** 2)[:, None]
    return Field(grid, np.fft.irfft(hat, n=grid.n_x, axis=0))


def rel(a: Field, b: Field) -> float:
    return flat_norm(a - b) / flat_norm(b)


@pytest.fixture
def heat():
    return assemble(Grid1D(16.0, 128), make_dirichlet_laplacian(3, math.pi))


@pytest.fixture
def variable():
    g = Grid1D(16.0, 128)
    return assemble(g, make_dirichlet_laplacian(3, math.pi),
                    a=lambda x: 1.0 + 0.3 * np.sin(2 * np.pi * x / g.L),
                    ell1=0.2, ell2=lambda x: 0.1 * np.cos(np.pi * x / g.L))


def constant_mode(grid, modes, mode=1, value=1.0):
    return Field.from_profile(grid, lambda x: np.full_like(x, value), modes, mode)


def test_constant_coefficients_have_no_perturbation(heat):
    assert heat.is_constant
    k = 2 * np.pi * np.fft.fftfreq(heat.grid.n_x, d=heat.grid.dx)
    np.testing.assert_allclose(heat.symbols, k[:, None] ** 2 + np.array([1.0, 4.0, 9.0])[None, :])


def test_ellipticity_floor_is_reported():
    g = Grid1D(16.0, 128)
    op = assemble(g, make_bounded(1), a=lambda x: 1 + 0.5 * np.sin(2 * np.pi * x / g.L))
    assert op.m_a == pytest.approx(0.5, abs=1e-15)
    assert not op.is_constant


def test_degenerate_diffusion_is_rejected():
    g = Grid1D(16.0, 128)
    with pytest.raises(EllipticityError):
        assemble(g, make_bounded(1), a=lambda x: 1 + np.sin(2 * np.pi * x / g.L))


def test_coefficient_bounds_name_the_hypothesis():
    g = Grid1D(16.0, 128)
    with pytest.raises(HypothesisError, match="a \\+ \\|a'\\|"):
        assemble(g, make_bounded(1), a=2.0, M_a=1.0)
    with pytest.raises(HypothesisError, match="l1"):
        assemble(g, make_bounded(1), ell1=1.0, ell2=1.0, C_L=1.5)


def test_resolvent_of_single_mode_is_scalar_division():
    g = Grid1D(8.0, 64)
    op = assemble(g, make_bounded(1, 5.0))
    u = constant_mode(g, 1)
    v = resolvent_apply(op, -1.0, u)
    np.testing.assert_allclose(v.coeffs, 0.25, rtol=1e-15)


def test_resolvent_far_from_spectrum_is_nearly_division(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    z = 1e8
    v = resolvent_apply(heat, z, u)
    assert rel(v, u * (1 / z)) < 1e-6


def test_resolvent_residual_with_variable_coefficients(variable, rng):
    u = smooth_random(variable.grid, 3, rng)
    for z in (1.0, 2.0 + 3.0j, 0.5j):
        v = resolvent_apply(variable, z, u)
        residual = z * v.coeffs + variable.apply(v.coeffs) - u.coeffs
        assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(u.coeffs)


def test_sector_estimate_for_self_adjoint_operator(heat):
    report = verify_sectorial(heat, SectorParams(0.0, math.pi / 4, math.sqrt(2) + 1e-6), 60)
    assert report.passed
    assert report.M_observed <= math.sqrt(2) + 1e-6
    assert '"passed": true' in report.to_json()


def test_resolvent_norm_on_negative_axis():
    # a coarse grid separates the lowest symbols; 30 power iterations then converge to 1e-5
    op = assemble(Grid1D(8.0, 16), make_dirichlet_laplacian(2, math.pi))
    r = 0.7
    nrm = resolvent_norm(op, r, np.random.default_rng(0))
    assert nrm == pytest.approx(1.0 / (r + 1.0), rel=1e-5)
    assert nrm < 1.0 / r


def test_dense_and_krylov_resolvent_norms_agree():
    from cylpar import semigroup as sg
    op = assemble(Grid1D(8.0, 16), make_dirichlet_laplacian(1, math.pi), ell2=0.3)
    w = 0.5 + 2.0j
    dense = resolvent_norm(op, w, np.random.default_rng(3))
    limit = sg.DENSE_RESOLVENT_LIMIT
    try:
        sg.DENSE_RESOLVENT_LIMIT = 0
        krylov = resolvent_norm(op, w, np.random.default_rng(3))
    finally:
        sg.DENSE_RESOLVENT_LIMIT = limit
    assert dense == pytest.approx(krylov, rel=1e-9)


def test_sector_estimate_is_stable_under_sampling_refinement():
    op = assemble(Grid1D(16.0, 64), make_dirichlet_laplacian(2, math.pi), ell2=0.1)
    sector = SectorParams(0.0, math.pi / 4)
    coarse = verify_sectorial(op, sector, 60).M_observed
    fine = verify_sectorial(op, sector, 120).M_observed
    assert math.isfinite(coarse)
    assert fine == pytest.approx(coarse, rel=0.05)


def test_exact_semigroup_multiplier():
    g = Grid1D(8.0, 64)
    op = assemble(g, make_bounded(1, 5.0))
    out = semigroup_exact(op, 0.2, constant_mode(g, 1))
    np.testing.assert_allclose(out.coeffs, math.exp(-1.0), rtol=1e-14)


def test_exact_semigroup_at_zero_is_identity(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    assert np.max(np.abs(semigroup_exact(heat, 0.0, u).coeffs - u.coeffs)) <= 1e-13


def test_exact_semigroup_rejects_bad_input(heat, variable, rng):
    u = smooth_random(heat.grid, 3, rng)
    with pytest.raises(ValueError):
        semigroup_exact(heat, -1.0, u)
    with pytest.raises(ValueError):
        semigroup_exact(variable, 0.1, u)


def test_contour_matches_exact_multipliers(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    exact = semigroup_exact(heat, 0.1, u)
    assert rel(semigroup_contour(heat, 0.1, u, ContourSpec(n_c=64)), exact) <= 1e-6


def test_contour_error_shrinks_geometrically(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    exact = semigroup_exact(heat, 0.1, u)
    errs = [rel(semigroup_contour(heat, 0.1, u, ContourSpec(n_c=n)), exact) for n in (16, 32, 64)]
    assert errs[1] < errs[0] / 2 and errs[2] < errs[1] / 2


def test_contour_is_linear(variable, rng):
    u = smooth_random(variable.grid, 3, rng)
    v = smooth_random(variable.grid, 3, rng)
    lhs = semigroup_contour(variable, 0.1, 2.0 * u + (-0.5) * v)
    rhs = 2.0 * semigroup_contour(variable, 0.1, u) + (-0.5) * semigroup_contour(variable, 0.1, v)
    assert rel(lhs, rhs) <= 1e-12


def test_contour_semigroup_law_with_perturbation(variable, rng):
    u = smooth_random(variable.grid, 3, rng)
    twice = semigroup_contour(variable, 0.1, semigroup_contour(variable, 0.1, u))
    assert rel(twice, semigroup_contour(variable, 0.2, u)) <= 1e-6


def test_contour_rejects_bad_input(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    with pytest.raises(ValueError):
        semigroup_contour(heat, 0.0, u)
    with pytest.raises(ContourError):
        semigroup_contour(heat, 0.1, u, ContourSpec(omega=-1000.0))


def test_exact_semigroup_law(heat, rng):
    u = smooth_random(heat.grid, 3, rng)
    composed = semigroup_exact(heat, 0.3, semigroup_exact(heat, 0.2, u))
    assert rel(composed, semigroup_exact(heat, 0.5, u)) <= 1e-13


def test_transverse_and_heat_multipliers_commute(rng):
    g = Grid1D(16.0, 128)
    B = make_dirichlet_laplacian(3, math.pi)
    u = smooth_random(g, 3, rng)
    heat_only = assemble(g, make_bounded(3, 0.0))
    transverse_decay = np.exp(-B.eigenvalues * 0.4)
    one = Field(g, semigroup_exact(heat_only, 0.4, u).coeffs * transverse_decay)
    two = semigroup_exact(heat_only, 0.4, Field(g, u.coeffs * transverse_decay))
    assert rel(one, two) <= 1e-14
    assert rel(one, semigroup_exact(assemble(g, B), 0.4, u)) <= 1e-13


def test_smoothing_bound_constant_is_stable(rng):
    consts = []
    for n_x in (128, 256):
        g = Grid1D(16.0, n_x)
        op = assemble(g, make_dirichlet_laplacian(3, math.pi))
        u = Field(g, rng.standard_normal((n_x, 3)))
        ratios = [t * flat_norm(apply_operator(op, semigroup_exact(op, t, u))) / flat_norm(u)
                  for t in np.logspace(-4, 0, 9)]
        consts.append(max(ratios))
    # sup_s s e^{-s} = 1/e bounds the constant for a self-adjoint positive operator
    assert all(c <= math.exp(-1) + 1e-12 for c in consts)
    assert consts[1] == pytest.approx(consts[0], rel=0.1)


def test_integrated_identity_with_perturbation(rng):
    g = Grid1D(8.0, 32)
    op = assemble(g, make_dirichlet_laplacian(2, math.pi),
                  a=lambda x: 1 + 0.3 * np.sin(2 * np.pi * x / g.L), ell1=0.2)
    u = Field(g, rng.standard_normal((32, 2)))
    t = 0.1
    lhs = apply_operator(op, integrated_semigroup(op, t, u, panels=10, order=6))
    rhs = u - semigroup(op, t, u)
    # the 64-node contour behind each semigroup evaluation limits the defect to about 1e-8
    assert rel(lhs, rhs) <= 1e-7


def test_resolvent_identity(variable, rng):
    u = smooth_random(variable.grid, 3, rng)
    z1, z2 = 1.0 + 2.0j, 3.0 - 1.0j
    lhs = resolvent_apply(variable, z1, u) - resolvent_apply(variable, z2, u)
    rhs = (z2 - z1) * resolvent_apply(variable, z1, resolvent_apply(variable, z2, u))
    assert np.linalg.norm(lhs.coeffs - rhs.coeffs) <= 1e-9 * np.linalg.norm(rhs.coeffs)


def test_intermediate_norm_of_eigenvector():
    g = Grid1D(8.0, 64)
    eta = 5.0
    op = assemble(g, make_bounded(1, eta))
    u = constant_mode(g, 1)
    t_grid = np.logspace(-6, 2, 4000)
    res = intermediate_norm(op, 0.5, u, t_grid)
    base = flat_norm(u)
    assert res.base == pytest.approx(base)
    assert res.sup_term == pytest.approx(base * math.sqrt(eta) * G_STAR_HALF, rel=1e-5)


def test_intermediate_norm_of_zero(heat):
    res = intermediate_norm(heat, 0.5, Field.zeros(heat.grid, 3))
    assert res.value == 0.0


def test_intermediate_norm_slope_for_domain_data(heat):
    u = Field.from_profile(heat.grid, lambda x: np.exp(-x ** 2), 3)
    res = intermediate_norm(heat, 0.5, u)
    assert res.slope == pytest.approx(1.0, abs=0.05)


def test_ul_operator_check_translation_invariance(heat):
    u = constant_mode(heat.grid, 3)
    report = ul_operator_check(heat, u, 1.0)
    assert report.ratio == pytest.approx(1.0, abs=1e-10)


def test_ul_operator_check_locates_bump(heat):
    u = Field.from_profile(heat.grid, lambda x: np.exp(-4 * (x - 2.0) ** 2), 3)
    report = ul_operator_check(heat, u, 1.0)
    assert abs(report.x_theta_center - 2.0) <= 2 * heat.grid.dx


def test_ul_operator_check_zero_power_is_sup_weighted(heat):
    u = Field.from_profile(heat.grid, lambda x: np.exp(-(x - 1.0) ** 2), 3)
    report = ul_operator_check(heat, u, 1.0, theta=0.0)
    assert report.x_theta_norm == pytest.approx(sup_weighted_norm(u, 2.0, 1.0).value, rel=1e-12)
