"""Verification suite: oracle comparisons and invariant checks with PASS/FAIL verdicts.

Each check returns a :class:`CheckResult`; ``run_suite`` executes the "fast"
or "full" list.  ``mutations`` injects deliberate faults so that the suite's
ability to localize an error can itself be tested.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.linalg

from .cauchy import Nonlinearity, Scenario, admissible_beta, detect_blowup, picard_probe, rhs, solve
from .energy import (EnergySpec, bistable_potential, coercivity_check, dissipation_ledger,
                     gronwall_audit, longtime_experiment, quadratic_potential, truncated_energy)
from .lab import DEFAULT_NORMS, dichotomy_gate, plateau, refinement_study
from .semigroup import (ContourSpec, SectorParams, assemble, integrated_semigroup,
                        intermediate_norm, semigroup_contour, semigroup_exact, verify_sectorial)
from .spaces import (Field, Grid1D, NormSpec, flat_norm, read_snapshot, sup_weighted_norm,
                     ul_norm, write_snapshot)
from .transverse import make_advective, make_bounded, make_dirichlet_laplacian

MUTATIONS = ("ledger-sign",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    runtime: float
    limit: float | None = None

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _timed(name: str, limit: float | None, fn, *args) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn(*args)
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed > limit:
        passed = False
        detail += f"; runtime {elapsed:.3g}s exceeds {limit:g}s"
    return CheckResult(name, bool(passed), detail, elapsed, limit)


def _random_field(grid: Grid1D, modes: int, rng: np.random.Generator, cutoff: float = 6.0) -> Field:
    """Smooth random field: white noise filtered by exp(-(k/cutoff)^2)."""
    raw = rng.standard_normal((grid.n_x, modes))
    hat = np.fft.rfft(raw, axis=0) * np.exp(-(grid.k / cutoff) ** 2)[:, None]
    return Field(grid, np.fft.irfft(hat, n=grid.n_x, axis=0))


def periodic_second_derivative_matrix(n: int, L: float) -> np.ndarray:
    """Dense Fourier differentiation matrix for d^2/dx^2 on n points over [-L, L)."""
    h = 2 * math.pi / n
    col = np.empty(n)
    col[0] = -math.pi ** 2 / (3 * h ** 2) - 1.0 / 6.0
    j = np.arange(1, n)
    col[1:] = -0.5 * (-1.0) ** j / np.sin(j * h / 2) ** 2
    return scipy.linalg.toeplitz(col) * (math.pi / L) ** 2


# ---------------------------------------------------------------- criteria

def _dense_oracle():
    grid = Grid1D(8.0, 16)
    B = make_dirichlet_laplacian(4, math.pi)
    op = assemble(grid, B)
    gen = -np.kron(periodic_second_derivative_matrix(16, grid.L), np.eye(4)) + \
        np.kron(np.eye(16), np.diag(B.eigenvalues))
    u = _random_field(grid, 4, np.random.default_rng(1), cutoff=1e3)
    worst = 0.0
    for t in (0.01, 0.3, 2.0):
        ref = scipy.linalg.expm(-t * gen) @ u.coeffs.ravel()
        got = semigroup_exact(op, t, u).coeffs.ravel()
        worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    return worst <= 1e-10, f"max relative error {worst:.3e} (tol 1e-10)"


def check_dense_oracle(mutations=()):
    return _timed("semigroup vs dense expm", 1.0, _dense_oracle)


def _contour():
    grid = Grid1D(8.0, 64)
    op = assemble(grid, make_dirichlet_laplacian(4, math.pi))
    u = _random_field(grid, 4, np.random.default_rng(0), cutoff=1e3)
    ref = semigroup_exact(op, 0.1, u).coeffs
    errs = {}
    for n_c in (32, 64, 128):
        got = semigroup_contour(op, 0.1, u, ContourSpec(n_c=n_c)).coeffs
        errs[n_c] = np.linalg.norm(got - ref) / np.linalg.norm(ref)
    ok = errs[64] <= 1e-6 and errs[64] <= errs[32] / 2 and errs[128] <= errs[64] / 2
    return ok, "errors " + ", ".join(f"n_c={k}: {v:.2e}" for k, v in errs.items())


def check_contour(mutations=()):
    return _timed("contour quadrature", 5.0, _contour)


def _sectorial():
    op = assemble(Grid1D(8.0, 64), make_dirichlet_laplacian(4, math.pi))
    rep = verify_sectorial(op, SectorParams(phi=math.pi / 4), 200)
    bound = math.sqrt(2) + 1e-6
    return rep.M_observed <= bound, f"M_observed {rep.M_observed:.10f} (bound {bound:.10f})"


def check_sectorial(mutations=()):
    return _timed("sectorial estimate", 10.0, _sectorial)


def _sandwich(n_fields: int):
    grid = Grid1D(16.0, 512)
    rng = np.random.default_rng(4)
    violations, checked, worst = 0, 0, (math.inf, -math.inf)
    for i in range(n_fields):
        if i % 2:
            u = _random_field(grid, 2, rng, cutoff=rng.uniform(0.5, 20.0))
        else:
            center = rng.uniform(-grid.L, grid.L)
            width = rng.uniform(0.05, 3.0)
            prof = np.exp(-0.5 * ((grid.x - center) / width) ** 2)
            u = Field(grid, prof[:, None] * rng.standard_normal((1, 2)))
        ul = ul_norm(u)
        for mu in (0.5, 1.0, 2.0):
            sw = sup_weighted_norm(u, 2.0, mu)
            lo, hi = sw.c1 * ul, sw.c2 * ul
            checked += 1
            if not (lo <= sw.value * (1 + 1e-12) and sw.value <= hi * (1 + 1e-12)):
                violations += 1
            worst = (min(worst[0], sw.value / lo), max(worst[1], sw.value / hi))
    return violations == 0, (f"{violations} violations in {checked} checks; "
                             f"min value/lower {worst[0]:.4f}, max value/upper {worst[1]:.4f}")


def check_sandwich(mutations=(), n_fields: int = 50):
    return _timed("ul vs sup-weighted sandwich", 30.0, _sandwich, n_fields)


def check_sandwich_small(mutations=()):
    return _timed("ul vs sup-weighted sandwich (10 fields)", 30.0, _sandwich, 10)


def _integrated():
    grid = Grid1D(8.0, 64)
    op = assemble(grid, make_dirichlet_laplacian(4, math.pi))
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        u = _random_field(grid, 4, rng, cutoff=1e3)
        for t in (0.1, 1.0):
            lhs = op.apply(integrated_semigroup(op, t, u).coeffs)
            rhs_ = u.coeffs - semigroup_exact(op, t, u).coeffs
            worst = max(worst, np.linalg.norm(lhs - rhs_) / np.linalg.norm(rhs_))
    return worst <= 1e-8, f"max relative defect {worst:.3e} (tol 1e-8)"


def check_integrated(mutations=()):
    return _timed("integrated semigroup identity", 10.0, _integrated)


def _dichotomy():
    results = [dichotomy_gate(kind, refinement_study(kind, DEFAULT_NORMS[kind]))
               for kind in ("chirp", "mode_blocks", "smooth_control")]
    return all(ok for ok, _ in results), "; ".join(d for _, d in results)


def check_dichotomy(mutations=()):
    return _timed("ill-posedness dichotomy", 180.0, _dichotomy)


def _etd_orders():
    grid = Grid1D(8.0, 16)
    op = assemble(grid, make_bounded(1, 1.0))
    F = Nonlinearity(lambda c: c ** 2, kind="mode_polynomial", degree=2, dealias="none")
    u0 = Field(grid, np.full((16, 1), 0.5))
    exact = 1.0 / (1.0 + math.e)  # u' = -u + u^2, u(0) = 1/2, at t = 1
    dts = 0.1 / 2.0 ** np.arange(6)
    orders, ok = {}, True
    for scheme, target in (("ETD1", 1.0), ("ETD2RK", 2.0)):
        errs = [abs(solve(Scenario(op, F, u0, scheme, dt, 1.0)).final.coeffs[0, 0] - exact)
                for dt in dts]
        orders[scheme] = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
        ok &= abs(orders[scheme] - target) <= 0.1
    return ok, ", ".join(f"{k} order {v:.4f}" for k, v in orders.items())


def check_etd_orders(mutations=()):
    return _timed("ETD convergence orders", 30.0, _etd_orders)


def _picard():
    op = assemble(Grid1D(8.0, 64), make_dirichlet_laplacian(2, math.pi))
    F = Nonlinearity(lambda y, s: np.sin(s), K=1.0, gamma=0.0)
    lams = np.logspace(0, 4, 9)
    f = picard_probe(op, F, lams)
    monotone = bool(np.all(np.diff(f) <= 1e-12 * f[:-1]))
    below = bool(np.any(f[lams < 1e4] <= 0.5))
    return monotone and below, "factors " + ", ".join(f"{v:.3g}" for v in f)


def check_picard(mutations=()):
    return _timed("Picard contraction", 60.0, _picard)


def _exponents():
    w = admissible_beta(0, 2, 3)
    window_ok = w.interval == (Fraction(1, 2), Fraction(1)) and isinstance(w.lower, Fraction)
    gammas = [Fraction(g) for g in ("0", "1", "2", "3", "39/10", "399/100", "4", "41/10", "5", "10")]
    grad_ok = all(admissible_beta(0, g, 3).gradient_ok == (g < 4) for g in gammas)
    return window_ok and grad_ok, f"window {w.interval}; gradient threshold at gamma=4: {grad_ok}"


def check_exponents(mutations=()):
    return _timed("exponent checkers", 1.0, _exponents)


def corridor_setup():
    """Bistable corridor: Dirichlet section of length 4, plateau of height 1/2."""
    grid = Grid1D(32.0, 256)
    B = make_dirichlet_laplacian(4, 4.0)
    op = assemble(grid, B)
    P = bistable_potential()
    u0 = Field.from_profile(grid, lambda x: 0.5 * plateau(x, 0.0, 16.0, 4.0), 4)
    return op, P, u0


def _ledger_gap(op, P, u, mutations) -> float:
    """Relative gap between the ledger total and a centered difference with dt = 1e-4."""
    B, F = op.B, P.nonlinearity()
    dt = 1e-4
    spec = EnergySpec.truncated(0.1, 0.0)
    back = solve(Scenario(op, F, u, "ETD2RK", dt, 2 * dt, snapshot_stride=1)).snapshots
    (_, u0), (_, u1), (_, u2) = back
    fd = (truncated_energy(u2, P, spec, B) - truncated_energy(u0, P, spec, B)) / (2 * dt)
    led = dissipation_ledger(u1, rhs(op, F, u1), P, spec, B)
    if "ledger-sign" in mutations:
        led = replace(led, weight_mass=-led.weight_mass)
    return abs(led.total - fd) / abs(fd)


def _ledger(mutations):
    op, P, u0 = corridor_setup()
    states = solve(Scenario(op, P.nonlinearity(), u0, "ETD2RK", 1e-2, 2.0,
                            snapshot_stride=100)).snapshots
    gaps = [_ledger_gap(op, P, u, mutations) for _, u in states]
    worst = max(gaps)
    return worst <= 1e-4, f"max relative ledger gap {worst:.3e} over {len(gaps)} states (tol 1e-4)"


def check_ledger(mutations=()):
    return _timed("dissipation ledger", 30.0, _ledger, mutations)


def _energy(mutations):
    op, P, u0 = corridor_setup()
    B, F = op.B, P.nonlinearity()
    flat = EnergySpec.formal()
    trunc = EnergySpec.truncated(0.1, 0.0)
    rec = solve(Scenario(op, F, u0, "ETD2RK", 1e-3, 5.0, {
        "flat": lambda u: truncated_energy(u, P, flat, B),
        "truncated": lambda u: truncated_energy(u, P, trunc, B)}))
    E = rec.column("flat")
    rise = float(np.max(np.diff(E)))
    mono = rise <= 1e-6 * abs(E[0])
    gr = gronwall_audit(rec.times, rec.column("truncated"))
    gr_ok = gr.nu_max > 0 and gronwall_audit(rec.times, rec.column("truncated"), gr.nu_max).holds
    led_ok, led_detail = _ledger(mutations)
    detail = (f"max per-step energy change {rise:.3e} (allowed {1e-6 * abs(E[0]):.3e}); "
              f"{led_detail}; Gronwall nu {gr.nu_max:.6g}")
    return mono and led_ok and gr_ok, detail


def check_energy(mutations=()):
    return _timed("energy dissipation", 120.0, _energy, mutations)


def _longtime():
    op, P, u0 = corridor_setup()
    s = Scenario(op, P.nonlinearity(), u0, "ETD2RK", 1e-2, 10.0, record_stride=10,
                 blowup_threshold=1e6)
    rep = longtime_experiment(s, P, mu=0.1)
    return rep.passed, (f"sup on [eps,T] {rep.sup_T:.6f}, on [eps,2T] {rep.sup_2T:.6f}, "
                        f"gap {rep.relative_gap:.3e}, status {rep.status}")


def check_longtime(mutations=()):
    return _timed("long-time boundedness", 300.0, _longtime)


def embedding_ratios(beta_offset: float, alpha: float = 0.0, norm: str = "ul") -> np.ndarray:
    """sup-norm over intermediate-space estimate for Gaussians of width 2^-k, k = 0..6."""
    grid = Grid1D(16.0, 8192)
    B = make_dirichlet_laplacian(2, math.pi)
    op = assemble(grid, B)
    t_grid = np.logspace(-8, 2, 60)
    out = []
    for k in range(7):
        width = 2.0 ** -k
        u = Field.from_profile(grid, lambda x: np.exp(-0.5 * (x / width) ** 2), 2)
        est = intermediate_norm(op, alpha + beta_offset, u, t_grid, norm).value
        out.append(flat_norm(u, math.inf, alpha, B) / est)
    return np.array(out)


def _embedding():
    bounded = embedding_ratios(0.35)
    growing = embedding_ratios(0.15)
    variation = float(bounded.max() / bounded.min())
    monotone = bool(np.all(np.diff(growing) > 0))
    return variation < 2.0 and monotone, (
        f"variation {variation:.4f} at beta=alpha+0.35; growth "
        f"{growing[-1] / growing[0]:.4f} (monotone: {monotone}) at beta=alpha+0.15")


def check_embedding(mutations=()):
    return _timed("embedding exponent probe", 120.0, _embedding)


# ---------------------------------------------------------------- small invariants

def _constant_ul():
    u = Field(Grid1D(8.0, 256), np.ones(256))
    v = ul_norm(u)
    return abs(v - math.sqrt(2)) <= 1e-12, f"ul norm of 1 = {v:.17g}"


def _snapshot_roundtrip():
    grid = Grid1D(8.0, 64)
    u = _random_field(grid, 3, np.random.default_rng(7))
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "u.txt"
        write_snapshot(p, u, 0.25)
        v, t = read_snapshot(p)
    same = np.array_equal(u.coeffs, v.coeffs) and t == 0.25
    return same, "bit-identical" if same else "mismatch"


def _spectra():
    B = make_dirichlet_laplacian(5, 2.0)
    dir_err = float(np.max(np.abs(B.eigenvalues - (np.arange(1, 6) * math.pi / 2.0) ** 2)))
    n, ell = 1024, math.pi
    h = ell / (n + 1)
    adv = make_advective(5, ell, lambda y: np.zeros_like(y), n_points=n)
    discrete = (2 / h ** 2) * (1 - np.cos(np.arange(1, 6) * math.pi * h / ell))
    adv_err = float(np.max(np.abs(adv.eigenvalues - discrete) / discrete))
    return dir_err <= 1e-12 and adv_err <= 1e-10, \
        f"Dirichlet error {dir_err:.2e}; advective W=0 vs discrete closed form {adv_err:.2e}"


def _coercivity():
    # bistable reference: brute-force scan of kappa - delta_min(kappa) on the same
    # 601 samples over [-3, 3]; the optimum 0 is attained for kappa in [1.9701, 2.0301]
    quad = coercivity_check(quadratic_potential(1.5))
    bis = coercivity_check(bistable_potential())
    bad = coercivity_check(quadratic_potential(-1.0), kappa=1e-3, delta=0.0)
    ok = (abs(quad.kappa_fit - 1.5) < 1e-9 and quad.delta_fit < 1e-9 and bis.passed
          and abs(bis.kappa_fit - 2.0301) < 1e-6 and abs(bis.delta_fit - 2.0301) < 1e-6
          and not bad.passed)
    return ok, (f"quadratic ({quad.kappa_fit:.6g}, {quad.delta_fit:.3g}); bistable "
                f"({bis.kappa_fit:.6g}, {bis.delta_fit:.6g}); -u passed={bad.passed}")


def _blowup():
    grid = Grid1D(8.0, 16)
    op = assemble(grid, make_bounded(1, 0.0))
    F = Nonlinearity(lambda c: c ** 2, kind="mode_polynomial", degree=2, dealias="none")
    dt = 1e-4
    rec = solve(Scenario(op, F, Field(grid, np.ones(16)), "ETD2RK", dt, 1.5, blowup_threshold=1e6))
    st = detect_blowup(rec, 1e6)
    ok = st.flagged and abs(st.hitting_time - 1.0) <= 5 * dt
    return ok, f"hitting time {st.hitting_time} for exact blow-up at t=1"


def _simple(name, fn, limit=None):
    return lambda mutations=(): _timed(name, limit, fn)


FAST = [
    _simple("ul norm of a constant", _constant_ul),
    _simple("snapshot round trip", _snapshot_roundtrip),
    _simple("transverse spectra", _spectra),
    _simple("coercivity fits", _coercivity),
    _simple("blow-up detection", _blowup),
    check_exponents,
    check_dense_oracle,
    check_contour,
    check_sectorial,
    check_sandwich_small,
    check_integrated,
    check_picard,
    check_ledger,
]

FULL = [c for c in FAST if c is not check_sandwich_small] + [
    check_sandwich,
    check_etd_orders,
    check_energy,
    check_longtime,
    check_embedding,
    check_dichotomy,
]

SUITES = {"fast": FAST, "full": FULL}


def run_suite(name: str, mutations=(), progress=None) -> list:
    unknown = set(mutations) - set(MUTATIONS)
    if unknown:
        raise ValueError(f"unknown mutation(s) {sorted(unknown)}; known: {list(MUTATIONS)}")
    results = []
    for check in SUITES[name]:
        res = check(mutations=tuple(mutations))
        results.append(res)
        if progress is not None:
            progress(res)
    return results


def format_table(results: list) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  verdict  runtime_s  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.verdict:<7}  {r.runtime:9.3f}  {r.detail}")
    return "\n".join(lines)
