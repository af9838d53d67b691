"""Weighted energies for gradient flows u_t = u_xx - B u - grad V(u).

Potentials act pointwise on the transverse quadrature, exactly like the
nonlinearities of :mod:`cylpar.cauchy`, so F = -grad V holds to rounding on
the discrete level and the energy identity below is exact up to the x-quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .cauchy import Nonlinearity, Scenario, admissible_beta, solve
from .spaces import Field, NormSpec, Weight, spectral_derivative, ul_norm, weighted_scan
from .transverse import TransverseOperator


@dataclass(frozen=True)
class Potential:
    """Pointwise potential density V(y, s) with derivative grad(y, s) = dV/ds."""

    V: Callable
    grad: Callable
    kappa: float = 0.0
    delta: float = 0.0
    alpha: float = 0.0
    gamma: float = 0.0
    C: float = 1.0
    degree: int | None = None

    def nonlinearity(self, dealias: str = "none") -> Nonlinearity:
        grad = self.grad
        return Nonlinearity(lambda y, s: -grad(y, s), alpha=self.alpha, gamma=self.gamma,
                            K=self.C, degree=self.degree, dealias=dealias)

    def primitive_defect(self, s: np.ndarray, y: np.ndarray | float = 0.0, order: int = 20) -> float:
        """max |V(s) - V(0) - int_0^1 grad(tau s) s dtau| over the samples."""
        s = np.asarray(s, dtype=float)
        xg, wg = np.polynomial.legendre.leggauss(order)
        tau, w = 0.5 * (xg + 1.0), 0.5 * wg
        line = sum(wk * self.grad(y, tk * s) * s for tk, wk in zip(tau, w))
        return float(np.max(np.abs(self.V(y, s) - self.V(y, 0.0 * s) - line)))


def quadratic_potential(kappa: float) -> Potential:
    return Potential(lambda y, s: 0.5 * kappa * s ** 2, lambda y, s: kappa * s,
                     kappa=kappa, delta=0.0, C=kappa, degree=1)


def bistable_potential() -> Potential:
    """V = s^4/4 - s^2/2, so -grad V = s - s^3."""
    return Potential(lambda y, s: 0.25 * s ** 4 - 0.5 * s ** 2, lambda y, s: s ** 3 - s,
                     kappa=2.0, delta=2.0, gamma=2.0, C=1.0, degree=3)


def damped_sine_potential(damping: float = 1.0, amplitude: float = 0.5) -> Potential:
    """V = damping s^2/2 + amplitude (cos s - 1), so -grad V = amplitude sin s - damping s."""
    return Potential(lambda y, s: 0.5 * damping * s ** 2 + amplitude * (np.cos(s) - 1.0),
                     lambda y, s: damping * s - amplitude * np.sin(s),
                     kappa=damping - abs(amplitude), delta=0.0,
                     C=damping + abs(amplitude), degree=None)


def potential_density(u: Field, P: Potential | None, B: TransverseOperator) -> np.ndarray:
    if P is None:
        return np.zeros(u.grid.n_x)
    basis = B.quadrature()
    vals = basis.synthesize(u.coeffs)
    return (P.V(basis.nodes[None, :], vals) * basis.weights).sum(axis=1)


def _pairing_with_grad(u: Field, P: Potential | None, B: TransverseOperator) -> np.ndarray:
    if P is None:
        return np.zeros(u.grid.n_x)
    basis = B.quadrature()
    vals = basis.synthesize(u.coeffs)
    return (vals * P.grad(basis.nodes[None, :], vals) * basis.weights).sum(axis=1)


@dataclass(frozen=True)
class EnergySpec:
    weight: Weight | None = None
    gradient: bool = True
    transverse: bool = True
    mass: bool = True
    potential: bool = True

    @classmethod
    def truncated(cls, mu: float = 0.1, center: float = 0.0) -> "EnergySpec":
        return cls(Weight(mu, center))

    @classmethod
    def formal(cls) -> "EnergySpec":
        """Flat energy without the 1/2|u|^2 term: the natural Lyapunov functional."""
        return cls(None, mass=False)


def energy_density(u: Field, P: Potential | None, spec: EnergySpec,
                   B: TransverseOperator) -> np.ndarray:
    c = u.coeffs
    dens = np.zeros(u.grid.n_x)
    if spec.gradient:
        dens += 0.5 * np.sum(spectral_derivative(c, u.grid) ** 2, axis=1)
    if spec.mass:
        dens += 0.5 * np.sum(c ** 2, axis=1)
    if spec.transverse:
        dens += 0.5 * np.sum(B.eigenvalues[None, :] * c ** 2, axis=1)
    if spec.potential:
        dens += potential_density(u, P, B)
    return dens


def truncated_energy(u: Field, P: Potential | None, spec: EnergySpec,
                     B: TransverseOperator) -> float:
    dens = energy_density(u, P, spec, B)
    rho = 1.0 if spec.weight is None else spec.weight.values(u.grid)
    return float(u.grid.dx * np.sum(rho * dens))


def sliding_energy(u: Field, P: Potential | None, mu: float, B: TransverseOperator,
                   centers=None) -> np.ndarray:
    """E_{mu, x#}(u) for every center (grid nodes by default)."""
    dens = energy_density(u, P, EnergySpec(Weight(mu)), B)
    return weighted_scan(dens, u.grid, mu, centers)


@dataclass(frozen=True)
class Ledger:
    time_derivative: float
    weight_time: float
    gradient: float
    transverse: float
    weight_mass: float
    potential: float

    TERMS = ("time_derivative", "weight_time", "gradient", "transverse", "weight_mass", "potential")

    @property
    def total(self) -> float:
        return sum(getattr(self, t) for t in self.TERMS)

    def as_dict(self) -> dict:
        d = {t: getattr(self, t) for t in self.TERMS}
        d["total"] = self.total
        return d


def dissipation_ledger(u: Field, u_t: Field, P: Potential | None, spec: EnergySpec,
                       B: TransverseOperator) -> Ledger:
    """Term-by-term time derivative of the truncated energy along u_t = u_xx - Bu - grad V(u).

    The six terms are -int rho|u_t|^2, -int rho' u_x.u_t, -int rho|u_x|^2,
    -int rho|B^{1/2}u|^2, -int rho' u_x.u and -int rho <u, grad V(u)>.
    """
    if u.grid != u_t.grid or u.modes != u_t.modes:
        raise ValueError("u and u_t live on different grids")
    if not (spec.gradient and spec.mass and spec.transverse and spec.potential):
        raise ValueError("the ledger describes the full truncated energy")
    g = u.grid
    if spec.weight is None:
        rho, drho = np.ones(g.n_x), np.zeros(g.n_x)
    else:
        rho, drho = spec.weight.values(g), spec.weight.derivative(g)
    c, ct = u.coeffs, u_t.coeffs
    cx = spectral_derivative(c, g)

    def integ(vals):
        return float(g.dx * np.sum(vals))

    return Ledger(
        time_derivative=-integ(rho * np.sum(ct ** 2, axis=1)),
        weight_time=-integ(drho * np.sum(cx * ct, axis=1)),
        gradient=-integ(rho * np.sum(cx ** 2, axis=1)),
        transverse=-integ(rho * np.sum(B.eigenvalues[None, :] * c ** 2, axis=1)),
        weight_mass=-integ(drho * np.sum(cx * c, axis=1)),
        potential=-integ(rho * _pairing_with_grad(u, P, B)),
    )


@dataclass
class GronwallReport:
    nu: float | None
    holds: bool | None
    nu_max: float
    worst_margin: float


def _gronwall_holds(t, E, nu, rtol=1e-12) -> tuple[bool, float]:
    bound = np.exp(-nu * t) * E[0] + 1.0 / nu ** 2
    margin = float(np.min(bound - E))
    return bool(np.all(E <= bound + rtol * np.maximum(np.abs(bound), 1.0))), margin


def gronwall_audit(times, energies, nu: float | None = None, steps: int = 40,
                   nu_cap: float = 1e6) -> GronwallReport:
    """Check E(t) <= exp(-nu t) E(0) + 1/nu^2 and bisect for the largest such nu."""
    t = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    if t.size == 0:
        raise ValueError("empty energy series")
    holds, margin = (None, math.nan)
    if nu is not None:
        if nu <= 0:
            raise ValueError("nu must be positive")
        holds, margin = _gronwall_holds(t, E, nu)
    lo = 1e-12
    hi = 1.0
    while _gronwall_holds(t, E, hi)[0] and hi < nu_cap:
        lo, hi = hi, 2.0 * hi
    if _gronwall_holds(t, E, hi)[0]:
        nu_max = hi
    else:
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            if _gronwall_holds(t, E, mid)[0]:
                lo = mid
            else:
                hi = mid
        nu_max = lo
    return GronwallReport(nu, holds, nu_max, margin)


@dataclass
class CoercivityReport:
    kappa_fit: float
    delta_fit: float
    declared_ok: bool | None
    passed: bool


def coercivity_check(P: Potential, amplitudes=None, y=0.0, kappa: float | None = None,
                     delta: float | None = None) -> CoercivityReport:
    """Sample test of <grad V(s), s> >= kappa s^2 - delta |s| and an LP fit of (kappa, delta).

    The fit maximizes kappa - delta subject to every sample constraint.
    """
    s = np.linspace(-3.0, 3.0, 601) if amplitudes is None else np.asarray(amplitudes, float)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    S, Y = np.meshgrid(s, ys, indexing="ij")
    lhs = (P.grad(Y, S) * S).ravel()
    s2, sa = (S ** 2).ravel(), np.abs(S).ravel()
    kappa = P.kappa if kappa is None else kappa
    delta = P.delta if delta is None else delta
    declared_ok = bool(kappa > 0 and np.all(lhs >= kappa * s2 - delta * sa - 1e-12))
    A_ub = np.column_stack([s2, -sa])
    bounds = [(0.0, 1e6), (0.0, 1e6)]
    res = linprog(c=[-1.0, 1.0], A_ub=A_ub, b_ub=lhs, bounds=bounds, method="highs")
    if res.success:
        # the objective can be flat along a ray; break the tie toward the largest kappa
        best = -res.fun
        tie = linprog(c=[-1.0, 0.0], A_ub=np.vstack([A_ub, [-1.0, 1.0]]),
                      b_ub=np.append(lhs, -best + 1e-12 * max(1.0, abs(best))),
                      bounds=bounds, method="highs")
        res = tie if tie.success else res
    k_fit, d_fit = (float(res.x[0]), float(res.x[1])) if res.success else (0.0, math.inf)
    passed = declared_ok or (k_fit > 1e-8)
    return CoercivityReport(k_fit, d_fit, declared_ok, passed)


def h2_db_ul_norm(u: Field, B: TransverseOperator) -> float:
    """Discrete H^2 and D(B) uniformly local norm."""
    return ul_norm(u, NormSpec("sobolev_ul", 2.0, 2)) + ul_norm(u, NormSpec("ul", 2.0, 0, 1.0), B)


def h1_dbhalf_ul_norm(u: Field, B: TransverseOperator) -> float:
    return ul_norm(u, NormSpec("sobolev_ul", 2.0, 1)) + ul_norm(u, NormSpec("ul", 2.0, 0, 0.5), B)


@dataclass
class LongtimeReport:
    sup_T: float
    sup_2T: float
    relative_gap: float
    passed: bool
    status: str
    m_E: float | None
    R1: float | None
    times: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    sliding_energy_max: np.ndarray = field(repr=False)


def longtime_experiment(s: Scenario, P: Potential | None = None, mu: float = 0.1,
                        eps: float | None = None, R1: float | None = None,
                        tol: float = 0.02) -> LongtimeReport:
    """Run to 2T and compare sup_{[eps,T]} and sup_{[eps,2T]} of the H^2 and D(B) ul norm."""
    if s.F is not None and not admissible_beta(s.F.alpha, s.F.gamma, 1).gradient_ok:
        raise ValueError("exponents fail the gradient-structure condition")
    B = s.op.B
    T = s.T
    eps = s.dt if eps is None else eps
    diags = dict(s.diagnostics)
    diags["h2_db_ul"] = lambda u: h2_db_ul_norm(u, B)
    diags["h1_dbhalf_ul"] = lambda u: h1_dbhalf_ul_norm(u, B)
    diags["sliding_energy_max"] = lambda u: float(np.max(sliding_energy(u, P, mu, B)))
    run = Scenario(s.op, s.F, s.u0, s.scheme, s.dt, 2 * T, diags, s.record_stride,
                   None, s.blowup_threshold, s.blowup_norm)
    rec = solve(run)
    t = np.asarray(rec.times)
    norms = rec.column("h2_db_ul")
    h1 = rec.column("h1_dbhalf_ul")
    emax = rec.column("sliding_energy_max")
    early = (t >= eps) & (t <= T + 1e-12)
    late = t >= eps
    sup_T, sup_2T = float(norms[early].max()), float(norms[late].max())
    gap = abs(sup_2T - sup_T) / sup_T
    ok = rec.status == "completed" and gap <= tol and (R1 is None or sup_2T <= R1)
    over = h1 > 1
    m_E = float(np.min(emax[over] / (h1[over] - 1))) if over.any() else None
    return LongtimeReport(sup_T, sup_2T, gap, ok, rec.status, m_E, R1, t, norms, emax)


@dataclass
class WindowConvergence:
    times: np.ndarray
    consecutive: np.ndarray
    modulus: np.ndarray
    converged: bool
    profile: np.ndarray | None


def window_distance(u: Field, v: Field, window: tuple, beta: float, B: TransverseOperator) -> float:
    g = u.grid
    mask = (g.x >= window[0]) & (g.x <= window[1])
    diff = (u - v).coeffs[mask] * B.norm_scale(beta)[None, :]
    vals = np.sum(diff ** 2, axis=1)
    if vals.size < 2:
        return float(np.sqrt(g.dx * vals.sum()))
    return float(np.sqrt(g.dx * (vals.sum() - 0.5 * (vals[0] + vals[-1]))))


def window_convergence(snapshots: list, window: tuple, beta: float, B: TransverseOperator,
                       tol: float = 1e-6) -> WindowConvergence:
    """Cauchy modulus of late snapshots in L^2(window, D(B^beta))."""
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots")
    times = np.array([t for t, _ in snapshots])
    fields = [u for _, u in snapshots]
    n = len(fields)
    consecutive = np.array([window_distance(fields[i], fields[i + 1], window, beta, B)
                            for i in range(n - 1)])
    modulus = np.array([max(window_distance(fields[i], fields[j], window, beta, B)
                            for j in range(i + 1, n)) for i in range(n - 1)])
    converged = bool(modulus[-1] < tol)
    g = fields[-1].grid
    mask = (g.x >= window[0]) & (g.x <= window[1])
    profile = fields[-1].coeffs[mask].copy() if converged else None
    return WindowConvergence(times, consecutive, modulus, converged, profile)
