"""The evolution operator A = -d/dx(a d/dx) + B - L and the semigroup it generates.

Convention used throughout: ``A`` is the positive operator, the flow is
u_t = -A u, the semigroup is exp(-A t) and the resolvent applied by
:func:`resolvent_apply` is (z + A)^{-1}.  The constant-coefficient part
A0 = -abar d^2/dx^2 + B (abar = mean of a) is diagonal in Fourier x modes;
the remainder P = A - A0 collects the variable diffusion and the lower-order
coupling L(u, u_x) = l1 B^{1/2} u + l2 u_x, which enters the equation with a
plus sign and therefore enters A with a minus sign.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from .spaces import Field, Grid1D, flat_norm, ul_norm, weighted_scan, pointwise_norm, NormSpec
from .transverse import TransverseOperator


class EllipticityError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


class NearSpectrumError(RuntimeError):
    pass


class ContourError(ValueError):
    pass


def _samples(value, grid: Grid1D) -> np.ndarray:
    if callable(value):
        return np.asarray(value(grid.x), dtype=float) * np.ones(grid.n_x)
    return np.asarray(value, dtype=float) * np.ones(grid.n_x)


def _full_k(grid: Grid1D) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(grid.n_x, d=grid.dx)


def _dx(arr: np.ndarray, grid: Grid1D) -> np.ndarray:
    """First x-derivative of (possibly complex) samples along axis 0."""
    k = _full_k(grid)
    ik = 1j * k
    if grid.n_x % 2 == 0:
        ik[grid.n_x // 2] = 0.0
    ik = ik.reshape((-1,) + (1,) * (np.ndim(arr) - 1))
    out = np.fft.ifft(np.fft.fft(arr, axis=0) * ik, axis=0)
    return out.real if np.isrealobj(arr) else out


@dataclass(frozen=True)
class EvolutionOperator:
    grid: Grid1D
    B: TransverseOperator
    a: np.ndarray
    ell1: np.ndarray
    ell2: np.ndarray
    m_a: float
    M_a: float
    C_L: float
    abar: float
    symbols: np.ndarray = field(repr=False)   # abar k^2 + lambda_j over full fft order

    @property
    def is_constant(self) -> bool:
        """True when the perturbation P vanishes identically."""
        return bool(np.all(self.a == self.abar) and not np.any(self.ell1) and not np.any(self.ell2))

    @property
    def spectrum_floor(self) -> float:
        return float(self.symbols.min())

    def multiply(self, coeffs: np.ndarray, mult: np.ndarray) -> np.ndarray:
        """Apply a Fourier-x by mode multiplier (shape n_x x M) to coefficients."""
        out = np.fft.ifft(np.fft.fft(coeffs, axis=0) * mult, axis=0)
        if np.isrealobj(coeffs) and np.isrealobj(mult):
            return out.real
        return out

    def apply_A0(self, coeffs: np.ndarray) -> np.ndarray:
        return self.multiply(coeffs, self.symbols)

    def apply_P(self, coeffs: np.ndarray, adjoint: bool = False) -> np.ndarray:
        if self.is_constant:
            return np.zeros_like(coeffs)
        g = self.grid
        dev = (self.a - self.abar)[:, None]
        out = -_dx(dev * _dx(coeffs, g), g)
        sqrt_lam = np.sqrt(self.B.eigenvalues)[None, :]
        out = out - self.ell1[:, None] * sqrt_lam * coeffs
        if adjoint:
            out = out + _dx(self.ell2[:, None] * coeffs, g)
        else:
            out = out - self.ell2[:, None] * _dx(coeffs, g)
        return out

    def apply(self, coeffs: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return self.apply_A0(coeffs) + self.apply_P(coeffs, adjoint)


def assemble(grid: Grid1D, B: TransverseOperator, a=1.0, ell1=0.0, ell2=0.0,
             M_a: float | None = None, C_L: float | None = None) -> EvolutionOperator:
    """Build A with validated coefficient bounds.

    ``a``, ``ell1``, ``ell2`` may be scalars, samples on the grid, or callables
    of x.  When ``M_a`` or ``C_L`` are omitted they are measured.
    """
    a_s = _samples(a, grid)
    l1, l2 = _samples(ell1, grid), _samples(ell2, grid)
    m_a = float(a_s.min())
    if m_a <= 0:
        raise EllipticityError(f"diffusion coefficient must stay positive (min a = {m_a:.6g})")
    bound = a_s + np.abs(_dx(a_s, grid))
    if M_a is None:
        M_a = float(bound.max())
    elif np.any(bound > M_a * (1 + 1e-12)):
        raise HypothesisError(
            f"coefficient bound violated: max(a + |a'|) = {bound.max():.6g} > M_a = {M_a}")
    lbound = np.abs(l1) + np.abs(l2)
    if C_L is None:
        C_L = float(lbound.max())
    elif np.any(lbound > C_L * (1 + 1e-12)):
        raise HypothesisError(
            f"lower-order bound violated: max(|l1| + |l2|) = {lbound.max():.6g} > C_L = {C_L}")
    abar = float(a_s.mean())
    k = _full_k(grid)
    symbols = abar * k[:, None] ** 2 + B.eigenvalues[None, :]
    for arr in (a_s, l1, l2, symbols):
        arr.setflags(write=False)
    return EvolutionOperator(grid, B, a_s, l1, l2, m_a, float(M_a), float(C_L), abar, symbols)


def apply_operator(op: EvolutionOperator, u: Field) -> Field:
    return Field(op.grid, op.apply(u.coeffs))


def _as_field(op: EvolutionOperator, arr: np.ndarray, real: bool) -> Field:
    if real:
        arr = np.real(arr)
    return Field(op.grid, arr)


def resolvent_coeffs(op: EvolutionOperator, z: complex, coeffs: np.ndarray,
                     adjoint: bool = False) -> np.ndarray:
    """(z + A)^{-1} coeffs, or (conj(z) + A*)^{-1} coeffs when ``adjoint``."""
    zz = np.conj(z) if adjoint else z
    denom = zz + op.symbols
    if np.min(np.abs(denom)) < 1e-14 * max(1.0, abs(zz)):
        raise NearSpectrumError(f"z = {z} lies on the spectrum")
    diag_inv = 1.0 / denom
    if op.is_constant:
        return op.multiply(coeffs, diag_inv)

    shape = coeffs.shape
    rhs = np.asarray(coeffs, dtype=complex).ravel()

    def matvec(v):
        v = v.reshape(shape)
        return (zz * v + op.apply(v, adjoint=adjoint)).ravel()

    def precond(v):
        return op.multiply(v.reshape(shape), diag_inv).ravel()

    n = rhs.size
    lin = LinearOperator((n, n), matvec=matvec, dtype=complex)
    pre = LinearOperator((n, n), matvec=precond, dtype=complex)
    scale = np.linalg.norm(rhs)
    if scale == 0:
        return np.zeros(shape, dtype=complex)
    sol = np.zeros(n, dtype=complex)
    # a few refinement sweeps keep the true (unpreconditioned) residual below 1e-10
    for _ in range(4):
        resid = rhs - lin.matvec(sol)
        if np.linalg.norm(resid) <= 1e-10 * scale:
            return sol.reshape(shape)
        corr, info = gmres(lin, resid, rtol=1e-12, atol=0.0, restart=50, maxiter=10, M=pre)
        if info != 0:
            raise NearSpectrumError(f"Krylov solve did not converge in 500 iterations at z = {z}")
        sol = sol + corr
    resid = rhs - lin.matvec(sol)
    if np.linalg.norm(resid) > 1e-10 * scale:
        raise NearSpectrumError(f"resolvent residual stalled at z = {z}")
    return sol.reshape(shape)


def resolvent_apply(op: EvolutionOperator, z: complex, u: Field) -> Field:
    """(z + A)^{-1} u.  Real z with real u yields a real field."""
    out = resolvent_coeffs(op, z, u.coeffs)
    return _as_field(op, out, u.is_real and np.imag(z) == 0)


@dataclass(frozen=True)
class SectorParams:
    omega: float = 0.0
    phi: float = math.pi / 4
    M: float | None = None

    def __post_init__(self):
        if not 0 < self.phi < math.pi / 2:
            raise ValueError("sector angle must lie in (0, pi/2)")

    @property
    def M_declared(self) -> float:
        return self.M if self.M is not None else 4.0 / math.sin(self.phi)


# below this many unknowns a perturbed resolvent is factored densely once per z
DENSE_RESOLVENT_LIMIT = 1024


def _dense_resolvent(op: EvolutionOperator, w: complex):
    """Solvers for (w + A)^{-1} and its adjoint from one LU factorization."""
    shape = (op.grid.n_x, op.B.M)
    n = shape[0] * shape[1]
    if np.min(np.abs(w + op.symbols)) < 1e-14 * max(1.0, abs(w)):
        raise NearSpectrumError(f"z = {w} lies on the spectrum")
    cols = np.empty((n, n), dtype=complex)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols[:, i] = op.apply(e.reshape(shape)).ravel()
    cols[np.diag_indices(n)] += w
    lu = lu_factor(cols)
    return (lambda v: lu_solve(lu, v.ravel()).reshape(shape),
            lambda v: lu_solve(lu, v.ravel(), trans=2).reshape(shape))


def resolvent_norm(op: EvolutionOperator, w: complex, rng: np.random.Generator,
                   iterations: int = 30, restarts: int = 3) -> float:
    """Estimate ||(w + A)^{-1}|| by power iteration on R^H R."""
    shape = (op.grid.n_x, op.B.M)
    if not op.is_constant and shape[0] * shape[1] <= DENSE_RESOLVENT_LIMIT:
        solve, solve_adj = _dense_resolvent(op, w)
    else:
        solve = lambda v: resolvent_coeffs(op, w, v)  # noqa: E731
        solve_adj = lambda v: resolvent_coeffs(op, w, v, adjoint=True)  # noqa: E731
    best = 0.0
    for _ in range(restarts):
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iterations):
            rv = solve(v)
            est = np.linalg.norm(rv)
            v = solve_adj(rv)
            nv = np.linalg.norm(v)
            if nv == 0:
                break
            v /= nv
        best = max(best, float(est))
    return best


@dataclass
class SectorReport:
    M_observed: float
    M_declared: float
    worst_z: complex
    passed: bool
    samples: list = field(default_factory=list)
    failure: str | None = None

    def to_json(self) -> str:
        return json.dumps({
            "M_observed": float(f"{self.M_observed:.17g}"),
            "M_declared": self.M_declared,
            "worst_z": [self.worst_z.real, self.worst_z.imag],
            "passed": bool(self.passed),
            "failure": self.failure,
            "samples": [{"z": [z.real, z.imag], "scaled_norm": v} for z, v in self.samples],
        }, indent=2)


def sector_samples(sector: SectorParams, n_samples: int, r_min: float = 1e-3,
                   r_max: float = 1e4) -> np.ndarray:
    """Points on the rays arg(z - omega) = +-phi and on omega - (0, inf)."""
    per = [n_samples // 3 + (1 if i < n_samples % 3 else 0) for i in range(3)]
    pts = []
    for count, angle in zip(per, (sector.phi, -sector.phi, math.pi)):
        r = np.logspace(math.log10(r_min), math.log10(r_max), count)
        pts.append(sector.omega + r * np.exp(1j * angle))
    return np.concatenate(pts)


def verify_sectorial(op: EvolutionOperator, sector: SectorParams, n_samples: int = 200,
                     seed: int = 0) -> SectorReport:
    """max |z - omega| * ||(z - A)^{-1}|| over samples outside the sector around spec(A)."""
    rng = np.random.default_rng(seed)
    worst, worst_z, samples = 0.0, 0j, []
    for z in sector_samples(sector, n_samples):
        try:
            # (z - A)^{-1} = -(-z + A)^{-1}; only the norm matters
            nrm = resolvent_norm(op, -z, rng)
        except NearSpectrumError as exc:
            return SectorReport(math.inf, sector.M_declared, complex(z), False, samples, str(exc))
        val = abs(z - sector.omega) * nrm
        samples.append((complex(z), float(val)))
        if val > worst:
            worst, worst_z = val, complex(z)
    return SectorReport(worst, sector.M_declared, worst_z, worst <= sector.M_declared, samples)


def _require_constant(op: EvolutionOperator):
    if not op.is_constant:
        raise ValueError("exact exponentiation needs a constant-coefficient operator (P = 0)")


def semigroup_exact(op: EvolutionOperator, t: float, u: Field) -> Field:
    if t < 0:
        raise ValueError("t must be nonnegative")
    _require_constant(op)
    return Field(op.grid, op.multiply(u.coeffs, np.exp(-op.symbols * t)))


@dataclass(frozen=True)
class ContourSpec:
    """Hyperbola z(s) = omega + (mu/t)(1 + sin(i s - angle)), s in [-s_max, s_max].

    The nodes are midpoints of ``n_c`` equal cells; the asymptotes make the
    angle pi/2 + ``angle`` with the positive real axis.
    """

    n_c: int = 64
    angle: float = 1.1721
    mu: float = 4.0
    s_max: float = 4.5
    omega: float = 0.0

    def nodes(self, t: float):
        h = 2.0 * self.s_max / self.n_c
        s = -self.s_max + h * (np.arange(self.n_c) + 0.5)
        m = self.mu / t
        z = self.omega + m * (1.0 + np.sin(1j * s - self.angle))
        dz = 1j * m * np.cos(1j * s - self.angle)
        return z, dz * h / (2j * math.pi)


def _check_contour(op: EvolutionOperator, spec: ContourSpec, t: float):
    if t <= 0:
        raise ValueError("contour representation needs t > 0")
    if not 0 < spec.angle < math.pi / 2:
        raise ContourError("hyperbola angle must lie in (0, pi/2)")
    crossing = spec.omega + spec.mu / t * (1.0 - math.sin(spec.angle))
    if crossing <= -op.spectrum_floor:
        raise ContourError("contour crosses the spectrum of -A")


def semigroup_contour(op: EvolutionOperator, t: float, u: Field,
                      spec: ContourSpec | None = None) -> Field:
    """exp(-A t) u by trapezoid quadrature of the resolvent along a hyperbola."""
    spec = spec or ContourSpec()
    _check_contour(op, spec, t)
    z, w = spec.nodes(t)
    if op.is_constant:
        mult = np.zeros(op.symbols.shape, dtype=complex)
        for zk, wk in zip(z, w):
            mult += wk * np.exp(zk * t) / (zk + op.symbols)
        out = op.multiply(u.coeffs, mult)
    else:
        out = np.zeros(u.coeffs.shape, dtype=complex)
        for zk, wk in zip(z, w):
            out += wk * np.exp(zk * t) * resolvent_coeffs(op, zk, u.coeffs)
    return _as_field(op, out, u.is_real)


def semigroup(op: EvolutionOperator, t: float, u: Field, spec: ContourSpec | None = None) -> Field:
    """Exact multipliers when P = 0, contour quadrature otherwise."""
    if t == 0:
        return u
    if op.is_constant:
        return semigroup_exact(op, t, u)
    return semigroup_contour(op, t, u, spec)


def _graded_gauss(t: float, panels: int, order: int):
    """Gauss-Legendre nodes on panels [t 2^-(i+1), t 2^-i] plus the first panel [0, t 2^-panels]."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([[0.0], t * 2.0 ** -np.arange(panels, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def integrated_semigroup(op: EvolutionOperator, t: float, u: Field, panels: int = 40,
                         order: int = 16) -> Field:
    """int_0^t exp(-A s) u ds by composite Gauss quadrature on geometrically graded panels."""
    s, w = _graded_gauss(t, panels, order)
    if op.is_constant:
        mult = np.zeros(op.symbols.shape)
        for sk, wk in zip(s, w):
            mult += wk * np.exp(-op.symbols * sk)
        return Field(op.grid, op.multiply(u.coeffs, mult))
    acc = np.zeros(u.coeffs.shape)
    for sk, wk in zip(s, w):
        acc = acc + wk * semigroup(op, sk, u).coeffs
    return Field(op.grid, acc)


def default_t_grid(n: int = 48) -> np.ndarray:
    return np.logspace(-6, 2, n)


def _norm_fn(norm, B):
    if callable(norm):
        return norm
    if norm == "l2":
        return lambda f: flat_norm(f, 2.0)
    if norm == "ul":
        return lambda f: ul_norm(f, NormSpec("ul", 2.0))
    if norm == "linf":
        return lambda f: flat_norm(f, math.inf)
    raise ValueError(f"unknown norm {norm!r}")


@dataclass
class IntermediateNorm:
    value: float
    base: float
    sup_term: float
    argmax_t: float
    slope: float
    t_grid: np.ndarray
    distances: np.ndarray


def intermediate_norm(op: EvolutionOperator, theta: float, u: Field, t_grid=None,
                      norm="l2", small_t_decade: float = 10.0) -> IntermediateNorm:
    """||u|| + max_t ||exp(-A t)u - u|| / t^theta over a log grid, plus the small-t slope."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    nf = _norm_fn(norm, op.B)
    dist = np.array([nf(semigroup(op, t, u) - u) for t in t_grid])
    scaled = dist / t_grid ** theta
    i = int(np.argmax(scaled))
    small = t_grid <= t_grid[0] * small_t_decade
    ok = small & (dist > 0)
    slope = float(np.polyfit(np.log(t_grid[ok]), np.log(dist[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    base = nf(u)
    return IntermediateNorm(base + float(scaled[i]), base, float(scaled[i]), float(t_grid[i]),
                            slope, t_grid, dist)


@dataclass
class UlOperatorReport:
    centers: np.ndarray
    constants: np.ndarray
    max_constant: float
    min_constant: float
    ratio: float
    x_theta_norm: float
    x_theta_center: float


def ul_operator_check(op: EvolutionOperator, u: Field, mu: float, centers=None,
                      z: complex = 1.0, theta: float = 0.5, shift: float = 1.0) -> UlOperatorReport:
    """Per-center resolvent constants in L^2_rho and the X_theta sup-weighted norm.

    The fractional power uses the constant-coefficient part A0 only.
    """
    if op.spectrum_floor + shift <= 0:
        raise ValueError("shift too small: A0 + shift is not positive")
    g = op.grid
    ru = resolvent_apply(op, z, u)
    num = weighted_scan(pointwise_norm(ru) ** 2, g, mu, centers)
    den = weighted_scan(pointwise_norm(u) ** 2, g, mu, centers)
    with np.errstate(divide="ignore", invalid="ignore"):
        const = abs(z) * np.sqrt(num / den)
    const = np.where(den > 0, const, np.nan)
    powered = op.multiply(u.coeffs, (op.symbols + shift) ** theta)
    xs = weighted_scan(np.sum(np.abs(powered) ** 2, axis=1), g, mu, centers)
    i = int(np.argmax(xs))
    cx = g.x if centers is None else np.asarray(centers, dtype=float)
    finite = const[np.isfinite(const)]
    return UlOperatorReport(cx, const, float(finite.max()), float(finite.min()),
                            float(finite.max() / finite.min()), float(np.sqrt(xs[i])), float(cx[i]))
