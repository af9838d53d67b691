"""Mild-solution time stepping for u_t = -A u + F(u) and related probes.

The exactly exponentiable part A0 is integrated with exponential time
differencing; the perturbation P and the nonlinearity sit in the explicit
slot N(u) = F(u) - P u.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .semigroup import EvolutionOperator, intermediate_norm
from .spaces import Field, flat_norm, ul_norm, write_snapshot
from .transverse import TransverseOperator

SCHEMES = ("ETD1", "ETD2RK", "Picard")


class NonFiniteStateError(ArithmeticError):
    pass


def _fourier_pad(c: np.ndarray, n_big: int) -> np.ndarray:
    n = c.shape[0]
    hat = np.fft.fft(c, axis=0)
    big = np.zeros((n_big,) + c.shape[1:], dtype=complex)
    half = n // 2
    big[:half] = hat[:half]
    big[n_big - half + 1:] = hat[half + 1:]
    # split the Nyquist coefficient so the padded signal stays real
    big[half] = 0.5 * hat[half]
    big[n_big - half] = 0.5 * hat[half]
    return np.fft.ifft(big, axis=0).real * (n_big / n)


def _fourier_unpad(c_big: np.ndarray, n: int) -> np.ndarray:
    n_big = c_big.shape[0]
    hat = np.fft.fft(c_big, axis=0)
    small = np.zeros((n,) + c_big.shape[1:], dtype=complex)
    half = n // 2
    small[:half] = hat[:half]
    small[half + 1:] = hat[n_big - half + 1:]
    small[half] = hat[half] + hat[n_big - half]
    return np.fft.ifft(small, axis=0).real * (n / n_big)


def _two_thirds_filter(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    hat = np.fft.fft(c, axis=0)
    idx = np.abs(np.fft.fftfreq(n) * n)
    hat[idx > n / 3.0] = 0.0
    return np.fft.ifft(hat, axis=0).real


@dataclass(frozen=True)
class Nonlinearity:
    """F(u) given either pointwise on the transverse quadrature or on mode coefficients.

    For ``nemytskii_pointwise`` the rule is f(y, s) with y the quadrature nodes
    (shape (1, Q)) and s the synthesized values (shape (n_x, Q)).  For
    ``mode_polynomial`` the rule maps the coefficient array to itself.
    ``alpha``, ``gamma`` and ``K`` record the transverse regularity needed,
    the growth exponent and the Lipschitz/growth constant.
    """

    rule: Callable
    kind: str = "nemytskii_pointwise"
    alpha: float = 0.0
    gamma: float = 0.0
    K: float = 1.0
    degree: int | None = None
    dealias: str = "auto"

    def __post_init__(self):
        if self.kind not in ("nemytskii_pointwise", "mode_polynomial"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.dealias not in ("auto", "none", "two_thirds", "pad2"):
            raise ValueError(f"unknown dealiasing rule {self.dealias!r}")

    @property
    def dealias_rule(self) -> str:
        if self.dealias != "auto":
            return self.dealias
        if self.degree is None or self.degree <= 1:
            return "none"
        return "two_thirds" if self.degree <= 3 else "pad2"

    def _pointwise(self, c: np.ndarray, B: TransverseOperator) -> np.ndarray:
        if self.kind == "mode_polynomial":
            return np.asarray(self.rule(c), dtype=float)
        basis = B.quadrature()
        vals = basis.synthesize(c)
        return basis.project(np.asarray(self.rule(basis.nodes[None, :], vals), dtype=float))

    def evaluate(self, c: np.ndarray, B: TransverseOperator) -> np.ndarray:
        rule = self.dealias_rule
        if rule == "pad2":
            n = c.shape[0]
            return _fourier_unpad(self._pointwise(_fourier_pad(c, 2 * n), B), n)
        out = self._pointwise(c, B)
        if rule == "two_thirds":
            out = _two_thirds_filter(out)
        return out

    def __call__(self, u: Field, B: TransverseOperator) -> Field:
        return Field(u.grid, self.evaluate(u.coeffs, B))


def zero_nonlinearity() -> Nonlinearity:
    return Nonlinearity(lambda c: np.zeros_like(c), kind="mode_polynomial", K=0.0)


def _phi1(z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 0.5 + zs / 6 + zs ** 2 / 24 + zs ** 3 / 120 + zs ** 4 / 720
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / zb ** 2
    return out


class Stepper:
    """Precomputed ETD multipliers for one operator and step size."""

    def __init__(self, op: EvolutionOperator, F: Nonlinearity | None, dt: float, scheme: str):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if scheme not in ("ETD1", "ETD2RK"):
            raise ValueError(f"step supports ETD1 and ETD2RK, got {scheme!r}")
        self.op, self.F, self.dt, self.scheme = op, F, dt, scheme
        z = -op.symbols * dt
        self.decay = np.exp(z)
        self.phi1 = dt * _phi1(z)
        self.phi2 = dt * _phi2(z) if scheme == "ETD2RK" else None
        if not op.is_constant:
            spread = float(np.max(np.abs(op.a - op.abar)))
            if spread > 0 and dt > 0.5 * op.grid.dx ** 2 / spread:
                warnings.warn(f"dt={dt} exceeds the explicit limit 0.5*dx^2/max|a-abar| "
                              f"= {0.5 * op.grid.dx ** 2 / spread:.3g}", RuntimeWarning)

    def explicit(self, c: np.ndarray) -> np.ndarray:
        out = -self.op.apply_P(c)
        if self.F is not None:
            out = out + self.F.evaluate(c, self.op.B)
        return out

    def __call__(self, c: np.ndarray) -> np.ndarray:
        op = self.op
        n0 = self.explicit(c)
        a = op.multiply(c, self.decay) + op.multiply(n0, self.phi1)
        if self.scheme == "ETD1":
            out = a
        else:
            out = a + op.multiply(self.explicit(a) - n0, self.phi2)
        if not np.all(np.isfinite(out)):
            raise NonFiniteStateError("state became non-finite")
        return out


def step(state: Field, dt: float, scheme: str, op: EvolutionOperator,
         F: Nonlinearity | None = None) -> Field:
    return Field(state.grid, Stepper(op, F, dt, scheme)(state.coeffs))


def rhs(op: EvolutionOperator, F: Nonlinearity | None, u: Field) -> Field:
    """u_t = -A u + F(u) evaluated spectrally."""
    out = -op.apply(u.coeffs)
    if F is not None:
        out = out + F.evaluate(u.coeffs, op.B)
    return Field(u.grid, out)


def sup_norm(u: Field) -> float:
    return flat_norm(u, math.inf)


@dataclass
class Scenario:
    op: EvolutionOperator
    F: Nonlinearity | None
    u0: Field
    scheme: str = "ETD2RK"
    dt: float = 1e-2
    T: float = 1.0
    diagnostics: dict = field(default_factory=dict)
    record_stride: int = 1
    snapshot_stride: int | None = None
    blowup_threshold: float | None = None
    blowup_norm: Callable = sup_norm
    picard_iterations: int = 5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.u0.grid != self.op.grid or self.u0.modes != self.op.B.M:
            raise ValueError("initial data does not match the operator grid")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class TrajectoryRecord:
    times: list
    diagnostics: dict
    snapshots: list
    status: str = "completed"
    message: str = ""
    hitting_time: float | None = None
    first_step_distance: dict = field(default_factory=dict)
    final: Field | None = None

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.diagnostics[name], dtype=float)

    def to_csv(self, path) -> None:
        names = list(self.diagnostics)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + names)
            for i, t in enumerate(self.times):
                w.writerow([f"{t:.17g}"] + [f"{self.diagnostics[n][i]:.17g}" for n in names])

    def write_snapshots(self, directory, stem: str = "snapshot") -> list:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, (t, u) in enumerate(self.snapshots):
            p = d / f"{stem}_{i:05d}.txt"
            write_snapshot(p, u, t)
            paths.append(p)
        return paths

    def summary(self) -> dict:
        return {
            "status": self.status,
            "message": self.message,
            "hitting_time": self.hitting_time,
            "final_time": self.times[-1] if self.times else None,
            "steps_recorded": len(self.times),
            "first_step_distance": self.first_step_distance,
        }

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def _record(rec: TrajectoryRecord, s: Scenario, t: float, u: Field, bnorm: float):
    rec.times.append(t)
    rec.diagnostics["blowup_norm"].append(bnorm)
    for name, fn in s.diagnostics.items():
        rec.diagnostics[name].append(float(fn(u)))


def solve(s: Scenario) -> TrajectoryRecord:
    """Step to the horizon, recording diagnostics; blow-up ends the run with status 'blowup'."""
    rec = TrajectoryRecord([], {"blowup_norm": [], **{k: [] for k in s.diagnostics}}, [])
    u = s.u0
    _record(rec, s, 0.0, u, s.blowup_norm(u))
    if s.snapshot_stride:
        rec.snapshots.append((0.0, u))
    if s.scheme == "Picard":
        return _picard_solve(s, rec)
    stepper = Stepper(s.op, s.F, s.dt, s.scheme)
    c = u.coeffs
    for n in range(1, s.n_steps + 1):
        t = n * s.dt
        try:
            c = stepper(c)
        except NonFiniteStateError as exc:
            rec.status, rec.message = "error", f"{exc} at t={t:.17g}"
            break
        u = Field(s.op.grid, c)
        if n == 1:
            rec.first_step_distance = {"t1": t, "l2": flat_norm(u - s.u0),
                                       "ul": ul_norm(u - s.u0)}
        bnorm = s.blowup_norm(u)
        if (n % s.record_stride == 0) or n == s.n_steps or \
                (s.blowup_threshold is not None and bnorm >= s.blowup_threshold):
            _record(rec, s, t, u, bnorm)
        if s.snapshot_stride and n % s.snapshot_stride == 0:
            rec.snapshots.append((t, u))
        if s.blowup_threshold is not None and not bnorm < s.blowup_threshold:
            rec.status, rec.hitting_time = "blowup", t
            rec.message = f"norm {bnorm:.6g} reached threshold {s.blowup_threshold:.6g}"
            break
    rec.final = u
    return rec


def duhamel_sweep(op: EvolutionOperator, dt: float, n_steps: int, start: np.ndarray,
                  forcing: list) -> list:
    """States of x_{n+1} = e^{-A0 dt} x_n + dt phi1 (forcing_n - P x_n), x_0 = start.

    This is the left-endpoint product quadrature of the Duhamel integral.
    """
    stepper = Stepper(op, None, dt, "ETD1")
    out = [start]
    x = start
    for n in range(n_steps):
        x = op.multiply(x, stepper.decay) + op.multiply(forcing[n] - op.apply_P(x), stepper.phi1)
        out.append(x)
    return out


def _picard_solve(s: Scenario, rec: TrajectoryRecord) -> TrajectoryRecord:
    n = s.n_steps
    F = s.F or zero_nonlinearity()
    traj = [s.u0.coeffs] * (n + 1)
    for _ in range(s.picard_iterations):
        forcing = [F.evaluate(c, s.op.B) for c in traj[:-1]]
        traj = duhamel_sweep(s.op, s.dt, n, s.u0.coeffs, forcing)
    for i in range(1, n + 1):
        u = Field(s.op.grid, traj[i])
        if i == 1:
            rec.first_step_distance = {"t1": s.dt, "l2": flat_norm(u - s.u0),
                                       "ul": ul_norm(u - s.u0)}
        if i % s.record_stride == 0 or i == n:
            _record(rec, s, i * s.dt, u, s.blowup_norm(u))
        if s.snapshot_stride and i % s.snapshot_stride == 0:
            rec.snapshots.append((i * s.dt, u))
    rec.final = Field(s.op.grid, traj[-1])
    return rec


def _smooth_random(op: EvolutionOperator, rng: np.random.Generator, cutoff: float = 4.0) -> np.ndarray:
    g = op.grid
    raw = rng.standard_normal((g.n_x, op.B.M))
    k = 2 * np.pi * np.fft.fftfreq(g.n_x, d=g.dx)
    return op.multiply(raw, np.exp(-(k / cutoff) ** 2)[:, None] * np.ones((1, op.B.M)))


def picard_probe(op: EvolutionOperator, F: Nonlinearity, lam, horizon: float = 1.0,
                 theta: float = 0.5, dt: float | None = None, seed: int = 0,
                 t_grid=None):
    """Measured contraction factor of the Duhamel map in the lambda-weighted sup norm.

    Two trajectories x and x + delta (delta fixed in time) are pushed through
    the map; the factor is ||psi(x) - psi(x + delta)||_lambda / ||delta||_lambda
    with ||y||_lambda = max_n exp(-lambda t_n) N(y(t_n)) and N the
    intermediate-space estimate of order theta.  ``lam`` may be a scalar or a
    sequence; the norms are computed once and reused across the ladder.
    """
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lams <= 0):
        raise ValueError("lambda must be positive")
    if F.gamma != 0:
        raise ValueError("the Picard probe expects a globally Lipschitz nonlinearity (gamma = 0)")
    dt = dt or horizon / 200
    n = int(round(horizon / dt))
    rng = np.random.default_rng(seed)
    xs = [_smooth_random(op, rng) for _ in range(n)]
    delta = _smooth_random(op, rng)
    forcing = [F.evaluate(x, op.B) - F.evaluate(x + delta, op.B) for x in xs]
    diffs = duhamel_sweep(op, dt, n, np.zeros_like(delta), forcing)
    t_grid = np.logspace(-6, 2, 40) if t_grid is None else t_grid

    def est(c):
        if not np.any(c):
            return 0.0
        return intermediate_norm(op, theta, Field(op.grid, c), t_grid).value

    num_norms = np.array([est(c) for c in diffs])
    den = est(delta)
    times = dt * np.arange(n + 1)
    factors = np.array([np.max(np.exp(-l * times) * num_norms) / den for l in lams])
    return factors if np.ndim(lam) else float(factors[0])


@dataclass(frozen=True)
class BetaWindow:
    lower: Fraction
    upper: Fraction
    cauchy_ok: bool
    gradient_ok: bool
    sub_window: tuple

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    @property
    def interval(self):
        return (self.lower, self.upper) if self.nonempty else None


def _frac(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(str(v))
    return Fraction(v)


def admissible_beta(alpha, gamma, d: int) -> BetaWindow:
    """Exponent window (alpha + (d/4) gamma/(1+gamma), 1) in exact rationals.

    gradient_ok tests alpha + (d/4 + 1/2) gamma/(1+gamma) < 1; the sub-window
    (1/2, (1 + gamma/2)/(1 + gamma)) keeps (1+gamma)(2 beta - 1) below 1.
    """
    a, g = _frac(alpha), _frac(gamma)
    if not (0 <= a < 1):
        raise ValueError("alpha must lie in [0, 1)")
    if g < 0:
        raise ValueError("gamma must be nonnegative")
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    ratio = g / (1 + g)
    lower = a + Fraction(d, 4) * ratio
    grad = a + (Fraction(d, 4) + Fraction(1, 2)) * ratio
    sub = (Fraction(1, 2), (1 + g / 2) / (1 + g))
    return BetaWindow(lower, Fraction(1), lower < 1, grad < 1, sub)


@dataclass(frozen=True)
class BlowupStatus:
    flagged: bool
    hitting_time: float | None
    value: float | None


def detect_blowup(traj: TrajectoryRecord, threshold: float, column: str = "blowup_norm",
                  window: tuple | None = None) -> BlowupStatus:
    """First recorded time at which the chosen norm reaches ``threshold`` or is non-finite."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    times = np.asarray(traj.times)
    vals = traj.column(column)
    mask = np.ones_like(times, dtype=bool)
    if window is not None:
        mask = (times >= window[0]) & (times <= window[1])
    hit = mask & ~(vals < threshold)
    if traj.status == "error" and not hit.any():
        return BlowupStatus(True, float(times[-1]), math.inf)
    if hit.any():
        i = int(np.argmax(hit))
        return BlowupStatus(True, float(times[i]), float(vals[i]))
    return BlowupStatus(False, None, None)


def da_estimate_diagnostic(op: EvolutionOperator, beta: float, norm="l2", t_grid=None):
    """Diagnostic callable returning the intermediate-space estimate of order beta."""
    t_grid = np.logspace(-6, 2, 40) if t_grid is None else t_grid
    return lambda u: intermediate_norm(op, beta, u, t_grid, norm).value
