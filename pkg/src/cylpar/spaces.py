"""Grids, fields, sliding weights and uniformly local norms.

The longitudinal variable lives on a periodic interval [-L, L) sampled at
``n_x`` nodes; the transverse variable is carried by ``M`` mode coefficients,
so a field is an ``n_x x M`` array.  All window integrals use the trapezoid
rule with window endpoints snapped to grid nodes (never beyond radius 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _kernels

if TYPE_CHECKING:
    from .transverse import TransverseOperator

WINDOW_RADIUS = 1.0
LAMBDA_FLOOR = 1e-12
LATTICE_CUTOFF = 1e-15


class DomainTooSmallError(ValueError):
    pass


class MissingOperatorError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class ShiftNotCommensurateError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-L, L) with ``n_x`` nodes."""

    L: float
    n_x: int

    def __post_init__(self):
        if self.L < 8:
            raise ValueError(f"L_domain must be >= 8, got {self.L}")
        if self.n_x < 2 or self.n_x & (self.n_x - 1):
            raise ValueError(f"n_x must be a power of two, got {self.n_x}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n_x

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n_x)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers matching ``np.fft.rfft`` ordering."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_x, d=self.dx)

    @property
    def window_half(self) -> int:
        """Number of nodes on each side of a window center (radius 1, snapped inward)."""
        return int(math.floor(WINDOW_RADIUS / self.dx + 1e-9))

    def periodic_offset(self, center: float) -> np.ndarray:
        """Signed offset x - center wrapped into [-L, L)."""
        span = 2.0 * self.L
        return (self.x - center + self.L) % span - self.L

    def steps_for_shift(self, xi: float) -> int:
        steps = xi / self.dx
        nearest = round(steps)
        if abs(steps - nearest) > 1e-9 * max(1.0, abs(steps)):
            raise ShiftNotCommensurateError(
                f"shift {xi} is not an integer multiple of dx={self.dx}")
        return int(nearest)


def spectral_derivative(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    """x-derivative of periodic samples along axis 0 (Fourier differentiation)."""
    if order == 0:
        return np.array(values, copy=True)
    hat = np.fft.rfft(values, axis=0)
    mult = (1j * grid.k) ** order
    if order % 2 == 1 and grid.n_x % 2 == 0:
        mult[-1] = 0.0  # Nyquist mode has no real odd derivative
    shape = (-1,) + (1,) * (np.ndim(values) - 1)
    out = np.fft.irfft(hat * mult.reshape(shape), n=grid.n_x, axis=0)
    return out


class Field:
    """Immutable field u(x_k) = sum_j coeffs[k, j] e_j on a grid."""

    __slots__ = ("grid", "_coeffs")

    def __init__(self, grid: Grid1D, coeffs):
        arr = np.array(coeffs, dtype=np.result_type(coeffs, np.float64), copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] != grid.n_x:
            raise ValueError(f"coeffs must have shape (n_x, M), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "_coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def modes(self) -> int:
        return self._coeffs.shape[1]

    @classmethod
    def zeros(cls, grid: Grid1D, modes: int) -> "Field":
        return cls(grid, np.zeros((grid.n_x, modes)))

    @classmethod
    def from_profile(cls, grid: Grid1D, profile, modes: int, mode: int = 1) -> "Field":
        """Field equal to profile(x) times the mode ``mode`` (1-based)."""
        c = np.zeros((grid.n_x, modes), dtype=np.result_type(profile(grid.x), np.float64))
        c[:, mode - 1] = profile(grid.x)
        return cls(grid, c)

    def _check_compatible(self, other: "Field"):
        if self.grid != other.grid or self.modes != other.modes:
            raise GridMismatchError("fields live on different grids or mode counts")

    def __add__(self, other: "Field") -> "Field":
        self._check_compatible(other)
        return Field(self.grid, self._coeffs + other._coeffs)

    def __sub__(self, other: "Field") -> "Field":
        self._check_compatible(other)
        return Field(self.grid, self._coeffs - other._coeffs)

    def __mul__(self, scalar) -> "Field":
        return Field(self.grid, self._coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self._coeffs)

    def derivative(self, order: int = 1) -> "Field":
        return Field(self.grid, spectral_derivative(self._coeffs, self.grid, order))

    def shifted(self, steps: int) -> "Field":
        """u(. - steps*dx), periodic."""
        return Field(self.grid, np.roll(self._coeffs, steps, axis=0))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self._coeffs)

    def __repr__(self):
        return f"Field(n_x={self.grid.n_x}, M={self.modes}, L={self.grid.L})"


@dataclass(frozen=True)
class Weight:
    """rho(x) = 1/cosh(mu*sqrt(1 + dist(x, center)^2)) with periodic distance."""

    mu: float
    center: float = 0.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("weight decay rate mu must be positive")

    @staticmethod
    def profile(mu: float, s: np.ndarray) -> np.ndarray:
        return 1.0 / np.cosh(mu * np.sqrt(1.0 + s * s))

    def values(self, grid: Grid1D) -> np.ndarray:
        return self.profile(self.mu, grid.periodic_offset(self.center))

    def derivative(self, grid: Grid1D) -> np.ndarray:
        s = grid.periodic_offset(self.center)
        r = np.sqrt(1.0 + s * s)
        mr = self.mu * r
        return -self.mu * np.tanh(mr) / np.cosh(mr) * s / r

    def second_derivative(self, grid: Grid1D) -> np.ndarray:
        s = grid.periodic_offset(self.center)
        r = np.sqrt(1.0 + s * s)
        mr = self.mu * r
        sech = 1.0 / np.cosh(mr)
        th = np.tanh(mr)
        return -self.mu * (self.mu * (s / r) ** 2 * (sech ** 3 - th * th * sech)
                           + th * sech / r ** 3)


@dataclass(frozen=True)
class NormSpec:
    kind: str = "ul"
    p: float = 2.0
    order: int = 0
    alpha: float = 0.0
    mu: float = 1.0
    centers: tuple | None = None

    KINDS = ("flat", "weighted", "ul", "ul_sup_weighted", "sobolev_ul")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if not (self.p >= 1):
            raise ValueError("p must be in [1, inf]")
        if self.order not in (0, 1, 2):
            raise ValueError("Sobolev order must be 0, 1 or 2")
        if not (0 <= self.alpha <= 1):
            raise ValueError("transverse power alpha must lie in [0, 1]")

    @property
    def radius(self) -> float:
        return WINDOW_RADIUS


def pointwise_norm(u: Field, alpha: float = 0.0,
                   B: "TransverseOperator | None" = None) -> np.ndarray:
    """|u(x_k)|_{D(B^alpha)} at every node."""
    c = u.coeffs
    if alpha > 0:
        if B is None:
            raise MissingOperatorError("alpha > 0 requires a transverse operator")
        if B.M != u.modes:
            raise GridMismatchError("operator mode count differs from field")
        c = c * B.norm_scale(alpha)[None, :]
    return np.sqrt(np.sum(np.abs(c) ** 2, axis=1))


def _window_values(vals: np.ndarray, grid: Grid1D) -> np.ndarray:
    half = grid.window_half
    if 2 * half + 1 > grid.n_x:
        raise DomainTooSmallError("unit window does not fit inside the domain")
    return _kernels.window_integrals(np.ascontiguousarray(vals, dtype=np.float64), half) * grid.dx


def ul_profile(u: Field, p: float = 2.0, alpha: float = 0.0, B=None) -> np.ndarray:
    """Window value (int_{|x-a|<1} |u|^p)^(1/p) for every grid center a."""
    pw = pointwise_norm(u, alpha, B)
    if math.isinf(p):
        half = u.grid.window_half
        if 2 * half + 1 > u.grid.n_x:
            raise DomainTooSmallError("unit window does not fit inside the domain")
        idx = (np.arange(u.grid.n_x)[:, None] + np.arange(-half, half + 1)[None, :]) % u.grid.n_x
        return pw[idx].max(axis=1)
    win = _window_values(pw ** p, u.grid)
    return np.maximum(win, 0.0) ** (1.0 / p)


def ul_norm(u: Field, spec: NormSpec | None = None, B=None) -> float:
    """Uniformly local norm; the Sobolev variant sums the ul norms of x-derivatives."""
    spec = spec or NormSpec()
    if spec.kind == "sobolev_ul":
        return sum(ul_norm(u.derivative(nu), NormSpec("ul", spec.p, 0, spec.alpha), B)
                   for nu in range(spec.order + 1))
    if spec.kind != "ul":
        raise ValueError(f"ul_norm expects kind 'ul' or 'sobolev_ul', got {spec.kind!r}")
    if spec.order:
        return ul_norm(u, NormSpec("sobolev_ul", spec.p, spec.order, spec.alpha), B)
    return float(np.max(ul_profile(u, spec.p, spec.alpha, B)))


def flat_norm(u: Field, p: float = 2.0, alpha: float = 0.0, B=None) -> float:
    """Full-domain L^p norm (max over nodes when p is infinite)."""
    pw = pointwise_norm(u, alpha, B)
    if math.isinf(p):
        return float(pw.max())
    return float((u.grid.dx * np.sum(pw ** p)) ** (1.0 / p))


def weighted_norm(u: Field, p: float, w: Weight, alpha: float = 0.0, B=None) -> float:
    if math.isinf(p) or p < 1:
        raise ValueError("weighted_norm needs a finite p >= 1")
    pw = pointwise_norm(u, alpha, B)
    return float((u.grid.dx * np.sum(w.values(u.grid) * pw ** p)) ** (1.0 / p))


def weight_kernel(grid: Grid1D, mu: float) -> np.ndarray:
    """rho_{mu,0} sampled at periodic node offsets m*dx, m = 0..n_x-1."""
    m = np.arange(grid.n_x)
    s = np.minimum(m, grid.n_x - m) * grid.dx
    return Weight.profile(mu, s)


def center_indices(grid: Grid1D, centers=None) -> np.ndarray:
    if centers is None:
        return np.arange(grid.n_x)
    idx = np.array([grid.steps_for_shift(c + grid.L) % grid.n_x for c in centers], dtype=np.int64)
    if idx.size == 0:
        raise ValueError("center list is empty")
    return idx


def weighted_scan(density: np.ndarray, grid: Grid1D, mu: float, centers=None) -> np.ndarray:
    """int rho_{mu,c} * density over the domain for every center c (node indices)."""
    idx = center_indices(grid, centers)
    kern = weight_kernel(grid, mu)
    sums = _kernels.circular_weighted_sums(
        np.ascontiguousarray(density, dtype=np.float64), kern, np.ascontiguousarray(idx))
    return grid.dx * np.asarray(sums)


@dataclass(frozen=True)
class EquivalenceConstants:
    c1: float
    c2: float
    lattice_stride: int
    terms_used: int


def equivalence_constants(grid: Grid1D, mu: float, p: float = 2.0) -> EquivalenceConstants:
    """Constants with c1*||u||_ul <= sup_x# ||u||_{L^p_rho} <= c2*||u||_ul.

    c1 is the smallest weight value inside a (snapped) unit window; c2^p is the
    worst lattice sum of window maxima of the weight over lattice centers spaced
    at most 1/2 apart.
    """
    half = grid.window_half
    c1 = float(Weight.profile(mu, np.array(half * grid.dx)))
    stride = max(1, int(math.floor(0.5 / grid.dx + 1e-9)))
    stride = min(stride, max(1, 2 * half - 2))
    n_lat = grid.n_x // stride + (1 if grid.n_x % stride else 0)
    lattice = np.arange(n_lat) * stride
    best = 0.0
    used = 0
    # with a ragged lattice every node is a distinct relative position
    shifts = range(stride) if grid.n_x % stride == 0 else range(grid.n_x)
    for shift in shifts:
        m = (lattice - shift) % grid.n_x
        dist = np.minimum(m, grid.n_x - m) * grid.dx
        gap = np.maximum(dist - half * grid.dx, 0.0)
        terms = np.sort(Weight.profile(mu, gap))[::-1]
        run = np.cumsum(terms)
        keep = np.ones_like(terms, dtype=bool)
        keep[1:] = terms[1:] >= LATTICE_CUTOFF * run[:-1]
        cut = int(np.argmin(keep)) if not keep.all() else terms.size
        total = float(run[cut - 1])
        if total > best:
            best, used = total, cut
    return EquivalenceConstants(c1=c1, c2=best ** (1.0 / p), lattice_stride=stride, terms_used=used)


@dataclass(frozen=True)
class SupWeighted:
    value: float
    center: float
    c1: float
    c2: float


def sup_weighted_norm(u: Field, p: float, mu: float, centers=None,
                      alpha: float = 0.0, B=None) -> SupWeighted:
    """sup over centers of ||u||_{L^p_rho}, with the equivalence constants attached.

    ``centers`` are x-coordinates on grid nodes; by default every node is used.
    """
    if centers is not None and len(centers) == 0:
        raise ValueError("center list is empty")
    pw = pointwise_norm(u, alpha, B)
    scan = weighted_scan(pw ** p, u.grid, mu, centers)
    i = int(np.argmax(scan))
    idx = center_indices(u.grid, centers)
    const = equivalence_constants(u.grid, mu, p)
    return SupWeighted(value=float(max(scan[i], 0.0) ** (1.0 / p)), center=float(u.grid.x[idx[i]]),
                       c1=const.c1, c2=const.c2)


@dataclass
class TranslationModulus:
    shifts: np.ndarray
    values: np.ndarray
    ul_s_candidate: bool
    reference_norm: float


def translation_modulus(u: Field, p: float = 2.0, shifts: Sequence[float] | None = None,
                        tol: float = 0.1) -> TranslationModulus:
    """Curve xi -> ||u - u(. - xi)||_ul over grid-commensurate shifts.

    The ul-s candidate flag is raised when the modulus at the smallest shift
    is below ``tol`` times ||u||_ul.
    """
    if shifts is None:
        shifts = u.grid.dx * np.array([1, 2, 4, 8, 16, 32])
    steps = [u.grid.steps_for_shift(float(xi)) for xi in shifts]
    spec = NormSpec("ul", p)
    vals = np.array([ul_norm(u - u.shifted(s), spec) for s in steps])
    ref = ul_norm(u, spec)
    smallest = int(np.argmin(np.abs(steps)))
    candidate = bool(vals[smallest] <= tol * ref) if ref > 0 else True
    return TranslationModulus(np.asarray(shifts, dtype=float), vals, candidate, ref)


def write_snapshot(path, u: Field, time: float = 0.0) -> None:
    if not u.is_real:
        raise ValueError("snapshots store real fields only")
    g = u.grid
    k, j = np.meshgrid(np.arange(g.n_x), np.arange(u.modes), indexing="ij")
    rows = np.column_stack([k.ravel(), j.ravel()])
    lines = [f"# L_domain={g.L:.17g} n_x={g.n_x} M={u.modes} time={time:.17g}"]
    lines += [f"{a} {b} {v:.17g}" for (a, b), v in zip(rows, u.coeffs.ravel())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[Field, float]:
    text = Path(path).read_text().splitlines()
    header = dict(item.split("=") for item in text[0].lstrip("#").split())
    grid = Grid1D(float(header["L_domain"]), int(header["n_x"]))
    modes = int(header["M"])
    coeffs = np.zeros((grid.n_x, modes))
    for line in text[1:]:
        if line.strip():
            a, b, v = line.split()
            coeffs[int(a), int(b)] = float(v)
    return Field(grid, coeffs), float(header["time"])
