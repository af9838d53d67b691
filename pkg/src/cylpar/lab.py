"""Pathological initial data and measurements of semigroup discontinuity at t = 0.

Three generators are provided: a chirp sin(x^2) e_1 (fast longitudinal
oscillation), mode blocks (unit plateaus carrying ever higher transverse
modes, smooth in x) and a smooth band-limited control.  All are normalized
to uniformly local L^2 norm 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .semigroup import EvolutionOperator, assemble, semigroup_exact
from .spaces import Field, Grid1D, NormSpec, flat_norm, translation_modulus, ul_norm, ul_profile
from .transverse import TransverseOperator, make_dirichlet_laplacian

GENERATORS = ("chirp", "mode_blocks", "smooth_control")


def _smooth_step(r: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for r <= 0, 1 for r >= 1."""
    r = np.clip(r, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(r > 0, np.exp(-1.0 / np.where(r > 0, r, 1.0)), 0.0)
        b = np.where(r < 1, np.exp(-1.0 / np.where(r < 1, 1.0 - r, 1.0)), 0.0)
    return a / (a + b)


def plateau(x: np.ndarray, center: float, width: float = 1.0, blend: float = 1.0) -> np.ndarray:
    """1 on [center - width/2, center + width/2], 0 beyond a blend layer on each side."""
    left = center - 0.5 * width
    right = center + 0.5 * width
    return _smooth_step((x - left + blend) / blend) * _smooth_step((right + blend - x) / blend)


@dataclass(frozen=True)
class PathologyGenerator:
    kind: str
    block_spacing: float = 8.0
    n_blocks: int | None = None
    blend: float = 1.0
    edge_width: float = 4.0

    def __post_init__(self):
        if self.kind not in GENERATORS:
            raise ValueError(f"unknown generator {self.kind!r}")


def _normalized(u: Field) -> Field:
    return u * (1.0 / ul_norm(u))


def generate(gen: PathologyGenerator | str, grid: Grid1D, B: TransverseOperator) -> Field:
    if isinstance(gen, str):
        gen = PathologyGenerator(gen)
    x = grid.x
    c = np.zeros((grid.n_x, B.M))
    if gen.kind == "chirp":
        cutoff = _smooth_step((grid.L - np.abs(x)) / gen.edge_width)
        c[:, 0] = np.sin(x ** 2) * cutoff
    elif gen.kind == "smooth_control":
        c[:, 0] = 0.75 + 0.25 * np.cos(np.pi * x / grid.L) + 0.1 * np.sin(2 * np.pi * x / grid.L)
    else:
        if not B.compact_resolvent:
            raise ValueError("mode blocks need a transverse operator with compact resolvent")
        fit = int((2 * grid.L) // gen.block_spacing)
        n_blocks = gen.n_blocks if gen.n_blocks is not None else min(B.M, fit)
        if n_blocks > B.M:
            raise ValueError(f"block schedule needs {n_blocks} modes but only {B.M} are available")
        if n_blocks > fit:
            raise ValueError(f"{n_blocks} blocks do not fit in the domain")
        for n in range(1, n_blocks + 1):
            center = -grid.L + gen.block_spacing * (n - 0.5)
            c[:, n - 1] = plateau(x, center, 1.0, gen.blend)
    return _normalized(Field(grid, c))


def block_centers(gen: PathologyGenerator, grid: Grid1D, B: TransverseOperator) -> np.ndarray:
    fit = int((2 * grid.L) // gen.block_spacing)
    n_blocks = gen.n_blocks if gen.n_blocks is not None else min(B.M, fit)
    return -grid.L + gen.block_spacing * (np.arange(1, n_blocks + 1) - 0.5)


def default_jump_grid(n: int = 41) -> np.ndarray:
    return np.logspace(-6, -1, n)


def _distance_fn(norm: str, alpha: float, B):
    if norm == "linf":
        return lambda f: flat_norm(f, math.inf)
    if norm == "ul":
        return lambda f: ul_norm(f, NormSpec("ul", 2.0))
    if norm == "ul_alpha":
        return lambda f: ul_norm(f, NormSpec("ul", 2.0, 0, alpha), B)
    raise ValueError(f"unknown jump norm {norm!r}")


@dataclass
class JumpResult:
    value: float
    argmin_t: float
    t_grid: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    slope: float = math.nan


def jump_measure(op: EvolutionOperator, u0: Field, t_grid=None, norm: str = "linf",
                 alpha: float = 0.0) -> JumpResult:
    """inf over the t-grid of ||exp(-A t) u0 - u0|| and the small-t slope of that curve."""
    t_grid = default_jump_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    dist_fn = _distance_fn(norm, alpha, op.B)
    d = np.array([dist_fn(semigroup_exact(op, t, u0) - u0) for t in t_grid])
    i = int(np.argmin(d))
    first = t_grid <= 10 * t_grid[0]
    ok = first & (d > 0)
    slope = float(np.polyfit(np.log(t_grid[ok]), np.log(d[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return JumpResult(float(d[i]), float(t_grid[i]), t_grid, d, slope)


# (L, n_x, M); mode blocks use a thin section so that high modes decay on the grid's time scale
STANDARD_LADDER = ((20.0, 2 ** 12, 16), (40.0, 2 ** 13, 32), (80.0, 2 ** 14, 64))
THIN_SECTION = 0.02


@dataclass
class RefinementRung:
    L: float
    n_x: int
    M: int
    value: float
    argmin_t: float
    slope: float


def refinement_study(kind: str, norm: str, ladder=STANDARD_LADDER, t_grid=None,
                     section_length: float | None = None) -> list:
    """jump_measure of one generator across (L, n_x, M) rungs, heat operator a = 1."""
    rungs = []
    for L, n_x, M in ladder:
        grid = Grid1D(L, n_x)
        modes = M if kind == "mode_blocks" else 1
        ell = section_length or (THIN_SECTION if kind == "mode_blocks" else math.pi)
        B = make_dirichlet_laplacian(modes, ell)
        op = assemble(grid, B)
        u0 = generate(kind, grid, B)
        r = jump_measure(op, u0, t_grid, norm)
        rungs.append(RefinementRung(L, n_x, modes, r.value, r.argmin_t, r.slope))
    return rungs


DEFAULT_NORMS = {"chirp": "linf", "mode_blocks": "ul", "smooth_control": "linf"}


def dichotomy_gate(kind: str, rungs: list) -> tuple[bool, str]:
    """Expected behaviour per generator across a refinement ladder.

    chirp: jump >= 0.5 and increasing; mode_blocks: jump >= 0.3;
    smooth_control: jump <= 0.01 with small-t slope >= 0.9 on the finest rung.
    """
    vals = [r.value for r in rungs]
    shown = ", ".join(f"{v:.4g}" for v in vals)
    if kind == "chirp":
        ok = min(vals) >= 0.5 and all(b > a for a, b in zip(vals, vals[1:]))
        return ok, f"chirp jumps [{shown}], need >= 0.5 and increasing"
    if kind == "mode_blocks":
        return min(vals) >= 0.3, f"mode_blocks jumps [{shown}], need >= 0.3"
    slope = rungs[-1].slope
    ok = max(vals) <= 0.01 and slope >= 0.9
    return ok, f"smooth_control jumps [{shown}], slope {slope:.4f}, need <= 0.01 and >= 0.9"


@dataclass
class Classification:
    ul_s_candidate: bool
    shifts: np.ndarray
    modulus: np.ndarray


def strong_vs_weak_classifier(u: Field, shifts=None, tol: float = 0.1) -> Classification:
    tm = translation_modulus(u, 2.0, shifts, tol)
    return Classification(tm.ul_s_candidate, tm.shifts, tm.values)


@dataclass
class DensityGap:
    best: float
    per_restart: np.ndarray


def _band_project(c: np.ndarray, grid: Grid1D, k_cut: float, mode_limit: int) -> np.ndarray:
    hat = np.fft.rfft(c, axis=0)
    hat[grid.k > k_cut] = 0.0
    out = np.fft.irfft(hat, n=grid.n_x, axis=0)
    out[:, mode_limit:] = 0.0
    return out


def _retract(v: np.ndarray, grid: Grid1D, R: float, B: TransverseOperator | None,
             use_domain_norm: bool) -> np.ndarray:
    f = Field(grid, v)
    if use_domain_norm:
        size = ul_norm(f, NormSpec("ul", 2.0, 0, 1.0), B)
    else:
        size = ul_norm(f.derivative(), NormSpec("ul", 2.0))
    return v if size <= R else v * (R / size)


def density_gap(u: Field, R: float = 10.0, k_cut: float | None = None,
                mode_limit: int | None = None, B: TransverseOperator | None = None,
                restarts: int = 20, iterations: int = 150, q: float = 8.0,
                seed: int = 0) -> DensityGap:
    """Smallest ul distance from u to a ball of band-limited fields, by projected descent.

    The corpus holds fields with x-wavenumbers <= k_cut and modes <= mode_limit
    whose derivative ul norm is at most R (or, when ``B`` is given, whose
    D(B) ul norm is at most R).  The max over windows is smoothed by a q-norm
    during the descent; the reported distance is the exact ul norm.
    """
    g = u.grid
    k_cut = k_cut if k_cut is not None else R
    mode_limit = mode_limit or u.modes
    use_dom = B is not None
    half = g.window_half
    rng = np.random.default_rng(seed)
    target = u.coeffs

    def surrogate(v):
        w = _kernels.window_integrals(np.ascontiguousarray(np.sum((v - target) ** 2, axis=1)), half) * g.dx
        w = np.maximum(w, 0.0)
        return (g.dx * np.sum(w ** q)) ** (1 / q), w

    results = []
    for r in range(restarts):
        if r == 0:
            v = _band_project(target, g, k_cut, mode_limit)
        else:
            v = _band_project(rng.standard_normal(target.shape), g, k_cut, mode_limit)
        v = _retract(v, g, R, B, use_dom)
        J, w = surrogate(v)
        step = 0.5
        for _ in range(iterations):
            if J == 0:
                break
            acc = _kernels.window_integrals(np.ascontiguousarray(w ** (q - 1)), half) * g.dx
            grad = 2.0 * (v - target) * acc[:, None] * J ** (1 - q)
            grad = _band_project(grad, g, k_cut, mode_limit)
            gn = np.sqrt(g.dx * np.sum(grad ** 2))
            if gn == 0:
                break
            while step > 1e-8:
                trial = _retract(v - step * grad / gn, g, R, B, use_dom)
                Jt, wt = surrogate(trial)
                if Jt < J:
                    v, J, w = trial, Jt, wt
                    step *= 1.5
                    break
                step *= 0.5
            else:
                break
        results.append(ul_norm(Field(g, v) - u))
    res = np.array(results)
    return DensityGap(float(res.min()), res)


def _plot_curves(path: Path, curves: dict, xlabel: str, ylabel: str, logx: bool = True):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:  # plots are a convenience; the JSON is authoritative
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (xs, ys) in curves.items():
        ax.plot(xs, ys, marker=".", label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def pathology_report(out_dir, kinds=GENERATORS, ladder=STANDARD_LADDER, t_grid=None,
                     norms: dict | None = None, section_length: float | None = None) -> dict:
    """Refinement ladders for each generator with gate verdicts, written as JSON plus SVG curves.

    The jump curve of the finest rung is stored alongside the ladder.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    norms = {**DEFAULT_NORMS, **(norms or {})}
    report = {"ladder": [list(r) for r in ladder], "generators": {}}
    curves = {}
    for kind in kinds:
        rungs = refinement_study(kind, norms[kind], ladder, t_grid, section_length)
        passed, detail = dichotomy_gate(kind, rungs)
        L, n_x, M = ladder[-1]
        grid = Grid1D(L, n_x)
        ell = section_length or (THIN_SECTION if kind == "mode_blocks" else math.pi)
        B = make_dirichlet_laplacian(M if kind == "mode_blocks" else 1, ell)
        u0 = generate(kind, grid, B)
        jr = jump_measure(assemble(grid, B), u0, t_grid, norms[kind])
        cls = strong_vs_weak_classifier(u0)
        curves[f"{kind} ({norms[kind]})"] = (jr.t_grid, jr.distances)
        report["generators"][kind] = {
            "norm": norms[kind],
            "rungs": [asdict(r) for r in rungs],
            "gate": {"passed": passed, "detail": detail},
            "curve": {"t": jr.t_grid.tolist(), "distance": jr.distances.tolist()},
            "ul_s_candidate": cls.ul_s_candidate,
            "modulus": {"shifts": cls.shifts.tolist(), "values": cls.modulus.tolist()},
        }
    (out / "pathology_report.json").write_text(json.dumps(report, indent=2, default=float))
    _plot_curves(out / "jump_curves.svg", curves, "t", "distance to initial data")
    return report
