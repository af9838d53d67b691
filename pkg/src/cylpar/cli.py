"""Command-line front end: simulate, lab, verify, norms, spectrum.

Exit codes: 0 when every block ran and every gate passed, 2 when a gate
failed, 1 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import lab
from .cauchy import Nonlinearity, Scenario, solve
from .energy import (EnergySpec, Potential, bistable_potential, damped_sine_potential,
                     gronwall_audit, longtime_experiment, quadratic_potential, sliding_energy,
                     truncated_energy)
from .presets import PRESETS, preset
from .semigroup import assemble
from .spaces import (Field, Grid1D, NormSpec, flat_norm, read_snapshot, sup_weighted_norm,
                     translation_modulus, ul_norm)
from .transverse import (KINDS as TRANSVERSE_KINDS, make_advective, make_bounded,
                         make_dirichlet_laplacian, make_fractional, make_matrix_system,
                         write_manifest)
from .verify import MUTATIONS, SUITES, format_table, run_suite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("cylpar")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- schema

class Key:
    """One config entry: accepted types, default, optional validator."""

    def __init__(self, types, default=None, required=False, check=None, choices=None):
        self.types = types if isinstance(types, tuple) else (types,)
        self.default, self.required, self.check, self.choices = default, required, check, choices


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonnegative(v):
    return None if v >= 0 else "must be nonnegative"


def _p_value(v):
    if isinstance(v, str):
        return None if v == "inf" else "must be a number >= 1 or \"inf\""
    return None if v >= 1 else "must be >= 1"


NUM = (int, float)

GRID = {"L": Key(NUM, required=True, check=_positive),
        "n_x": Key(int, required=True, check=_positive)}

TRANSVERSE = {
    "kind": Key(str, "dirichlet_laplacian", choices=TRANSVERSE_KINDS),
    "M": Key(int, 1, check=_positive),
    "section_length": Key(NUM, math.pi, check=_positive),
    "sigma": Key(NUM, 1.0, check=_positive),
    "value": Key(NUM, 1.0, check=_nonnegative),
    "drift": Key(str, "linear", choices=("zero", "linear", "sine")),
    "drift_amplitude": Key(NUM, 1.0),
    "n_points": Key(int, 1024, check=_positive),
    "shift": Key(bool, False),
}

OPERATOR = {
    "diffusion": Key(NUM, 1.0, check=_positive),
    "diffusion_amplitude": Key(NUM, 0.0),
    "ell1": Key(NUM, 0.0),
    "ell2": Key(NUM, 0.0),
}

NONLINEARITY = {
    "kind": Key(str, "none", choices=("none", "bistable", "quadratic_potential", "damped_sine",
                                      "kpp", "square")),
    "kappa": Key(NUM, 1.0),
    "damping": Key(NUM, 1.0),
    "amplitude": Key(NUM, 0.5),
    "dealias": Key(str, "auto", choices=("auto", "none", "two_thirds", "pad2")),
}

INITIAL = {
    "generator": Key(str, "plateau", choices=("plateau", "gaussian", "constant", "random",
                                              "chirp", "mode_blocks", "smooth_control",
                                              "snapshot")),
    "amplitude": Key(NUM, 1.0),
    "center": Key(NUM, 0.0),
    "width": Key(NUM, 1.0, check=_positive),
    "blend": Key(NUM, 1.0, check=_positive),
    "mode": Key(int, 1, check=_positive),
    "cutoff": Key(NUM, 4.0, check=_positive),
    "path": Key(str, ""),
}

DIAGNOSTIC = {
    "name": Key(str, ""),
    "norm": Key(str, "ul", choices=("flat", "ul", "sobolev_ul", "sup_weighted", "energy")),
    "p": Key(NUM + (str,), 2.0, check=_p_value),
    "order": Key(int, 1, check=_nonnegative),
    "alpha": Key(NUM, 0.0, check=_nonnegative),
    "mu": Key(NUM, 0.1, check=_positive),
    "weight": Key(str, "flat", choices=("flat", "truncated", "sliding")),
    "center": Key(NUM, 0.0),
}

GATE_NAMES = ("no_blowup", "energy_nonincreasing", "gronwall", "longtime")

SCENARIO = {
    "name": Key(str, required=True),
    "grid": GRID,
    "transverse": TRANSVERSE,
    "operator": OPERATOR,
    "nonlinearity": NONLINEARITY,
    "initial": INITIAL,
    "scheme": Key(str, "ETD2RK", choices=("ETD1", "ETD2RK", "Picard")),
    "dt": Key(NUM, required=True, check=_positive),
    "T": Key(NUM, required=True, check=_positive),
    "record_stride": Key(int, 1, check=_positive),
    "snapshot_stride": Key(int, 0, check=_nonnegative),
    "blowup_threshold": Key(NUM, 0.0, check=_nonnegative),
    "diagnostics": [DIAGNOSTIC],
    "gates": Key(list, []),
    "longtime_tol": Key(NUM, 0.02, check=_positive),
}

LAB = {
    "name": Key(str, required=True),
    "generators": Key(list, list(lab.GENERATORS)),
    "norm": Key(str, "", choices=("", "linf", "ul")),
    "ladder": Key(list, [list(r) for r in lab.STANDARD_LADDER]),
    "t_points": Key(int, 41, check=_positive),
    "section_length": Key(NUM, 0.0, check=_nonnegative),
}

CONFIG = {
    "out_dir": Key(str, ""),
    "seed": Key(int, 0),
    "scenario": [SCENARIO],
    "lab": [LAB],
}


def _validate(raw, schema: dict, path: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected a table")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown key")
    out = {}
    for name, spec in schema.items():
        here = f"{path}.{name}" if path else name
        if isinstance(spec, dict):
            out[name] = _validate(raw.get(name, {}), spec, here)
        elif isinstance(spec, list):
            items = raw.get(name, [])
            if not isinstance(items, list):
                raise ConfigError(f"{here}: expected an array of tables")
            out[name] = [_validate(item, spec[0], f"{here}[{i}]") for i, item in enumerate(items)]
        elif name not in raw:
            if spec.required:
                raise ConfigError(f"{here}: required key missing")
            out[name] = spec.default
        else:
            value = raw[name]
            if isinstance(value, bool) and bool not in spec.types:
                raise ConfigError(f"{here}: expected {'/'.join(t.__name__ for t in spec.types)}")
            if not isinstance(value, spec.types):
                raise ConfigError(f"{here}: expected {'/'.join(t.__name__ for t in spec.types)}, "
                                  f"got {type(value).__name__}")
            if spec.choices is not None and value not in spec.choices:
                raise ConfigError(f"{here}: {value!r} not in {list(spec.choices)}")
            problem = spec.check(value) if spec.check else None
            if problem:
                raise ConfigError(f"{here}: {problem} (got {value!r})")
            out[name] = value
    return out


def validate_config(raw: dict) -> dict:
    cfg = _validate(raw, CONFIG, "")
    for i, block in enumerate(cfg["scenario"]):
        for j, gate in enumerate(block["gates"]):
            if gate not in GATE_NAMES:
                raise ConfigError(f"scenario[{i}].gates[{j}]: {gate!r} not in {list(GATE_NAMES)}")
        n_x = block["grid"]["n_x"]
        if n_x & (n_x - 1):
            raise ConfigError(f"scenario[{i}].grid.n_x: must be a power of two (got {n_x})")
    for i, block in enumerate(cfg["lab"]):
        for j, kind in enumerate(block["generators"]):
            if kind not in lab.GENERATORS:
                raise ConfigError(f"lab[{i}].generators[{j}]: {kind!r} not in {list(lab.GENERATORS)}")
        for j, rung in enumerate(block["ladder"]):
            if not (isinstance(rung, list) and len(rung) == 3):
                raise ConfigError(f"lab[{i}].ladder[{j}]: expected [L, n_x, M]")
    names = [b["name"] for b in cfg["scenario"] + cfg["lab"]]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"name: duplicate block name {dupes[0]!r}")
    return cfg


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return validate_config(raw)


# ---------------------------------------------------------------- builders

def build_transverse(t: dict):
    kind, M = t["kind"], t["M"]
    if kind == "dirichlet_laplacian":
        return make_dirichlet_laplacian(M, t["section_length"])
    if kind == "fractional":
        return make_fractional(make_dirichlet_laplacian(M, t["section_length"]), t["sigma"])
    if kind == "bounded_identity":
        return make_bounded(M, t["value"])
    if kind == "matrix_system":
        return make_matrix_system(M)
    ell, amp = t["section_length"], t["drift_amplitude"]
    drift = {"zero": lambda y: np.zeros_like(y),
             "linear": lambda y: amp * y,
             "sine": lambda y: amp * np.sin(np.pi * y / ell)}[t["drift"]]
    return make_advective(M, ell, drift, t["n_points"], t["shift"])


def build_operator(block: dict, grid: Grid1D, B):
    o = block["operator"]
    a = o["diffusion"]
    if o["diffusion_amplitude"]:
        amp = o["diffusion_amplitude"]
        a = lambda x: o["diffusion"] * (1.0 + amp * np.cos(np.pi * x / grid.L))  # noqa: E731
    return assemble(grid, B, a, o["ell1"], o["ell2"])


def build_nonlinearity(n: dict) -> tuple[Nonlinearity | None, Potential | None]:
    kind = n["kind"]
    P = None
    if kind == "bistable":
        P = bistable_potential()
    elif kind == "quadratic_potential":
        P = quadratic_potential(n["kappa"])
    elif kind == "damped_sine":
        P = damped_sine_potential(n["damping"], n["amplitude"])
    if P is not None:
        dealias = "none" if n["dealias"] == "auto" else n["dealias"]
        return P.nonlinearity(dealias), P
    if kind == "kpp":
        return Nonlinearity(lambda y, s: s - s * s, gamma=1.0, degree=2, dealias=n["dealias"]), None
    if kind == "square":
        return Nonlinearity(lambda y, s: s * s, gamma=1.0, degree=2, dealias=n["dealias"]), None
    return None, None


def build_initial(ini: dict, grid: Grid1D, B, rng: np.random.Generator) -> Field:
    gen = ini["generator"]
    amp, mode = ini["amplitude"], ini["mode"]
    if mode > B.M:
        raise ConfigError(f"initial.mode: {mode} exceeds the {B.M} transverse modes")
    if gen == "snapshot":
        u, _ = read_snapshot(ini["path"])
        if u.grid != grid or u.modes != B.M:
            raise ConfigError(f"initial.path: snapshot {ini['path']} does not match the grid")
        return u
    if gen in lab.GENERATORS:
        return lab.generate(gen, grid, B) * amp
    if gen == "random":
        raw = rng.standard_normal((grid.n_x, B.M))
        hat = np.fft.rfft(raw, axis=0) * np.exp(-(grid.k / ini["cutoff"]) ** 2)[:, None]
        return Field(grid, amp * np.fft.irfft(hat, n=grid.n_x, axis=0))
    if gen == "constant":
        profile = lambda x: np.full_like(x, amp)  # noqa: E731
    elif gen == "gaussian":
        profile = lambda x: amp * np.exp(-0.5 * ((x - ini["center"]) / ini["width"]) ** 2)  # noqa: E731
    else:
        profile = lambda x: amp * lab.plateau(x, ini["center"], ini["width"], ini["blend"])  # noqa: E731
    return Field.from_profile(grid, profile, B.M, mode)


def build_diagnostics(diags: list, B, P: Potential | None) -> dict:
    out = {}
    for i, d in enumerate(diags):
        name = d["name"] or f"{d['norm']}_{i}"
        p = math.inf if d["p"] == "inf" else float(d["p"])
        alpha, Bop = d["alpha"], (B if d["alpha"] else None)
        kind = d["norm"]
        if kind == "flat":
            fn = lambda u, p=p, a=alpha, b=Bop: flat_norm(u, p, a, b)  # noqa: E731
        elif kind == "ul":
            fn = lambda u, s=NormSpec("ul", p, 0, alpha), b=Bop: ul_norm(u, s, b)  # noqa: E731
        elif kind == "sobolev_ul":
            spec = NormSpec("sobolev_ul", p, min(d["order"], 2), alpha)
            fn = lambda u, s=spec, b=Bop: ul_norm(u, s, b)  # noqa: E731
        elif kind == "sup_weighted":
            fn = lambda u, p=p, m=d["mu"], a=alpha, b=Bop: sup_weighted_norm(u, p, m, None, a, b).value  # noqa: E731
        elif d["weight"] == "sliding":
            fn = lambda u, m=d["mu"]: float(np.max(sliding_energy(u, P, m, B)))  # noqa: E731
        else:
            spec = EnergySpec.formal() if d["weight"] == "flat" else \
                EnergySpec.truncated(d["mu"], d["center"])
            fn = lambda u, s=spec: truncated_energy(u, P, s, B)  # noqa: E731
        out[name] = fn
    return out


# ---------------------------------------------------------------- block runners

def _publish(tmp: Path, final: Path):
    """Move a finished block directory into place in one rename."""
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def _fmt(v) -> str:
    return "nan" if v is None else f"{float(v):.17g}"


def _energy_gates(block: dict, rec) -> dict:
    gates = {}
    energies = [d for d in block["diagnostics"] if d["norm"] == "energy"]
    names = {id(d): d["name"] or f"energy_{block['diagnostics'].index(d)}" for d in energies}
    if "energy_nonincreasing" in block["gates"]:
        flat = [d for d in energies if d["weight"] == "flat"]
        if not flat:
            gates["energy_nonincreasing"] = {"passed": False, "detail": "no flat energy diagnostic"}
        else:
            E = rec.column(names[id(flat[0])])
            rise = float(np.max(np.diff(E))) if E.size > 1 else 0.0
            ok = rise <= 1e-6 * abs(E[0])
            gates["energy_nonincreasing"] = {"passed": ok, "detail": f"max increase {_fmt(rise)}"}
    if "gronwall" in block["gates"]:
        trunc = [d for d in energies if d["weight"] == "truncated"]
        if not trunc:
            gates["gronwall"] = {"passed": False, "detail": "no truncated energy diagnostic"}
        else:
            rep = gronwall_audit(rec.times, rec.column(names[id(trunc[0])]))
            gates["gronwall"] = {"passed": rep.nu_max > 0, "detail": f"nu {_fmt(rep.nu_max)}"}
    return gates


def run_scenario(block: dict, out_dir: Path, seed: int, index: int) -> dict:
    name = block["name"]
    grid = Grid1D(block["grid"]["L"], block["grid"]["n_x"])
    B = build_transverse(block["transverse"])
    op = build_operator(block, grid, B)
    F, P = build_nonlinearity(block["nonlinearity"])
    u0 = build_initial(block["initial"], grid, B, np.random.default_rng([seed, index]))
    s = Scenario(op, F, u0, block["scheme"], block["dt"], block["T"],
                 build_diagnostics(block["diagnostics"], B, P), block["record_stride"],
                 block["snapshot_stride"] or None, block["blowup_threshold"] or None)
    tmp = out_dir / f".{name}.partial"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    rec = solve(s)
    rec.to_csv(tmp / "trajectory.csv")
    if rec.snapshots:
        rec.write_snapshots(tmp / "snapshots")
    gates = {}
    if "no_blowup" in block["gates"]:
        gates["no_blowup"] = {"passed": rec.status == "completed",
                              "detail": rec.message or rec.status}
    gates.update(_energy_gates(block, rec))
    if "longtime" in block["gates"]:
        rep = longtime_experiment(s, P, tol=block["longtime_tol"])
        gates["longtime"] = {"passed": rep.passed,
                             "detail": f"sup_T {_fmt(rep.sup_T)} sup_2T {_fmt(rep.sup_2T)} "
                                       f"gap {_fmt(rep.relative_gap)}"}
    summary = {"name": name, "kind": "scenario", **rec.summary(), "gates": gates,
               "passed": all(g["passed"] for g in gates.values())}
    (tmp / "summary.json").write_text(json.dumps(summary, indent=2, default=_fmt))
    curves = {n: (np.asarray(rec.times), rec.column(n)) for n in rec.diagnostics}
    lab._plot_curves(tmp / "trajectory.svg", curves, "t", "diagnostic", logx=False)
    _publish(tmp, out_dir / name)
    return summary


def run_lab(block: dict, out_dir: Path) -> dict:
    name = block["name"]
    n = block["t_points"]
    t_grid = lab.default_jump_grid(n)
    ladder = [tuple(r) for r in block["ladder"]]
    norms = {k: block["norm"] for k in block["generators"]} if block["norm"] else None
    tmp = out_dir / f".{name}.partial"
    if tmp.exists():
        shutil.rmtree(tmp)
    report = lab.pathology_report(tmp, block["generators"], ladder, t_grid, norms,
                                  block["section_length"] or None)
    for kind, entry in report["generators"].items():
        with open(tmp / f"{kind}_ladder.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["L", "n_x", "M", "jump", "argmin_t", "slope"])
            for r in entry["rungs"]:
                w.writerow([_fmt(r["L"]), r["n_x"], r["M"], _fmt(r["value"]),
                            _fmt(r["argmin_t"]), _fmt(r["slope"])])
        with open(tmp / f"{kind}_jump_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "distance"])
            for t, d in zip(entry["curve"]["t"], entry["curve"]["distance"]):
                w.writerow([_fmt(t), _fmt(d)])
    gates = {k: e["gate"] for k, e in report["generators"].items()}
    summary = {"name": name, "kind": "lab", "gates": gates,
               "passed": all(g["passed"] for g in gates.values())}
    (tmp / "summary.json").write_text(json.dumps(summary, indent=2))
    _publish(tmp, out_dir / name)
    return summary


def _run_blocks(jobs: list, threads: int) -> list:
    """Run (callable, args) jobs in a pool; errors become failed summaries."""
    def guarded(job):
        fn, args, name = job
        try:
            return fn(*args)
        except Exception as exc:  # one bad block must not hide the others
            log.error("block %s failed: %s", name, exc)
            return {"name": name, "error": f"{type(exc).__name__}: {exc}", "passed": False}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(guarded, jobs))


def _exit_code(results: list) -> int:
    if any("error" in r for r in results):
        return EXIT_ERROR
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_FAIL


def _write_summary(out_dir: Path, command: str, results: list, code: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "exit_code": code, "blocks": results}
    (out_dir / "summary.json").write_text(json.dumps(doc, indent=2, default=_fmt))


# ---------------------------------------------------------------- commands

def _resolve_config(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = validate_config(preset(args.preset))
    else:
        cfg = validate_config({})
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["out_dir"] = args.out_dir or cfg["out_dir"] or "cylpar_out"
    return cfg


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(run_scenario, (b, out, cfg["seed"], i), b["name"]) for i, b in enumerate(cfg["scenario"])]
    results = _run_blocks(jobs, args.threads)
    code = _exit_code(results)
    _write_summary(out, "simulate", results, code)
    for r in results:
        print(f"{r['name']}: {'PASS' if r['passed'] else 'FAIL'}"
              + (f" ({r['error']})" if "error" in r else ""))
    return code


def cmd_lab(args) -> int:
    cfg = _resolve_config(args)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    results = _run_blocks([(run_lab, (b, out), b["name"]) for b in cfg["lab"]], args.threads)
    code = _exit_code(results)
    _write_summary(out, "lab", results, code)
    for r in results:
        if "error" in r:
            print(f"{r['name']}: ERROR {r['error']}")
            continue
        for kind, g in r["gates"].items():
            print(f"{r['name']}/{kind}: {'PASS' if g['passed'] else 'FAIL'} {g['detail']}")
    return code


def cmd_verify(args) -> int:
    results = run_suite(args.suite, args.mutate or ())
    print(format_table(results))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"name": r.name, "verdict": r.verdict, "runtime": r.runtime, "detail": r.detail}
                for r in results]
        (out / f"verify_{args.suite}.json").write_text(json.dumps(rows, indent=2))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_norms(args) -> int:
    u, t = read_snapshot(args.snapshot)
    p = math.inf if args.p == "inf" else float(args.p)
    sw = sup_weighted_norm(u, 2.0 if math.isinf(p) else p, args.mu)
    tm = translation_modulus(u, 2.0)
    report = {
        "snapshot": str(args.snapshot),
        "time": t,
        "ul": ul_norm(u, NormSpec("ul", p)),
        "flat": flat_norm(u, p),
        "sup": flat_norm(u, math.inf),
        "sobolev_ul_1": ul_norm(u, NormSpec("sobolev_ul", 2.0, 1)),
        "sup_weighted": {"mu": args.mu, "value": sw.value, "center": sw.center,
                         "c1": sw.c1, "c2": sw.c2},
        "ul_s_candidate": tm.ul_s_candidate,
    }
    text = json.dumps(report, indent=2, default=_fmt)
    # json prints floats with repr, which is already round-trip exact
    print(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "norms.json").write_text(text)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.config or args.preset:
        cfg = _resolve_config(args)
        blocks = [(b["name"], b["transverse"]) for b in cfg["scenario"]]
        out = Path(cfg["out_dir"])
    else:
        t = _validate({k: v for k, v in {
            "kind": args.kind, "M": args.M, "section_length": args.section_length,
            "sigma": args.sigma, "value": args.value, "drift": args.drift,
            "drift_amplitude": args.drift_amplitude}.items() if v is not None}, TRANSVERSE, "spectrum")
        blocks = [(t["kind"], t)]
        out = Path(args.out_dir or "cylpar_out")
    out.mkdir(parents=True, exist_ok=True)
    for name, t in blocks:
        B = build_transverse(t)
        path = out / f"{name}_spectrum.txt"
        write_manifest(path, B)
        print(f"# {name}: {B.kind}, M={B.M} -> {path}")
        for j, lam in enumerate(B.eigenvalues, start=1):
            print(f"{j} {lam:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cylpar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", type=Path, help="TOML configuration file")
            p.add_argument("--preset", choices=sorted(PRESETS))
            p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", type=Path)
        p.add_argument("--threads", type=int, default=1, help="worker pool size for blocks")

    common(sub.add_parser("simulate", help="run scenario blocks"))
    common(sub.add_parser("lab", help="run pathology refinement ladders"))

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("suite", nargs="?", default="fast", choices=sorted(SUITES))
    p.add_argument("--mutate", action="append", choices=MUTATIONS,
                   help="inject a deliberate fault (repeatable)")
    common(p, config=False)

    p = sub.add_parser("norms", help="norms of a stored snapshot")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--p", default="2", help='exponent p or "inf"')
    p.add_argument("--mu", type=float, default=1.0, help="weight decay for the sup-weighted norm")
    common(p, config=False)

    p = sub.add_parser("spectrum", help="eigenvalues of a transverse operator")
    p.add_argument("--kind", choices=TRANSVERSE_KINDS)
    p.add_argument("--M", type=int)
    p.add_argument("--section-length", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--value", type=float)
    p.add_argument("--drift", choices=("zero", "linear", "sine"))
    p.add_argument("--drift-amplitude", type=float)
    common(p)
    return parser


COMMANDS = {"simulate": cmd_simulate, "lab": cmd_lab, "verify": cmd_verify,
            "norms": cmd_norms, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
