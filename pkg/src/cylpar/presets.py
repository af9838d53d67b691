"""Named configurations, expressed in the same schema as a config file."""
from __future__ import annotations

import copy

from .lab import STANDARD_LADDER

_LADDER = [list(r) for r in STANDARD_LADDER]

_CORRIDOR = {
    "name": "corridor",
    "grid": {"L": 32.0, "n_x": 256},
    "transverse": {"kind": "dirichlet_laplacian", "M": 4, "section_length": 4.0},
    "nonlinearity": {"kind": "bistable"},
    "initial": {"generator": "plateau", "amplitude": 0.5, "width": 16.0, "blend": 4.0},
    "scheme": "ETD2RK",
    "dt": 1e-3,
    "T": 5.0,
    "record_stride": 10,
    "snapshot_stride": 1000,
    "diagnostics": [
        {"name": "sup", "norm": "flat", "p": "inf"},
        {"name": "ul_l2", "norm": "ul"},
        {"name": "energy_flat", "norm": "energy", "weight": "flat"},
        {"name": "energy_sliding_max", "norm": "energy", "weight": "sliding", "mu": 0.1},
    ],
    "gates": ["no_blowup", "energy_nonincreasing"],
}

_ADVECTIVE = {
    "name": "advective",
    "grid": {"L": 32.0, "n_x": 256},
    "transverse": {"kind": "advective", "M": 4, "section_length": 3.141592653589793,
                   "drift": "linear", "drift_amplitude": 1.0},
    "nonlinearity": {"kind": "damped_sine", "damping": 1.0, "amplitude": 0.5},
    "initial": {"generator": "plateau", "amplitude": 1.0, "width": 16.0, "blend": 0.5},
    "scheme": "ETD2RK",
    "dt": 1e-3,
    "T": 2.0,
    "record_stride": 10,
    "diagnostics": [
        {"name": "sup", "norm": "flat", "p": "inf"},
        {"name": "ul_l2", "norm": "ul"},
        {"name": "energy_flat", "norm": "energy", "weight": "flat"},
    ],
    "gates": ["no_blowup", "energy_nonincreasing"],
}

_GRADIENTFLOW = {
    "name": "gradientflow",
    "grid": {"L": 32.0, "n_x": 256},
    "transverse": {"kind": "dirichlet_laplacian", "M": 4, "section_length": 3.141592653589793},
    "nonlinearity": {"kind": "quadratic_potential", "kappa": 1.0},
    "initial": {"generator": "plateau", "amplitude": 1.0, "width": 16.0, "blend": 4.0},
    "scheme": "ETD2RK",
    "dt": 1e-2,
    "T": 10.0,
    "record_stride": 10,
    "diagnostics": [
        {"name": "ul_l2", "norm": "ul"},
        {"name": "energy_truncated", "norm": "energy", "weight": "truncated", "mu": 0.1},
    ],
    "gates": ["no_blowup", "gronwall"],
}

PRESETS = {
    "figure1": {"lab": [{"name": "figure1", "generators": ["chirp"], "norm": "linf",
                         "ladder": _LADDER}]},
    "figure2": {"lab": [{"name": "figure2", "generators": ["mode_blocks"], "norm": "ul",
                         "ladder": _LADDER}]},
    "corridor": {"scenario": [_CORRIDOR]},
    "advective": {"scenario": [_ADVECTIVE]},
    "gradientflow": {"scenario": [_GRADIENTFLOW]},
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
