"""Transverse operators B represented by their eigenpairs.

Every operator carries a quadrature basis (nodes, weights, eigenfunction
table) on which pointwise nonlinearities are synthesized and projected back;
the table is orthonormal for those weights.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .spaces import LAMBDA_FLOOR

KINDS = ("dirichlet_laplacian", "fractional", "bounded_identity", "matrix_system", "advective")


class OperatorConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class TransverseBasis:
    nodes: np.ndarray      # y_q
    weights: np.ndarray    # w_q, sum_q w_q e_i(y_q) e_j(y_q) = delta_ij
    table: np.ndarray      # table[j, q] = e_j(y_q)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.table

    def project(self, values: np.ndarray) -> np.ndarray:
        return (values * self.weights) @ self.table.T


@dataclass(frozen=True)
class TransverseOperator:
    kind: str
    eigenvalues: np.ndarray
    section_length: float | None = None
    params: dict = field(default_factory=dict)
    basis: TransverseBasis | None = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if self.kind not in KINDS:
            raise OperatorConstructionError(f"unknown transverse kind {self.kind!r}")
        if lam.ndim != 1 or lam.size == 0:
            raise OperatorConstructionError("need at least one eigenvalue")
        if np.any(lam < 0) or np.any(np.diff(lam) < -1e-12 * max(1.0, lam.max())):
            raise OperatorConstructionError("eigenvalues must be nonnegative and nondecreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def M(self) -> int:
        return self.eigenvalues.size

    @property
    def compact_resolvent(self) -> bool:
        return self.kind in ("dirichlet_laplacian", "fractional", "advective")

    def norm_scale(self, alpha: float) -> np.ndarray:
        """Multipliers giving the D(B^alpha) norm of a mode vector."""
        return np.maximum(self.eigenvalues, LAMBDA_FLOOR) ** alpha

    def quadrature(self) -> TransverseBasis:
        if self.basis is None:
            raise OperatorConstructionError(f"{self.kind} operator has no quadrature basis")
        return self.basis

    def eigenfunctions(self, y: np.ndarray) -> np.ndarray:
        """e_j(y) for j = 1..M, shape (M, len(y))."""
        y = np.asarray(y, dtype=float)
        if self.kind in ("dirichlet_laplacian", "fractional"):
            ell = self.section_length
            j = np.arange(1, self.M + 1)[:, None]
            return np.sqrt(2.0 / ell) * np.sin(j * np.pi * y[None, :] / ell)
        if self.kind == "advective":
            b = self.quadrature()
            nodes = np.concatenate([[0.0], b.nodes, [self.section_length]])
            out = np.empty((self.M, y.size))
            for j in range(self.M):
                out[j] = np.interp(y, nodes, np.concatenate([[0.0], b.table[j], [0.0]]))
            return out
        raise OperatorConstructionError(f"{self.kind} has no y-profile")


def apply_power(B: TransverseOperator, alpha: float, v: np.ndarray) -> np.ndarray:
    """(lambda_j^alpha v_j)_j along the last axis, with 0^0 = 1."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    return np.asarray(v) * np.power(B.eigenvalues, alpha)


def _sine_basis(M: int, ell: float, n_nodes: int | None = None) -> TransverseBasis:
    q_count = n_nodes or 2 * M
    if q_count < M:
        raise OperatorConstructionError("need at least M quadrature nodes")
    n_int = q_count + 1
    y = ell * np.arange(1, n_int) / n_int
    j = np.arange(1, M + 1)[:, None]
    table = np.sqrt(2.0 / ell) * np.sin(j * np.pi * y[None, :] / ell)
    return TransverseBasis(y, np.full(y.size, ell / n_int), table)


def make_dirichlet_laplacian(M: int, section_length: float) -> TransverseOperator:
    if M < 1 or section_length <= 0:
        raise ValueError("need M >= 1 and a positive section length")
    lam = (np.arange(1, M + 1) * np.pi / section_length) ** 2
    return TransverseOperator("dirichlet_laplacian", lam, section_length,
                              {}, _sine_basis(M, section_length))


def make_fractional(base: TransverseOperator, sigma: float) -> TransverseOperator:
    """Eigenvalues lambda_j^(sigma/2), same eigenfunctions."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    params = dict(base.params, sigma=sigma, base_kind=base.kind)
    return TransverseOperator("fractional", base.eigenvalues ** (sigma / 2.0),
                              base.section_length, params, base.basis)


def make_matrix_system(k: int) -> TransverseOperator:
    """B = identity on R^k (lambda_j = 1)."""
    return TransverseOperator("matrix_system", np.ones(k), None, {"k": k},
                              TransverseBasis(np.arange(k, dtype=float), np.ones(k), np.eye(k)))


def make_bounded(M: int, value: float = 1.0) -> TransverseOperator:
    """B = value * identity on M components; value may be 0."""
    return TransverseOperator("bounded_identity", np.full(M, float(value)), None,
                              {"value": value},
                              TransverseBasis(np.arange(M, dtype=float), np.ones(M), np.eye(M)))


def make_advective(M: int, section_length: float, W, n_points: int = 1024,
                   shift: bool = False) -> TransverseOperator:
    """B = -u'' + W' u' with Dirichlet ends, self-adjoint for the e^W-weighted product.

    ``W`` is a callable or samples on a uniform grid covering [0, section_length]
    (endpoints included).  B is written in divergence form
    -e^{-W}(e^{W}u')' and discretized with centered differences on
    ``n_points`` interior nodes; the similarity v = e^{W/2}u turns the matrix
    symmetric before the eigensolve.
    """
    ell = float(section_length)
    h = ell / (n_points + 1)
    y = h * np.arange(1, n_points + 1)
    mid = h * (np.arange(n_points + 1) + 0.5)
    if callable(W):
        w_node, w_mid = np.asarray(W(y), float), np.asarray(W(mid), float)
    else:
        samples = np.asarray(W, dtype=float)
        ys = np.linspace(0.0, ell, samples.size)
        w_node, w_mid = np.interp(y, ys, samples), np.interp(mid, ys, samples)
    w_node = np.broadcast_to(w_node, y.shape)
    w_mid = np.broadcast_to(w_mid, mid.shape)

    # divergence-form matrix K = diag(e^{-W}) S with S symmetric
    em = np.exp(w_mid)
    diag = np.exp(-w_node) * (em[:-1] + em[1:]) / h ** 2
    upper = -np.exp(-w_node[:-1]) * em[1:-1] / h ** 2   # K[i, i+1]
    lower = -np.exp(-w_node[1:]) * em[1:-1] / h ** 2    # K[i+1, i]
    half = np.exp(0.5 * w_node)
    sym_upper = half[:-1] * upper / half[1:]
    sym_lower = half[1:] * lower / half[:-1]
    residual = np.max(np.abs(sym_upper - sym_lower)) / np.max(np.abs(diag))
    if residual > 1e-10:
        raise OperatorConstructionError(f"symmetrized matrix residual {residual:.3e} exceeds 1e-10")

    lam, vecs = eigh_tridiagonal(diag, 0.5 * (sym_upper + sym_lower),
                                 select="i", select_range=(0, M - 1))
    table = (vecs / half[:, None]).T / np.sqrt(h)
    table *= np.sign(table[:, :1])
    if shift:
        lam = lam + 1.0
    params = {"n_points": n_points, "shift": shift}
    basis = TransverseBasis(y, h * np.exp(w_node), table)
    return TransverseOperator("advective", lam, ell, params, basis)


def write_manifest(path, B: TransverseOperator) -> None:
    header = {"kind": B.kind, "M": B.M, "section_length": B.section_length,
              "params": B.params}
    lines = ["# " + json.dumps(header, sort_keys=True, default=str)]
    lines += [f"{lam:.17g}" for lam in B.eigenvalues]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> tuple[dict, np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = json.loads(text[0][1:].strip())
    return header, np.array([float(t) for t in text[1:] if t.strip()])
