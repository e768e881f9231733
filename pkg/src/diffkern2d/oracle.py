"""Independent brute-force references used as ground truth in tests.

Everything here is deliberately built the slow way: literal quadrature of
the kernel followed by centered finite differences for the outer
derivatives (step h/2 on a half-shifted lattice, so the sign jumps are
crossed rather than sampled), dense inverses instead of structured
solves, and a plain 1-D difference-kernel solver for tensor-product
cross-checks.  The error of these routes is qualitatively different from
the analytic expansions in :mod:`.operators`, so agreement between the
two is evidence rather than shared bias.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, SingularOperatorError
from .grid import GridSpec, KernelSamples
from .operators import (
    ConvOperator,
    Space,
    assemble_pi,
    displacement_identity_residual,
    export_dense_csv,
    m4_identity_residual,
)

__all__ = [
    "DenseOp",
    "Kernel1D",
    "oracle_m_op",
    "extract_generating_kernel",
    "generating_kernel_corner_table",
    "rebuild_from_corner_table",
    "rho_1d",
    "dense_everything",
]


@dataclass(frozen=True)
class DenseOp:
    """Dense matrix with its space descriptors."""

    source: Space
    target: Space
    mat: np.ndarray

    def __post_init__(self):
        if self.mat.shape != (self.target.dim, self.source.dim):
            raise InvalidArgumentError(
                f"shape {self.mat.shape} inconsistent with spaces"
            )
        if not np.all(np.isfinite(self.mat)):
            raise InvalidArgumentError("oracle operator has non-finite entries")


def oracle_m_op(samples: KernelSamples, j: int, k: int) -> DenseOp:
    """M_jk by literal quadrature of s and centered differences.

    The derivative step is h/2, which puts every s evaluation on the
    half-integer difference lattice: the sign jump is crossed by the
    centered stencil (reproducing the delta weight exactly) and never
    sampled at 0.
    """
    g = samples.grid
    model = samples.model
    n1, n2, h1, h2 = g.n1, g.n2, g.h1, g.h2
    x1, x2 = g.x1, g.x2
    grid_sp = Space("grid", g)
    line1 = Space("line", g, 1)
    line2 = Space("line", g, 2)

    if (j, k) in ((2, 1), (2, 2), (3, 1), (3, 2)):
        # no derivative involved: the quadrature/broadcast form is already exact
        from .operators import m_op

        a = m_op(samples, j, k)
        return DenseOp(a.source, a.target, a.mat)

    if (j, k) == (1, 1):
        # (M_11 f)(x) = d/dx2 int s(x1, x2 - t2) f(t2) dt2
        d = 0.5 * h2
        D = x2[:, None] - x2[None, :]                     # (b, b')
        Fp = model.s_values(x1[:, None, None], (D + d)[None, :, :])
        Fm = model.s_values(x1[:, None, None], (D - d)[None, :, :])
        M = h2 * (Fp - Fm) / (2 * d)                      # [a, b, b']
        return DenseOp(line2, grid_sp, M.transpose(1, 0, 2).reshape(g.size, n2))

    if (j, k) == (1, 2):
        d = 0.5 * h1
        D = x1[:, None] - x1[None, :]                     # (a, a')
        Fp = model.s_values((D + d)[:, None, :], x2[None, :, None])
        Fm = model.s_values((D - d)[:, None, :], x2[None, :, None])
        M = h1 * (Fp - Fm) / (2 * d)                      # [a, b, a']
        return DenseOp(line1, grid_sp, M.transpose(1, 0, 2).reshape(g.size, n1))

    if (j, k) == (4, 1):
        # (M_41 f)(x2) = -d/dx2 int s(-t1, x2 - t2) f(t) dt
        d = 0.5 * h2
        D = x2[:, None] - x2[None, :]                     # (b, b')
        Fp = model.s_values(-x1[:, None, None], (D + d)[None, :, :])
        Fm = model.s_values(-x1[:, None, None], (D - d)[None, :, :])
        M = -h1 * h2 * (Fp - Fm) / (2 * d)                # [a', b, b']
        return DenseOp(grid_sp, line2, M.transpose(1, 2, 0).reshape(n2, g.size))

    if (j, k) == (4, 2):
        d = 0.5 * h1
        D = x1[:, None] - x1[None, :]                     # (a, a')
        Fp = model.s_values((D + d)[:, None, :], -x2[None, :, None])
        Fm = model.s_values((D - d)[:, None, :], -x2[None, :, None])
        M = -h1 * h2 * (Fp - Fm) / (2 * d)                # [a, b', a']
        return DenseOp(grid_sp, line1, M.reshape(n1, g.size))

    raise InvalidArgumentError(f"no operator M_{j}{k}")


# --------------------------------------------------------------------------
# generating kernel of a bounded operator
# --------------------------------------------------------------------------


def extract_generating_kernel(Q: np.ndarray, grid: GridSpec, x_index) -> np.ndarray:
    """q(x, .) = conj(Q^* chi_x) with chi_x the indicator of {t : t < x}.

    ``x_index`` is the midpoint index pair (a, b); the indicator is strict
    (t1 < x1 and t2 < x2).  Under uniform weights the weighted adjoint of
    a grid operator is the plain conjugate transpose.
    """
    Q = np.asarray(Q)
    if Q.shape != (grid.size, grid.size):
        raise InvalidArgumentError(f"Q must be ({grid.size}, {grid.size})")
    a, b = x_index
    if not (0 <= a < grid.n1 and 0 <= b < grid.n2):
        raise InvalidArgumentError(f"grid point index {x_index} out of range")
    chi = np.zeros((grid.n2, grid.n1))
    chi[:b, :a] = 1.0
    return np.conj(Q.conj().T @ chi.reshape(grid.size))


def generating_kernel_corner_table(Q: np.ndarray, grid: GridSpec) -> np.ndarray:
    """q extracted at the cell upper corners (k h1, l h2), k,l = 0..n.

    Midpoints sit strictly inside cells, so the corner indicator
    {t : t1 < k h1, t2 < l h2} covers exactly the first k x l cells; the
    corner family makes the mixed-difference reconstruction exact.
    Returns shape (n2+1, n1+1, N) with [l, k] the corner index.
    """
    Q = np.asarray(Q)
    n1, n2 = grid.n1, grid.n2
    out = np.zeros((n2 + 1, n1 + 1, grid.size), dtype=complex)
    QH = Q.conj().T
    for l in range(n2 + 1):
        for k in range(n1 + 1):
            chi = np.zeros((n2, n1))
            chi[:l, :k] = 1.0
            out[l, k] = np.conj(QH @ chi.reshape(grid.size))
    return out


def rebuild_from_corner_table(qtab: np.ndarray, grid: GridSpec,
                              f: np.ndarray) -> np.ndarray:
    """Apply the mixed difference of the generating representation.

    Phi(k, l) = h1 h2 sum_t q(corner_{kl}, t) f(t) is the cumulative
    integral of Q f over the first k x l cells; its mixed difference
    divided by the cell area returns Q f exactly.
    """
    n1, n2 = grid.n1, grid.n2
    Phi = (qtab @ np.asarray(f)) * (grid.h1 * grid.h2)     # (n2+1, n1+1)
    mixed = Phi[1:, 1:] - Phi[:-1, 1:] - Phi[1:, :-1] + Phi[:-1, :-1]
    return (mixed / (grid.h1 * grid.h2)).reshape(grid.size)


# --------------------------------------------------------------------------
# 1-D difference-kernel operator
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel1D:
    """1-D operator S = c I + conv(v) on (0, omega), midpoint grid."""

    omega: float
    n: int
    c: complex
    v_lat: np.ndarray    # v at p h, p = -(n-1)..n-1

    def __post_init__(self):
        if self.v_lat.shape != (2 * self.n - 1,):
            raise InvalidArgumentError(
                f"v samples must have length {2*self.n - 1}, got {self.v_lat.shape}"
            )

    @property
    def h(self) -> float:
        return self.omega / self.n

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def dense(self) -> np.ndarray:
        idx = np.arange(self.n)
        P = idx[:, None] - idx[None, :] + (self.n - 1)
        return self.c * np.eye(self.n) + self.h * self.v_lat[P]


def kernel1d_from_profile(omega: float, n: int, c: complex, vfun) -> Kernel1D:
    h = omega / n
    p = np.arange(-(n - 1), n)
    return Kernel1D(omega, n, c, np.asarray(vfun(p * h), dtype=complex))


def rho_1d(k1: Kernel1D, lam: complex, mu: complex) -> complex:
    """1-D reflection-coefficient form: h sum e^{-i mu x} (S^{-1} e^{i lam x})."""
    x = k1.midpoints
    S = k1.dense()
    el = np.exp(1j * complex(lam) * x)
    em = np.exp(-1j * complex(mu) * x)
    try:
        sol = np.linalg.solve(S, el)
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError(f"1-D operator is singular: {exc}") from exc
    if np.linalg.cond(S) > 1e12:
        raise SingularOperatorError("1-D operator is numerically singular")
    return complex(k1.h * np.sum(em * sol))


# --------------------------------------------------------------------------
# reference bundle
# --------------------------------------------------------------------------

_BUNDLE_GUARD = 4096


def dense_everything(samples: KernelSamples, out_dir=None,
                     config_text: str = "") -> dict:
    """Assemble every operator densely and compute the reference numbers.

    Returns (and optionally serializes as CSV matrices + a JSON manifest)
    the dense S and its inverse, the identity residuals, both g blocks
    and a small rho table, all by brute force.
    """
    g = samples.grid
    if g.size > _BUNDLE_GUARD:
        raise InvalidArgumentError(
            f"dense_everything refused: {g.size} grid points exceed {_BUNDLE_GUARD}"
        )
    from .inversion import compute_g_blocks, g_symmetry_residual, rho_direct

    S = ConvOperator(samples)
    D = S.dense()
    Dinv = np.linalg.inv(D)
    pis = {1: assemble_pi(samples, 1), 2: assemble_pi(samples, 2)}
    resid = {
        "displacement_k1": displacement_identity_residual(S, pis[1], 1),
        "displacement_k2": displacement_identity_residual(S, pis[2], 2),
        "side_i2_k1": m4_identity_residual(samples, 2, 1),
        "side_i1_k2": m4_identity_residual(samples, 1, 2),
    }
    g12, g21 = compute_g_blocks(S, samples)
    resid["g_symmetry"] = g_symmetry_residual(g12, g21)
    lam_set = [(0.9, 1.7), (-1.3, 0.5)]
    mu_set = [(1.1, -0.4), (0.2, 2.3)]
    rho = np.array([[rho_direct(S, lam, mu) for lam in lam_set] for mu in mu_set])

    bundle = {
        "grid": {"omega1": g.omega1, "omega2": g.omega2, "n1": g.n1, "n2": g.n2},
        "residuals": resid,
        "rho_lam": lam_set,
        "rho_mu": mu_set,
        "matrices": {
            "S": D, "S_inv": Dinv,
            "g12": g12.mat, "g21": g21.mat,
            "rho_small": rho,
        },
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        shapes = {}
        for name, mat in bundle["matrices"].items():
            export_dense_csv(mat, out / f"{name}.csv")
            shapes[name] = list(np.asarray(mat).shape)
        manifest = {
            "schema": "diffkern2d-bundle-1",
            "grid": bundle["grid"],
            "residuals": {k: float(v) for k, v in resid.items()},
            "shapes": shapes,
            "tolerances": {"agreement": 1e-12, "rank_rel": 1e-10},
            "kernel_config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
    return bundle
