"""Closed-form and small-scale solutions of the splitting subproblems.

Four kernels: projection onto the positive semidefinite cone (spectral
clamp), projection onto the trace-one affine slice (uniform diagonal
shift), a simplex-constrained quadratic program (primal active set), and
the linear update of the unconstrained auxiliary block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ModelError, NumericalError, ShapeError
from .objective import grad_f_x
from .operators import AuxStack, ComponentStack, OperatorA

if TYPE_CHECKING:  # pragma: no cover
    from .solver import SolverParams

__all__ = [
    "SimplexQP",
    "project_psd",
    "project_psd_blocks",
    "project_trace_one",
    "project_trace_one_blocks",
    "project_simplex",
    "solve_simplex_qp",
    "x_update",
    "p_update",
    "z_update",
]

#: Eigenvalues in [-CLAMP_TOL, 0) are treated as roundoff and clamped.
CLAMP_TOL = 1e-12
#: Weights below -NEG_WEIGHT_TOL coming out of the QP indicate a solver
#: failure; anything closer to zero is clamped and renormalized.
NEG_WEIGHT_TOL = 1e-14


def project_psd(s: np.ndarray, clamp_tol: float = CLAMP_TOL) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix.

    The input is symmetrized first (drift control), eigendecomposed, and
    negative eigenvalues are clamped to zero.
    """
    a = np.asarray(s, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return project_psd_blocks(a[None, :, :], clamp_tol)[0]


def project_psd_blocks(blocks: np.ndarray, clamp_tol: float = CLAMP_TOL) -> np.ndarray:
    """Batched :func:`project_psd` over an (m, d, d) array."""
    sym = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        norms = np.linalg.norm(sym, axis=(1, 2))
        raise NumericalError(
            f"eigendecomposition failed (block norms {norms}): {exc}"
        ) from exc
    vals = np.maximum(vals, 0.0)
    out = (vecs * vals[:, None, :]) @ vecs.transpose(0, 2, 1)
    return 0.5 * (out + out.transpose(0, 2, 1))


def project_trace_one(v: np.ndarray) -> np.ndarray:
    """Nearest matrix with unit trace: shift the diagonal uniformly.

    Off-diagonal entries are returned bit-identical to the input.
    """
    a = np.asarray(v, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    d = a.shape[0]
    shift = (1.0 - float(np.trace(a))) / d
    out = a.copy()
    out[np.diag_indices(d)] += shift
    return out


def project_trace_one_blocks(blocks: np.ndarray) -> np.ndarray:
    """Batched :func:`project_trace_one` over an (m, d, d) array."""
    d = blocks.shape[1]
    shifts = (1.0 - np.trace(blocks, axis1=1, axis2=2)) / d
    out = blocks.copy()
    idx = np.arange(d)
    out[:, idx, idx] += shifts[:, None]
    return out


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(np.asarray(v, dtype=float).ravel())[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    mask = u + (1.0 - css) / ks > 0
    k = int(ks[mask][-1])
    tau = (1.0 - css[k - 1]) / k
    return np.maximum(v + tau, 0.0)


@dataclass
class SimplexQP:
    """Data of ``min 0.5 y'Ny - q'y + (mu1/2)||y - y_prev||^2`` on the simplex."""

    n_mat: np.ndarray
    q: np.ndarray
    y_prev: np.ndarray
    mu1: float

    def __post_init__(self):
        self.n_mat = np.asarray(self.n_mat, dtype=float)
        self.q = np.asarray(self.q, dtype=float).ravel()
        self.y_prev = np.asarray(self.y_prev, dtype=float).ravel()
        self.mu1 = float(self.mu1)
        m = self.q.size
        if self.n_mat.shape != (m, m):
            raise ShapeError(f"N shape {self.n_mat.shape} does not match q size {m}")
        if self.y_prev.size != m:
            raise ShapeError("y_prev size mismatch")
        if self.mu1 <= 0:
            raise ModelError(f"proximal weight must be positive, got {self.mu1}")
        if float(np.linalg.norm(self.n_mat - self.n_mat.T)) > 1e-10 * max(
            1.0, float(np.linalg.norm(self.n_mat))
        ):
            raise ShapeError("N must be symmetric")

    @property
    def m(self) -> int:
        return self.q.size

    def objective(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float).ravel()
        return float(
            0.5 * y @ self.n_mat @ y
            - self.q @ y
            + 0.5 * self.mu1 * np.sum((y - self.y_prev) ** 2)
        )


def _solve_face(h: np.ndarray, c: np.ndarray, free: np.ndarray):
    """Minimize the quadratic on the affine face where the active weights
    vanish; returns the free components and the equality multiplier."""
    k = free.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = h[np.ix_(free, free)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([c[free], [1.0]])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:k], float(sol[k])


def solve_simplex_qp(problem: SimplexQP, tol: float = 1e-10) -> np.ndarray:
    """Exact minimizer of the proximal weight subproblem on the simplex.

    Primal active-set method over simplex faces.  From a feasible point,
    the quadratic is minimized on the current face; a blocking bound adds
    the lowest-index violated constraint, and a face optimum releases the
    constraint with the most negative multiplier (lowest index on ties).
    Strong convexity of ``N + mu1 I`` makes the iteration finite.
    """
    m = problem.m
    if m == 1:
        return np.ones(1)
    eigs = np.linalg.eigvalsh(0.5 * (problem.n_mat + problem.n_mat.T))
    if float(eigs[0]) < -1e-8:
        raise ModelError(f"N has eigenvalue {eigs[0]:.3e} below -1e-8")
    h = problem.n_mat + problem.mu1 * np.eye(m)
    c = problem.q + problem.mu1 * problem.y_prev

    y = np.full(m, 1.0 / m)
    active = np.zeros(m, dtype=bool)
    # Face changes are monotone in the objective, so 2m crossings of each
    # boundary is a safe cap; typical runs take a handful of iterations.
    for _ in range(2 * m * m + 10):
        free = np.flatnonzero(~active)
        y_face = np.zeros(m)
        y_face[free], nu = _solve_face(h, c, free)
        neg = free[y_face[free] < -tol]
        if neg.size == 0:
            y = np.where(active, 0.0, y_face)
            sigma = h @ y - c + nu
            violated = np.flatnonzero(active & (sigma < -tol))
            if violated.size == 0:
                y = np.maximum(y, 0.0)
                total = float(np.sum(y))
                if total <= 0:
                    raise NumericalError("active-set solver lost the simplex")
                return y / total
            worst = violated[np.argmin(sigma[violated])]
            ties = violated[sigma[violated] <= sigma[worst] + tol]
            active[ties[0]] = False
            continue
        # Step toward the face optimum until the first bound blocks.
        diff = y - y_face
        blocking = free[(y_face[free] < -tol) & (diff[free] > 0)]
        alphas = y[blocking] / diff[blocking]
        alpha = float(np.min(alphas))
        enters = blocking[alphas <= alpha + 1e-15]
        y = np.maximum(y + min(1.0, alpha) * (y_face - y), 0.0)
        entering = int(enters[0])
        y[entering] = 0.0
        active[entering] = True
        if active.all():
            raise NumericalError("active-set solver emptied the simplex")
    raise NumericalError("active-set iteration cap exceeded")


def x_update(
    x_prev: ComponentStack,
    y_new: np.ndarray,
    lam: AuxStack,
    z: AuxStack,
    params: "SolverParams",
    rho,
    op: OperatorA | None = None,
) -> ComponentStack:
    """Linearized proximal component step.

    Assembles ``g = (-A'lam + mu2 x + eta A'z - grad_x f) / (2 eta + mu2)``
    blockwise and projects every block onto the PSD cone.
    """
    if op is None:
        op = OperatorA(x_prev.dims, x_prev.bipartitions)
    gx = grad_f_x(x_prev, y_new, rho)
    atl = op.transform_blocks(lam.transformed) + lam.copies
    atz = op.transform_blocks(z.transformed) + z.copies
    g = (
        -atl + params.mu2 * x_prev.blocks + params.eta * atz - gx.blocks
    ) / (2.0 * params.eta + params.mu2)
    return x_prev.like(project_psd_blocks(g))


def p_update(p_prev: AuxStack, z: AuxStack, params: "SolverParams") -> AuxStack:
    """Proximal step of the auxiliary feasibility block.

    The two isotropic quadratics centered at z and at the previous point
    combine exactly into one centered at their weighted mean
    ``v = (xi z + mu3 p_prev) / (xi + mu3)``; the transformed blocks of v
    are then projected onto the PSD cone and the copy blocks onto the
    trace-one slice.
    """
    w = 1.0 / (params.xi + params.mu3)
    vt = w * (params.xi * z.transformed + params.mu3 * p_prev.transformed)
    vc = w * (params.xi * z.copies + params.mu3 * p_prev.copies)
    return p_prev.like(project_psd_blocks(vt), project_trace_one_blocks(vc))


def z_update(
    x_new: ComponentStack,
    p_new: AuxStack,
    lam: AuxStack,
    params: "SolverParams",
    ax: AuxStack | None = None,
) -> AuxStack:
    """Exact minimizer of the unconstrained auxiliary block:
    ``z = (lam + eta A x + xi p) / (eta + xi)``."""
    if ax is None:
        ax = OperatorA(x_new.dims, x_new.bipartitions).apply(x_new)
    w = 1.0 / (params.eta + params.xi)
    return ax.like(
        w * (lam.transformed + params.eta * ax.transformed + params.xi * p_new.transformed),
        w * (lam.copies + params.eta * ax.copies + params.xi * p_new.copies),
    )
