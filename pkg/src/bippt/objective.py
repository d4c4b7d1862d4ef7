"""Smooth objective, partial gradients, and the augmented Lagrangian.

The objective measures half the squared Frobenius distance between the
target state and a simplex-weighted mixture of candidate components.  It
is 1-smooth in the components for simplex weights and convex in each
block of variables separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

from .errors import ModelError, ShapeError
from .operators import AuxStack, ComponentStack, apply_A
from .states import Bipartition, DensityMatrix, check_density, enumerate_bipartitions

if TYPE_CHECKING:  # pragma: no cover
    from .solver import SolverParams

__all__ = [
    "ModelProblem",
    "PrimalDualPoint",
    "LagrangianTerms",
    "HessianBlocks",
    "objective_f",
    "grad_f_x",
    "grad_f_y",
    "gram",
    "augmented_lagrangian",
    "hessian_blocks",
]

#: Feasibility tolerance used when the Lagrangian checks indicator sets.
FEAS_TOL = 1e-8


def _rho_array(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=float)


@dataclass
class ModelProblem:
    """A target state, the bipartitions to mix over, and the penalty weight."""

    rho: DensityMatrix
    bipartitions: tuple[Bipartition, ...]
    xi: float

    def __post_init__(self):
        self.bipartitions = tuple(self.bipartitions)
        self.xi = float(self.xi)
        if self.xi <= 0:
            raise ModelError(f"penalty weight must be positive, got {self.xi}")
        if not self.bipartitions:
            raise ModelError("at least one bipartition is required")
        for b in self.bipartitions:
            if b.n_subsystems != self.rho.dims.n_subsystems:
                raise ShapeError(f"bipartition {b} does not match the state dims")
        report = check_density(self.rho)
        if not report.valid_state:
            raise ModelError(
                "target is not a valid state: "
                f"trace={report.trace:.3e}, min eig={report.min_eigenvalue:.3e}"
            )

    @classmethod
    def for_state(cls, rho: DensityMatrix, xi: float) -> "ModelProblem":
        """Problem over all canonical bipartitions of the state."""
        return cls(rho, enumerate_bipartitions(rho.dims.n_subsystems), xi)

    @property
    def m(self) -> int:
        return len(self.bipartitions)

    @property
    def d(self) -> int:
        return self.rho.d


@dataclass
class PrimalDualPoint:
    """Weights y, components x, auxiliaries p and z, and the multiplier."""

    y: np.ndarray
    x: ComponentStack
    p: AuxStack
    z: AuxStack
    lam: AuxStack

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.y.size != self.x.m:
            raise ShapeError(f"{self.y.size} weights for {self.x.m} components")
        if not np.all(np.isfinite(self.y)):
            raise ShapeError("weights must be finite")

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(
            self.y.copy(), self.x.copy(), self.p.copy(), self.z.copy(), self.lam.copy()
        )


def mixture_residual(x: ComponentStack, y: np.ndarray, rho) -> np.ndarray:
    """``sum_i y_i x_i - rho``, the common factor of f and its gradients."""
    r = _rho_array(rho)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != x.m:
        raise ShapeError(f"{y.size} weights for {x.m} components")
    if r.shape != (x.d, x.d):
        raise ShapeError(f"target shape {r.shape} does not match side {x.d}")
    return np.einsum("i,ijk->jk", y, x.blocks) - r


def objective_f(x: ComponentStack, y: np.ndarray, rho) -> float:
    """Half the squared Frobenius distance between rho and the mixture."""
    return 0.5 * float(np.linalg.norm(mixture_residual(x, y, rho)) ** 2)


def grad_f_x(x: ComponentStack, y: np.ndarray, rho) -> ComponentStack:
    """Blockwise gradient in the components: block i is ``y_i * residual``."""
    res = mixture_residual(x, y, rho)
    y = np.asarray(y, dtype=float).ravel()
    return x.like(y[:, None, None] * res[None, :, :])


def gram(x: ComponentStack, rho) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix ``N_ij = <x_i, x_j>`` and loads ``q_i = <x_i, rho>``."""
    r = _rho_array(rho)
    if r.shape != (x.d, x.d):
        raise ShapeError(f"target shape {r.shape} does not match side {x.d}")
    flat = x.blocks.reshape(x.m, -1)
    n_mat = flat @ flat.T
    q = flat @ r.ravel()
    return n_mat, q


def grad_f_y(x: ComponentStack, y: np.ndarray, rho) -> np.ndarray:
    """Gradient in the weights: ``N y - q``."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != x.m:
        raise ShapeError(f"{y.size} weights for {x.m} components")
    n_mat, q = gram(x, rho)
    return n_mat @ y - q


@dataclass(frozen=True)
class HessianBlocks:
    """Diagnostic view of the objective Hessian.

    The component-block Hessian is the Kronecker product of the weight
    outer product with the identity, so its largest eigenvalue is
    ``sum y_i^2`` (at most 1 on the simplex) and its smallest is 0.  The
    weight-block Hessian is the Gram matrix, returned explicitly.
    """

    y: np.ndarray
    lambda_max_m: float
    n_mat: np.ndarray


def hessian_blocks(x: ComponentStack, y: np.ndarray, rho=None) -> HessianBlocks:
    y = np.asarray(y, dtype=float).ravel()
    n_mat, _ = gram(x, rho if rho is not None else np.zeros((x.d, x.d)))
    return HessianBlocks(y=y.copy(), lambda_max_m=float(np.dot(y, y)), n_mat=n_mat)


@dataclass(frozen=True)
class LagrangianTerms:
    """Augmented Lagrangian value split into its four summands.

    ``infeasible`` names the violated indicator set when the point is
    outside the feasible region; the total is then +inf and the other
    fields still hold the finite summands.
    """

    total: float
    f: float
    penalty: float
    multiplier_term: float
    quadratic: float
    infeasible: str | None = None


def _min_eig_floor(blocks: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(blocks)[:, 0]))


def _feasibility_violation(point: PrimalDualPoint, tol: float) -> str | None:
    y = point.y
    if abs(float(np.sum(y)) - 1.0) > tol or float(np.min(y)) < -tol:
        return "y_simplex"
    if _min_eig_floor(0.5 * (point.x.blocks + point.x.blocks.transpose(0, 2, 1))) < -tol:
        return "x_psd"
    pt = point.p.transformed
    if _min_eig_floor(0.5 * (pt + pt.transpose(0, 2, 1))) < -tol:
        return "p_psd"
    traces = np.trace(point.p.copies, axis1=1, axis2=2)
    if float(np.max(np.abs(traces - 1.0))) > tol:
        return "p_trace"
    return None


def augmented_lagrangian(
    point: PrimalDualPoint,
    params: "SolverParams",
    rho,
    assume_feasible: bool = False,
    feas_tol: float = FEAS_TOL,
) -> LagrangianTerms:
    """Evaluate the augmented Lagrangian and its decomposition.

    The value is ``f + (xi/2)||p - z||^2 + <lam, Ax - z> +
    (eta/2)||Ax - z||^2`` plus the indicator functions of the weight
    simplex, the PSD components, and the auxiliary feasible set.  An
    infeasible point yields a flagged +inf instead of raising, so trace
    logging survives infeasible probes.
    """
    f_val = objective_f(point.x, point.y, rho)
    ax = apply_A(point.x)
    r = ax - point.z
    pz = point.p - point.z
    penalty = 0.5 * params.xi * pz.dot(pz)
    mult = point.lam.dot(r)
    quad = 0.5 * params.eta * r.dot(r)
    total = f_val + penalty + mult + quad
    infeasible = None
    if not assume_feasible:
        infeasible = _feasibility_violation(point, feas_tol)
        if infeasible is not None:
            total = float("inf")
    return LagrangianTerms(
        total=total,
        f=f_val,
        penalty=penalty,
        multiplier_term=mult,
        quadratic=quad,
        infeasible=infeasible,
    )
