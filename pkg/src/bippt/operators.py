"""Stacked solver variables and the implicit block constraint operator.

The linear constraint couples every candidate component with a partially
transposed copy and a plain copy.  Each block of the operator is a
permutation stacked over an identity, so its normal matrix is exactly
twice the identity.  The operator is applied through axis permutations
only; the explicit matrix is materialized solely for small-dimension
verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .states import Bipartition, SubsystemDims, transpose_axes

__all__ = [
    "ComponentStack",
    "AuxStack",
    "OperatorA",
    "vec",
    "mat",
    "apply_A",
    "apply_A_adjoint",
    "materialize_A",
    "verify_operator_identity",
]

#: Largest matrix side for which the explicit operator may be built.
MATERIALIZE_LIMIT = 16


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: entry (i, j) lands at j*d + i."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"vec expects a square matrix, got shape {a.shape}")
    return a.ravel(order="F").copy()


def mat(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vec` for a ``d x d`` matrix."""
    a = np.asarray(v, dtype=float).ravel()
    if a.size != d * d:
        raise ShapeError(f"vector length {a.size} is not {d}*{d}")
    return a.reshape((d, d), order="F").copy()


def _check_blocks(blocks: np.ndarray, dims: SubsystemDims, m: int) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=float)
    d = dims.total
    if blocks.ndim != 3 or blocks.shape[1:] != (d, d):
        raise ShapeError(
            f"expected blocks of shape (m, {d}, {d}), got {blocks.shape}"
        )
    if blocks.shape[0] != m:
        raise ShapeError(f"{blocks.shape[0]} blocks for {m} bipartitions")
    return blocks


@dataclass
class ComponentStack:
    """The m candidate component matrices, one per bipartition."""

    blocks: np.ndarray  # shape (m, d, d)
    dims: SubsystemDims
    bipartitions: tuple[Bipartition, ...]

    def __post_init__(self):
        self.bipartitions = tuple(self.bipartitions)
        for b in self.bipartitions:
            if b.n_subsystems != self.dims.n_subsystems:
                raise ShapeError(f"bipartition {b} does not match dims {self.dims.dims}")
        self.blocks = _check_blocks(self.blocks, self.dims, len(self.bipartitions))

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def d(self) -> int:
        return self.blocks.shape[1]

    def like(self, blocks: np.ndarray) -> "ComponentStack":
        """A stack with the same metadata around new blocks."""
        return ComponentStack(blocks, self.dims, self.bipartitions)

    def copy(self) -> "ComponentStack":
        return self.like(self.blocks.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    def dot(self, other: "ComponentStack") -> float:
        return float(np.vdot(self.blocks, other.blocks))

    def __add__(self, other):
        return self.like(self.blocks + other.blocks)

    def __sub__(self, other):
        return self.like(self.blocks - other.blocks)

    def __mul__(self, scalar: float):
        return self.like(self.blocks * float(scalar))

    __rmul__ = __mul__


@dataclass
class AuxStack:
    """Auxiliary variables: m transformed blocks plus m plain copies."""

    transformed: np.ndarray  # shape (m, d, d)
    copies: np.ndarray  # shape (m, d, d)
    dims: SubsystemDims
    bipartitions: tuple[Bipartition, ...]

    def __post_init__(self):
        self.bipartitions = tuple(self.bipartitions)
        for b in self.bipartitions:
            if b.n_subsystems != self.dims.n_subsystems:
                raise ShapeError(f"bipartition {b} does not match dims {self.dims.dims}")
        m = len(self.bipartitions)
        self.transformed = _check_blocks(self.transformed, self.dims, m)
        self.copies = _check_blocks(self.copies, self.dims, m)

    @property
    def m(self) -> int:
        return self.transformed.shape[0]

    def like(self, transformed: np.ndarray, copies: np.ndarray) -> "AuxStack":
        return AuxStack(transformed, copies, self.dims, self.bipartitions)

    def copy(self) -> "AuxStack":
        return self.like(self.transformed.copy(), self.copies.copy())

    def norm(self) -> float:
        return float(
            np.sqrt(np.vdot(self.transformed, self.transformed)
                    + np.vdot(self.copies, self.copies))
        )

    def dot(self, other: "AuxStack") -> float:
        return float(
            np.vdot(self.transformed, other.transformed)
            + np.vdot(self.copies, other.copies)
        )

    def __add__(self, other):
        return self.like(self.transformed + other.transformed,
                         self.copies + other.copies)

    def __sub__(self, other):
        return self.like(self.transformed - other.transformed,
                         self.copies - other.copies)

    def __mul__(self, scalar: float):
        s = float(scalar)
        return self.like(self.transformed * s, self.copies * s)

    __rmul__ = __mul__


class OperatorA:
    """The block constraint operator defined by dims and bipartitions.

    Maps a component stack x to the auxiliary stack
    ``(Gamma_1(x_1), ..., Gamma_m(x_m), x_1, ..., x_m)``.  Each partial
    transpose is an involutive entry permutation, hence self-adjoint,
    and ``A^T A = 2 I`` holds exactly.
    """

    def __init__(self, dims: SubsystemDims, bipartitions: tuple[Bipartition, ...]):
        self.dims = dims
        self.bipartitions = tuple(bipartitions)
        n = dims.n_subsystems
        self._tensor_shape = dims.dims + dims.dims
        self._axes = [transpose_axes(n, b.left) for b in self.bipartitions]
        # flat gather map: one permutation of the stacked (m * d^2) entries
        # applies every block's partial transpose in a single indexing op
        d = dims.total
        r_idx = np.repeat(np.arange(d), d)
        c_idx = np.tile(np.arange(d), d)
        rdig = np.array(np.unravel_index(r_idx, dims.dims))
        cdig = np.array(np.unravel_index(c_idx, dims.dims))
        perms = np.empty((len(self.bipartitions), d * d), dtype=np.intp)
        for i, part in enumerate(self.bipartitions):
            rd, cd = rdig.copy(), cdig.copy()
            for s in part.left:
                rd[s - 1], cd[s - 1] = cdig[s - 1], rdig[s - 1]
            # source entry of output position (r, c) in C order
            perms[i] = (np.ravel_multi_index(tuple(rd), dims.dims) * d
                        + np.ravel_multi_index(tuple(cd), dims.dims))
        offsets = (np.arange(len(self.bipartitions), dtype=np.intp) * (d * d))[:, None]
        self._flat_perm = (perms + offsets).ravel()

    @property
    def m(self) -> int:
        return len(self.bipartitions)

    def transform_blocks(self, blocks: np.ndarray) -> np.ndarray:
        """Apply the per-block partial transposes to an (m, d, d) array."""
        m, d, _ = blocks.shape
        return blocks.reshape(m * d * d)[self._flat_perm].reshape(m, d, d)

    def transform_batch(self, blocks: np.ndarray) -> np.ndarray:
        """Per-block partial transposes over a (T, m, d, d) batch."""
        t, m, d, _ = blocks.shape
        return blocks.reshape(t, m * d * d)[:, self._flat_perm].reshape(t, m, d, d)

    def apply(self, x: ComponentStack) -> AuxStack:
        if x.bipartitions != self.bipartitions or x.dims != self.dims:
            raise ShapeError("component stack does not match this operator")
        return AuxStack(
            self.transform_blocks(x.blocks), x.blocks.copy(),
            self.dims, self.bipartitions,
        )

    def adjoint(self, v: AuxStack) -> ComponentStack:
        if v.bipartitions != self.bipartitions or v.dims != self.dims:
            raise ShapeError("auxiliary stack does not match this operator")
        return ComponentStack(
            self.transform_blocks(v.transformed) + v.copies,
            self.dims, self.bipartitions,
        )

    def materialize(self) -> np.ndarray:
        """Explicit matrix of shape ``(2 m d^2, m d^2)``; small dims only."""
        d = self.dims.total
        if d > MATERIALIZE_LIMIT:
            raise ShapeError(
                f"refusing to materialize the operator for d={d} > {MATERIALIZE_LIMIT}"
            )
        m = self.m
        dims = self.dims.dims
        a = np.zeros((2 * m * d * d, m * d * d))
        # Each block permutes vec indices: the column of basis entry (r, c)
        # is c*d + r, and the entry moves to (r', c') with the multi-index
        # digits of r and c swapped on the selected subsystems.
        r_idx = np.repeat(np.arange(d), d)
        c_idx = np.tile(np.arange(d), d)
        rdig = np.array(np.unravel_index(r_idx, dims))
        cdig = np.array(np.unravel_index(c_idx, dims))
        eye = np.arange(d * d)
        for i, part in enumerate(self.bipartitions):
            rd, cd = rdig.copy(), cdig.copy()
            for s in part.left:
                rd[s - 1], cd[s - 1] = cdig[s - 1], rdig[s - 1]
            dst = np.ravel_multi_index(tuple(cd), dims) * d + np.ravel_multi_index(tuple(rd), dims)
            src = c_idx * d + r_idx
            col0 = i * d * d
            a[i * d * d + dst, col0 + src] = 1.0
            a[(m + i) * d * d + eye, col0 + eye] = 1.0
        return a


def apply_A(x: ComponentStack) -> AuxStack:
    """Apply the constraint operator to a component stack."""
    return OperatorA(x.dims, x.bipartitions).apply(x)


def apply_A_adjoint(v: AuxStack) -> ComponentStack:
    """Apply the adjoint: transpose the transformed blocks back and add
    the plain copies."""
    return OperatorA(v.dims, v.bipartitions).adjoint(v)


def materialize_A(
    dims: SubsystemDims, bipartitions: tuple[Bipartition, ...]
) -> np.ndarray:
    return OperatorA(dims, bipartitions).materialize()


def verify_operator_identity(
    dims: SubsystemDims,
    bipartitions: tuple[Bipartition, ...] | None = None,
    probes: int = 20,
    seed: int = 0,
    tol: float = 1e-12,
) -> tuple[bool, float]:
    """Check ``A^T A = 2 I``.

    For ``d <= 16`` the operator is materialized and the product compared
    entrywise with twice the identity; for larger systems the identity is
    probed with random stacks through the implicit maps.

    Returns
    -------
    (ok, max_deviation)
    """
    from .states import enumerate_bipartitions

    if bipartitions is None:
        bipartitions = enumerate_bipartitions(dims.n_subsystems)
    op = OperatorA(dims, bipartitions)
    d = dims.total
    if d <= MATERIALIZE_LIMIT:
        a = op.materialize()
        dev = float(np.max(np.abs(a.T @ a - 2.0 * np.eye(a.shape[1]))))
        return dev <= tol, dev
    rng = np.random.default_rng(seed)
    dev = 0.0
    blocks = np.empty((len(bipartitions), d, d))
    for _ in range(probes):
        rng.random(out=blocks)
        x = ComponentStack(blocks, dims, bipartitions)
        back = op.adjoint(op.apply(x))
        target = 2.0 * blocks
        if not np.array_equal(back.blocks, target):
            dev = max(dev, float(np.max(np.abs(back.blocks - target))))
    return dev <= tol, dev
