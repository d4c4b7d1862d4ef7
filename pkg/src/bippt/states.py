"""Multipartite density-matrix algebra.

Real symmetric states on a tensor product of finite-dimensional
subsystems: subsystem-aware indexing, partial transposes over arbitrary
subsystem subsets, enumeration of canonical bipartitions, the reference
states used in the experiments, and a plain-text matrix file format.

Subsystem 1 is the slowest-varying tensor index, i.e. product vectors
are ``v1 (x) v2 (x) ... (x) vN`` in standard Kronecker order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ArityError, DomainError, ShapeError

__all__ = [
    "SubsystemDims",
    "DensityMatrix",
    "Bipartition",
    "DensityReport",
    "enumerate_bipartitions",
    "partial_transpose",
    "partial_transpose_array",
    "transpose_axes",
    "make_state",
    "ghz_vector",
    "w_vector",
    "weighted_ghz_vector",
    "check_density",
    "symmetrize",
    "read_state_text",
    "write_state_text",
]

#: Relative tolerance for the symmetry invariant of a density matrix.
SYMMETRY_TOL = 1e-12
#: Absolute tolerance on ``tr(rho) = 1`` for a valid state.
TRACE_TOL = 1e-12
#: Eigenvalue floor for a valid state.
PSD_TOL = 1e-10


@dataclass(frozen=True)
class SubsystemDims:
    """Ordered local dimensions ``(n1, ..., nN)`` of a multipartite system."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) == 0:
            raise ArityError("at least one subsystem is required")
        for n in dims:
            if n < 2:
                raise DomainError(f"subsystem dimension {n} < 2 is not allowed")

    @classmethod
    def of(cls, *dims: int) -> "SubsystemDims":
        return cls(tuple(dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return math.prod(self.dims)


DimsLike = Union[SubsystemDims, Sequence[int]]


def _as_dims(dims: DimsLike) -> SubsystemDims:
    if isinstance(dims, SubsystemDims):
        return dims
    return SubsystemDims(tuple(dims))


@dataclass
class DensityMatrix:
    """A real symmetric ``d x d`` matrix with subsystem metadata.

    Symmetry is enforced at construction.  Unit trace and positive
    semidefiniteness define a *valid state* and are reported by
    :func:`check_density` rather than enforced here, since intermediate
    solver iterates legitimately violate them.
    """

    data: np.ndarray
    dims: SubsystemDims

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.dims = _as_dims(self.dims)
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {self.data.shape}")
        d = self.dims.total
        if self.data.shape[0] != d:
            raise ShapeError(
                f"matrix side {self.data.shape[0]} does not match "
                f"subsystem dimensions {self.dims.dims} (product {d})"
            )
        scale = max(1.0, float(np.linalg.norm(self.data)))
        if float(np.linalg.norm(self.data - self.data.T)) > SYMMETRY_TOL * scale:
            raise ShapeError("matrix is not symmetric; use symmetrize() first")

    @property
    def d(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.data))

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.data.copy(), self.dims)


@dataclass(frozen=True)
class Bipartition:
    """A canonical bipartition of ``{1, ..., N}``, named by its left part.

    ``left`` is a sorted tuple of 1-based subsystem indices.  Canonical
    means ``|left| <= floor(N/2)`` and, when N is even and the parts tie
    in size, subsystem 1 belongs to ``left``.  Together with identifying
    a split with its complement this yields exactly ``2**(N-1) - 1``
    distinct bipartitions.
    """

    left: tuple[int, ...]
    n_subsystems: int

    def __post_init__(self):
        left = tuple(sorted(int(i) for i in self.left))
        object.__setattr__(self, "left", left)
        n = int(self.n_subsystems)
        object.__setattr__(self, "n_subsystems", n)
        if n < 2:
            raise ArityError(f"a bipartition needs at least 2 subsystems, got {n}")
        if len(left) == 0:
            raise DomainError("left part must be nonempty")
        if len(set(left)) != len(left):
            raise DomainError(f"duplicate subsystem indices in {left}")
        if left[0] < 1 or left[-1] > n:
            raise DomainError(f"subsystem indices {left} outside 1..{n}")
        if len(left) > n // 2:
            raise DomainError(
                f"left part {left} larger than floor(N/2); use the complement"
            )
        if n % 2 == 0 and len(left) == n // 2 and left[0] != 1:
            raise DomainError(
                f"tied split {left} must contain subsystem 1 to be canonical"
            )

    @property
    def complement(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.n_subsystems + 1) if i not in self.left)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.left) + "}"


def enumerate_bipartitions(n_subsystems: int) -> tuple[Bipartition, ...]:
    """All canonical bipartitions of ``{1, ..., N}``.

    Returned sorted by ``(|left|, left)`` lexicographically, which is
    deterministic across runs.  The count is ``2**(N-1) - 1``.

    Parameters
    ----------
    n_subsystems : int
        Number of subsystems, at least 2.
    """
    n = int(n_subsystems)
    if n < 2:
        raise ArityError(f"need at least 2 subsystems, got {n}")
    parts = []
    for size in range(1, n // 2 + 1):
        for combo in itertools.combinations(range(1, n + 1), size):
            if n % 2 == 0 and size == n // 2 and combo[0] != 1:
                continue
            parts.append(Bipartition(combo, n))
    return tuple(parts)


def transpose_axes(n_subsystems: int, subsystems: Iterable[int]) -> tuple[int, ...]:
    """Axis permutation realizing a partial transpose on a rank-2N tensor.

    ``subsystems`` are 1-based.  Row axis k and column axis N+k swap for
    every selected subsystem.
    """
    n = int(n_subsystems)
    axes = list(range(2 * n))
    for s in subsystems:
        k = int(s) - 1
        if not 0 <= k < n:
            raise DomainError(f"subsystem index {s} outside 1..{n}")
        axes[k], axes[n + k] = axes[n + k], axes[k]
    return tuple(axes)


def partial_transpose_array(
    a: np.ndarray, dims: Sequence[int], subsystems: Iterable[int]
) -> np.ndarray:
    """Partial transpose of a raw ``d x d`` array, as an index permutation."""
    dims = tuple(int(n) for n in dims)
    d = math.prod(dims)
    if a.shape != (d, d):
        raise ShapeError(f"array shape {a.shape} does not match dims {dims}")
    axes = transpose_axes(len(dims), subsystems)
    if axes == tuple(range(2 * len(dims))):
        return a.copy()
    return np.ascontiguousarray(a.reshape(dims + dims).transpose(axes).reshape(d, d))


def partial_transpose(
    m: DensityMatrix, part: Union[Bipartition, Iterable[int]]
) -> DensityMatrix:
    """Partial transpose of ``m`` over the subsystems in ``part``.

    Entrywise, multi-indices ``i = (i1..iN)``, ``j = (j1..jN)`` map to
    ``i'_k = j_k`` and ``j'_k = i_k`` for every selected subsystem k, and
    stay fixed otherwise.  The operation is linear, involutive and
    trace-preserving, and is applied as an implicit index permutation
    (no permutation matrix is ever built).

    Parameters
    ----------
    m : DensityMatrix
        Input matrix.
    part : Bipartition or iterable of int
        1-based subsystem indices to transpose.  A non-canonical subset
        is accepted; for symmetric matrices the complement gives the
        same result.
    """
    subsystems = part.left if isinstance(part, Bipartition) else tuple(part)
    if isinstance(part, Bipartition) and part.n_subsystems != m.dims.n_subsystems:
        raise ShapeError(
            f"bipartition over {part.n_subsystems} subsystems applied to "
            f"a {m.dims.n_subsystems}-partite matrix"
        )
    out = partial_transpose_array(m.data, m.dims.dims, subsystems)
    return DensityMatrix(out, m.dims)


def _basis_index(dims: tuple[int, ...], levels: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(int(l) for l in levels), dims))


def ghz_vector(dims: DimsLike, levels: tuple[int, int] | None = None) -> np.ndarray:
    """Unnormalized GHZ-type vector ``|l0...l0> + |l1...l1>``.

    ``levels`` defaults to the lowest and highest level available on
    every subsystem.
    """
    sd = _as_dims(dims)
    if levels is None:
        levels = (0, min(sd.dims) - 1)
    lo, hi = levels
    for level in (lo, hi):
        if any(level >= n for n in sd.dims):
            raise DomainError(f"level {level} unavailable for dims {sd.dims}")
    v = np.zeros(sd.total)
    v[_basis_index(sd.dims, [lo] * sd.n_subsystems)] += 1.0
    v[_basis_index(sd.dims, [hi] * sd.n_subsystems)] += 1.0
    return v


def w_vector() -> np.ndarray:
    """Unnormalized three-qubit W vector ``|001> + |010> + |100>``."""
    v = np.zeros(8)
    v[[1, 2, 4]] = 1.0
    return v


def weighted_ghz_vector(dims: DimsLike, coeffs: Sequence[float]) -> np.ndarray:
    """Weighted GHZ-type vector ``sum_k c_k |k k ... k>``.

    One coefficient per level; level k must exist on every subsystem.
    """
    sd = _as_dims(dims)
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) > min(sd.dims):
        raise DomainError(
            f"{len(coeffs)} coefficients need level {len(coeffs) - 1}, "
            f"unavailable for dims {sd.dims}"
        )
    v = np.zeros(sd.total)
    for k, c in enumerate(coeffs):
        v[_basis_index(sd.dims, [k] * sd.n_subsystems)] = c
    return v


_KIND_DIMS = {
    "w3": (2, 2, 2),
    "ghz3": (2, 2, 2),
    "ghz5": (3, 3, 3, 3, 3),
    "mghz5": (3, 3, 3, 3, 3),
}


def make_state(
    kind: str,
    dims: DimsLike | None = None,
    noise: float = 0.0,
    coeffs: Sequence[float] | None = None,
    vector: np.ndarray | None = None,
) -> DensityMatrix:
    """Build a normalized test state ``rho = (v v^T + noise*I) / trace``.

    Parameters
    ----------
    kind : str
        One of ``w3``, ``ghz3``, ``ghz5``, ``mghz5``, ``custom``.
    dims : SubsystemDims or sequence of int, optional
        Required for ``custom``; otherwise must match the kind when given
        (``w3``/``ghz3`` live on (2,2,2), ``ghz5``/``mghz5`` on
        (3,3,3,3,3)).
    noise : float
        Admixture weight of the identity, must be nonnegative.
    coeffs : sequence of float, optional
        Level weights ``(m, n, s)`` for ``mghz5``; defaults to (1, 1, 1).
    vector : ndarray, optional
        The defining vector for ``custom``.
    """
    kind = kind.lower()
    noise = float(noise)
    if noise < 0:
        raise DomainError(f"noise weight must be nonnegative, got {noise}")

    if kind == "custom":
        if vector is None or dims is None:
            raise ShapeError("custom states need both a vector and dims")
        sd = _as_dims(dims)
        v = np.asarray(vector, dtype=float).ravel()
        if v.size != sd.total:
            raise ShapeError(
                f"vector length {v.size} does not match dims {sd.dims}"
            )
    elif kind in _KIND_DIMS:
        expected = _KIND_DIMS[kind]
        sd = _as_dims(dims) if dims is not None else SubsystemDims(expected)
        if sd.dims != expected:
            raise ShapeError(f"kind {kind!r} requires dims {expected}, got {sd.dims}")
        if kind == "w3":
            v = w_vector()
        elif kind == "ghz3":
            v = ghz_vector(sd)
        elif kind == "ghz5":
            v = ghz_vector(sd, levels=(0, 2))
        else:  # mghz5
            v = weighted_ghz_vector(sd, coeffs if coeffs is not None else (1.0, 1.0, 1.0))
    else:
        raise DomainError(f"unknown state kind {kind!r}")

    omega = np.outer(v, v) + noise * np.eye(sd.total)
    return DensityMatrix(omega / np.trace(omega), sd)


@dataclass(frozen=True)
class DensityReport:
    """Validity report produced by :func:`check_density`."""

    symmetric: bool
    trace: float
    min_eigenvalue: float
    psd: bool

    @property
    def valid_state(self) -> bool:
        return (
            self.symmetric
            and abs(self.trace - 1.0) <= TRACE_TOL
            and self.min_eigenvalue >= -PSD_TOL
        )


def check_density(m: DensityMatrix | np.ndarray, tol: float = PSD_TOL) -> DensityReport:
    """Report symmetry, trace and spectrum bounds; never raises."""
    a = m.data if isinstance(m, DensityMatrix) else np.asarray(m, dtype=float)
    scale = max(1.0, float(np.linalg.norm(a)))
    symmetric = float(np.linalg.norm(a - a.T)) <= SYMMETRY_TOL * scale
    trace = float(np.trace(a))
    try:
        min_eig = float(np.linalg.eigvalsh(a)[0])
    except np.linalg.LinAlgError:
        min_eig = float("nan")
    psd = bool(min_eig >= -tol)
    return DensityReport(symmetric=symmetric, trace=trace, min_eigenvalue=min_eig, psd=psd)


def symmetrize(m):
    """Return ``(M + M^T) / 2``; accepts and returns either raw arrays
    or :class:`DensityMatrix`."""
    if isinstance(m, DensityMatrix):
        return DensityMatrix(0.5 * (m.data + m.data.T), m.dims)
    a = np.asarray(m, dtype=float)
    return 0.5 * (a + a.T)


def write_state_text(path, state: DensityMatrix) -> None:
    """Write a state in the plain-text matrix format.

    Line 1 holds the integer side length d, line 2 the space-separated
    subsystem dimensions, and the following d lines hold d decimal
    floats each (row-major) at 17 significant digits, which round-trips
    IEEE doubles exactly.
    """
    d = state.d
    lines = [str(d), " ".join(str(n) for n in state.dims.dims)]
    for row in state.data:
        lines.append(" ".join(format(v, ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_state_text(path) -> DensityMatrix:
    """Read a state written by :func:`write_state_text`."""
    tokens = Path(path).read_text(encoding="ascii").split("\n")
    tokens = [line for line in tokens if line.strip()]
    if len(tokens) < 3:
        raise ShapeError(f"{path}: truncated matrix file")
    d = int(tokens[0].strip())
    dims = SubsystemDims(tuple(int(t) for t in tokens[1].split()))
    if len(tokens) != d + 2:
        raise ShapeError(f"{path}: expected {d} matrix rows, found {len(tokens) - 2}")
    data = np.empty((d, d))
    for i, line in enumerate(tokens[2:]):
        row = np.array(line.split(), dtype=float)
        if row.size != d:
            raise ShapeError(f"{path}: row {i} has {row.size} entries, expected {d}")
        data[i] = row
    return DensityMatrix(data, dims)
