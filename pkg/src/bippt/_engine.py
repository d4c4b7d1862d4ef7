"""Lockstep ensemble engine for the proximal splitting iteration.

Runs any number of independent trials of the same problem side by side:
every update is a batched array operation over the still-active trials,
so eigendecompositions and matrix products amortize their dispatch cost
across the whole ensemble.  Trials freeze individually the moment they
meet their stopping rule; the remaining ones are compacted and continue.
A single solve is simply an ensemble of size one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .objective import ModelProblem
from .operators import AuxStack, ComponentStack, OperatorA
from .prox import (
    SimplexQP,
    project_psd_blocks,
    project_simplex,
    project_trace_one_blocks,
    solve_simplex_qp,
)


def _project_psd_symmetric(blocks: np.ndarray) -> np.ndarray:
    """Spectral clamp for blocks that are symmetric by construction.

    Iterates stay bitwise symmetric (permutations, elementwise algebra
    and the symmetrized projector outputs preserve symmetry exactly), so
    the defensive pre-symmetrization of the general kernel is skipped.
    """
    vals, vecs = np.linalg.eigh(blocks)
    vals = np.maximum(vals, 0.0)
    out = (vecs * vals[:, None, :]) @ vecs.transpose(0, 2, 1)
    return 0.5 * (out + out.transpose(0, 2, 1))

#: Mirrors the solver-level constants; kept in one place by import there.
STAGNATION_DELTA = 1e-30
STAGNATION_SPAN = 100
TRACE_DENSE_UNTIL = 1000
TRACE_STRIDE = 100
DUAL_IDENTITY_TOL = 1e-9


@dataclass
class MemberState:
    """Terminal state and run log of one ensemble member."""

    seed: int
    iterations: int = 0
    termination: str = "max_iter"
    y: np.ndarray | None = None
    x: np.ndarray | None = None
    p_t: np.ndarray | None = None
    p_c: np.ndarray | None = None
    z_t: np.ndarray | None = None
    z_c: np.ndarray | None = None
    lam_t: np.ndarray | None = None
    lam_c: np.ndarray | None = None
    f: float = float("inf")
    violation_pz: float = float("inf")
    primal_residual: float = float("inf")
    stationarity: tuple = (0.0,) * 5
    trace: list = field(default_factory=list)
    dual_identity_max_gap: float = 0.0
    max_norms: dict = field(default_factory=lambda: {
        "x": 0.0, "y": 0.0, "p": 0.0, "z": 0.0, "lam": 0.0,
    })


def _pt_batch(op: OperatorA, blocks: np.ndarray) -> np.ndarray:
    """Per-block partial transposes of a (T, m, d, d) array."""
    return op.transform_batch(blocks)


_REDUCE_AXES = {2: (1,), 3: (1, 2), 4: (1, 2, 3)}


def _sumsq(a: np.ndarray) -> np.ndarray:
    """Per-trial squared Frobenius norm of trailing axes."""
    return np.sum(a * a, axis=_REDUCE_AXES[a.ndim])


def _solve_weights(n_batch, q_batch, y_prev, mu1):
    """Batched proximal simplex QP: one interior KKT solve for everyone,
    per-trial active-set fallback where a bound binds."""
    t, m = q_batch.shape
    if m == 1:
        return np.ones((t, 1))
    h = n_batch + mu1 * np.eye(m)
    c = q_batch + mu1 * y_prev
    kkt = np.zeros((t, m + 1, m + 1))
    kkt[:, :m, :m] = h
    kkt[:, :m, m] = 1.0
    kkt[:, m, :m] = 1.0
    rhs = np.concatenate([c, np.ones((t, 1))], axis=1)
    try:
        sol = np.linalg.solve(kkt, rhs[..., None])[..., 0]
        y = sol[:, :m]
        interior = np.min(y, axis=1) >= -1e-10
    except np.linalg.LinAlgError:
        y = np.zeros((t, m))
        interior = np.zeros(t, dtype=bool)
    if not interior.all():
        for i in np.flatnonzero(~interior):
            y[i] = solve_simplex_qp(SimplexQP(n_batch[i], q_batch[i], y_prev[i], mu1))
    idx = np.flatnonzero(interior)
    if idx.size:
        yi = np.maximum(y[idx], 0.0)
        y[idx] = yi / np.sum(yi, axis=1, keepdims=True)
    return y


class Ensemble:
    """Mutable lockstep state of the still-active trials."""

    def __init__(self, problem: ModelProblem, params, seeds, record_all=False):
        self.problem = problem
        self.params = params
        self.record_all = bool(record_all)
        self.op = OperatorA(problem.rho.dims, problem.bipartitions)
        self.rho = problem.rho.data
        self.rho_flat = self.rho.ravel()
        d, m = problem.d, problem.m
        t = len(seeds)
        self.members = [MemberState(seed=int(s)) for s in seeds]
        self.active = np.arange(t)

        self.y = np.full((t, m), 1.0 / m)
        self.x = np.empty((t, m, d, d))
        for j, s in enumerate(seeds):
            rng = np.random.default_rng(int(s))
            for i in range(m):
                g = rng.standard_normal((d, d))
                w = g @ g.T
                w = 0.5 * (w + w.T)
                self.x[j, i] = w / np.trace(w)
        self.z_t = _pt_batch(self.op, self.x)
        self.z_c = project_trace_one_blocks(
            self.x.reshape(t * m, d, d)
        ).reshape(t, m, d, d)
        self.p_t = self.z_t.copy()
        self.p_c = self.z_c.copy()
        self.lam_t = np.zeros_like(self.z_t)
        self.lam_c = np.zeros_like(self.z_c)
        self.stagnant = np.zeros(t, dtype=int)
        self.norm_max = np.zeros((t, 5))
        self.gap_max = np.zeros(t)

    # -- one lockstep iteration over the active slice ------------------

    def step_all(self, k: int) -> None:
        pr = self.params
        d, m = self.problem.d, self.problem.m
        a = self.active.size
        eta, xi, mu2, mu3 = pr.eta, pr.xi, pr.mu2, pr.mu3

        flat = self.x.reshape(a, m, d * d)
        n_batch = flat @ flat.transpose(0, 2, 1)
        q_batch = flat @ self.rho_flat
        y_new = _solve_weights(n_batch, q_batch, self.y, pr.mu1)

        res = (y_new[:, None, :] @ flat).reshape(a, d, d) - self.rho
        gx = y_new[:, :, None, None] * res[:, None, :, :]
        atl = _pt_batch(self.op, self.lam_t) + self.lam_c
        atz = _pt_batch(self.op, self.z_t) + self.z_c
        g = (-atl + mu2 * self.x + eta * atz - gx) / (2.0 * eta + mu2)

        w3 = 1.0 / (xi + mu3)
        vt = w3 * (xi * self.z_t + mu3 * self.p_t)
        vc = w3 * (xi * self.z_c + mu3 * self.p_c)

        stacked = np.concatenate(
            [g.reshape(a * m, d, d), vt.reshape(a * m, d, d)], axis=0
        )
        projected = _project_psd_symmetric(stacked)
        x_new = projected[: a * m].reshape(a, m, d, d)
        pt_new = projected[a * m:].reshape(a, m, d, d)
        pc_new = project_trace_one_blocks(vc.reshape(a * m, d, d)).reshape(a, m, d, d)

        ax_t = _pt_batch(self.op, x_new)
        ax_c = x_new
        wz = 1.0 / (eta + xi)
        zt_new = wz * (self.lam_t + eta * ax_t + xi * pt_new)
        zc_new = wz * (self.lam_c + eta * ax_c + xi * pc_new)
        rt = ax_t - zt_new
        rc = ax_c - zc_new
        lt_new = self.lam_t + eta * rt
        lc_new = self.lam_c + eta * rc

        # per-trial diagnostics; the objective and Lagrangian are filled
        # in lazily by finalize_diagnostics when a record or freeze needs
        # them
        pzt = pt_new - zt_new
        pzc = pc_new - zc_new
        self._violation = _sumsq(pzt) + _sumsq(pzc)
        self._primal_sq = _sumsq(rt) + _sumsq(rc)
        dzt = _sumsq(zt_new - self.z_t)
        dzc = _sumsq(zc_new - self.z_c)
        self._dz = np.sqrt(dzt + dzc)
        self._delta = (
            _sumsq(y_new - self.y)
            + _sumsq(x_new - self.x)
            + _sumsq(pt_new - self.p_t)
            + _sumsq(pc_new - self.p_c)
            + dzt
            + dzc
        )
        gap_sq = _sumsq(-xi * pzt - lt_new) + _sumsq(-xi * pzc - lc_new)
        lam_norm = np.sqrt(_sumsq(lt_new) + _sumsq(lc_new))
        self._dual_gap = np.sqrt(gap_sq)
        bad = self._dual_gap > DUAL_IDENTITY_TOL * (1.0 + lam_norm)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise NumericalError(
                f"iteration {k}: dual identity drift {self._dual_gap[j]:.3e} "
                f"(seed {self.members[self.active[j]].seed})"
            )
        self._rt, self._rc = rt, rc
        self._f = None
        self._lag = None

        self.y, self.x = y_new, x_new
        self.p_t, self.p_c = pt_new, pc_new
        self.z_t, self.z_c = zt_new, zc_new
        self.lam_t, self.lam_c = lt_new, lc_new

    def finalize_diagnostics(self) -> None:
        """Fill in the objective and augmented Lagrangian for the active
        slice; cheap relative to a step but skipped on unrecorded
        iterations."""
        if self._f is not None:
            return
        a = self.active.size
        d, m = self.problem.d, self.problem.m
        pr = self.params
        flat = self.x.reshape(a, m, d * d)
        self._f = 0.5 * _sumsq(
            (self.y[:, None, :] @ flat).reshape(a, d, d) - self.rho
        )
        mult = (np.sum(self.lam_t * self._rt, axis=(1, 2, 3))
                + np.sum(self.lam_c * self._rc, axis=(1, 2, 3)))
        self._lag = (self._f + 0.5 * pr.xi * self._violation + mult
                     + 0.5 * pr.eta * self._primal_sq)

    # -- stationarity residuals for the active slice -------------------

    def residuals_all(self) -> np.ndarray:
        pr = self.params
        d, m = self.problem.d, self.problem.m
        a = self.active.size
        xi = pr.xi
        flat = self.x.reshape(a, m, d * d)
        n_batch = flat @ flat.transpose(0, 2, 1)
        q_batch = flat @ self.rho_flat
        gy = (n_batch @ self.y[..., None])[..., 0] - q_batch
        r1 = np.empty(a)
        for j in range(a):
            r1[j] = np.linalg.norm(
                self.y[j] - project_simplex(self.y[j] - gy[j])
            )

        res = (self.y[:, None, :] @ flat).reshape(a, d, d) - self.rho
        gx = self.y[:, :, None, None] * res[:, None, :, :]
        atl = _pt_batch(self.op, self.lam_t) + self.lam_c
        moved = project_psd_blocks(
            (self.x - gx - atl).reshape(a * m, d, d)
        ).reshape(a, m, d, d)
        r2 = np.sqrt(_sumsq(self.x - moved))

        st = self.p_t - xi * (self.p_t - self.z_t)
        sc = self.p_c - xi * (self.p_c - self.z_c)
        proj_t = project_psd_blocks(st.reshape(a * m, d, d)).reshape(a, m, d, d)
        proj_c = project_trace_one_blocks(sc.reshape(a * m, d, d)).reshape(a, m, d, d)
        r3 = np.sqrt(_sumsq(self.p_t - proj_t) + _sumsq(self.p_c - proj_c))

        r4 = np.sqrt(
            _sumsq(xi * (self.z_t - self.p_t) - self.lam_t)
            + _sumsq(xi * (self.z_c - self.p_c) - self.lam_c)
        )
        ax_t = _pt_batch(self.op, self.x)
        r5 = np.sqrt(_sumsq(ax_t - self.z_t) + _sumsq(self.x - self.z_c))
        return np.stack([r1, r2, r3, r4, r5], axis=1)

    # -- bookkeeping ----------------------------------------------------

    def _freeze(self, positions, k: int, reasons) -> None:
        for j, reason in zip(positions, reasons):
            member = self.members[self.active[j]]
            member.iterations = k
            member.termination = reason
            member.y = self.y[j].copy()
            member.x = self.x[j].copy()
            member.p_t = self.p_t[j].copy()
            member.p_c = self.p_c[j].copy()
            member.z_t = self.z_t[j].copy()
            member.z_c = self.z_c[j].copy()
            member.lam_t = self.lam_t[j].copy()
            member.lam_c = self.lam_c[j].copy()
            member.f = float(self._f[j])
            member.violation_pz = float(self._violation[j])
            member.primal_residual = float(np.sqrt(self._primal_sq[j]))
            member.dual_identity_max_gap = float(self.gap_max[j])
            for name, col in zip(("x", "y", "p", "z", "lam"), range(5)):
                member.max_norms[name] = float(self.norm_max[j, col])

    def _compact(self, keep: np.ndarray) -> None:
        self.active = self.active[keep]
        self.y = self.y[keep].copy()
        self.x = self.x[keep].copy()
        self.p_t = self.p_t[keep].copy()
        self.p_c = self.p_c[keep].copy()
        self.z_t = self.z_t[keep].copy()
        self.z_c = self.z_c[keep].copy()
        self.lam_t = self.lam_t[keep].copy()
        self.lam_c = self.lam_c[keep].copy()
        self.stagnant = self.stagnant[keep].copy()
        self.norm_max = self.norm_max[keep].copy()
        self.gap_max = self.gap_max[keep].copy()

    def run(self, make_record) -> None:
        """Iterate until every member stops; ``make_record`` turns the
        per-trial diagnostic row into an IterationRecord."""
        pr = self.params
        for k in range(1, pr.max_iter + 1):
            self.step_all(k)
            scheduled = (
                self.record_all or k <= TRACE_DENSE_UNTIL or k % TRACE_STRIDE == 0
            )
            np.maximum(self.gap_max, self._dual_gap, out=self.gap_max)
            self._track_norms()

            dual_res = pr.eta * self._dz
            primal = np.sqrt(self._primal_sq)
            done_tol = np.maximum(dual_res, primal) <= pr.tol
            self.stagnant = np.where(
                self._delta < STAGNATION_DELTA, self.stagnant + 1, 0
            )
            done_stag = (~done_tol) & (self.stagnant >= STAGNATION_SPAN)
            done = done_tol | done_stag
            need_residuals = scheduled or done.any()
            res = None
            if need_residuals:
                self.finalize_diagnostics()
                res = self.residuals_all()

            for j in range(self.active.size):
                if not (scheduled or done[j]):
                    continue
                member = self.members[self.active[j]]
                rec = make_record(
                    iteration=k,
                    f=float(self._f[j]),
                    aug_lagrangian=float(self._lag[j]),
                    primal_residual=float(primal[j]),
                    violation_pz=float(self._violation[j]),
                    delta_w=float(self._delta[j]),
                    residuals=tuple(float(v) for v in res[j]),
                    dz_norm=float(self._dz[j]),
                    dual_identity_gap=float(self._dual_gap[j]),
                )
                member.trace.append(rec)
                if done[j]:
                    member.stationarity = rec.residuals

            if done.any():
                positions = np.flatnonzero(done)
                reasons = [
                    "tol" if done_tol[j] else "stagnation" for j in positions
                ]
                self._freeze(positions, k, reasons)
                keep = np.flatnonzero(~done)
                if keep.size == 0:
                    return
                self._compact(keep)

        # iteration cap: freeze whatever is left
        k = pr.max_iter
        self.finalize_diagnostics()
        res = self.residuals_all()
        for j in range(self.active.size):
            member = self.members[self.active[j]]
            if not member.trace or member.trace[-1].iteration != k:
                member.trace.append(make_record(
                    iteration=k,
                    f=float(self._f[j]),
                    aug_lagrangian=float(self._lag[j]),
                    primal_residual=float(np.sqrt(self._primal_sq[j])),
                    violation_pz=float(self._violation[j]),
                    delta_w=float(self._delta[j]),
                    residuals=tuple(float(v) for v in res[j]),
                    dz_norm=float(self._dz[j]),
                    dual_identity_gap=float(self._dual_gap[j]),
                ))
            member.stationarity = member.trace[-1].residuals
        self._freeze(np.arange(self.active.size), k,
                     ["max_iter"] * self.active.size)

    def _track_norms(self) -> None:
        current = np.stack([
            np.sqrt(_sumsq(self.x)),
            np.sqrt(_sumsq(self.y)),
            np.sqrt(_sumsq(self.p_t) + _sumsq(self.p_c)),
            np.sqrt(_sumsq(self.z_t) + _sumsq(self.z_c)),
            np.sqrt(_sumsq(self.lam_t) + _sumsq(self.lam_c)),
        ], axis=1)
        np.maximum(self.norm_max, current, out=self.norm_max)


def member_point(problem: ModelProblem, member: MemberState):
    """Reassemble a member's terminal arrays into typed stacks."""
    from .objective import PrimalDualPoint

    dims, bips = problem.rho.dims, problem.bipartitions
    x = ComponentStack(member.x, dims, bips)
    p = AuxStack(member.p_t, member.p_c, dims, bips)
    z = AuxStack(member.z_t, member.z_c, dims, bips)
    lam = AuxStack(member.lam_t, member.lam_c, dims, bips)
    return PrimalDualPoint(y=member.y, x=x, p=p, z=z, lam=lam)
