"""Linearized proximal ADMM driver.

One iteration updates, in order: the mixture weights (simplex QP), the
components (linearized proximal step plus spectral projection), the
feasible auxiliaries (blockwise projections), the free auxiliaries
(exact linear solve), and the multiplier.  The driver validates the
regularization parameters against the sufficient-descent conditions,
monitors descent and the dual identity, logs a thinned trace, and runs
seeded multi-trial searches.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ModelError, NumericalError
from .objective import (
    ModelProblem,
    PrimalDualPoint,
    grad_f_y,
    gram,
    objective_f,
)
from .operators import AuxStack, ComponentStack, OperatorA
from .prox import (
    SimplexQP,
    project_psd_blocks,
    project_simplex,
    project_trace_one_blocks,
    solve_simplex_qp,
    p_update,
    x_update,
    z_update,
)

__all__ = [
    "SolverParams",
    "ParamCheck",
    "IterationRecord",
    "SolveResult",
    "TrialSummary",
    "TrialsResult",
    "DescentReport",
    "TRACE_COLUMNS",
    "validate_params",
    "init_point",
    "step",
    "stationarity_residuals",
    "solve",
    "run_trials",
    "descent_certificate",
    "write_trace_csv",
]

#: Exact header of the trace CSV.
TRACE_COLUMNS = (
    "iter,f,aug_lagrangian,primal_residual,violation_pz,delta_w,r1,r2,r3,r4,r5"
)

#: Relative slack for the dual identity check at every iteration.
DUAL_IDENTITY_TOL = 1e-9
#: A step shorter than this for 100 consecutive iterations stops the run.
STAGNATION_DELTA = 1e-30
STAGNATION_SPAN = 100
#: Dense trace up to this iteration, every 100th afterwards.
TRACE_DENSE_UNTIL = 1000
TRACE_STRIDE = 100


@dataclass(frozen=True)
class SolverParams:
    """Regularization weights and run limits.

    Strict mode requires ``eta > 2 xi``, ``mu2 > lipschitz_bound`` and
    ``mu3 > 2 xi^2 / eta``; the tightened mode keeps ``mu2 = 0`` at the
    price of ``eta > max(lipschitz_bound, 2 xi)``.
    """

    xi: float
    eta: float
    mu1: float = 0.1
    mu2: float = 1.1
    mu3: float | None = None
    lipschitz_bound: float = 1.0
    tol: float = 1e-8
    max_iter: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.mu3 is None:
            object.__setattr__(self, "mu3", float(self.xi))

    @classmethod
    def defaults(cls, xi: float, **overrides) -> "SolverParams":
        """The standard configuration: ``eta = 2 xi + 1``, ``mu1 = 0.1``,
        ``mu2 = 1.1``, ``mu3 = xi``."""
        base = dict(xi=float(xi), eta=2.0 * float(xi) + 1.0, mu1=0.1, mu2=1.1,
                    mu3=float(xi))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def tightened(cls, xi: float, **overrides) -> "SolverParams":
        """The tightened configuration with ``mu2 = 0``."""
        xi = float(xi)
        eta = overrides.pop("eta", max(overrides.get("lipschitz_bound", 1.0), 2.0 * xi) + 1.0)
        base = dict(xi=xi, eta=eta, mu1=0.1, mu2=0.0, mu3=xi)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class ParamCheck:
    """Classification of a parameter set, with the descent margin."""

    mode: str  # "strict" | "tightened" | "invalid"
    nu: float | None = None
    reason: str | None = None

    @property
    def valid(self) -> bool:
        return self.mode in ("strict", "tightened")


def validate_params(params: SolverParams) -> ParamCheck:
    """Classify a parameter set against the descent conditions.

    Returns the margin ``nu = min(eta + mu2 - L, eta/2 - 2 xi^2/eta,
    mu3 - 2 xi^2/eta, mu1)`` for valid sets.
    """
    xi, eta = params.xi, params.eta
    mu1, mu2, mu3 = params.mu1, params.mu2, params.mu3
    lip = params.lipschitz_bound
    for name, value in (("xi", xi), ("eta", eta), ("mu1", mu1), ("mu3", mu3),
                        ("lipschitz_bound", lip), ("tol", params.tol)):
        if not value > 0:
            return ParamCheck("invalid", reason=f"{name} must be positive, got {value}")
    if mu2 < 0:
        return ParamCheck("invalid", reason=f"mu2 must be nonnegative, got {mu2}")
    if params.max_iter < 1:
        return ParamCheck("invalid", reason="max_iter must be at least 1")

    bound = 2.0 * xi * xi / eta
    nu = min(eta + mu2 - lip, 0.5 * eta - bound, mu3 - bound, mu1)
    if eta > 2.0 * xi and mu2 > lip and mu3 > bound:
        return ParamCheck("strict", nu=nu)
    if mu2 == 0.0 and eta > max(lip, 2.0 * xi) and mu3 > bound:
        return ParamCheck("tightened", nu=nu)
    if eta <= 2.0 * xi:
        return ParamCheck("invalid", reason=f"eta={eta} <= 2*xi={2 * xi}")
    if mu3 <= bound:
        return ParamCheck("invalid", reason=f"mu3={mu3} <= 2*xi^2/eta={bound}")
    return ParamCheck(
        "invalid", reason=f"mu2={mu2} is neither > lipschitz_bound={lip} nor zero"
    )


@dataclass
class IterationRecord:
    """Diagnostics of one iteration; ``residuals`` is the stationarity
    5-tuple, attached on recorded iterations."""

    iteration: int
    f: float
    aug_lagrangian: float
    primal_residual: float
    violation_pz: float
    delta_w: float
    residuals: tuple[float, float, float, float, float] | None = None
    # internal diagnostics, not part of the CSV
    dz_norm: float = 0.0
    dual_identity_gap: float = 0.0

    def csv_row(self) -> list:
        res = self.residuals if self.residuals is not None else (float("nan"),) * 5
        return [
            self.iteration,
            f"{self.f:.17g}",
            f"{self.aug_lagrangian:.17g}",
            f"{self.primal_residual:.17g}",
            f"{self.violation_pz:.17g}",
            f"{self.delta_w:.17g}",
            *(f"{r:.17g}" for r in res),
        ]


@dataclass
class SolveResult:
    """Terminal point and run summary of a single solve."""

    point: PrimalDualPoint
    f: float
    feasible_f: float
    violation_pz: float
    primal_residual: float
    iterations: int
    termination: str  # "tol" | "max_iter" | "stagnation"
    stationarity: tuple[float, float, float, float, float]
    trace: list[IterationRecord]
    seed: int
    params_mode: str
    dual_identity_max_gap: float
    max_norms: dict[str, float]

    @property
    def weights(self) -> np.ndarray:
        return self.point.y


@dataclass(frozen=True)
class TrialSummary:
    seed: int
    f: float
    violation_pz: float
    iterations: int
    termination: str


@dataclass
class TrialsResult:
    best: SolveResult
    summary: list[TrialSummary]


def init_point(problem: ModelProblem, seed: int) -> PrimalDualPoint:
    """Seeded random feasible start.

    Components are normalized Wishart draws ``G G^T / tr``, weights are
    uniform, the auxiliaries start consistent (``z = p = A x``) and the
    multiplier at zero.  Bit-identical across runs for a fixed seed.
    """
    rng = np.random.default_rng(int(seed))
    d, m = problem.d, problem.m
    blocks = np.empty((m, d, d))
    for i in range(m):
        g = rng.standard_normal((d, d))
        w = g @ g.T
        w = 0.5 * (w + w.T)
        blocks[i] = w / np.trace(w)
    x = ComponentStack(blocks, problem.rho.dims, problem.bipartitions)
    z = OperatorA(problem.rho.dims, problem.bipartitions).apply(x)
    z.copies = project_trace_one_blocks(z.copies)
    p = z.copy()
    lam = z.like(np.zeros_like(z.transformed), np.zeros_like(z.copies))
    y = np.full(m, 1.0 / m)
    return PrimalDualPoint(y=y, x=x, p=p, z=z, lam=lam)


def _lagrangian_at(f_val, violation_pz, mult, primal_sq, params) -> float:
    return f_val + 0.5 * params.xi * violation_pz + mult + 0.5 * params.eta * primal_sq


def stationarity_residuals(
    point: PrimalDualPoint, params: SolverParams, problem: ModelProblem,
    op: OperatorA | None = None,
) -> tuple[float, float, float, float, float]:
    """Projection-based optimality residuals.

    r1, r2, r3 measure the distance moved by one projected-gradient step
    of the weight, component and auxiliary blocks; r4 is the exact dual
    identity gap ``||xi (z - p) - lam||`` and r5 the constraint residual
    ``||A x - z||``.
    """
    if op is None:
        op = OperatorA(problem.rho.dims, problem.bipartitions)
    rho = problem.rho.data
    x, y, p, z, lam = point.x, point.y, point.p, point.z, point.lam

    gy = grad_f_y(x, y, rho)
    r1 = float(np.linalg.norm(y - project_simplex(y - gy)))

    res = np.einsum("i,ijk->jk", y, x.blocks) - rho
    gx = y[:, None, None] * res[None, :, :]
    atl = op.transform_blocks(lam.transformed) + lam.copies
    moved = project_psd_blocks(x.blocks - gx - atl)
    r2 = float(np.linalg.norm(x.blocks - moved))

    st = p.transformed - params.xi * (p.transformed - z.transformed)
    sc = p.copies - params.xi * (p.copies - z.copies)
    r3 = float(
        np.sqrt(
            np.linalg.norm(p.transformed - project_psd_blocks(st)) ** 2
            + np.linalg.norm(p.copies - project_trace_one_blocks(sc)) ** 2
        )
    )

    gap = params.xi * (z - p) - lam
    r4 = gap.norm()

    ax = op.apply(x)
    r5 = (ax - z).norm()
    return (r1, r2, r3, r4, r5)


def step(
    point: PrimalDualPoint,
    params: SolverParams,
    problem: ModelProblem,
    iteration: int = 1,
    with_residuals: bool = True,
    op: OperatorA | None = None,
) -> tuple[PrimalDualPoint, IterationRecord]:
    """One full update cycle, returning the new point and its record.

    Raises :class:`NumericalError` (with the iteration attached) if a
    subproblem fails or the dual identity drifts beyond tolerance.
    """
    if op is None:
        op = OperatorA(problem.rho.dims, problem.bipartitions)
    rho = problem.rho.data
    try:
        n_mat, q = gram(point.x, rho)
        y_new = solve_simplex_qp(SimplexQP(n_mat, q, point.y, params.mu1))
        x_new = x_update(point.x, y_new, point.lam, point.z, params, rho, op=op)
        p_new = p_update(point.p, point.z, params)
        ax = op.apply(x_new)
        z_new = z_update(x_new, p_new, point.lam, params, ax=ax)
        r = ax - z_new
        lam_new = point.lam + params.eta * r
    except NumericalError as exc:
        raise NumericalError(f"iteration {iteration}: {exc}") from exc

    pz = p_new - z_new
    violation = pz.dot(pz)
    primal_sq = r.dot(r)
    primal = float(np.sqrt(primal_sq))
    dz = (z_new - point.z).norm()
    delta = (
        float(np.sum((y_new - point.y) ** 2))
        + float(np.sum((x_new.blocks - point.x.blocks) ** 2))
        + float(np.sum((p_new.transformed - point.p.transformed) ** 2))
        + float(np.sum((p_new.copies - point.p.copies) ** 2))
        + float(np.sum((z_new.transformed - point.z.transformed) ** 2))
        + float(np.sum((z_new.copies - point.z.copies) ** 2))
    )

    gap = (pz * (-params.xi) - lam_new).norm()
    if gap > DUAL_IDENTITY_TOL * (1.0 + lam_new.norm()):
        raise NumericalError(
            f"iteration {iteration}: dual identity drift {gap:.3e}"
        )

    f_val = objective_f(x_new, y_new, rho)
    mult = lam_new.dot(r)
    lag = _lagrangian_at(f_val, violation, mult, primal_sq, params)

    new_point = PrimalDualPoint(y=y_new, x=x_new, p=p_new, z=z_new, lam=lam_new)
    record = IterationRecord(
        iteration=iteration,
        f=f_val,
        aug_lagrangian=lag,
        primal_residual=primal,
        violation_pz=violation,
        delta_w=delta,
        dz_norm=dz,
        dual_identity_gap=gap,
    )
    if with_residuals:
        record.residuals = stationarity_residuals(new_point, params, problem, op=op)
    return new_point, record


def _polish(point: PrimalDualPoint) -> tuple[np.ndarray, ComponentStack]:
    y = np.maximum(point.y, 0.0)
    total = float(np.sum(y))
    y = y / total if total > 0 else np.full_like(y, 1.0 / y.size)
    x = point.x.like(project_psd_blocks(point.x.blocks))
    return y, x


def _check_solvable(problem: ModelProblem, params: SolverParams) -> ParamCheck:
    check = validate_params(params)
    if not check.valid:
        raise ModelError(f"invalid parameters: {check.reason}")
    if abs(params.xi - problem.xi) > 0:
        raise ConfigError(
            f"params.xi={params.xi} differs from problem.xi={problem.xi}"
        )
    return check


def _result_from_member(problem, params, member, mode: str) -> SolveResult:
    from ._engine import member_point

    point = member_point(problem, member)
    y_pol, x_pol = _polish(point)
    return SolveResult(
        point=point,
        f=member.f,
        feasible_f=objective_f(x_pol, y_pol, problem.rho.data),
        violation_pz=member.violation_pz,
        primal_residual=member.primal_residual,
        iterations=member.iterations,
        termination=member.termination,
        stationarity=tuple(member.stationarity),
        trace=member.trace,
        seed=member.seed,
        params_mode=mode,
        dual_identity_max_gap=member.dual_identity_max_gap,
        max_norms=member.max_norms,
    )


def _run_ensemble(problem, params, seeds, record_all) -> list[SolveResult]:
    from ._engine import Ensemble

    check = _check_solvable(problem, params)
    ensemble = Ensemble(problem, params, seeds, record_all=record_all)
    ensemble.run(IterationRecord)
    return [
        _result_from_member(problem, params, member, check.mode)
        for member in ensemble.members
    ]


def solve(
    problem: ModelProblem,
    params: SolverParams,
    init: PrimalDualPoint | None = None,
    seed: int | None = None,
    record_all: bool = False,
) -> SolveResult:
    """Run the iteration to tolerance, iteration cap, or stagnation.

    Stops when ``max(eta ||z_k - z_{k-1}||, ||A x - z||) <= tol``.  The
    trace is dense for the first 1000 iterations and thinned to every
    100th afterwards (the final iteration is always kept); pass
    ``record_all`` to keep everything.  The result reports the objective
    both at the terminal iterate and after a feasibility polish.

    An explicit ``init`` runs the reference per-iteration path; seeded
    runs go through the lockstep engine shared with :func:`run_trials`.
    """
    if init is not None:
        return _solve_from_point(problem, params, init, seed, record_all)
    used_seed = int(params.seed if seed is None else seed)
    return _run_ensemble(problem, params, [used_seed], record_all)[0]


def _solve_from_point(
    problem: ModelProblem,
    params: SolverParams,
    init: PrimalDualPoint,
    seed: int | None,
    record_all: bool,
) -> SolveResult:
    check = _check_solvable(problem, params)
    used_seed = int(params.seed if seed is None else seed)
    point = init
    op = OperatorA(problem.rho.dims, problem.bipartitions)

    trace: list[IterationRecord] = []
    termination = "max_iter"
    stagnant = 0
    max_gap = 0.0
    norm_track = {"x": 0.0, "y": 0.0, "p": 0.0, "z": 0.0, "lam": 0.0}
    record = None
    k = 0
    for k in range(1, params.max_iter + 1):
        scheduled = record_all or k <= TRACE_DENSE_UNTIL or k % TRACE_STRIDE == 0
        point, record = step(
            point, params, problem, iteration=k, with_residuals=scheduled, op=op
        )
        max_gap = max(max_gap, record.dual_identity_gap)
        norm_track["x"] = max(norm_track["x"], point.x.norm())
        norm_track["y"] = max(norm_track["y"], float(np.linalg.norm(point.y)))
        norm_track["p"] = max(norm_track["p"], point.p.norm())
        norm_track["z"] = max(norm_track["z"], point.z.norm())
        norm_track["lam"] = max(norm_track["lam"], point.lam.norm())

        stop = False
        if max(params.eta * record.dz_norm, record.primal_residual) <= params.tol:
            termination = "tol"
            stop = True
        stagnant = stagnant + 1 if record.delta_w < STAGNATION_DELTA else 0
        if not stop and stagnant >= STAGNATION_SPAN:
            termination = "stagnation"
            stop = True
        if stop and record.residuals is None:
            record.residuals = stationarity_residuals(point, params, problem, op=op)
            scheduled = True
        if scheduled:
            trace.append(record)
        if stop:
            break
    if record is not None and (not trace or trace[-1].iteration != record.iteration):
        if record.residuals is None:
            record.residuals = stationarity_residuals(point, params, problem, op=op)
        trace.append(record)

    y_pol, x_pol = _polish(point)
    stat = trace[-1].residuals if trace else (0.0,) * 5
    return SolveResult(
        point=point,
        f=objective_f(point.x, point.y, problem.rho.data),
        feasible_f=objective_f(x_pol, y_pol, problem.rho.data),
        violation_pz=trace[-1].violation_pz if trace else 0.0,
        primal_residual=trace[-1].primal_residual if trace else 0.0,
        iterations=k,
        termination=termination,
        stationarity=stat,
        trace=trace,
        seed=used_seed,
        params_mode=check.mode,
        dual_identity_max_gap=max_gap,
        max_norms=norm_track,
    )


def _trial_worker(args) -> list[SolveResult]:
    problem, params, seeds, record_all = args
    return _run_ensemble(problem, params, seeds, record_all)


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("BIPPT_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"BIPPT_THREADS={env!r} is not an integer")
    return 1


def run_trials(
    problem: ModelProblem,
    params: SolverParams,
    n_trials: int,
    base_seed: int | None = None,
    workers: int | None = None,
    record_all: bool = False,
) -> TrialsResult:
    """Best-of-n independent solves from seeded random starts.

    Seeds run from ``base_seed`` upward; the result with the smallest
    terminal objective wins.  Worker count defaults to the
    ``BIPPT_THREADS`` environment variable (serial when unset); results
    are merged in seed order, so parallelism never changes the outcome.
    """
    if n_trials < 1:
        raise ConfigError(f"n_trials must be at least 1, got {n_trials}")
    start = int(params.seed if base_seed is None else base_seed)
    seeds = [start + i for i in range(int(n_trials))]
    n_workers = min(_worker_count(workers), len(seeds))
    if n_workers > 1:
        chunks = [list(seeds[i::n_workers]) for i in range(n_workers)]
        jobs = [(problem, params, chunk, record_all) for chunk in chunks]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            nested = list(pool.map(_trial_worker, jobs))
        results = [r for batch in nested for r in batch]
        results.sort(key=lambda r: r.seed)
    else:
        results = _trial_worker((problem, params, seeds, record_all))
    summary = [
        TrialSummary(
            seed=r.seed, f=r.f, violation_pz=r.violation_pz,
            iterations=r.iterations, termination=r.termination,
        )
        for r in results
    ]
    best = min(results, key=lambda r: (r.f, r.seed))
    return TrialsResult(best=best, summary=summary)


@dataclass(frozen=True)
class DescentViolation:
    iteration: int
    lhs: float
    rhs: float


@dataclass
class DescentReport:
    """Outcome of the descent and complexity monitors over a trace."""

    nu: float
    n_records: int
    descent_violations: list[DescentViolation]
    complexity_ok: bool
    min_delta: float
    complexity_bound: float

    @property
    def ok(self) -> bool:
        return not self.descent_violations and self.complexity_ok


def descent_certificate(
    trace: Sequence[IterationRecord], params: SolverParams
) -> DescentReport:
    """Check sufficient descent and the averaged step-size bound.

    Requires a valid (strict or tightened) parameter set.  Per recorded
    pair the Lagrangian must drop by at least ``nu`` times the squared
    step (with small relative slack); the running minimum step must obey
    the averaged bound ``(L_1 - L_N) / (nu (k_N - 1))``.  Summing the
    per-iteration inequality across thinning gaps only strengthens both
    checks, so thinned traces remain admissible.
    """
    check = validate_params(params)
    if not check.valid:
        raise ModelError(f"descent certificate needs valid parameters: {check.reason}")
    if len(trace) < 2:
        raise ModelError("descent certificate needs at least two records")
    nu = float(check.nu)
    violations = []
    for prev, cur in zip(trace, trace[1:]):
        lhs = cur.aug_lagrangian - prev.aug_lagrangian
        rhs = -nu * cur.delta_w + 1e-8 * (1.0 + abs(prev.aug_lagrangian))
        if lhs > rhs:
            violations.append(DescentViolation(cur.iteration, lhs, rhs))
    first = trace[0]
    last = trace[-1]
    min_delta = min(rec.delta_w for rec in trace)
    span = max(1, last.iteration - first.iteration)
    bound = (first.aug_lagrangian - last.aug_lagrangian) / (nu * span) + 1e-12
    return DescentReport(
        nu=nu,
        n_records=len(trace),
        descent_violations=violations,
        complexity_ok=min_delta <= bound,
        min_delta=min_delta,
        complexity_bound=bound,
    )


def write_trace_csv(path, trace: Sequence[IterationRecord]) -> None:
    """Write trace records under the exact declared header."""
    with Path(path).open("w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS.split(","))
        for rec in trace:
            writer.writerow(rec.csv_row())
