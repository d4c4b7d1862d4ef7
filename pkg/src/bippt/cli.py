"""Command-line front end.

Subcommands: ``gen-state`` writes a test state to the plain-text matrix
format, ``solve`` runs a multi-trial decomposition and emits a JSON
summary plus an optional trace CSV, ``sweep-xi`` and ``sweep-noise``
scan the penalty weight and the noise admixture and emit plot-ready CSV.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BipptError, ConfigError, NumericalError
from .objective import ModelProblem
from .solver import (
    SolverParams,
    TrialsResult,
    run_trials,
    validate_params,
    write_trace_csv,
)
from .states import (
    DensityMatrix,
    SubsystemDims,
    check_density,
    make_state,
    read_state_text,
    write_state_text,
)

_KINDS = ("w3", "ghz3", "ghz5", "mghz5", "custom")
#: Feasibility margin for the constraint flags reported by sweeps.
FLAG_TOL = 1e-8


def _parse_dims(text: str) -> SubsystemDims:
    try:
        return SubsystemDims(tuple(int(t) for t in text.replace(",", " ").split()))
    except (ValueError, BipptError) as exc:
        raise ConfigError(f"bad --dims {text!r}: {exc}") from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


@dataclass
class RunConfig:
    """Validated inputs of one solver invocation: the target state and
    the parameter set, plus trial count and output destinations."""

    state: DensityMatrix
    params: SolverParams
    mode: str
    trials: int
    seed: int
    out: str | None = None
    trace: str | None = None

    @classmethod
    def from_args(cls, args, xi: float | None = None) -> "RunConfig":
        state = _state_from_args(args)
        xi = float(args.xi if xi is None else xi)
        params = _params_from_args(args, xi)
        trials = int(args.trials)
        if trials < 1:
            raise ConfigError(f"--trials must be at least 1, got {trials}")
        return cls(
            state=state,
            params=params,
            mode=args.mode,
            trials=trials,
            seed=int(args.seed),
            out=getattr(args, "out", None),
            trace=getattr(args, "trace", None),
        )

    def run(self) -> TrialsResult:
        problem = ModelProblem.for_state(self.state, self.params.xi)
        return run_trials(problem, self.params, self.trials, base_seed=self.seed)


def _state_from_args(args) -> DensityMatrix:
    if getattr(args, "input", None):
        path = Path(args.input)
        if not path.exists():
            raise ConfigError(f"state file {path} does not exist")
        return read_state_text(path)
    if not args.kind:
        raise ConfigError("either --input or --kind is required")
    kind = args.kind.lower()
    if kind not in _KINDS:
        raise ConfigError(f"unknown kind {kind!r}; choose from {_KINDS}")
    if kind == "custom":
        raise ConfigError("kind 'custom' is only available through the library API")
    dims = _parse_dims(args.dims) if args.dims else None
    coeffs = _parse_floats(args.coeffs) if args.coeffs else None
    return make_state(kind, dims=dims, noise=args.noise, coeffs=coeffs)


def _params_from_args(args, xi: float) -> SolverParams:
    overrides = {}
    if args.eta is not None:
        overrides["eta"] = args.eta
    if args.mu1 is not None:
        overrides["mu1"] = args.mu1
    if args.mu2 is not None:
        overrides["mu2"] = args.mu2
    if args.mu3 is not None:
        overrides["mu3"] = args.mu3
    overrides["tol"] = args.tol
    overrides["max_iter"] = args.max_iter
    overrides["seed"] = args.seed
    if args.mode == "tightened":
        overrides.setdefault("mu2", 0.0)
        params = SolverParams.tightened(xi, **overrides)
    else:
        params = SolverParams.defaults(xi, **overrides)
    check = validate_params(params)
    if not check.valid:
        raise ConfigError(f"invalid parameters: {check.reason}")
    if check.mode != args.mode:
        raise ConfigError(
            f"parameters classify as {check.mode!r}, but --mode {args.mode} was requested"
        )
    return params


def _constraint_flags(result) -> str:
    point = result.best.point if isinstance(result, TrialsResult) else result.point
    x_ok = all(
        np.linalg.eigvalsh(b)[0] >= -FLAG_TOL for b in point.x.blocks
    )
    p_psd = all(
        np.linalg.eigvalsh(b)[0] >= -FLAG_TOL for b in point.p.transformed
    )
    p_trace = bool(
        np.max(np.abs(np.trace(point.p.copies, axis1=1, axis2=2) - 1.0)) <= FLAG_TOL
    )
    y = point.y
    y_ok = abs(float(np.sum(y)) - 1.0) <= FLAG_TOL and float(np.min(y)) >= -FLAG_TOL
    parts = [
        f"x_psd={int(x_ok)}",
        f"p_psd={int(p_psd)}",
        f"p_trace={int(p_trace)}",
        f"y_simplex={int(y_ok)}",
    ]
    return ";".join(parts)


def _result_json(trials: TrialsResult, mode: str) -> dict:
    best = trials.best
    return {
        "f": best.f,
        "violation_pz": best.violation_pz,
        "iterations": best.iterations,
        "termination": best.termination,
        "weights": [float(w) for w in best.weights],
        "per_trial": [
            {
                "seed": t.seed,
                "f": t.f,
                "violation_pz": t.violation_pz,
                "iterations": t.iterations,
                "termination": t.termination,
            }
            for t in trials.summary
        ],
        "stationarity": [float(r) for r in best.stationarity],
        "params_mode": mode,
        "feasible_f": best.feasible_f,
    }


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="ascii")
    else:
        print(text)


def cmd_gen_state(args) -> int:
    if not args.kind:
        raise ConfigError("gen-state requires --kind")
    state = _state_from_args(args)
    if not args.out:
        raise ConfigError("gen-state requires --out")
    write_state_text(args.out, state)
    report = check_density(state)
    print(
        f"wrote {args.out}: d={state.d}, dims={state.dims.dims}, "
        f"trace={report.trace:.12g}, min_eig={report.min_eigenvalue:.3e}"
    )
    return 0


def cmd_solve(args) -> int:
    config = RunConfig.from_args(args)
    trials = config.run()
    payload = _result_json(trials, config.mode)
    _emit_json(payload, config.out)
    if config.trace:
        write_trace_csv(config.trace, trials.best.trace)
    return 0


def cmd_sweep_xi(args) -> int:
    if args.xi_from > args.xi_to:
        raise ConfigError("--xi-from must not exceed --xi-to")
    if args.xi_step <= 0:
        raise ConfigError("--xi-step must be positive")
    values = []
    xi = args.xi_from
    while xi <= args.xi_to + 1e-9:
        values.append(round(xi, 12))
        xi += args.xi_step
    rows = []
    for xi in values:
        config = RunConfig.from_args(args, xi=xi)
        trials = config.run()
        rows.append(
            [xi, f"{trials.best.f:.17g}", f"{trials.best.violation_pz:.17g}",
             _constraint_flags(trials)]
        )
        print(f"xi={xi:g}: f={trials.best.f:.6e} violation={trials.best.violation_pz:.6e}")
    _write_csv(args.out, ["xi", "f", "violation", "constraint_flags"], rows)
    return 0


def cmd_sweep_noise(args) -> int:
    levels = _parse_floats(args.noise_values)
    if not levels:
        raise ConfigError("--noise-values must list at least one level")
    if not args.kind:
        raise ConfigError("sweep-noise requires --kind")
    rows = []
    for level in levels:
        base = argparse.Namespace(**vars(args))
        base.noise = level
        base.input = None
        config = RunConfig.from_args(base)
        trials = config.run()
        rows.append([level, f"{trials.best.f:.17g}", f"{trials.best.violation_pz:.17g}"])
        print(f"l={level:g}: f={trials.best.f:.6e} violation={trials.best.violation_pz:.6e}")
    _write_csv(args.out, ["l", "f", "violation"], rows)
    return 0


def _write_csv(out: str | None, header: list[str], rows: list[list]) -> None:
    if out:
        with Path(out).open("w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)


def _add_state_args(p: argparse.ArgumentParser, with_input: bool = True) -> None:
    p.add_argument("--kind", help="test state family: " + ", ".join(_KINDS[:-1]))
    p.add_argument("--dims", help="subsystem dimensions, e.g. 2,2,2")
    p.add_argument("--noise", type=float, default=0.0,
                   help="identity admixture weight l >= 0")
    p.add_argument("--coeffs", help="level weights m,n,s for mghz5")
    if with_input:
        p.add_argument("--input", help="read the state from a matrix text file")


def _add_solver_args(p: argparse.ArgumentParser, with_xi: bool = True) -> None:
    if with_xi:
        p.add_argument("--xi", type=float, default=100.0, help="penalty weight")
    p.add_argument("--eta", type=float, default=None,
                   help="constraint penalty (default 2*xi + 1)")
    p.add_argument("--mu1", type=float, default=None, help="weight proximal term")
    p.add_argument("--mu2", type=float, default=None, help="component proximal term")
    p.add_argument("--mu3", type=float, default=None,
                   help="auxiliary proximal term (default xi)")
    p.add_argument("--tol", type=float, default=1e-8, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=200_000, dest="max_iter")
    p.add_argument("--trials", type=int, default=30, help="independent random starts")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--mode", choices=("strict", "tightened"), default="strict")
    p.add_argument("--out", help="output path (JSON for solve, CSV for sweeps)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bippt",
        description="Approximate a density matrix by a convex combination of "
                    "states that stay positive under a partial transpose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-state", help="write a test state to a file")
    _add_state_args(p_gen, with_input=False)
    p_gen.add_argument("--out", required=True, help="destination file")

    p_solve = sub.add_parser("solve", help="best-of-trials decomposition")
    _add_state_args(p_solve)
    _add_solver_args(p_solve)
    p_solve.add_argument("--trace", help="write the best trial's trace CSV here")

    p_sx = sub.add_parser("sweep-xi", help="scan the penalty weight")
    _add_state_args(p_sx)
    _add_solver_args(p_sx, with_xi=False)
    p_sx.add_argument("--xi-from", type=float, required=True, dest="xi_from")
    p_sx.add_argument("--xi-to", type=float, required=True, dest="xi_to")
    p_sx.add_argument("--xi-step", type=float, default=50.0, dest="xi_step")

    p_sn = sub.add_parser("sweep-noise", help="scan the noise admixture")
    _add_state_args(p_sn, with_input=False)
    _add_solver_args(p_sn)
    p_sn.add_argument("--noise-values", required=True, dest="noise_values",
                      help="comma-separated noise levels")
    return parser


_COMMANDS = {
    "gen-state": cmd_gen_state,
    "solve": cmd_solve,
    "sweep-xi": cmd_sweep_xi,
    "sweep-noise": cmd_sweep_noise,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BipptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
