#!/usr/bin/env python3
"""Penalty-weight sweeps for the noisy W state on three qubits.

Reproduces the two sweep experiments on the state W3 W3^T + l*I: the
decomposable case l=3 (tiny error for every penalty weight) and the pure
case l=0 (error floor near 1e-1, with the constraint gap falling as the
penalty weight grows past ~800).  Emits one CSV per case.
"""

import argparse
import sys

from bippt.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--max-iter", type=int, default=200_000)
    ap.add_argument("--out-prefix", default="w3_sweep")
    args = ap.parse_args()

    for label, noise in (("l3", 3.0), ("l0", 0.0)):
        rc = cli_main([
            "sweep-xi", "--kind", "w3", "--noise", str(noise),
            "--xi-from", "100", "--xi-to", "1000", "--xi-step", "50",
            "--trials", str(args.trials), "--max-iter", str(args.max_iter),
            "--out", f"{args.out_prefix}_{label}.csv",
        ])
        if rc != 0:
            return rc
        print(f"wrote {args.out_prefix}_{label}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
