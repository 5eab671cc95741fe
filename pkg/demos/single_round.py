#!/usr/bin/env python3
"""Walk through the smallest covering run: min x subject to x >= 1.

With no advice (lambda = 1) the primal ODE is dx/dtau = x + 1, so
x(tau) = e^tau - 1 and the row is covered at tau* = ln 2.  The dual rate
is 1 / ln 3, giving y = ln 2 / ln 3.  The script prints each quantity next
to its closed form, then repeats the run with perfect advice at several
trust levels.
"""
import math

import numpy as np

from onlineadvice import AdviceProfile, CoveringInstance, LinearObjective, PdlaConfig, SparseRow, certify_pdla, run_pdla


def main():
    inst = CoveringInstance(1, [SparseRow.from_pairs(0, [(0, 1.0)])], LinearObjective([1.0]))

    res = run_pdla(inst, None, PdlaConfig(lam=1.0))
    rt = res.trace.rounds[0]
    print("no advice (lambda = 1)")
    print(f"  x      = {res.x[0]:.12f}   closed form 1")
    print(f"  tau*   = {rt.duration:.12f}   closed form ln 2 = {math.log(2):.12f}")
    print(f"  y      = {res.dual.y[0]:.12f}   closed form ln2/ln3 = {math.log(2) / math.log(3):.12f}")
    print(f"  P / D  = {res.metrics.primal_objective / res.dual.objective:.6f}   bound 4 ln 3 = {4 * math.log(3):.6f}")

    print("\nperfect advice x' = 1 at decreasing trust")
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        cfg = PdlaConfig(lam=lam)
        adv = AdviceProfile(np.array([1.0]), lam)
        r = run_pdla(inst, adv, cfg)
        certs = certify_pdla(inst, r, adv, cfg, opt_upper=1.0)
        failed = [k for k, c in certs.items() if c.ok is False]
        print(f"  lambda={lam:4.2f}  x={r.x[0]:.6f}  tau*={r.trace.rounds[0].duration:.6f}  "
              f"certificates failed: {failed or 'none'}")


if __name__ == "__main__":
    main()
