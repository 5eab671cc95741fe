#!/usr/bin/env python3
"""Fractional knapsack with advice of varying quality.

Items arrive one at a time; the online player decides how much value to
take from each.  Greedy saturation is the classical subroutine.  Good
advice is the offline optimum; bad advice spends the budget on the worst
items first.  For each trust level the table shows what the switching
algorithm collects and how far it overloads the knapsack.
"""
import numpy as np

from onlineadvice import applications as apps
from onlineadvice import AdviceProfile, GreedySaturation, run_switching
from onlineadvice.harness import generate_advice
from onlineadvice.oracles import offline_opt_packing


def main(seed=4):
    rng = np.random.default_rng(seed)
    items = [apps.KnapsackItem(float(rng.uniform(0.5, 3)), float(rng.uniform(0.2, 2))) for _ in range(12)]
    # arrival order: cheap, low-value items first, which is where greedy does badly
    items.sort(key=lambda it: it.v / it.w)
    C = 0.35 * sum(it.w for it in items)
    inst = apps.reduce_knapsack(items, C)
    opt = offline_opt_packing(inst)
    print(f"{len(items)} items, capacity {C:.3f}, OPT = {opt.value:.4f}\n")

    good = generate_advice(inst, "optimal", opt=opt).vector
    bad = generate_advice(inst, "adversarial").vector
    print(f"{'lambda':>7} {'good advice':>12} {'bad advice':>11} {'load/C (good)':>14} {'load/C (bad)':>13}")
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        g = run_switching(inst, GreedySaturation(), AdviceProfile(good, lam))
        b = run_switching(inst, GreedySaturation(), AdviceProfile(bad, lam))
        print(f"{lam:7.2f} {g.metrics.primal_objective:12.4f} {b.metrics.primal_objective:11.4f} "
              f"{inst.load(g.y)[0] / C:14.3f} {inst.load(b.y)[0] / C:13.3f}")


if __name__ == "__main__":
    main()
