"""Allocation bias of the Bernoulli tables under estimator and utility variants.

Compares the mean N1/n of designs a and b against the published means when
Bernoulli estimates are shrunk toward 1/2 (``prior_weight``) and when the
lower reinforcement ``a`` of the affine utility changes.
"""

import argparse
import os

from arru import montecarlo as mc
from arru.targets import TargetPolicy
from arru.urn import UtilitySpec


def deviations(design, reps, weight, a, parallelism):
    _, eta = mc.DESIGNS[design]
    out = []
    for params, ref in zip(mc.design_grid(design), mc.REFERENCE_ROWS[design]):
        cfg = mc.design_config(design, params, utility=UtilitySpec(a=a, b=1.0),
                               policy=TargetPolicy(eta, prior_weight=weight))
        reps_ = mc.run_replications(cfg, reps, parallelism)
        out.append(sum(r.allocation_fraction for r in reps_) / reps - ref[1])
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=4000)
    ap.add_argument("--weights", default="0,1,2")
    ap.add_argument("--a-values", default="0.01,0.1,0.3")
    ap.add_argument("--parallelism", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    print("design  weight     a   max|dev|  rows within 0.03")
    for w in map(float, args.weights.split(",")):
        for a in map(float, args.a_values.split(",")):
            for d in "ab":
                dev = deviations(d, args.reps, w, a, args.parallelism)
                ok = sum(abs(x) <= 0.03 for x in dev)
                print(f"{d:>6} {w:>7g} {a:>5g} {max(map(abs, dev)):>10.3f}  {ok:>2}/10")


if __name__ == "__main__":
    main()
