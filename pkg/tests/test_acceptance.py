"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and by ``python tests/test_acceptance.py``.
"""

import math
import os
from functools import lru_cache

import numpy as np
import pytest

from arru import checks
from arru import diagnostics as dg
from arru import montecarlo as mc
from arru.kernel import simulate_fast
from arru.targets import ResponseModel
from arru.urn import Mode, SimConfig, UtilitySpec

PAR = os.cpu_count() or 1
ROW = (0.9, 0.7)
RESULTS: dict[int, str] = {}


def record(num, title, passed, detail):
    RESULTS[num] = f"criterion {num:>2} {title:<34} {'PASS' if passed else 'FAIL'}  {detail}"
    return passed


@lru_cache(maxsize=None)
def table(design):
    return tuple(mc.reproduce_table(mc.TableSpec(design, reps=10_000, n=200, q=1.25,
                                                 y0=(2.0, 2.0), bias_p=0.75, parallelism=PAR)))


def alloc_misses(rows, tol=0.03):
    return [(r.params, round(r.deviation, 4)) for r in rows if abs(r.deviation) > tol]


def criterion_1():
    rows = table("a")
    alloc = alloc_misses(rows)
    est = [(r.params, round(r.est1.mean - r.reference[3], 4), round(r.est2.mean - r.reference[5], 4))
           for r in rows
           if abs(r.est1.mean - r.reference[3]) > 0.015 or abs(r.est2.mean - r.reference[5]) > 0.015]
    worst = max(abs(r.deviation) for r in rows)
    return record(1, "table design a", not alloc and not est,
                  f"max |alloc dev| {worst:.3f}; alloc misses {alloc}; p_hat misses {est}")


def criterion_2():
    rows = table("b")
    alloc = alloc_misses(rows)
    worst = max(abs(r.deviation) for r in rows)
    return record(2, "table design b", not alloc,
                  f"max |alloc dev| {worst:.3f}; alloc misses {alloc}")


def criterion_3():
    bad = []
    worst = 0.0
    for d in ("c", "d"):
        for r in table(d):
            v1, v2 = r.params[2], r.params[3]
            worst = max(worst, abs(r.deviation))
            if (abs(r.deviation) > 0.03 or abs(r.est1.mean - v1) > 0.10
                    or abs(r.est2.mean - v2) > 0.10):
                bad.append((d, r.params, round(r.deviation, 4), round(r.est1.mean, 3),
                            round(r.est2.mean, 3)))
    return record(3, "table designs c, d", not bad, f"max |alloc dev| {worst:.3f}; misses {bad}")


def criterion_4():
    bad, total = [], 0
    for d in "abcd":
        for params, ref in zip(mc.design_grid(d), mc.REFERENCE_ROWS[d]):
            total += 1
            r = mc.analytic_rho1(d, params)
            if mc.round_half_up(r) != ref[0]:
                bad.append((d, params, round(r, 5), ref[0]))
    return record(4, "analytic rho1 column", not bad, f"{total - len(bad)}/{total} match; misses {bad}")


def mrru_clt_config():
    return SimConfig(ResponseModel.bernoulli(0.7), ResponseModel.bernoulli(0.5), mode=Mode.MRRU,
                     initial_rho1=0.6, initial_rho2=0.6, horizon=5000,
                     utility=UtilitySpec(a=0.1, b=1.0))


@lru_cache(maxsize=None)
def clt_verdict(which):
    cfg = mrru_clt_config() if which == "mrru" else mc.design_config("a", ROW, horizon=5000)
    return checks.check_clt(cfg, 2000, PAR)


def clt_detail(v):
    o = v.observed
    return (f"var {o['sample_variance']:.4f} (target {v.threshold['target_variance']:.4f}), "
            f"mean {o['sample_mean']:.3f}, D {o['ks_D']:.4f}, p {o['p_value']:.3g}")


def criterion_5():
    v = clt_verdict("mrru")
    return record(5, "MRRU CLT", v.passed, clt_detail(v))


def criterion_6():
    v = clt_verdict("arru")
    return record(6, "ARRU CLT, rho_bar centering", v.passed, clt_detail(v))


@lru_cache(maxsize=None)
def lln_verdict():
    return checks.check_lln(mc.design_config("a", ROW, horizon=100_000), 50, PAR)


def criterion_7():
    v = lln_verdict()
    o = v.observed
    return record(7, "LLN design a", v.passed,
                  f"mean |Z-rho| {o['mean_abs_z_error']:.4f}, "
                  f"mean |N1/n-rho| {o['mean_abs_allocation_error']:.4f}")


@lru_cache(maxsize=None)
def rru_reps():
    cfg = SimConfig(ResponseModel.bernoulli(0.9), ResponseModel.bernoulli(0.1), mode=Mode.RRU,
                    horizon=100_000, utility=UtilitySpec(a=0.1, b=1.0))
    return tuple(mc.run_replications(cfg, 100, PAR))


def criterion_8():
    reps = rru_reps()
    frac = float(np.mean([r.final_z > 0.9 for r in reps]))
    return record(8, "RRU degeneration", frac >= 0.9, f"fraction with Z_n > 0.9: {frac:.2f}")


def long_config():
    return mc.design_config("a", ROW, horizon=10_000)


@lru_cache(maxsize=None)
def harmonic_verdict():
    return checks.check_harmonic(long_config(), 1000, 2.0)


def criterion_9():
    v = harmonic_verdict()
    est = ", ".join(f"{e:.3f}" for e in v.observed["estimates"])
    return record(9, "harmonic moments", v.passed,
                  f"E[(n/Y_n)^2] at 1e2,1e3,1e4: {est}; max/first {v.observed['max_over_first']:.3f}")


@lru_cache(maxsize=None)
def bias_verdict():
    return checks.check_bias(long_config(), 1000)


@lru_cache(maxsize=None)
def crossing_verdict():
    return checks.check_crossing(long_config(), 1000, 0.25)


def criterion_10():
    counts = {
        "tables": sum(r.violations for d in "abcd" for r in table(d)),
        "clt": sum(clt_verdict(w).observed["increment_violations"] for w in ("mrru", "arru")),
        "lln": lln_verdict().observed["increment_violations"],
        "rru": sum(r.violations for r in rru_reps()),
        "harmonic": harmonic_verdict().observed["increment_violations"],
    }
    trajectories = 4 * 10 * 10_000 - 2 * 10_000 + 2 * 2000 + 50 + 100 + 1000
    return record(10, "increment bound", sum(counts.values()) == 0,
                  f"{sum(counts.values())} violations over {trajectories} trajectories {counts}")


def criterion_11():
    v = bias_verdict()
    est = ", ".join(f"{e:.3f}" for e in v.observed["estimates"])
    return record(11, "bias bound", v.passed,
                  f"n E|rho_bar-rho|^2 at 1e2,1e3,1e4: {est}; max/min {v.observed['max_over_min']:.3f}")


def criterion_12():
    v = crossing_verdict()
    o = v.observed
    return record(12, "crossing-time trend", v.passed,
                  f"first block j={o['first_block']}: {o['first_frequency']:.3f}; "
                  f"last block j={o['last_block']}: {o['last_frequency']:.3f}")


def brute_ks(x, mean, sd):
    n = len(x)
    best = 0.0
    for t in x:
        f = dg.normal_cdf(t, mean, sd)
        best = max(best, abs(sum(v <= t for v in x) / n - f), abs(sum(v < t for v in x) / n - f))
    return best


def criterion_13():
    problems = []
    cfg = mc.design_config("a", ROW, seed=2024)
    base = mc.run_replications(cfg, 2000, 1)
    for par in (2, 4, 8):
        if mc.replications_csv(mc.run_replications(cfg, 2000, par)) != mc.replications_csv(base):
            problems.append(f"parallelism {par} differs")
    rng = np.random.default_rng(13)
    ks_err = 0.0
    for n in (8, 50, 200):
        for _ in range(5):
            x = rng.normal(0.3, 1.2, n)
            ks_err = max(ks_err, abs(dg.ks_statistic(x, 0.0, 1.0) - brute_ks(x, 0.0, 1.0)))
    if ks_err > 1e-15:
        problems.append(f"KS oracle error {ks_err:.2e}")
    t_err = 0.0
    configs = [long_config()] + [mc.design_config(d, mc.design_grid(d)[0], horizon=2000)
                                 for d in "bcd"] + [mrru_clt_config()]
    for c in configs:
        for i in range(50):
            tr = simulate_fast(c, seed=mc.derive_seed(c.seed, i))
            for rho in (0.3, 0.4375, 0.6):
                a = dg.t_process(tr, rho, 1)
                b = dg.t_process_counts(tr, rho, 1)
                t_err = max(t_err, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    if t_err > 1e-12:
        problems.append(f"T_n identity error {t_err:.2e}")
    return record(13, "determinism and oracles", not problems,
                  f"KS max error {ks_err:.1e}; T_n max error {t_err:.1e}; {problems or 'ok'}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12,
            criterion_13]


@pytest.mark.slow
@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 14)])
def test_acceptance(crit):
    passed = crit()
    num = CRITERIA.index(crit) + 1
    print(RESULTS[num])
    assert passed, RESULTS[num]


if __name__ == "__main__":
    for c in CRITERIA:
        c()
    for k in sorted(RESULTS):
        print(RESULTS[k])
