"""Pass/fail drivers for the limit-theorem diagnostics.

Thresholds are fixed here; ``cmd diagnose`` and the acceptance suite share
them.
"""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics as dg
from .montecarlo import iter_trajectories, run_replications
from .targets import combine, eta_from_params
from .urn import Mode, SimConfig

CHECKS = ("lln", "clt", "harmonic", "crossing", "bias", "increments")

DEFAULT_REPS = {"lln": 50, "clt": 2000, "harmonic": 1000, "crossing": 1000,
                "bias": 1000, "increments": 100}

THRESHOLDS = {
    "lln_abs_error": 0.02,
    "rru_z_bound": 0.9,
    "rru_fraction": 0.9,
    "clt_p_value": 0.01,
    "clt_var_rel_mrru": 0.15,
    "clt_var_rel_arru": 0.20,
    "harmonic_ratio": 2.0,
    "bias_ratio": 5.0,
    "crossing_nu": dg.DEFAULT_NU,
}

CHECKPOINTS = (100, 1000, 10_000)


def limit_proportion(config: SimConfig) -> float:
    """Almost sure limit of the urn proportion under ``config``."""
    sup = config.superior_arm
    if config.mode is Mode.RRU:
        return 1.0 if sup == 1 else 0.0
    if config.mode is Mode.MRRU:
        r1, r2 = config.initial_thresholds
    else:
        m1, m2, pol = config.model1, config.model2, config.policy
        eta, _ = eta_from_params(pol.eta_kind, m1.mean, m1.var, m2.mean, m2.var, pol)
        r1, r2 = combine(eta, pol.bias_p, pol.clamp_eps)
    return r1 if sup == 1 else r2


def _checkpoints(config: SimConfig) -> list[int]:
    cps = [c for c in CHECKPOINTS if c <= config.horizon]
    if not cps:
        raise ValueError(f"horizon {config.horizon} is below the first checkpoint {CHECKPOINTS[0]}")
    return cps


def check_lln(config: SimConfig, reps: int = 50, parallelism: int = 1) -> dg.Verdict:
    reps_ = run_replications(config, reps, parallelism)
    z = np.array([r.final_z for r in reps_])
    frac = np.array([r.allocation_fraction for r in reps_])
    viol = sum(r.violations for r in reps_)
    rho = limit_proportion(config)
    if config.mode is Mode.RRU:
        near = float(np.mean(np.abs(z - rho) < 1.0 - THRESHOLDS["rru_z_bound"]))
        passed = near >= THRESHOLDS["rru_fraction"]
        return dg.Verdict("lln", passed and viol == 0,
                          {"limit": rho, "mean_final_z": float(z.mean()),
                           "fraction_within_bound": near, "increment_violations": viol},
                          {"z_bound": THRESHOLDS["rru_z_bound"],
                           "min_fraction": THRESHOLDS["rru_fraction"]})
    ez = float(np.mean(np.abs(z - rho)))
    ef = float(np.mean(np.abs(frac - rho)))
    tol = THRESHOLDS["lln_abs_error"]
    return dg.Verdict("lln", ez < tol and ef < tol and viol == 0,
                      {"limit": rho, "mean_abs_z_error": ez, "mean_abs_allocation_error": ef,
                       "increment_violations": viol},
                      {"max_mean_abs_error": tol})


def check_clt(config: SimConfig, reps: int = 2000, parallelism: int = 1) -> dg.Verdict:
    if config.mode is Mode.RRU:
        raise ValueError("the clt check needs MRRU or ARRU mode")
    reps_ = run_replications(config, reps, parallelism)
    rho = limit_proportion(config)
    if config.mode is Mode.MRRU:
        sample = dg.clt_sample(reps_, rho)
        rel = THRESHOLDS["clt_var_rel_mrru"]
        centre = "fixed"
    else:
        sample = dg.clt_sample(reps_, "rho_bar")
        rel = THRESHOLDS["clt_var_rel_arru"]
        centre = "rho_bar"
    target_var = rho * (1.0 - rho)
    d, p = dg.ks_test(sample, 0.0, target_var)
    var = float(np.var(sample, ddof=1))
    viol = sum(r.violations for r in reps_)
    passed = p > THRESHOLDS["clt_p_value"] and abs(var - target_var) <= rel * target_var
    return dg.Verdict("clt", passed and viol == 0,
                      {"center": centre, "ks_D": d, "p_value": p, "sample_variance": var,
                       "sample_mean": float(np.mean(sample)), "increment_violations": viol},
                      {"min_p_value": THRESHOLDS["clt_p_value"], "target_variance": target_var,
                       "max_relative_variance_error": rel})


class _Counted:
    """Trajectory iterator that tallies increment-bound violations on the way."""

    def __init__(self, config: SimConfig, reps: int):
        self._it = iter_trajectories(config, reps)
        self.violations = 0

    def __iter__(self):
        for traj in self._it:
            self.violations += traj.violations
            yield traj


def check_harmonic(config: SimConfig, reps: int = 1000, exponent: float = 2.0) -> dg.Verdict:
    cps = _checkpoints(config)
    trajs = _Counted(config, reps)
    est = dg.harmonic_moment(trajs, exponent, cps)
    ratio = float(np.max(est) / est[0])
    return dg.Verdict("harmonic", ratio <= THRESHOLDS["harmonic_ratio"] and trajs.violations == 0,
                      {"checkpoints": cps, "estimates": est.tolist(), "max_over_first": ratio,
                       "increment_violations": trajs.violations},
                      {"max_over_first": THRESHOLDS["harmonic_ratio"], "exponent": exponent})


def check_bias(config: SimConfig, reps: int = 1000) -> dg.Verdict:
    cps = _checkpoints(config)
    rho = limit_proportion(config)
    trajs = _Counted(config, reps)
    est = dg.bias_bound(trajs, rho, cps)
    lo, hi = float(np.min(est)), float(np.max(est))
    if hi == 0.0:
        ratio = 1.0
    else:
        ratio = math.inf if lo == 0.0 else hi / lo
    return dg.Verdict("bias", ratio <= THRESHOLDS["bias_ratio"] and trajs.violations == 0,
                      {"checkpoints": cps, "estimates": est.tolist(), "max_over_min": ratio,
                       "increment_violations": trajs.violations},
                      {"max_over_min": THRESHOLDS["bias_ratio"]})


def check_crossing(config: SimConfig, reps: int = 1000, nu: float | None = None) -> dg.Verdict:
    nu = THRESHOLDS["crossing_nu"] if nu is None else nu
    trajs = _Counted(config, reps)
    freq = dg.crossing_event_frequency(trajs, config.q, nu)
    if len(freq) < 2:
        raise ValueError("horizon too short for two observable blocks")
    js = sorted(freq)
    first, last = freq[js[0]], freq[js[-1]]
    return dg.Verdict("crossing", last < first and trajs.violations == 0,
                      {"first_block": js[0], "first_frequency": first,
                       "increment_violations": trajs.violations,
                       "last_block": js[-1], "last_frequency": last,
                       "frequencies": {str(j): f for j, f in freq.items()}},
                      {"rule": "last_frequency < first_frequency", "nu": nu})


def check_increments(config: SimConfig, reps: int = 100, parallelism: int = 1) -> dg.Verdict:
    reps_ = run_replications(config, reps, parallelism)
    viol = sum(r.violations for r in reps_)
    return dg.Verdict("increments", viol == 0,
                      {"violations": viol, "trajectories": reps, "steps": reps * config.horizon},
                      {"max_violations": 0, "eps": [0.5, 0.1, 0.01]})


def run_check(name: str, config: SimConfig, reps: int | None = None,
              parallelism: int = 1) -> dg.Verdict:
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)}")
    reps = DEFAULT_REPS[name] if reps is None else reps
    if name == "lln":
        return check_lln(config, reps, parallelism)
    if name == "clt":
        return check_clt(config, reps, parallelism)
    if name == "harmonic":
        return check_harmonic(config, reps)
    if name == "bias":
        return check_bias(config, reps)
    if name == "crossing":
        return check_crossing(config, reps)
    return check_increments(config, reps, parallelism)
