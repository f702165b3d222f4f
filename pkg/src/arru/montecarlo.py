"""Replication harness: seeding, parallel execution, aggregation, tables."""

from __future__ import annotations

import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, is_dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from . import kernel
from .rng import derive_seed
from .schedule import ScheduleKind
from .targets import EtaKind, Family, ResponseModel, TargetPolicy, target_thresholds
from .urn import Mode, SimConfig, Trajectory, UtilityKind, UtilitySpec, fmt

METRICS = ("allocation_fraction", "mean1", "var1", "mean2", "var2",
           "rho_bar_final", "final_z")


class ReplicationError(RuntimeError):
    def __init__(self, rep_index: int, cause: BaseException):
        super().__init__(f"replication {rep_index} failed: {cause!r}")
        self.rep_index = rep_index


@dataclass(frozen=True)
class ReplicationSummary:
    rep_index: int
    allocation_fraction: float
    mean1: float
    var1: float
    mean2: float
    var2: float
    rho_bar_final: float
    rho_bar1: float
    rho_bar2: float
    rho1_final: float
    rho2_final: float
    final_y: float
    final_z: float
    horizon: int
    violations: int = 0

    @property
    def theta_hat(self) -> tuple[float, float, float, float]:
        return self.mean1, self.var1, self.mean2, self.var2


def _summary(rep_index: int, horizon: int, superior: int, n1: float, y1: float, y2: float,
             est, acc1: float, acc2: float, hat1: float, hat2: float,
             violations: int, base: tuple[float, float]) -> ReplicationSummary:
    # acc holds the summed deviations of the active threshold from its start value
    if horizon > 0:
        rb1, rb2 = base[0] + acc1 / horizon, base[1] + acc2 / horizon
        frac = n1 / horizon
    else:
        rb1 = rb2 = frac = math.nan
    return ReplicationSummary(
        rep_index, frac, *est, rb1 if superior == 1 else rb2, rb1, rb2, hat1, hat2,
        y1 + y2, y1 / (y1 + y2), horizon, int(violations))


def summary_from_trajectory(traj: Trajectory, rep_index: int = 0) -> ReplicationSummary:
    h = traj.horizon
    t1, t2 = traj.rho1_tilde, traj.rho2_tilde
    acc1 = float(np.cumsum(t1[:-1] - t1[0])[-1]) if h else 0.0
    acc2 = float(np.cumsum(t2[:-1] - t2[0])[-1]) if h else 0.0
    n1 = float(np.count_nonzero(traj.x[1:] == 1))
    return _summary(rep_index, h, traj.superior, n1, float(traj.y1[-1]), float(traj.y2[-1]),
                    tuple(float(e) for e in traj.estimates), acc1, acc2,
                    float(traj.rho1_hat[-1]), float(traj.rho2_hat[-1]), traj.violations,
                    (float(t1[0]), float(t2[0])))


def _summaries_from_rows(rows: np.ndarray, start: int, config: SimConfig) -> list[ReplicationSummary]:
    k = kernel
    sup = config.superior_arm
    base = config.initial_thresholds
    return [_summary(start + i, config.horizon, sup, r[k.R_N1], r[k.R_Y1], r[k.R_Y2],
                     (r[k.R_MEAN1], r[k.R_VAR1], r[k.R_MEAN2], r[k.R_VAR2]),
                     r[k.R_ACC1], r[k.R_ACC2], r[k.R_HAT1], r[k.R_HAT2], r[k.R_VIOL],
                     base)
            for i, r in enumerate(rows.tolist())]


def replication_seeds(master: int, start: int, stop: int) -> np.ndarray:
    return np.array([derive_seed(master, i) for i in range(start, stop)], dtype=np.uint64)


def run_replications(config: SimConfig, reps: int, parallelism: int = 1,
                     chunk: int = 256) -> list[ReplicationSummary]:
    """Run ``reps`` independent trajectories; replication i uses ``derive_seed(seed, i)``.

    Output is ordered by rep_index and does not depend on ``parallelism``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    args = kernel.kernel_args(config)
    bounds = [(s, min(s + chunk, reps)) for s in range(0, reps, chunk)]

    def work(bound):
        lo, hi = bound
        seeds = replication_seeds(config.seed, lo, hi)
        try:
            return kernel.run_seeds(config, seeds, args)
        except Exception:
            for i, sd in enumerate(seeds):
                try:
                    kernel.run_seeds(config, seeds[i:i + 1], args)
                except Exception as exc:
                    raise ReplicationError(lo + i, exc) from exc
            raise

    if parallelism == 1:
        blocks = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            blocks = list(pool.map(work, bounds))
    out: list[ReplicationSummary] = []
    for (lo, _), rows in zip(bounds, blocks):
        out.extend(_summaries_from_rows(rows, lo, config))
    return out


def iter_trajectories(config: SimConfig, reps: int, start: int = 0) -> Iterator[Trajectory]:
    """Full per-step trajectories for replications ``start .. start + reps - 1``."""
    args = kernel.kernel_args(config)
    for i in range(start, start + reps):
        yield kernel.simulate_fast(config, args, seed=derive_seed(config.seed, i))


@dataclass(frozen=True)
class MetricStats:
    mean: float
    sd: float
    rmse: float | None
    target: float | None


@dataclass(frozen=True)
class AggregateRow:
    metrics: dict
    rep_count: int
    fingerprint: str


def metric_stats(values, target: float | None = None) -> MetricStats:
    """Mean, sample sd (divisor N-1, 0 for one value) and RMSE against ``target``.

    Sums use ``math.fsum``, which is exactly rounded and therefore independent
    of the order in which replications are combined.
    """
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        raise ValueError("cannot summarize an empty list")
    mean = math.fsum(v) / n
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (n - 1)) if n > 1 else 0.0
    rmse = None
    if target is not None:
        rmse = math.sqrt(math.fsum((x - target) ** 2 for x in v) / n)
    return MetricStats(mean, sd, rmse, target)


def summarize(summaries: list[ReplicationSummary], targets: dict | None = None,
              fingerprint: str = "") -> AggregateRow:
    if not summaries:
        raise ValueError("cannot summarize an empty list")
    targets = targets or {}
    metrics = {m: metric_stats([getattr(s, m) for s in summaries], targets.get(m))
               for m in METRICS}
    return AggregateRow(metrics, len(summaries), fingerprint)


# -- serialization -----------------------------------------------------------

def _plain(obj):
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def config_echo(config: SimConfig) -> dict:
    d = _plain(config)
    d["initial_rho1"], d["initial_rho2"] = config.initial_thresholds
    return d


def fingerprint(config: SimConfig) -> str:
    canon = json.dumps(config_echo(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def summary_json(config: SimConfig, agg: AggregateRow,
                 wall_time: float | None = None) -> str:
    def num(x):
        return None if x is None else float(fmt(x))
    doc = {
        "config_echo": config_echo(config),
        "fingerprint": agg.fingerprint or fingerprint(config),
        "reps": agg.rep_count,
        "metrics": {k: {"mean": num(m.mean), "sd": num(m.sd), "rmse": num(m.rmse),
                        "target": num(m.target)} for k, m in agg.metrics.items()},
        "wall_time_seconds": wall_time,
        "seed": config.seed,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


REP_COLUMNS = ("rep_index", "allocation_fraction", "mean1", "var1", "mean2", "var2",
               "rho_bar_final", "rho1_final", "rho2_final", "final_y", "final_z")


def replications_csv(summaries: list[ReplicationSummary]) -> str:
    buf = io.StringIO()
    buf.write(",".join(REP_COLUMNS) + "\n")
    for s in summaries:
        vals = [str(s.rep_index)] + [fmt(getattr(s, c)) for c in REP_COLUMNS[1:]]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


# -- table reproduction ------------------------------------------------------

DESIGNS = {
    "a": (Family.BERNOULLI, EtaKind.WEI),
    "b": (Family.BERNOULLI, EtaKind.ROSENBERGER),
    "c": (Family.GAUSSIAN, EtaKind.NEYMAN),
    "d": (Family.GAUSSIAN, EtaKind.ZHANG),
}

_BERNOULLI_GRID = [(0.9, 0.7), (0.9, 0.5), (0.9, 0.3), (0.9, 0.1), (0.7, 0.5),
                   (0.7, 0.3), (0.7, 0.1), (0.5, 0.3), (0.5, 0.1), (0.3, 0.1)]
_GAUSSIAN_GRID = [(10, 5, 1, 1), (8, 5, 1, 1), (6, 5, 1, 1), (10, 5, 4, 1), (8, 5, 4, 1),
                  (6, 5, 4, 1), (10, 5, 1, 4), (8, 5, 1, 4), (6, 5, 1, 4)]

# Published results for n=200, 1e5 replications, q=1.25, y0=(2,2), p=0.75.
# Per row: rho1, mean N1/n (sd), then the two estimator columns (sd):
# p1_hat, p2_hat for Bernoulli designs, var1_hat, var2_hat for Gaussian ones.
REFERENCE_ROWS = {
    "a": [(0.44, 0.44, 0.07, 0.89, 0.03, 0.70, 0.04), (0.38, 0.41, 0.06, 0.89, 0.03, 0.50, 0.05),
          (0.34, 0.40, 0.07, 0.89, 0.03, 0.30, 0.04), (0.33, 0.43, 0.12, 0.89, 0.03, 0.11, 0.03),
          (0.53, 0.50, 0.07, 0.70, 0.05, 0.50, 0.05), (0.48, 0.48, 0.05, 0.70, 0.05, 0.30, 0.04),
          (0.44, 0.48, 0.06, 0.70, 0.05, 0.11, 0.03), (0.56, 0.53, 0.06, 0.50, 0.05, 0.30, 0.05),
          (0.52, 0.53, 0.04, 0.50, 0.05, 0.11, 0.03), (0.58, 0.56, 0.05, 0.30, 0.04, 0.11, 0.03)],
    "b": [(0.65, 0.57, 0.11, 0.89, 0.03, 0.69, 0.05), (0.68, 0.63, 0.08, 0.89, 0.03, 0.50, 0.06),
          (0.73, 0.69, 0.06, 0.89, 0.03, 0.30, 0.06), (0.81, 0.76, 0.07, 0.89, 0.02, 0.11, 0.04),
          (0.66, 0.58, 0.11, 0.69, 0.04, 0.50, 0.06), (0.70, 0.66, 0.07, 0.70, 0.04, 0.30, 0.06),
          (0.79, 0.74, 0.07, 0.70, 0.04, 0.12, 0.04), (0.67, 0.60, 0.10, 0.50, 0.05, 0.30, 0.05),
          (0.77, 0.70, 0.08, 0.50, 0.04, 0.11, 0.04), (0.73, 0.64, 0.11, 0.30, 0.04, 0.11, 0.03)],
    "c": [(0.63, 0.61, 0.05, 1.01, 0.13, 1.01, 0.16), (0.63, 0.59, 0.07, 1.01, 0.13, 1.01, 0.16),
          (0.63, 0.55, 0.12, 1.01, 0.14, 1.01, 0.15), (0.75, 0.73, 0.06, 4.00, 0.47, 1.01, 0.20),
          (0.75, 0.71, 0.07, 4.00, 0.48, 1.01, 0.19), (0.75, 0.66, 0.13, 4.03, 0.50, 1.01, 0.18),
          (0.50, 0.49, 0.05, 1.01, 0.14, 4.00, 0.57), (0.50, 0.48, 0.07, 1.01, 0.15, 4.03, 0.56),
          (0.50, 0.43, 0.11, 1.01, 0.16, 4.03, 0.54)],
    "d": [(0.56, 0.55, 0.05, 1.01, 0.14, 1.01, 0.15), (0.58, 0.55, 0.07, 1.01, 0.14, 1.01, 0.15),
          (0.61, 0.53, 0.12, 1.01, 0.14, 1.01, 0.15), (0.69, 0.67, 0.06, 4.03, 0.49, 1.01, 0.18),
          (0.71, 0.67, 0.07, 4.03, 0.49, 1.01, 0.18), (0.73, 0.65, 0.13, 4.03, 0.51, 1.01, 0.18),
          (0.45, 0.44, 0.05, 1.01, 0.15, 4.03, 0.54), (0.46, 0.44, 0.07, 1.01, 0.16, 4.03, 0.54),
          (0.48, 0.42, 0.11, 1.01, 0.16, 4.03, 0.53)],
}


def default_utility(family: Family) -> UtilitySpec:
    if family is Family.BERNOULLI:
        return UtilitySpec(UtilityKind.AFFINE, 0.1, 1.0)
    return UtilitySpec(UtilityKind.CLAMP, 0.1, 20.0)


def design_grid(design: str) -> list[tuple]:
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}; expected one of a, b, c, d")
    return list(_BERNOULLI_GRID if DESIGNS[design][0] is Family.BERNOULLI else _GAUSSIAN_GRID)


def design_models(design: str, params: tuple) -> tuple[ResponseModel, ResponseModel]:
    family, _ = DESIGNS[design]
    if family is Family.BERNOULLI:
        return ResponseModel.bernoulli(params[0]), ResponseModel.bernoulli(params[1])
    m1, m2, v1, v2 = params
    return ResponseModel.gaussian(m1, v1), ResponseModel.gaussian(m2, v2)


def design_config(design: str, params: tuple, **overrides) -> SimConfig:
    """Configuration of one table row; keyword overrides replace SimConfig fields."""
    family, eta = DESIGNS[design] if design in DESIGNS else (None, None)
    if family is None:
        raise ValueError(f"unknown design {design!r}; expected one of a, b, c, d")
    m1, m2 = design_models(design, params)
    policy = overrides.pop("policy", None) or TargetPolicy(eta_kind=eta)
    kw = dict(mode=Mode.ARRU, horizon=200, y1_0=2.0, y2_0=2.0, q=1.25,
              schedule=ScheduleKind.EXPONENTIAL, utility=default_utility(family),
              policy=policy, design=design)
    kw.update(overrides)
    return SimConfig(m1, m2, **kw)


@dataclass(frozen=True)
class TableSpec:
    design: str
    rows: list | None = None
    reps: int = 10_000
    n: int = 200
    q: float = 1.25
    y0: tuple[float, float] = (2.0, 2.0)
    bias_p: float = 0.75
    seed: int = 0
    parallelism: int = 1


@dataclass(frozen=True)
class TableRow:
    params: tuple
    rho1: float
    allocation: MetricStats
    est1: MetricStats
    est2: MetricStats
    reference: tuple | None
    violations: int

    @property
    def deviation(self) -> float | None:
        return None if self.reference is None else self.allocation.mean - self.reference[1]


def analytic_rho1(design: str, params: tuple, bias_p: float = 0.75) -> float:
    _, eta = DESIGNS[design]
    m1, m2 = design_models(design, params)
    return target_thresholds(TargetPolicy(eta_kind=eta, bias_p=bias_p), m1, m2)[0]


def reproduce_table(spec: TableSpec) -> list[TableRow]:
    grid = design_grid(spec.design)
    rows = grid if spec.rows is None else [tuple(r) for r in spec.rows]
    family, eta = DESIGNS[spec.design]
    refs = dict(zip(grid, REFERENCE_ROWS[spec.design]))
    out = []
    for params in rows:
        cfg = design_config(spec.design, params, horizon=spec.n, q=spec.q,
                            y1_0=spec.y0[0], y2_0=spec.y0[1], seed=spec.seed,
                            policy=TargetPolicy(eta_kind=eta, bias_p=spec.bias_p))
        reps = run_replications(cfg, spec.reps, spec.parallelism)
        m1, m2 = design_models(spec.design, params)
        if family is Family.BERNOULLI:
            e1 = metric_stats([r.mean1 for r in reps], m1.mean)
            e2 = metric_stats([r.mean2 for r in reps], m2.mean)
        else:
            e1 = metric_stats([r.var1 for r in reps], m1.var)
            e2 = metric_stats([r.var2 for r in reps], m2.var)
        rho1 = analytic_rho1(spec.design, params, spec.bias_p)
        out.append(TableRow(tuple(params), rho1,
                            metric_stats([r.allocation_fraction for r in reps], rho1),
                            e1, e2, refs.get(tuple(params)),
                            sum(r.violations for r in reps)))
    return out


def format_table(design: str, rows: list[TableRow]) -> str:
    family, eta = DESIGNS[design]
    est = ("p1_hat", "p2_hat") if family is Family.BERNOULLI else ("var1_hat", "var2_hat")
    par = ("p1", "p2") if family is Family.BERNOULLI else ("m1", "m2", "var1", "var2")
    head = list(par) + ["rho1", "N1/n", est[0], est[1], "ref N1/n", "dev"]
    lines = [f"design ({design}): eta = {eta.value}", " ".join(f"{h:>12}" for h in head)]
    for r in rows:
        cells = [f"{p:>12g}" for p in r.params]
        cells.append(f"{round_half_up(r.rho1):>12.2f}")
        for m in (r.allocation, r.est1, r.est2):
            cells.append(f"{m.mean:.2f}({m.sd:.2f})".rjust(12))
        if r.reference is None:
            cells += ["-".rjust(12), "-".rjust(12)]
        else:
            cells.append(f"{r.reference[1]:.2f}({r.reference[2]:.2f})".rjust(12))
            cells.append(f"{r.deviation:+.3f}".rjust(12))
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def table_csv(design: str, rows: list[TableRow]) -> str:
    family, _ = DESIGNS[design]
    par = ("p1", "p2") if family is Family.BERNOULLI else ("m1", "m2", "var1", "var2")
    head = list(par) + ["rho1", "alloc_mean", "alloc_sd", "alloc_rmse", "est1_mean", "est1_sd",
                        "est2_mean", "est2_sd", "ref_alloc_mean", "ref_alloc_sd", "deviation"]
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for r in rows:
        vals = [fmt(p) for p in r.params] + [fmt(r.rho1), fmt(r.allocation.mean),
                fmt(r.allocation.sd), fmt(r.allocation.rmse), fmt(r.est1.mean), fmt(r.est1.sd),
                fmt(r.est2.mean), fmt(r.est2.sd)]
        if r.reference is None:
            vals += ["", "", ""]
        else:
            vals += [fmt(r.reference[1]), fmt(r.reference[2]), fmt(r.deviation)]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def round_half_up(x: float, places: int = 2) -> float:
    """Round as printed tables do: ties away from zero, after removing float noise."""
    from decimal import ROUND_HALF_UP, Decimal
    q = Decimal(1).scaleb(-places)
    return float(Decimal(f"{x:.12g}").quantize(q, rounding=ROUND_HALF_UP))
