"""Empirical checks of the urn's limit behaviour.

Everything here is post-processing over trajectories (``urn.Trajectory``)
or replication summaries; nothing feeds back into the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .montecarlo import ReplicationSummary
from .urn import Trajectory

INF = math.inf
DEFAULT_NU = 0.25


def t_process(traj: Trajectory, rho: float, sign: int = 1) -> np.ndarray:
    """Signed scaled distance ``sign * Y_n * (rho - Z_n)`` for n = 0..horizon."""
    return sign * traj.y * (rho - traj.z)


def t_process_counts(traj: Trajectory, rho: float, sign: int = 1) -> np.ndarray:
    """Same process written as ``sign * (rho * Y2 - (1 - rho) * Y1)``."""
    return sign * (rho * traj.y2 - (1.0 - rho) * traj.y1)


@dataclass(frozen=True)
class DeltaBlock:
    """Steps ``start + 1 .. start + d`` under the threshold frozen at ``start``."""

    j: int
    start: int
    d: int
    rho: float
    delta: np.ndarray
    y: np.ndarray

    @property
    def steps(self) -> range:
        return range(self.start + 1, self.start + self.d + 1)


def block_bounds(q: float, horizon: int) -> list[tuple[int, int, int]]:
    """``(j, floor(q**j), floor(q**(j+1)))`` for nonempty blocks inside the horizon."""
    out = []
    j = 1
    qf = Fraction(q)
    p = qf
    while True:
        lo = p.numerator // p.denominator
        p_next = p * qf
        hi = p_next.numerator // p_next.denominator
        if hi > horizon:
            return out
        if hi > lo:
            out.append((j, lo, hi))
        j += 1
        p = p_next


def _sign(traj: Trajectory) -> int:
    return 1 if traj.superior == 1 else -1


def delta_series(traj: Trajectory, q: float) -> list[DeltaBlock]:
    sign = _sign(traj)
    til = traj.rho_tilde()
    z, y = traj.z, traj.y
    blocks = []
    for j, lo, hi in block_bounds(q, traj.horizon):
        rho = float(til[lo])
        blocks.append(DeltaBlock(j, lo, hi - lo, rho, sign * (rho - z[lo + 1:hi + 1]),
                                 y[lo + 1:hi + 1]))
    return blocks


def crossing_time(delta: np.ndarray, y: np.ndarray, b: float) -> float:
    """First k >= 1 with ``y_k * delta_k`` in ``[-b, 0]``; ``INF`` if none."""
    t = np.asarray(y) * np.asarray(delta)
    hit = np.flatnonzero((t >= -b) & (t <= 0.0))
    return float(hit[0] + 1) if hit.size else INF


@dataclass(frozen=True)
class CrossingReport:
    j: int
    tau: int
    crossed: bool
    r: float
    d: int

    @property
    def exceeded(self) -> bool:
        """The event that no crossing happens within the first ``r`` steps."""
        return not self.crossed or self.tau > self.r


def crossing_report(traj: Trajectory, q: float, nu: float = DEFAULT_NU,
                    b: float | None = None) -> list[CrossingReport]:
    """Per block crossing times; a missing crossing is reported as ``d + 1``."""
    if not 0.0 < nu < 0.5:
        raise ValueError("nu must lie in (0, 1/2)")
    b = traj.b if b is None else b
    out = []
    for blk in delta_series(traj, q):
        tau = crossing_time(blk.delta, blk.y, b)
        crossed = tau != INF
        out.append(CrossingReport(blk.j, int(tau) if crossed else blk.d + 1, crossed,
                                  q ** (blk.j * (1.0 + nu) / 2.0), blk.d))
    return out


def crossing_event_frequency(trajectories: Iterable[Trajectory], q: float,
                             nu: float = DEFAULT_NU, min_count: int = 100) -> dict[int, float]:
    """Fraction of trajectories in which block j sees no crossing within ``r_j`` steps."""
    counts: dict[int, int] = {}
    total = 0
    for traj in trajectories:
        total += 1
        for rep in crossing_report(traj, q, nu):
            counts[rep.j] = counts.get(rep.j, 0) + int(rep.exceeded)
    if total < min_count:
        raise ValueError(f"need at least {min_count} trajectories, got {total}")
    return {j: c / total for j, c in sorted(counts.items())}


def harmonic_moment(trajectories: Iterable[Trajectory], exponent: float,
                    checkpoints: Sequence[int]) -> np.ndarray:
    """Monte Carlo estimate of ``E[(n / Y_n) ** exponent]`` at each checkpoint."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    terms: list[list[float]] = [[] for _ in cps]
    for traj in trajectories:
        if cps.size and cps.max() > traj.horizon:
            raise ValueError("checkpoint beyond horizon")
        vals = (cps / traj.y[cps]) ** exponent
        for i, v in enumerate(vals):
            terms[i].append(float(v))
    return np.array([math.fsum(t) / len(t) if t else math.nan for t in terms])


def bias_bound(trajectories: Iterable[Trajectory], rho: float,
               checkpoints: Sequence[int], min_count: int = 100) -> np.ndarray:
    """Monte Carlo estimate of ``n * E|rho_bar_n - rho|**2`` at each checkpoint."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    terms: list[list[float]] = [[] for _ in cps]
    for traj in trajectories:
        rb = traj.rho_bar()[cps]
        for i, v in enumerate(cps * (rb - rho) ** 2):
            terms[i].append(float(v))
    got = len(terms[0]) if terms else 0
    if got < min_count:
        raise ValueError(f"need at least {min_count} trajectories, got {got}")
    return np.array([math.fsum(t) / len(t) for t in terms])


def clt_sample(summaries: Sequence[ReplicationSummary], center: str | float,
               n: int | None = None) -> np.ndarray:
    """``sqrt(n) * (N1/n - center)`` per replication.

    ``center`` is ``"rho_bar"`` for the running threshold mean of each
    replication, or a fixed number.
    """
    if not summaries:
        raise ValueError("no summaries")
    ns = {s.horizon for s in summaries}
    if len(ns) != 1 or (n is not None and ns != {n}):
        raise ValueError(f"summaries must share one horizon, got {sorted(ns)}")
    n = ns.pop()
    frac = np.array([s.allocation_fraction for s in summaries])
    if center == "rho_bar":
        c = np.array([s.rho_bar_final for s in summaries])
    else:
        c = float(center)
    return math.sqrt(n) * (frac - c)


def normal_cdf(x, mean: float = 0.0, sd: float = 1.0):
    """Gaussian CDF through ``math.erfc`` (relative error near machine epsilon)."""
    return 0.5 * math.erfc(-(x - mean) / (sd * math.sqrt(2.0)))


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function ``P(K > lam)``.

    Uses the alternating series for lam >= 1 and the theta-function form of
    the CDF below that, each truncated at ``terms`` terms.
    """
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        c = -(math.pi ** 2) / (8.0 * lam * lam)
        s = math.fsum(math.exp(c * (2 * k - 1) ** 2) for k in range(1, terms + 1))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * s))
    s = math.fsum((-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
                  for k in range(1, terms + 1))
    return min(1.0, max(0.0, 2.0 * s))


def ks_statistic(samples: Sequence[float], mean: float, variance: float) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    sd = math.sqrt(variance)
    cdf = np.array([normal_cdf(v, mean, sd) for v in x])
    n = len(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_test(samples: Sequence[float], mean: float, variance: float) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against N(mean, variance)."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 8:
        raise ValueError("ks_test needs at least 8 samples")
    if not variance > 0.0 or not np.all(np.isfinite(x)):
        raise ValueError("ks_test needs a positive variance and finite samples")
    d = ks_statistic(x, mean, variance)
    return d, kolmogorov_sf(math.sqrt(len(x)) * d)


@dataclass(frozen=True)
class Verdict:
    check_name: str
    passed: bool
    observed: dict
    threshold: dict

    def to_dict(self) -> dict:
        return {"check_name": self.check_name, "pass": self.passed,
                "observed": self.observed, "threshold": self.threshold}
