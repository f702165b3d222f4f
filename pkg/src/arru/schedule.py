"""Threshold freezing at exponential times and the running centering mean.

Under the exponential schedule the thresholds that gate reinforcement are
refreshed from the live estimates only at the steps ``floor(q**j)``, j >= 1,
and held constant in between. ``rho_bar`` is the running mean of the
thresholds that were active at each elapsed step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction


class ScheduleKind(str, Enum):
    EVERY_STEP = "every_step"
    EXPONENTIAL = "exponential"


def _q_fraction(q: float) -> Fraction:
    # exact rational value of the binary float q
    return Fraction(q)


def update_times(q: float, n_max: int) -> list[int]:
    """Sorted, deduplicated ``{floor(q**j) : j >= 1, floor(q**j) <= n_max}``."""
    if not q > 1.0:
        raise ValueError(f"schedule requires q > 1, got {q}")
    qf = _q_fraction(q)
    out: list[int] = []
    power = qf
    while True:
        t = power.numerator // power.denominator
        if t > n_max:
            return out
        if not out or out[-1] != t:
            out.append(t)
        power *= qf


def freeze_times(q: float, n_max: int) -> list[int]:
    """Steps at which the frozen thresholds refresh: ``floor(q**k)`` for k >= 0.

    Step 1 (k = 0) is always included, so the frozen value at step n is the
    live value captured at ``floor(q**k_n(q, n))``.
    """
    times = update_times(q, n_max)
    if n_max >= 1 and (not times or times[0] != 1):
        times.insert(0, 1)
    return times


def k_n(q: float, n: int) -> int:
    """``floor(log_q(n))`` by exact rational comparison of powers of q."""
    if not q > 1.0:
        raise ValueError(f"schedule requires q > 1, got {q}")
    if n < 1:
        raise ValueError("k_n needs n >= 1")
    qf = _q_fraction(q)
    k = 0
    power = qf
    while power <= n:
        k += 1
        power *= qf
    return k


@dataclass
class ThresholdState:
    kind: ScheduleKind
    q: float
    rho1_hat: float
    rho2_hat: float
    rho1_tilde: float
    rho2_tilde: float
    times: list[int] = field(default_factory=list)
    cursor: int = 0
    acc1: float = 0.0
    acc2: float = 0.0
    base1: float = 0.0
    base2: float = 0.0
    n: int = 0

    @classmethod
    def start(cls, kind: ScheduleKind, q: float, rho1: float, rho2: float,
              horizon: int) -> "ThresholdState":
        times = freeze_times(q, horizon) if kind is ScheduleKind.EXPONENTIAL else []
        return cls(kind, q, rho1, rho2, rho1, rho2, times, base1=rho1, base2=rho2)

    @property
    def active(self) -> tuple[float, float]:
        """Thresholds gating the next step."""
        return self.rho1_tilde, self.rho2_tilde


def advance(ts: ThresholdState, n: int, live: tuple[float, float]) -> ThresholdState:
    """Record step ``n`` with the live estimates computed after it.

    The threshold active during step ``n`` is accumulated first, then the
    frozen pair is refreshed if ``n`` is an update time.
    """
    if n != ts.n + 1:
        raise ValueError(f"advance expects step {ts.n + 1}, got {n}")
    acc1 = ts.acc1 + (ts.rho1_tilde - ts.base1)
    acc2 = ts.acc2 + (ts.rho2_tilde - ts.base2)
    r1, r2 = live
    t1, t2, cursor = ts.rho1_tilde, ts.rho2_tilde, ts.cursor
    if ts.kind is ScheduleKind.EVERY_STEP:
        t1, t2 = r1, r2
    elif cursor < len(ts.times) and ts.times[cursor] == n:
        t1, t2 = r1, r2
        cursor += 1
    return replace(ts, rho1_hat=r1, rho2_hat=r2, rho1_tilde=t1, rho2_tilde=t2,
                   cursor=cursor, acc1=acc1, acc2=acc2, n=n)


def rho_bar(ts: ThresholdState, arm: int = 1) -> float | None:
    """Mean active threshold of ``arm`` over elapsed steps; None before any step."""
    if ts.n == 0:
        return None
    if arm == 1:
        return ts.base1 + ts.acc1 / ts.n
    return ts.base2 + ts.acc2 / ts.n
