"""Two-colour randomly reinforced urn: draw, observe, reinforce.

This is the reference (pure Python) path. ``arru.kernel`` runs the same
dynamics compiled, for Monte Carlo work; both consume the random stream in
the same order and produce bit-identical trajectories.

Per step, with ``z = y1 / (y1 + y2)`` and active thresholds ``(rho1, rho2)``:

1. one uniform ``u`` picks the colour, red iff ``u < z``;
2. the drawn arm's response is sampled (the other arm's is never drawn);
3. red gains ``utility(response)`` iff ``z <= rho1``, white iff ``z >= rho2``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .rng import Xoshiro256pp
from .schedule import ScheduleKind, ThresholdState, advance
from .targets import (ArmEstimates, Family, ResponseModel, TargetPolicy,
                      mle, thresholds_from_estimates, update_estimates)

RED, WHITE = 1, 0
INCREMENT_EPS = (0.5, 0.1, 0.01)


class Mode(str, Enum):
    RRU = "RRU"
    MRRU = "MRRU"
    ARRU = "ARRU"


class UtilityKind(str, Enum):
    AFFINE = "affine"
    CLAMP = "clamp"


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _clipped_normal_mean(m: float, s: float, lo: float, hi: float) -> float:
    """E[min(max(X, lo), hi)] for X ~ N(m, s**2)."""
    al, be = (lo - m) / s, (hi - m) / s
    pa, pb = _norm_cdf(al), _norm_cdf(be)
    inner = m * (pb - pa) - s * (_norm_pdf(be) - _norm_pdf(al))
    return lo * pa + hi * (1.0 - pb) + inner


@dataclass(frozen=True)
class UtilitySpec:
    """Maps a response into a reinforcement in [a, b].

    ``affine`` sends x in [0, 1] to ``a + (b - a) x`` (x is clipped to [0, 1]
    first); ``clamp`` sends x to ``min(max(x, a), b)``.
    """

    kind: UtilityKind = UtilityKind.AFFINE
    a: float = 0.1
    b: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.a <= self.b < math.inf):
            raise ValueError(f"utility needs 0 < a <= b < inf, got a={self.a}, b={self.b}")

    def __call__(self, x: float) -> float:
        if self.kind is UtilityKind.AFFINE:
            return self.a + (self.b - self.a) * min(max(x, 0.0), 1.0)
        return min(max(x, self.a), self.b)

    def mean(self, model: ResponseModel) -> float:
        """Mean reinforcement ``m_j`` of an arm."""
        if model.family is Family.BERNOULLI:
            p = model.mean
            return (1.0 - p) * self(0.0) + p * self(1.0)
        s = math.sqrt(model.var)
        if self.kind is UtilityKind.AFFINE:
            return self.a + (self.b - self.a) * _clipped_normal_mean(model.mean, s, 0.0, 1.0)
        return _clipped_normal_mean(model.mean, s, self.a, self.b)


@dataclass(frozen=True)
class UrnState:
    step_index: int
    y1: float
    y2: float
    n1: int = 0
    n2: int = 0

    @property
    def total(self) -> float:
        return self.y1 + self.y2

    @property
    def z(self) -> float:
        return self.y1 / (self.y1 + self.y2)


@dataclass(frozen=True)
class StepTrace:
    drawn_color: int
    uniform_draw: float
    response: float
    reinforcement: float
    w1: int
    w2: int
    rho1_used: float
    rho2_used: float


@dataclass(frozen=True)
class SimConfig:
    model1: ResponseModel
    model2: ResponseModel
    mode: Mode = Mode.ARRU
    horizon: int = 200
    y1_0: float = 2.0
    y2_0: float = 2.0
    utility: UtilitySpec = UtilitySpec()
    policy: TargetPolicy = TargetPolicy()
    schedule: ScheduleKind = ScheduleKind.EXPONENTIAL
    q: float = 1.25
    seed: int = 0
    initial_rho1: float | None = None
    initial_rho2: float | None = None
    design: str | None = None

    def __post_init__(self):
        if not (self.y1_0 > 0 and self.y2_0 > 0):
            raise ValueError("initial masses y1_0, y2_0 must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if not self.q > 1.0:
            raise ValueError(f"schedule requires q > 1, got {self.q}")
        if self.model1.family is not self.model2.family:
            raise ValueError("both arms must share one response family")
        if self.mode is Mode.MRRU and (self.initial_rho1 is None or self.initial_rho2 is None):
            raise ValueError("MRRU mode needs fixed thresholds initial_rho1, initial_rho2")
        r1, r2 = self.initial_thresholds
        if not (0.0 < r2 <= r1 < 1.0):
            raise ValueError(f"initial thresholds need 0 < rho2 <= rho1 < 1, got ({r1}, {r2})")

    @property
    def families(self) -> tuple[Family, Family]:
        return self.model1.family, self.model2.family

    @property
    def initial_thresholds(self) -> tuple[float, float]:
        """Thresholds before any data; ARRU defaults to the policy fallbacks."""
        if self.initial_rho1 is not None and self.initial_rho2 is not None:
            return self.initial_rho1, self.initial_rho2
        return thresholds_from_estimates(self.policy, ArmEstimates(), self.families)

    @property
    def superior_arm(self) -> int:
        """1 if arm 1 has the larger mean reinforcement, else 2."""
        m1, m2 = self.utility.mean(self.model1), self.utility.mean(self.model2)
        return 1 if m1 >= m2 else 2

    def with_seed(self, seed: int) -> "SimConfig":
        from dataclasses import replace
        return replace(self, seed=seed)


def draw_color(z: float, u: float) -> int:
    """RED iff ``u < z``; ties go to WHITE."""
    if not 0.0 < z < 1.0:
        raise ValueError(f"urn proportion must lie in (0, 1), got {z}")
    return RED if u < z else WHITE


def step(state: UrnState, rho1: float, rho2: float, rng,
         models: tuple[ResponseModel, ResponseModel],
         utility: UtilitySpec) -> tuple[UrnState, StepTrace]:
    z = state.z
    u = rng.uniform()
    color = draw_color(z, u)
    w1 = 1 if z <= rho1 else 0
    w2 = 1 if z >= rho2 else 0
    y1, y2, n1, n2 = state.y1, state.y2, state.n1, state.n2
    if color == RED:
        response = models[0].sample(rng)
        d = utility(response) if w1 else 0.0
        y1 += d
        n1 += 1
    else:
        response = models[1].sample(rng)
        d = utility(response) if w2 else 0.0
        y2 += d
        n2 += 1
    nxt = UrnState(state.step_index + 1, y1, y2, n1, n2)
    return nxt, StepTrace(color, u, response, d, w1, w2, rho1, rho2)


def increment_bound_check(prev: UrnState, nxt: UrnState, eps: float, b: float) -> bool:
    """A large urn cannot move its proportion by ``eps`` or more in one step."""
    if prev.total <= b * (1.0 - eps) / eps:
        return True
    return abs(nxt.z - prev.z) < eps


@dataclass
class Trajectory:
    """Per-step columns indexed by step ``n``; row 0 holds the initial state.

    Step-only columns (``x``, ``response``, ...) carry a placeholder in row 0
    (``x = -1``, zeros elsewhere). ``rho*_hat`` and ``rho*_tilde`` in row n are
    the live and frozen thresholds after step n; the pair gating step n is
    ``rho*_used[n]``.
    """

    y1: np.ndarray
    y2: np.ndarray
    x: np.ndarray
    uniform: np.ndarray
    response: np.ndarray
    reinforcement: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    rho1_used: np.ndarray
    rho2_used: np.ndarray
    rho1_hat: np.ndarray
    rho2_hat: np.ndarray
    rho1_tilde: np.ndarray
    rho2_tilde: np.ndarray
    estimates: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    superior: int = 1
    b: float = 1.0
    violations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.y1) - 1

    @property
    def y(self) -> np.ndarray:
        return self.y1 + self.y2

    @property
    def z(self) -> np.ndarray:
        return self.y1 / (self.y1 + self.y2)

    @property
    def n1(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.x[1:] == RED)))

    def rho_tilde(self, arm: int | None = None) -> np.ndarray:
        arm = self.superior if arm is None else arm
        return self.rho1_tilde if arm == 1 else self.rho2_tilde

    def rho_bar(self, arm: int | None = None) -> np.ndarray:
        """``rho_bar[n]`` is the mean of the active thresholds over steps 1..n."""
        t = self.rho_tilde(arm)
        out = np.empty_like(t)
        out[0] = np.nan
        # deviations from the start value keep constant thresholds exact
        out[1:] = t[0] + np.cumsum(t[:-1] - t[0]) / np.arange(1, len(t))
        return out

    def state(self, n: int) -> UrnState:
        n1 = int(np.count_nonzero(self.x[1:n + 1] == RED))
        return UrnState(n, float(self.y1[n]), float(self.y2[n]), n1, n - n1)

    def steps(self):
        for n in range(1, self.horizon + 1):
            yield StepTrace(int(self.x[n]), float(self.uniform[n]), float(self.response[n]),
                            float(self.reinforcement[n]), int(self.w1[n]), int(self.w2[n]),
                            float(self.rho1_used[n]), float(self.rho2_used[n]))


def _empty_columns(horizon: int) -> dict:
    cols = {k: np.zeros(horizon + 1) for k in (
        "y1", "y2", "uniform", "response", "reinforcement", "rho1_used", "rho2_used",
        "rho1_hat", "rho2_hat", "rho1_tilde", "rho2_tilde")}
    cols["x"] = np.full(horizon + 1, -1, dtype=np.int8)
    cols["w1"] = np.zeros(horizon + 1, dtype=np.int8)
    cols["w2"] = np.zeros(horizon + 1, dtype=np.int8)
    return cols


def simulate_trajectory(config: SimConfig, check_increments: bool = True) -> Trajectory:
    """Run ``config.horizon`` steps of the reference dynamics."""
    rng = Xoshiro256pp(config.seed)
    models = (config.model1, config.model2)
    r1, r2 = config.initial_thresholds
    ts = ThresholdState.start(config.schedule, config.q, r1, r2, config.horizon)
    est = ArmEstimates()
    state = UrnState(0, config.y1_0, config.y2_0)
    cols = _empty_columns(config.horizon)
    cols["y1"][0], cols["y2"][0] = state.y1, state.y2
    cols["rho1_hat"][0], cols["rho2_hat"][0] = r1, r2
    cols["rho1_tilde"][0], cols["rho2_tilde"][0] = r1, r2
    b = config.utility.b

    for n in range(1, config.horizon + 1):
        if config.mode is Mode.RRU:
            g1, g2 = 1.0, 0.0
        else:
            g1, g2 = ts.active
        prev = state
        state, tr = step(state, g1, g2, rng, models, config.utility)
        if check_increments:
            for eps in INCREMENT_EPS:
                if not increment_bound_check(prev, state, eps, b):
                    raise AssertionError(f"increment bound violated at step {n}, eps={eps}")
        est = update_estimates(est, 1 if tr.drawn_color == RED else 2, tr.response)
        if config.mode is Mode.ARRU:
            live = thresholds_from_estimates(config.policy, est, config.families)
        elif config.mode is Mode.MRRU:
            live = (r1, r2)
        else:
            live = (ts.rho1_hat, ts.rho2_hat)
        ts = advance(ts, n, live)
        cols["y1"][n], cols["y2"][n] = state.y1, state.y2
        cols["x"][n] = tr.drawn_color
        cols["uniform"][n] = tr.uniform_draw
        cols["response"][n] = tr.response
        cols["reinforcement"][n] = tr.reinforcement
        cols["w1"][n], cols["w2"][n] = tr.w1, tr.w2
        cols["rho1_used"][n], cols["rho2_used"][n] = g1, g2
        cols["rho1_hat"][n], cols["rho2_hat"][n] = ts.rho1_hat, ts.rho2_hat
        cols["rho1_tilde"][n], cols["rho2_tilde"][n] = ts.rho1_tilde, ts.rho2_tilde

    e1 = mle(est.arm1, config.model1.family, config.policy)
    e2 = mle(est.arm2, config.model2.family, config.policy)
    return Trajectory(**cols, estimates=(e1.mean, e1.var, e2.mean, e2.var),
                      superior=config.superior_arm, b=b)


CSV_COLUMNS = ("n", "y1", "y2", "z", "x", "response", "reinforcement", "w1", "w2",
               "rho1_hat", "rho2_hat", "rho1_tilde", "rho2_tilde")


def fmt(v: float) -> str:
    return f"{v:.12g}"


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    z = traj.z
    for n in range(1, traj.horizon + 1):
        row = (str(n), fmt(traj.y1[n]), fmt(traj.y2[n]), fmt(z[n]), str(int(traj.x[n])),
               fmt(traj.response[n]), fmt(traj.reinforcement[n]),
               str(int(traj.w1[n])), str(int(traj.w2[n])),
               fmt(traj.rho1_hat[n]), fmt(traj.rho2_hat[n]),
               fmt(traj.rho1_tilde[n]), fmt(traj.rho2_tilde[n]))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
