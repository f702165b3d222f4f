"""Response models, arm estimators and target allocation functions.

Thresholds are built from a target allocation ``eta`` and a biasing weight
``p``::

    f1 = p * eta + (1 - p)      f2 = p * eta

and then clamped into ``[clamp_eps, 1 - clamp_eps]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

EPS_DENOM = 1e-9
VAR_FLOOR = 1e-9


class Family(str, Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"


class EtaKind(str, Enum):
    WEI = "wei"
    ROSENBERGER = "rosenberger"
    NEYMAN = "neyman"
    ZHANG = "zhang"
    CONSTANT = "constant"


@dataclass(frozen=True)
class ResponseModel:
    """Bernoulli(p) when ``family`` is bernoulli, else Gaussian(mean, var)."""

    family: Family
    mean: float
    var: float = 0.0

    def __post_init__(self):
        if self.family is Family.BERNOULLI:
            if not 0.0 <= self.mean <= 1.0:
                raise ValueError(f"Bernoulli p must lie in [0, 1], got {self.mean}")
        elif not self.var > 0.0:
            raise ValueError(f"Gaussian variance must be positive, got {self.var}")

    @classmethod
    def bernoulli(cls, p: float) -> "ResponseModel":
        return cls(Family.BERNOULLI, float(p), float(p) * (1.0 - float(p)))

    @classmethod
    def gaussian(cls, m: float, sigma2: float) -> "ResponseModel":
        return cls(Family.GAUSSIAN, float(m), float(sigma2))

    def sample(self, rng) -> float:
        if self.family is Family.BERNOULLI:
            return 1.0 if rng.uniform() < self.mean else 0.0
        return self.mean + math.sqrt(self.var) * rng.normal()


@dataclass(frozen=True)
class ArmStats:
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0


@dataclass(frozen=True)
class ArmEstimates:
    arm1: ArmStats = ArmStats()
    arm2: ArmStats = ArmStats()

    def __getitem__(self, arm: int) -> ArmStats:
        if arm == 1:
            return self.arm1
        if arm == 2:
            return self.arm2
        raise IndexError(arm)


def update_estimates(est: ArmEstimates, arm: int, response: float) -> ArmEstimates:
    s = est[arm]
    s = ArmStats(s.count + 1, s.total + response, s.total_sq + response * response)
    return replace(est, arm1=s) if arm == 1 else replace(est, arm2=s)


@dataclass(frozen=True)
class TargetPolicy:
    eta_kind: EtaKind = EtaKind.WEI
    bias_p: float = 0.75
    clamp_eps: float = 0.01
    fallback_eta: float = 0.5
    fallback_sigma2: float = 1.0
    fallback_p: float = 0.5
    eta_value: float = 0.5
    # pseudo-observations at fallback_p added to Bernoulli estimates; 0 is the MLE
    prior_weight: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.bias_p <= 1.0:
            raise ValueError(f"bias_p must lie in (0, 1], got {self.bias_p}")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps must lie in (0, 0.5), got {self.clamp_eps}")
        if not 0.0 < self.fallback_eta < 1.0:
            raise ValueError(f"fallback_eta must lie in (0, 1), got {self.fallback_eta}")
        if not 0.0 < self.fallback_p < 1.0:
            raise ValueError(f"fallback_p must lie in (0, 1), got {self.fallback_p}")
        if not self.fallback_sigma2 > 0.0:
            raise ValueError("fallback_sigma2 must be positive")
        if self.prior_weight < 0.0:
            raise ValueError("prior_weight must be nonnegative")


@dataclass(frozen=True)
class ParamEstimate:
    mean: float
    var: float
    fallback: bool = False


def mle(stats: ArmStats, family: Family, policy: TargetPolicy) -> ParamEstimate:
    """Maximum likelihood estimate for one arm, with policy fallbacks.

    Variances use divisor N. Bernoulli estimates report ``p(1-p)`` as the
    variance; a positive ``policy.prior_weight`` shrinks them toward
    ``fallback_p``.
    """
    n = stats.count
    if family is Family.BERNOULLI:
        w = policy.prior_weight
        if n < 1 and w == 0.0:
            p = policy.fallback_p
            return ParamEstimate(p, p * (1.0 - p), True)
        p = (stats.total + w * policy.fallback_p) / (n + w)
        return ParamEstimate(p, p * (1.0 - p))
    m = stats.total / n if n >= 1 else 0.0
    if n < 2:
        return ParamEstimate(m, policy.fallback_sigma2, True)
    v = stats.total_sq / n - m * m
    return ParamEstimate(m, max(v, VAR_FLOOR))


# Each eta function returns (value, fallback_flag).

def eta_wei(p1: float, p2: float, fallback: float = 0.5) -> tuple[float, bool]:
    den = 2.0 - p1 - p2
    if den < EPS_DENOM:
        return fallback, True
    return (1.0 - p1) / den, False


def eta_rosenberger(p1: float, p2: float, fallback: float = 0.5) -> tuple[float, bool]:
    if p1 < EPS_DENOM and p2 < EPS_DENOM:
        return fallback, True
    s1 = math.sqrt(p1)
    return s1 / (s1 + math.sqrt(p2)), False


def eta_neyman(sigma1: float, sigma2: float, fallback: float = 0.5) -> tuple[float, bool]:
    return sigma1 / (sigma1 + sigma2), False


def eta_zhang(m1: float, m2: float, sigma1: float, sigma2: float,
              fallback: float = 0.5) -> tuple[float, bool]:
    if m1 <= 0.0 or m2 <= 0.0:
        return fallback, True
    num = sigma1 * math.sqrt(m2)
    return num / (num + sigma2 * math.sqrt(m1)), False


def eta_from_params(kind: EtaKind, mean1: float, var1: float, mean2: float, var2: float,
                    policy: TargetPolicy) -> tuple[float, bool]:
    fb = policy.fallback_eta
    if kind is EtaKind.WEI:
        return eta_wei(mean1, mean2, fb)
    if kind is EtaKind.ROSENBERGER:
        return eta_rosenberger(mean1, mean2, fb)
    if kind is EtaKind.NEYMAN:
        return eta_neyman(math.sqrt(var1), math.sqrt(var2), fb)
    if kind is EtaKind.ZHANG:
        return eta_zhang(mean1, mean2, math.sqrt(var1), math.sqrt(var2), fb)
    return policy.eta_value, False


def combine(eta: float, bias_p: float, clamp_eps: float) -> tuple[float, float]:
    """Biased linear combination of ``eta``, clamped into the open unit interval."""
    f1 = bias_p * eta + (1.0 - bias_p)
    f2 = bias_p * eta
    hi = 1.0 - clamp_eps
    return min(max(f1, clamp_eps), hi), min(max(f2, clamp_eps), hi)


def thresholds_from_estimates(policy: TargetPolicy, est: ArmEstimates,
                              families: tuple[Family, Family]) -> tuple[float, float]:
    e1 = mle(est.arm1, families[0], policy)
    e2 = mle(est.arm2, families[1], policy)
    eta, _ = eta_from_params(policy.eta_kind, e1.mean, e1.var, e2.mean, e2.var, policy)
    return combine(eta, policy.bias_p, policy.clamp_eps)


def target_thresholds(policy: TargetPolicy, model1: ResponseModel,
                      model2: ResponseModel) -> tuple[float, float]:
    """Limiting thresholds (rho1, rho2) at the true parameters, unclamped."""
    eta, _ = eta_from_params(policy.eta_kind, model1.mean, model1.var,
                             model2.mean, model2.var, policy)
    return policy.bias_p * eta + (1.0 - policy.bias_p), policy.bias_p * eta
