"""INI-style run configuration.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#`` and
``;`` start comments. Sections and keys (all optional unless noted)::

    [run]       mode = ARRU|MRRU|RRU, design = a|b|c|d, horizon, seed
    [urn]       y1_0, y2_0
    [arms]      family = bernoulli|gaussian; p1, p2 (bernoulli) or
                m1, m2, var1, var2 (gaussian)
    [utility]   kind = affine|clamp, a, b
    [policy]    eta = wei|rosenberger|neyman|zhang|constant, eta_value, bias_p,
                clamp_eps, fallback_eta, fallback_p, fallback_sigma2, prior_weight
    [schedule]  kind = exponential|every_step, q
    [thresholds] rho1, rho2   (required in MRRU mode; initial values otherwise)

ARRU mode requires ``design``; the design fixes the response family and the
target function. Only ``SEED`` is read from the environment.
"""

from __future__ import annotations

import configparser
import os

from .montecarlo import DESIGNS, default_utility
from .schedule import ScheduleKind
from .targets import EtaKind, Family, ResponseModel, TargetPolicy
from .urn import Mode, SimConfig, UtilityKind, UtilitySpec


class ConfigError(ValueError):
    pass


SCHEMA = {
    "run": {"mode", "design", "horizon", "seed"},
    "urn": {"y1_0", "y2_0"},
    "arms": {"family", "p1", "p2", "m1", "m2", "var1", "var2"},
    "utility": {"kind", "a", "b"},
    "policy": {"eta", "eta_value", "bias_p", "clamp_eps", "fallback_eta", "fallback_p",
               "fallback_sigma2", "prior_weight"},
    "schedule": {"kind", "q"},
    "thresholds": {"rho1", "rho2"},
}

DEFAULTS = {"q": 1.25, "bias_p": 0.75, "y0": (2.0, 2.0), "horizon": 200, "clamp_eps": 0.01}


def _choice(enum, value: str, what: str):
    try:
        return enum(value.strip().lower() if enum is not Mode else value.strip().upper())
    except ValueError:
        opts = ", ".join(e.value for e in enum)
        raise ConfigError(f"invalid {what} {value!r}; expected one of {opts}") from None


def parse_config(text: str, env: dict | None = None) -> SimConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    unknown = [f"[{s}]" for s in cp.sections() if s not in SCHEMA]
    for s in cp.sections():
        if s in SCHEMA:
            unknown += [f"{s}.{k}" for k in cp[s] if k not in SCHEMA[s]]
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(sorted(unknown)))

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return default

    def num(section, key, default=None, cast=float):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None

    def need(section, key, cast=float):
        v = num(section, key, cast=cast)
        if v is None:
            raise ConfigError(f"missing {section}.{key}")
        return v

    mode = _choice(Mode, get("run", "mode", "ARRU"), "mode")
    design = get("run", "design")
    if design is not None:
        design = design.strip().lower()
        if design not in DESIGNS:
            raise ConfigError(f"unknown design {design!r}; expected one of a, b, c, d")
    if mode is Mode.ARRU and design is None:
        raise ConfigError("missing design (run.design is required in ARRU mode)")

    if design is not None:
        family, eta = DESIGNS[design]
        fam_raw = get("arms", "family")
        if fam_raw is not None and _choice(Family, fam_raw, "family") is not family:
            raise ConfigError(f"arms.family conflicts with design {design}")
    else:
        family = _choice(Family, get("arms", "family", "bernoulli"), "family")
        eta = EtaKind.CONSTANT
    eta_raw = get("policy", "eta")
    if eta_raw is not None:
        eta = _choice(EtaKind, eta_raw, "eta")

    if family is Family.BERNOULLI:
        m1 = ResponseModel.bernoulli(need("arms", "p1"))
        m2 = ResponseModel.bernoulli(need("arms", "p2"))
    else:
        try:
            m1 = ResponseModel.gaussian(need("arms", "m1"), need("arms", "var1"))
            m2 = ResponseModel.gaussian(need("arms", "m2"), need("arms", "var2"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    base_u = default_utility(family)
    ukind = _choice(UtilityKind, get("utility", "kind", base_u.kind.value), "utility kind")
    env = os.environ if env is None else env
    seed = num("run", "seed", 0, int)
    if env.get("SEED"):
        seed = int(env["SEED"])
    try:
        utility = UtilitySpec(ukind, num("utility", "a", base_u.a), num("utility", "b", base_u.b))
        policy = TargetPolicy(
            eta_kind=eta,
            bias_p=num("policy", "bias_p", DEFAULTS["bias_p"]),
            clamp_eps=num("policy", "clamp_eps", DEFAULTS["clamp_eps"]),
            fallback_eta=num("policy", "fallback_eta", 0.5),
            fallback_p=num("policy", "fallback_p", 0.5),
            fallback_sigma2=num("policy", "fallback_sigma2", 1.0),
            eta_value=num("policy", "eta_value", 0.5),
            prior_weight=num("policy", "prior_weight", 0.0))
        q = num("schedule", "q", DEFAULTS["q"])
        if not q > 1.0:
            raise ConfigError(f"schedule.q = {q} violates the constraint q > 1")
        y1_0 = num("urn", "y1_0", DEFAULTS["y0"][0])
        y2_0 = num("urn", "y2_0", DEFAULTS["y0"][1])
        if not (y1_0 > 0 and y2_0 > 0):
            raise ConfigError("urn.y1_0 and urn.y2_0 violate the constraint y0 > 0")
        return SimConfig(
            m1, m2, mode=mode, horizon=num("run", "horizon", DEFAULTS["horizon"], int),
            y1_0=y1_0, y2_0=y2_0, utility=utility, policy=policy,
            schedule=_choice(ScheduleKind, get("schedule", "kind", "exponential"), "schedule kind"),
            q=q, seed=seed & 0xFFFFFFFFFFFFFFFF,
            initial_rho1=num("thresholds", "rho1"), initial_rho2=num("thresholds", "rho2"),
            design=design)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str, env: dict | None = None) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), env)
