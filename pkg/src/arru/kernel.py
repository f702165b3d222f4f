"""Compiled urn dynamics for Monte Carlo replication.

Mirrors ``arru.urn.simulate_trajectory`` operation for operation, including
the random stream layout and the order of floating point operations, so the
two paths agree bit for bit. Functions release the GIL; the Monte Carlo
harness runs batches on a thread pool.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .schedule import ScheduleKind, freeze_times
from .targets import EtaKind, Family
from .urn import Mode, SimConfig, Trajectory, UtilityKind

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi

MODE_CODES = {Mode.RRU: 0, Mode.MRRU: 1, Mode.ARRU: 2}
ETA_CODES = {EtaKind.WEI: 0, EtaKind.ROSENBERGER: 1, EtaKind.NEYMAN: 2,
             EtaKind.ZHANG: 3, EtaKind.CONSTANT: 4}

# result vector layout
R_N1, R_Y1, R_Y2, R_MEAN1, R_VAR1, R_MEAN2, R_VAR2 = 0, 1, 2, 3, 4, 5, 6
R_ACC1, R_ACC2, R_HAT1, R_HAT2, R_TIL1, R_TIL2, R_VIOL = 7, 8, 9, 10, 11, 12, 13
N_RESULTS = 14

# recorded column layout
REC_COLUMNS = ("y1", "y2", "x", "uniform", "response", "reinforcement", "w1", "w2",
               "rho1_used", "rho2_used", "rho1_hat", "rho2_hat", "rho1_tilde", "rho2_tilde")


@njit(cache=True, nogil=True)
def _splitmix(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _seed_state(seed, s):
    state = seed
    for i in range(4):
        s[i] = _splitmix(state)
        state = state + _GOLDEN


@njit(cache=True, nogil=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True, nogil=True)
def _next(s):
    result = _rotl(s[0] + s[3], 23) + s[0]
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, nogil=True)
def _uniform(s):
    return float(_next(s) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, nogil=True)
def _mle(count, total, total_sq, gaussian, fb_p, fb_var, w):
    if not gaussian:
        if count < 1 and w == 0.0:
            return fb_p, fb_p * (1.0 - fb_p)
        p = (total + w * fb_p) / (count + w)
        return p, p * (1.0 - p)
    m = total / count if count >= 1 else 0.0
    if count < 2:
        return m, fb_var
    v = total_sq / count - m * m
    return m, max(v, 1e-9)


@njit(cache=True, nogil=True)
def _eta(kind, mean1, var1, mean2, var2, fb, value):
    if kind == 0:
        den = 2.0 - mean1 - mean2
        if den < 1e-9:
            return fb
        return (1.0 - mean1) / den
    if kind == 1:
        if mean1 < 1e-9 and mean2 < 1e-9:
            return fb
        s1 = math.sqrt(mean1)
        return s1 / (s1 + math.sqrt(mean2))
    if kind == 2:
        s1 = math.sqrt(var1)
        return s1 / (s1 + math.sqrt(var2))
    if kind == 3:
        if mean1 <= 0.0 or mean2 <= 0.0:
            return fb
        num = math.sqrt(var1) * math.sqrt(mean2)
        return num / (num + math.sqrt(var2) * math.sqrt(mean1))
    return value


@njit(cache=True, nogil=True)
def run_one(seed, horizon, mode, gaussian, mean1, sd1, mean2, sd2, affine, a, b,
            eta_kind, eta_value, bias_p, clamp_eps, fb_eta, fb_p, fb_var, w,
            times, y1_0, y2_0, r1_0, r2_0, res, record, rec):
    s = np.empty(4, dtype=np.uint64)
    _seed_state(seed, s)
    have_spare = False
    spare = 0.0
    y1 = y1_0
    y2 = y2_0
    n1 = 0
    c1 = 0
    t1 = 0.0
    q1 = 0.0
    c2 = 0
    t2 = 0.0
    q2 = 0.0
    hat1, hat2 = r1_0, r2_0
    til1, til2 = r1_0, r2_0
    acc1 = 0.0
    acc2 = 0.0
    cursor = 0
    n_times = times.shape[0]
    viol = 0
    hi = 1.0 - clamp_eps
    if record:
        rec[0, 0] = y1
        rec[1, 0] = y2
        rec[2, 0] = -1.0
        rec[10, 0] = hat1
        rec[11, 0] = hat2
        rec[12, 0] = til1
        rec[13, 0] = til2
    for n in range(1, horizon + 1):
        if mode == 0:
            g1, g2 = 1.0, 0.0
        else:
            g1, g2 = til1, til2
        tot = y1 + y2
        z = y1 / tot
        u = _uniform(s)
        red = u < z
        w1 = z <= g1
        w2 = z >= g2
        # response of the drawn arm only
        if gaussian:
            if have_spare:
                nz = spare
                have_spare = False
            else:
                u1 = _uniform(s)
                u2 = _uniform(s)
                r = math.sqrt(-2.0 * math.log(1.0 - u1))
                theta = _TWO_PI * u2
                spare = r * math.sin(theta)
                have_spare = True
                nz = r * math.cos(theta)
            if red:
                xi = mean1 + sd1 * nz
            else:
                xi = mean2 + sd2 * nz
        else:
            pr = mean1 if red else mean2
            xi = 1.0 if _uniform(s) < pr else 0.0
        if affine:
            d = a + (b - a) * min(max(xi, 0.0), 1.0)
        else:
            d = min(max(xi, a), b)
        if red:
            if not w1:
                d = 0.0
            y1 += d
            n1 += 1
            c1 += 1
            t1 = t1 + xi
            q1 = q1 + xi * xi
        else:
            if not w2:
                d = 0.0
            y2 += d
            c2 += 1
            t2 = t2 + xi
            q2 = q2 + xi * xi
        z_new = y1 / (y1 + y2)
        for eps in (0.5, 0.1, 0.01):
            if not tot <= b * (1.0 - eps) / eps:
                if not abs(z_new - z) < eps:
                    viol += 1
        if mode == 2:
            m1, v1 = _mle(c1, t1, q1, gaussian, fb_p, fb_var, w)
            m2, v2 = _mle(c2, t2, q2, gaussian, fb_p, fb_var, w)
            eta = _eta(eta_kind, m1, v1, m2, v2, fb_eta, eta_value)
            f1 = bias_p * eta + (1.0 - bias_p)
            f2 = bias_p * eta
            l1 = min(max(f1, clamp_eps), hi)
            l2 = min(max(f2, clamp_eps), hi)
        elif mode == 1:
            l1, l2 = r1_0, r2_0
        else:
            l1, l2 = hat1, hat2
        acc1 = acc1 + (til1 - r1_0)
        acc2 = acc2 + (til2 - r2_0)
        hat1, hat2 = l1, l2
        if cursor < n_times and times[cursor] == n:
            til1, til2 = l1, l2
            cursor += 1
        if record:
            rec[0, n] = y1
            rec[1, n] = y2
            rec[2, n] = 1.0 if red else 0.0
            rec[3, n] = u
            rec[4, n] = xi
            rec[5, n] = d
            rec[6, n] = 1.0 if w1 else 0.0
            rec[7, n] = 1.0 if w2 else 0.0
            rec[8, n] = g1
            rec[9, n] = g2
            rec[10, n] = hat1
            rec[11, n] = hat2
            rec[12, n] = til1
            rec[13, n] = til2
    m1, v1 = _mle(c1, t1, q1, gaussian, fb_p, fb_var, w)
    m2, v2 = _mle(c2, t2, q2, gaussian, fb_p, fb_var, w)
    res[R_N1] = n1
    res[R_Y1] = y1
    res[R_Y2] = y2
    res[R_MEAN1] = m1
    res[R_VAR1] = v1
    res[R_MEAN2] = m2
    res[R_VAR2] = v2
    res[R_ACC1] = acc1
    res[R_ACC2] = acc2
    res[R_HAT1] = hat1
    res[R_HAT2] = hat2
    res[R_TIL1] = til1
    res[R_TIL2] = til2
    res[R_VIOL] = viol


@njit(cache=True, nogil=True)
def run_batch(seeds, horizon, mode, gaussian, mean1, sd1, mean2, sd2, affine, a, b,
              eta_kind, eta_value, bias_p, clamp_eps, fb_eta, fb_p, fb_var, w,
              times, y1_0, y2_0, r1_0, r2_0, out):
    rec = np.empty((0, 0))
    for i in range(seeds.shape[0]):
        run_one(seeds[i], horizon, mode, gaussian, mean1, sd1, mean2, sd2, affine, a, b,
                eta_kind, eta_value, bias_p, clamp_eps, fb_eta, fb_p, fb_var, w,
                times, y1_0, y2_0, r1_0, r2_0, out[i], False, rec)


def kernel_args(config: SimConfig) -> tuple:
    """Positional parameters shared by ``run_one`` and ``run_batch``.

    The every-step schedule is encoded as an update at every step.
    """
    if config.schedule is ScheduleKind.EXPONENTIAL:
        times = np.asarray(freeze_times(config.q, config.horizon), dtype=np.int64)
    else:
        times = np.arange(1, config.horizon + 1, dtype=np.int64)
    m1, m2 = config.model1, config.model2
    pol = config.policy
    r1, r2 = config.initial_thresholds
    return (config.horizon, MODE_CODES[config.mode], m1.family is Family.GAUSSIAN,
            m1.mean, math.sqrt(m1.var), m2.mean, math.sqrt(m2.var),
            config.utility.kind is UtilityKind.AFFINE, config.utility.a, config.utility.b,
            ETA_CODES[pol.eta_kind], pol.eta_value, pol.bias_p, pol.clamp_eps,
            pol.fallback_eta, pol.fallback_p, pol.fallback_sigma2, pol.prior_weight,
            times, config.y1_0, config.y2_0, r1, r2)


def run_seeds(config: SimConfig, seeds: np.ndarray, args: tuple | None = None) -> np.ndarray:
    """Result rows (see ``R_*``) for each stream seed."""
    args = kernel_args(config) if args is None else args
    out = np.zeros((len(seeds), N_RESULTS))
    run_batch(np.asarray(seeds, dtype=np.uint64), *args, out)
    return out


def simulate_fast(config: SimConfig, args: tuple | None = None,
                  seed: int | None = None) -> Trajectory:
    """Compiled equivalent of ``urn.simulate_trajectory`` (no assertion; see ``violations``)."""
    args = kernel_args(config) if args is None else args
    seed = config.seed if seed is None else seed
    h = config.horizon
    rec = np.zeros((len(REC_COLUMNS), h + 1))
    res = np.zeros(N_RESULTS)
    run_one(np.uint64(seed), *args, res, True, rec)
    cols = {name: rec[i] for i, name in enumerate(REC_COLUMNS)}
    for k in ("x", "w1", "w2"):
        cols[k] = cols[k].astype(np.int8)
    return Trajectory(**cols,
                      estimates=(res[R_MEAN1], res[R_VAR1], res[R_MEAN2], res[R_VAR2]),
                      superior=config.superior_arm, b=config.utility.b,
                      violations=int(res[R_VIOL]))
