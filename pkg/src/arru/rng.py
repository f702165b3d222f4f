"""Deterministic 64-bit random streams.

Seeds are derived with splitmix64 and drive a xoshiro256++ generator. The
layout is fixed so that trajectories are reproducible across runs, across
parallelism levels and between the reference and compiled simulation paths:

* ``derive_seed(master, i) = splitmix64_mix(master ^ ((i + 1) * GOLDEN))``
* the four xoshiro state words are the first four splitmix64 outputs of the
  stream seed
* ``uniform()`` is ``(next_u64() >> 11) * 2**-53``, so it lies in [0, 1)
* ``normal()`` is Box-Muller on two uniforms; both variates are used, the
  second one is cached and returned by the next call
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
TWO_PI = 2.0 * math.pi
INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64_mix(x: int) -> int:
    """One splitmix64 output from state ``x``.

    ``splitmix64_mix(0) == 0xE220A8397B1DCDAF``, the first output of the
    reference generator seeded with zero.
    """
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64_sequence(seed: int, count: int) -> list[int]:
    state = seed & MASK64
    out = []
    for _ in range(count):
        out.append(splitmix64_mix(state))
        state = (state + GOLDEN) & MASK64
    return out


def derive_seed(master: int, rep_index: int) -> int:
    """Stream seed for replication ``rep_index`` under ``master``."""
    return splitmix64_mix((master & MASK64) ^ (((rep_index + 1) * GOLDEN) & MASK64))


def xoshiro_state(seed: int) -> list[int]:
    return splitmix64_sequence(seed, 4)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256pp:
    """xoshiro256++ stream with uniform and Gaussian helpers."""

    def __init__(self, seed: int):
        self.s = xoshiro_state(seed)
        self._spare: float | None = None

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[0] + s[3]) & MASK64, 23) + s[0]) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * INV_2_53

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        theta = TWO_PI * u2
        self._spare = r * math.sin(theta)
        return r * math.cos(theta)
