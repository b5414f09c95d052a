"""Systematic Reed-Solomon codes over GF(256).

Generator ``g(x) = prod_{i<n-k} (x - alpha**i)`` (first consecutive root
alpha**0), message symbols first, parity last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gf256
from .errors import InvalidInputError


@dataclass(frozen=True)
class ReedSolomon:
    n: int = 255
    k: int = 55
    generator: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.k < self.n <= gf256.ORDER:
            raise InvalidInputError(f"invalid RS parameters n={self.n}, k={self.k}")
        # high-order first, monic
        g = np.array([1], dtype=np.int64)
        for i in range(self.n - self.k):
            g = gf256.poly_mul(g, np.array([1, gf256.pow_alpha(i)]))
        object.__setattr__(self, "generator", g)

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @property
    def t(self) -> int:
        return self.nsym // 2

    def encode(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.int64)
        if msg.shape != (self.k,):
            raise InvalidInputError(f"RS message must have {self.k} symbols, got {msg.shape}")
        if msg.min(initial=0) < 0 or msg.max(initial=0) > 255:
            raise InvalidInputError("RS symbols must be bytes")
        rem = np.zeros(self.nsym, dtype=np.int64)
        g_tail = self.generator[1:]
        for sym in msg:
            fb = int(sym) ^ int(rem[0])
            rem[:-1] = rem[1:]
            rem[-1] = 0
            if fb:
                rem ^= gf256.vec_scale(g_tail, fb)
        return np.concatenate([msg, rem])

    def decode(self, word) -> tuple[np.ndarray, bool, int]:
        """Bounded-distance decode.

        Returns ``(message, failed, n_corrected)``. On failure the message
        is the received systematic part, unmodified.
        """
        r = np.asarray(word, dtype=np.int64)
        if r.shape != (self.n,):
            raise InvalidInputError(f"RS word must have {self.n} symbols, got {r.shape}")
        synd = gf256.syndromes(r, 0, self.nsym)
        if not synd.any():
            return r[: self.k].copy(), False, 0
        locator = gf256.berlekamp_massey(synd)
        n_err = len(locator) - 1
        if n_err > self.t:
            return r[: self.k].copy(), True, 0
        degrees = gf256.chien_search(locator, self.n)
        if len(degrees) != n_err:
            return r[: self.k].copy(), True, 0

        # Forney, first root alpha**0: e = X * Omega(X^-1) / Lambda'(X^-1)
        omega = gf256.poly_mul(synd, locator)[: self.nsym]
        deriv = locator.copy()
        deriv[0::2] = 0
        deriv = deriv[1:]  # formal derivative in characteristic 2
        inv = (-degrees) % gf256.ORDER
        num = gf256.eval_at_powers(omega, inv)
        den = gf256.eval_at_powers(deriv, inv)
        if np.any(den == 0):
            return r[: self.k].copy(), True, 0
        mags = gf256.EXP[(degrees + gf256.LOG[num] - gf256.LOG[den]) % gf256.ORDER]
        mags[num == 0] = 0
        fixed = r.copy()
        fixed[self.n - 1 - degrees] ^= mags
        if gf256.syndromes(fixed, 0, self.nsym).any():
            return r[: self.k].copy(), True, 0
        return fixed[: self.k], False, n_err


@lru_cache(maxsize=None)
def get_code(n: int, k: int) -> ReedSolomon:
    return ReedSolomon(n, k)
