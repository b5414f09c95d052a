"""Binary narrow-sense primitive BCH codes of length 255.

The generator polynomial is the product of the distinct minimal
polynomials of alpha**1 .. alpha**(2t) over GF(256). Codewords are
systematic bit arrays: message first, parity last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gf256
from .errors import InvalidConfigError, InvalidInputError

PRESETS: dict[tuple[int, int], int] = {
    (255, 147): 14,
    (255, 179): 10,
    (255, 247): 1,
}


def _cyclotomic_coset(i: int) -> list[int]:
    coset, x = [], i % gf256.ORDER
    while x not in coset:
        coset.append(x)
        x = (2 * x) % gf256.ORDER
    return coset


def generator_poly(t: int) -> np.ndarray:
    """Binary generator polynomial, high-order coefficient first."""
    seen: set[int] = set()
    g = np.array([1], dtype=np.int64)
    for i in range(1, 2 * t + 1):
        coset = _cyclotomic_coset(i)
        if min(coset) in seen:
            continue
        seen.add(min(coset))
        for j in coset:
            g = gf256.poly_mul(g, np.array([1, gf256.pow_alpha(j)]))
    if np.any(g > 1):
        raise AssertionError("minimal polynomial product left GF(2)")
    return g.astype(np.uint8)


@lru_cache(maxsize=None)
def _parity_matrix(n: int, k: int, t: int) -> np.ndarray:
    g = generator_poly(t)
    if len(g) - 1 != n - k:
        raise InvalidConfigError(f"BCH({n},{k}) cannot correct {t} errors; deg g = {len(g) - 1}")
    nsym = n - k
    rows = np.zeros((k, nsym), dtype=np.uint8)
    for row in range(k):
        # remainder of x^(n-1-row) mod g, via long division on bits
        reg = np.zeros(n, dtype=np.uint8)
        reg[row] = 1
        for i in range(k):
            if reg[i]:
                reg[i : i + nsym + 1] ^= g
        rows[row] = reg[k:]
    return rows


def _bits(v, length: int, name: str) -> np.ndarray:
    a = np.asarray(v)
    if a.shape != (length,):
        raise InvalidInputError(f"BCH {name} must have {length} bits, got shape {a.shape}")
    if a.size and (a.min() < 0 or a.max() > 1):
        raise InvalidInputError(f"BCH {name} must contain only 0/1")
    return a.astype(np.uint8)


@dataclass(frozen=True)
class BCH:
    n: int = 255
    k: int = 147
    t: int = 14
    parity: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n != 255:
            raise InvalidConfigError("only length-255 BCH codes are supported")
        object.__setattr__(self, "parity", _parity_matrix(self.n, self.k, self.t))

    def encode(self, message) -> np.ndarray:
        m = _bits(message, self.k, "message")
        par = (m.astype(np.int64) @ self.parity) & 1
        return np.concatenate([m, par.astype(np.uint8)])

    def decode(self, word) -> tuple[np.ndarray, bool, int]:
        """Returns ``(message, failed, n_corrected)``; the systematic part
        is returned untouched when decoding fails."""
        r = _bits(word, self.n, "word")
        synd = gf256.syndromes(r, 1, 2 * self.t)
        if not synd.any():
            return r[: self.k].copy(), False, 0
        locator = gf256.berlekamp_massey(synd)
        n_err = len(locator) - 1
        if n_err > self.t:
            return r[: self.k].copy(), True, 0
        degrees = gf256.chien_search(locator, self.n)
        if len(degrees) != n_err:
            return r[: self.k].copy(), True, 0
        fixed = r.copy()
        fixed[self.n - 1 - degrees] ^= 1
        if gf256.syndromes(fixed, 1, 2 * self.t).any():
            return r[: self.k].copy(), True, 0
        return fixed[: self.k], False, n_err


@lru_cache(maxsize=None)
def get_code(n: int, k: int, t: int) -> BCH:
    return BCH(n, k, t)
