"""GF(2^8) arithmetic shared by the Reed-Solomon and BCH codecs.

Elements are plain ints 0..255. Polynomials are numpy int arrays stored
lowest-degree coefficient first unless a function says otherwise.
"""

from __future__ import annotations

import numpy as np

PRIMITIVE_POLY = 0x11D
ORDER = 255

EXP = np.zeros(2 * ORDER, dtype=np.int64)
LOG = np.zeros(256, dtype=np.int64)


def _build_tables() -> None:
    x = 1
    for i in range(ORDER):
        EXP[i] = x
        LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    EXP[ORDER:] = EXP[:ORDER]


_build_tables()


def mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(EXP[LOG[a] + LOG[b]])


def div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return int(EXP[(LOG[a] - LOG[b]) % ORDER])


def pow_alpha(e: int) -> int:
    return int(EXP[e % ORDER])


def vec_scale(v: np.ndarray, c: int) -> np.ndarray:
    """Multiply every element of ``v`` by the scalar ``c``."""
    v = np.asarray(v, dtype=np.int64)
    if c == 0:
        return np.zeros_like(v)
    out = np.zeros_like(v)
    nz = v != 0
    out[nz] = EXP[(LOG[v[nz]] + LOG[c]) % ORDER]
    return out


def poly_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    out = np.zeros(len(p) + len(q) - 1, dtype=np.int64)
    for i, c in enumerate(p):
        if c:
            out[i : i + len(q)] ^= vec_scale(q, int(c))
    return out


def eval_at_powers(coeffs: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_i coeffs[i] * x**i`` at every ``x = alpha**e``."""
    coeffs = np.asarray(coeffs, dtype=np.int64)
    exponents = np.asarray(exponents, dtype=np.int64)
    idx = np.nonzero(coeffs)[0]
    if idx.size == 0:
        return np.zeros(exponents.shape, dtype=np.int64)
    logs = (LOG[coeffs[idx]][None, :] + exponents[:, None] * idx[None, :]) % ORDER
    return np.bitwise_xor.reduce(EXP[logs], axis=1)


def syndromes(word: np.ndarray, first_root: int, count: int) -> np.ndarray:
    """Syndromes ``S_j = r(alpha**(first_root + j))`` for ``j < count``.

    ``word`` is in transmission order: index 0 is the highest-degree
    coefficient, as in every systematic codec in this package.
    """
    word = np.asarray(word, dtype=np.int64)
    n = len(word)
    idx = np.nonzero(word)[0]
    if idx.size == 0:
        return np.zeros(count, dtype=np.int64)
    degrees = n - 1 - idx
    roots = first_root + np.arange(count)
    logs = (LOG[word[idx]][None, :] + roots[:, None] * degrees[None, :]) % ORDER
    return np.bitwise_xor.reduce(EXP[logs], axis=1)


def berlekamp_massey(synd: np.ndarray) -> np.ndarray:
    """Shortest LFSR (error locator, low-order first) generating ``synd``."""
    synd = [int(s) for s in synd]
    size = len(synd) + 1
    c = np.zeros(size, dtype=np.int64)
    b = np.zeros(size, dtype=np.int64)
    c[0] = b[0] = 1
    length, shift, last_d = 0, 1, 1
    for k in range(len(synd)):
        d = synd[k]
        for i in range(1, length + 1):
            if c[i] and synd[k - i]:
                d ^= int(EXP[LOG[c[i]] + LOG[synd[k - i]]])
        if d == 0:
            shift += 1
            continue
        coef = div(d, last_d)
        update = np.zeros(size, dtype=np.int64)
        update[shift:] = vec_scale(b[: size - shift], coef)
        if 2 * length <= k:
            prev = c.copy()
            c ^= update
            length = k + 1 - length
            b = prev
            last_d = d
            shift = 1
        else:
            c ^= update
            shift += 1
    return c[: length + 1]


def chien_search(locator: np.ndarray, n: int) -> np.ndarray:
    """Degrees ``p < n`` with ``locator(alpha**-p) == 0``."""
    degrees = np.arange(n)
    values = eval_at_powers(locator, (-degrees) % ORDER)
    return degrees[values == 0]
