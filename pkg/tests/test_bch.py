import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcac.bch import BCH, PRESETS, generator_poly, get_code
from lcac.errors import InvalidConfigError, InvalidInputError

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    import galois


@pytest.mark.parametrize("k,t,deg", [(147, 14, 108), (179, 10, 76), (247, 1, 8)])
def test_generator_degree_and_divides_x255_minus_1(k, t, deg):
    g = generator_poly(t)
    assert len(g) - 1 == deg == 255 - k
    ref = galois.BCH(255, k).generator_poly
    assert np.array_equal(g, np.array(ref.coeffs, dtype=np.uint8))
    x255 = galois.Poly.Degrees([255, 0])
    assert x255 % galois.Poly(g) == galois.Poly.Zero()


@pytest.mark.parametrize("k", [147, 179, 247])
def test_encoder_matches_independent_library(k):
    rng = np.random.default_rng(k)
    ref = galois.BCH(255, k)
    code = get_code(255, k, PRESETS[(255, k)])
    for _ in range(10):
        m = rng.integers(0, 2, k)
        assert np.array_equal(code.encode(m), np.array(ref.encode(galois.GF2(m))))


@pytest.mark.parametrize("k", [147, 179, 247])
def test_corrects_exactly_t_and_flags_t_plus_one(k):
    t = PRESETS[(255, k)]
    code = get_code(255, k, t)
    rng = np.random.default_rng(7 + k)
    for n_err in range(t + 1):
        m = rng.integers(0, 2, k)
        r = code.encode(m)
        r[rng.choice(255, n_err, replace=False)] ^= 1
        out, failed, fixed = code.decode(r)
        assert not failed and fixed == n_err and np.array_equal(out, m)
    # t+1 errors: the decoder must not return the sent message as a success
    for _ in range(20):
        m = rng.integers(0, 2, k)
        r = code.encode(m)
        r[rng.choice(255, t + 1, replace=False)] ^= 1
        out, failed, _ = code.decode(r)
        assert failed or not np.array_equal(out, m)


@given(st.data())
def test_decoder_agrees_with_library_within_capability(data):
    code = get_code(255, 179, 10)
    ref = galois.BCH(255, 179)
    m = np.array(data.draw(st.lists(st.integers(0, 1), min_size=179, max_size=179)))
    pos = data.draw(st.lists(st.integers(0, 254), max_size=10, unique=True))
    r = code.encode(m)
    r[pos] ^= 1
    ours, failed, _ = code.decode(r)
    theirs = np.array(ref.decode(galois.GF2(r)))
    assert not failed and np.array_equal(ours, theirs) and np.array_equal(ours, m)


def test_invalid_parameters():
    with pytest.raises(InvalidConfigError):
        BCH(255, 150, 14)
    with pytest.raises(InvalidInputError):
        get_code(255, 147, 14).encode(np.zeros(146, dtype=int))
    with pytest.raises(InvalidInputError):
        get_code(255, 147, 14).encode(np.full(147, 2))
