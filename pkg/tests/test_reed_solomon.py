import numpy as np
import pytest
import reedsolo
from hypothesis import given
from hypothesis import strategies as st

from lcac import gf256
from lcac.errors import InvalidInputError
from lcac.reed_solomon import ReedSolomon, get_code

CODE = get_code(255, 55)
ORACLE = reedsolo.RSCodec(200, nsize=255, fcr=0, prim=0x11D, generator=2)


def _carryless_mul(a, b, poly=0x11D):
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= poly
    return out


def test_field_multiplication_matches_shift_and_add():
    rng = np.random.default_rng(1)
    for a, b in rng.integers(0, 256, (500, 2)):
        assert gf256.mul(int(a), int(b)) == _carryless_mul(int(a), int(b))


def test_division_inverts_multiplication():
    for a in range(1, 256, 7):
        for b in range(1, 256, 11):
            assert gf256.div(gf256.mul(a, b), b) == a


@given(st.binary(min_size=55, max_size=55))
def test_encoder_matches_independent_library(msg):
    ours = CODE.encode(np.frombuffer(msg, dtype=np.uint8))
    ref = np.frombuffer(bytes(ORACLE.encode(msg)), dtype=np.uint8)
    assert np.array_equal(ours, ref)


def test_codeword_is_systematic_and_has_zero_syndromes(rng):
    m = rng.integers(0, 256, 55)
    c = CODE.encode(m)
    assert np.array_equal(c[:55], m)
    assert not gf256.syndromes(c, 0, 200).any()
    assert len(CODE.generator) == 201 and CODE.generator[0] == 1


@pytest.mark.parametrize("n_err", [0, 1, 37, 99, 100])
def test_corrects_up_to_capability(rng, n_err):
    m = rng.integers(0, 256, 55)
    r = CODE.encode(m)
    pos = rng.choice(255, n_err, replace=False)
    r[pos] ^= rng.integers(1, 256, n_err)
    out, failed, fixed = CODE.decode(r)
    assert not failed and fixed == n_err
    assert np.array_equal(out, m)


@pytest.mark.parametrize("n_err", [101, 110, 150])
def test_flags_beyond_capability(rng, n_err):
    m = rng.integers(0, 256, 55)
    r = CODE.encode(m)
    pos = rng.choice(255, n_err, replace=False)
    r[pos] ^= rng.integers(1, 256, n_err)
    out, failed, _ = CODE.decode(r)
    assert failed
    assert np.array_equal(out, r[:55])  # systematic part untouched


@given(st.data())
def test_small_code_roundtrip_with_random_errors(data):
    n, k = 31, 15
    code = ReedSolomon(n, k)
    m = np.array(data.draw(st.lists(st.integers(0, 255), min_size=k, max_size=k)))
    pos = data.draw(st.lists(st.integers(0, n - 1), max_size=code.t, unique=True))
    r = code.encode(m)
    for p in pos:
        r[p] ^= data.draw(st.integers(1, 255))
    out, failed, _ = code.decode(r)
    assert not failed and np.array_equal(out, m)


def test_rejects_bad_inputs():
    with pytest.raises(InvalidInputError):
        ReedSolomon(10, 10)
    with pytest.raises(InvalidInputError):
        CODE.encode(np.zeros(54, dtype=int))
    with pytest.raises(InvalidInputError):
        CODE.encode(np.full(55, 256))
    with pytest.raises(InvalidInputError):
        CODE.decode(np.zeros(254, dtype=int))
