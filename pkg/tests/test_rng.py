import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qoradapt import rng

MASK = (1 << 64) - 1


def py_mix(z):
    # plain-int SplitMix64 finaliser, independent of the numpy path
    z = (z + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def py_word(seed, stream, counter):
    return py_mix(py_mix(py_mix(seed) ^ stream) ^ counter)


def py_uniform(seed, stream, counter):
    return ((py_word(seed, stream, counter) >> 11) + 0.5) / 2.0**53


VECTORS = [
    ((0, 0, 0), 0x238275BC38FCBE91),
    ((0, 0, 1), 0x2F32A78496C67C60),
    ((42, 7, 3), 0xF55E4254D4655539),
    ((2**64 - 1, 123456789, 2**40), 0xA49F3B975E526308),
    ((1, 0x52414E44, 0), 0xD31476EB54A07B0F),
]


@pytest.mark.parametrize("args, expected", VECTORS)
def test_word_vectors(args, expected):
    seed, stream, counter = args
    assert int(rng.words(seed, stream, np.array([counter], dtype=np.uint64))[0]) == expected
    assert py_word(*args) == expected


def test_normal_vectors():
    got = rng.normals(0, 0, [0, 1, 2])
    assert got.tolist() == [0.7966432461629366, -0.36707020643765204, -1.1917774302938609]


@given(
    st.integers(0, 2**64 - 1),
    st.integers(0, 2**32),
    st.lists(st.integers(0, 2**62), min_size=1, max_size=8),
)
def test_matches_plain_int_reference(seed, stream, counters):
    w = rng.words(seed, stream, np.array(counters, dtype=np.int64))
    assert [int(x) for x in w] == [py_word(seed, stream, c) for c in counters]
    u = rng.uniforms(seed, stream, np.array(counters, dtype=np.int64))
    assert u.tolist() == [py_uniform(seed, stream, c) for c in counters]


@given(st.integers(0, 2**63 - 1), st.integers(0, 1000), st.integers(0, 10**6))
def test_normal_is_box_muller(seed, stream, k):
    u1, u2 = py_uniform(seed, stream, 2 * k), py_uniform(seed, stream, 2 * k + 1)
    ref = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    assert rng.normals(seed, stream, k) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_uniforms_open_interval():
    u = rng.uniforms(3, 1, np.arange(100_000))
    assert u.min() > 0.0 and u.max() < 1.0


def test_normal_moments():
    z = rng.normals(11, 5, np.arange(200_000))
    assert abs(z.mean()) < 0.01
    assert z.std() == pytest.approx(1.0, abs=0.01)


def test_streams_differ():
    assert not np.array_equal(rng.normals(1, 0, np.arange(10)), rng.normals(1, 1, np.arange(10)))
