from hypothesis import given, strategies as st
import pytest

from nnembed.rng import SplitMix64


def test_reference_vectors():
    # published outputs of the reference splitmix64 implementation
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(2)] == [6457827717110365317, 3203168211198807973]


@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(min_value=1, max_value=1000))
def test_below_in_range(seed, n):
    r = SplitMix64(seed)
    assert all(0 <= r.below(n) < n for _ in range(20))


@given(st.integers(min_value=0, max_value=2**32))
def test_uniform_in_range(seed):
    r = SplitMix64(seed)
    assert all(2.0 <= r.uniform(2.0, 3.0) < 3.0 for _ in range(20))


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=10))
def test_sample_distinct(seed, k):
    picked = SplitMix64(seed).sample(range(10), k)
    assert len(set(picked)) == k and set(picked) <= set(range(10))


def test_same_seed_same_stream():
    a, b = SplitMix64(99), SplitMix64(99)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]


def test_errors():
    with pytest.raises(ValueError):
        SplitMix64(1).below(0)
    with pytest.raises(ValueError):
        SplitMix64(1).sample([1, 2], 3)
