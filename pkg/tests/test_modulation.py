import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmisac.modulation import (
    ALL_SCHEMES,
    Scheme,
    bits_per_subpulse,
    bits_per_subpulse_exact,
    bits_per_waveform,
    costas_sequence,
    decode_map,
    encode,
    gray_decode,
    gray_encode,
    is_costas,
    lsf_sequence,
    parse_scheme,
    perm_bits,
    perm_rank,
    perm_unrank,
    random_bits,
)


def _brute_costas(seq):
    # independent check straight from the definition: all displacement vectors distinct
    seq = list(seq)
    vecs = [(j - i, seq[j] - seq[i]) for i, j in itertools.combinations(range(len(seq)), 2)]
    return sorted(seq) == list(range(len(seq))) and len(vecs) == len(set(vecs))


def test_scheme_names():
    assert [s.value for s in ALL_SCHEMES] == [
        "lsf-qpsk", "costas-qpsk", "perm", "perm-qpsk", "fsk", "fsk-pslmin", "fsk-qpsk",
    ]
    assert parse_scheme("FSK_QPSK") is Scheme.FSK_QPSK
    with pytest.raises(ValueError):
        parse_scheme("ofdm")


def test_lsf_is_ramp():
    np.testing.assert_array_equal(lsf_sequence(5), [0, 1, 2, 3, 4])


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5, 6, 8, 9, 10, 16, 28, 64, 65, 66])
def test_costas_constructions(L):
    seq = costas_sequence(L)
    assert is_costas(seq)
    assert _brute_costas(seq)


def test_small_costas_is_lexicographically_first():
    np.testing.assert_array_equal(costas_sequence(4), [0, 1, 3, 2])
    for L in range(1, 6):
        first = next(p for p in itertools.permutations(range(L)) if _brute_costas(p))
        np.testing.assert_array_equal(costas_sequence(L), first)


def test_unsupported_costas_order():
    with pytest.raises(ValueError):
        costas_sequence(7)
    with pytest.raises(ValueError):
        costas_sequence(0)


@settings(max_examples=200, deadline=None)
@given(st.permutations(list(range(7))))
def test_is_costas_agrees_with_definition(p):
    assert is_costas(p) == _brute_costas(p)


def test_is_costas_examples():
    assert not is_costas([0, 1, 2])
    assert is_costas([0, 1, 3, 2])
    assert is_costas([0])


def test_is_costas_rejects_non_permutations():
    with pytest.raises(ValueError):
        is_costas([0, 0, 1])
    with pytest.raises(ValueError):
        is_costas([0, 1, 3])


def test_perm_rank_examples():
    assert perm_rank([0, 1, 2]) == 0
    assert perm_rank([2, 1, 0]) == 5
    for k, p in enumerate(itertools.permutations(range(4))):
        assert perm_rank(p) == k
        np.testing.assert_array_equal(perm_unrank(k, 4), p)


@settings(max_examples=100, deadline=None)
@given(L=st.integers(1, 70), data=st.data())
def test_rank_unrank_bijection(L, data):
    k = data.draw(st.integers(0, math.factorial(L) - 1))
    p = perm_unrank(k, L)
    assert sorted(p) == list(range(L))
    assert perm_rank(p) == k


def test_rank_errors():
    with pytest.raises(ValueError):
        perm_unrank(math.factorial(4), 4)
    with pytest.raises(ValueError):
        perm_rank([0, 2])


def test_perm_bits_exact():
    for L in range(1, 80):
        f = math.factorial(L)
        b = perm_bits(L)
        assert 2**b <= f < 2 ** (b + 1)
    assert perm_bits(16) == 44
    assert perm_bits(64) == 295


def test_rates_desk_scale():
    L = 16
    got = [bits_per_subpulse(s, L) for s in ALL_SCHEMES]
    assert got == [2.0, 2.0, 44 / 16, 44 / 16 + 2, 4.0, 4.0, 6.0]


def test_rates_full_scale():
    got = [bits_per_subpulse(s, 64, 4, 64) for s in ALL_SCHEMES]
    assert got == [2.0, 2.0, 295 / 64, 295 / 64 + 2, 6.0, 6.0, 8.0]
    by = dict(zip(ALL_SCHEMES, got))
    assert by[Scheme.LSF_QPSK] == by[Scheme.COSTAS_QPSK] < by[Scheme.PERM] < by[Scheme.FSK]
    assert by[Scheme.FSK] < by[Scheme.PERM_QPSK] < by[Scheme.FSK_QPSK]


def test_exact_rate_is_unfloored():
    assert bits_per_subpulse_exact(Scheme.PERM, 16) == pytest.approx(math.log2(math.factorial(16)) / 16)
    assert bits_per_subpulse_exact(Scheme.FSK, 16) == 4.0


def test_rate_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        bits_per_waveform(Scheme.FSK, 6)
    with pytest.raises(ValueError):
        bits_per_waveform(Scheme.LSF_QPSK, 4, psk_order=3)


def test_gray_mapping():
    np.testing.assert_array_equal(gray_encode(np.arange(4)), [0, 1, 3, 2])
    np.testing.assert_array_equal(gray_decode(gray_encode(np.arange(256))), np.arange(256))
    # neighbouring constellation points differ in exactly one bit
    g = gray_encode(np.arange(8))
    for a, b in zip(g, np.roll(g, -1)):
        assert bin(int(a) ^ int(b)).count("1") == 1


def test_qpsk_labels():
    _, phases = encode(Scheme.LSF_QPSK, [0, 0, 0, 1, 1, 1, 1, 0], 4)
    np.testing.assert_allclose(phases, [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_permutation_field_first():
    L = 4  # perm_bits = 4
    bits = [0, 0, 0, 1] + [0, 0] * 4
    freq, phases = encode(Scheme.PERM_QPSK, bits, L)
    np.testing.assert_array_equal(freq, perm_unrank(1, 4))
    np.testing.assert_array_equal(phases, np.zeros(4))


def test_fsk_fields_msb_first():
    freq, _ = encode(Scheme.FSK, [1, 0, 0, 1], 2, M=4)
    np.testing.assert_array_equal(freq, [2, 1])


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(ALL_SCHEMES), L=st.sampled_from([2, 4, 8, 16]), seed=st.integers(0, 2**32 - 1))
def test_encode_decode_round_trip(scheme, L, seed):
    bits = random_bits(np.random.default_rng(seed), scheme, L)
    freq, phases = encode(scheme, bits, L)
    assert len(freq) == L and len(phases) == L
    np.testing.assert_array_equal(decode_map(scheme, freq, phases, L), bits)


def test_fsk_pslmin_takes_provider_phases():
    calls = []

    def provider(f):
        calls.append(tuple(f))
        return np.full(len(f), 0.25)

    freq, phases = encode(Scheme.FSK_PSLMIN, [0, 1, 1, 0], 2, M=4, phase_provider=provider)
    assert calls == [(1, 2)]
    np.testing.assert_array_equal(phases, [0.25, 0.25])
    np.testing.assert_array_equal(decode_map(Scheme.FSK_PSLMIN, freq, phases, M=4), [0, 1, 1, 0])


def test_encode_rejects_bad_blocks():
    with pytest.raises(ValueError):
        encode(Scheme.FSK, [0, 1, 0], 2)
    with pytest.raises(ValueError):
        encode(Scheme.FSK, [0, 2], 1, M=4)


def test_decode_rejects_out_of_codebook():
    with pytest.raises(ValueError, match="invalid symbol"):
        decode_map(Scheme.LSF_QPSK, [1, 0, 2, 3], np.zeros(4))
    with pytest.raises(ValueError, match="invalid symbol"):
        decode_map(Scheme.COSTAS_QPSK, [0, 1, 2, 3], np.zeros(4))
    # 3! = 6 permutations but only 2 bits: ranks 4 and 5 are unused
    with pytest.raises(ValueError, match="invalid symbol"):
        decode_map(Scheme.PERM, [2, 1, 0])
    with pytest.raises(ValueError, match="invalid symbol"):
        decode_map(Scheme.FSK, [0, 4], M=4)
