"""Bit-to-symbol mapping for the seven signalling schemes.

Every scheme maps a block of data bits to a tone-index sequence and a phase
sequence. Bits are laid out frequency field first (MSB first), then one PSK
symbol per subpulse in subpulse order. PSK symbols are Gray coded with phase
0 for the all-zeros label.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "Scheme",
    "parse_scheme",
    "lsf_sequence",
    "costas_sequence",
    "is_costas",
    "perm_rank",
    "perm_unrank",
    "bits_per_waveform",
    "bits_per_subpulse",
    "bits_per_subpulse_exact",
    "perm_bits",
    "gray_encode",
    "gray_decode",
    "psk_phases",
    "encode",
    "decode_map",
    "random_bits",
]


class Scheme(str, enum.Enum):
    LSF_QPSK = "lsf-qpsk"
    COSTAS_QPSK = "costas-qpsk"
    PERM = "perm"
    PERM_QPSK = "perm-qpsk"
    FSK = "fsk"
    FSK_PSLMIN = "fsk-pslmin"
    FSK_QPSK = "fsk-qpsk"

    @property
    def fixed_frequency(self) -> bool:
        return self in (Scheme.LSF_QPSK, Scheme.COSTAS_QPSK)

    @property
    def permutation(self) -> bool:
        return self in (Scheme.PERM, Scheme.PERM_QPSK)

    @property
    def fsk(self) -> bool:
        return self in (Scheme.FSK, Scheme.FSK_PSLMIN, Scheme.FSK_QPSK)

    @property
    def psk(self) -> bool:
        """Whether data rides on the subpulse phases."""
        return self in (Scheme.LSF_QPSK, Scheme.COSTAS_QPSK, Scheme.PERM_QPSK, Scheme.FSK_QPSK)

    def __str__(self):
        return self.value


ALL_SCHEMES = tuple(Scheme)


def parse_scheme(name) -> Scheme:
    if isinstance(name, Scheme):
        return name
    try:
        return Scheme(str(name).strip().lower().replace("_", "-"))
    except ValueError:
        valid = ", ".join(s.value for s in Scheme)
        raise ValueError(f"unknown scheme {name!r}; expected one of: {valid}") from None


# -- frequency patterns -------------------------------------------------------


def lsf_sequence(L: int) -> np.ndarray:
    if L < 1:
        raise ValueError("L must be positive")
    return np.arange(L, dtype=np.int64)


def _is_permutation(seq) -> bool:
    seq = np.asarray(seq)
    return seq.ndim == 1 and np.array_equal(np.sort(seq), np.arange(len(seq)))


def is_costas(seq) -> bool:
    """Distinct-difference test: for every lag the value differences are unique."""
    seq = np.asarray(seq, dtype=np.int64)
    if not _is_permutation(seq):
        raise ValueError("is_costas expects a permutation of 0..n-1")
    n = len(seq)
    for k in range(1, n):
        d = seq[k:] - seq[:-k]
        if len(np.unique(d)) != len(d):
            return False
    return True


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, math.isqrt(p) + 1))


def _primitive_roots(p: int):
    phi = p - 1
    factors = {q for q in range(2, phi + 1) if phi % q == 0 and _is_prime(q)}
    for g in range(2, p):
        if all(pow(g, phi // q, p) != 1 for q in factors):
            yield g


def _costas_search(L: int):
    """Lexicographically first Costas permutation by backtracking."""
    seq: list[int] = []
    used = [False] * L
    seen: set[tuple[int, int]] = set()

    def place(i):
        if i == L:
            return True
        for v in range(L):
            if used[v]:
                continue
            vecs = [(i - j, v - seq[j]) for j in range(i)]
            if any(vec in seen for vec in vecs) or len(set(vecs)) != len(vecs):
                continue
            used[v] = True
            seq.append(v)
            seen.update(vecs)
            if place(i + 1):
                return True
            seen.difference_update(vecs)
            seq.pop()
            used[v] = False
        return False

    return seq if place(0) else None


@lru_cache(maxsize=None)
def _costas_cached(L: int) -> tuple:
    if L <= 6:
        found = _costas_search(L)
        if found is not None:
            return tuple(found)
    # exponential Welch array of order p - 1
    p = L + 1
    if _is_prime(p):
        g = next(_primitive_roots(p))
        return tuple(pow(g, i, p) - 1 for i in range(1, p))
    # remove the corner dot (exponent 0 -> value 1): order p - 2, any root
    p = L + 2
    if _is_prime(p):
        g = next(_primitive_roots(p))
        return tuple(pow(g, i, p) - 2 for i in range(1, p - 1))
    # with root 2 the next dot (exponent 1 -> value 2) is a corner too: order p - 3
    p = L + 3
    if _is_prime(p) and 2 in set(_primitive_roots(p)):
        return tuple(pow(2, i, p) - 3 for i in range(2, p - 1))
    raise ValueError(f"no Costas construction available for order {L}")


def costas_sequence(L: int) -> np.ndarray:
    """Costas permutation of ``0..L-1``.

    Orders up to 6 use the lexicographically first array found by search;
    larger orders use the Welch construction (``p - 1``) or its one- and
    two-corner reductions (``p - 2``; ``p - 3`` when 2 is a primitive root).
    """
    if L < 1:
        raise ValueError("L must be positive")
    seq = np.array(_costas_cached(int(L)), dtype=np.int64)
    if not is_costas(seq):  # pragma: no cover - constructions are exact
        raise AssertionError(f"construction for order {L} failed the Costas test")
    return seq


# -- permutation ranking ------------------------------------------------------


def perm_rank(seq) -> int:
    """Lexicographic (Lehmer) rank of a permutation of ``0..L-1``."""
    seq = [int(v) for v in seq]
    if not _is_permutation(seq):
        raise ValueError("perm_rank expects a permutation of 0..L-1")
    L = len(seq)
    rank = 0
    remaining = list(range(L))
    for i, v in enumerate(seq):
        pos = remaining.index(v)
        rank += pos * math.factorial(L - 1 - i)
        remaining.pop(pos)
    return rank


def perm_unrank(k: int, L: int) -> np.ndarray:
    k = int(k)
    if L < 1:
        raise ValueError("L must be positive")
    if not 0 <= k < math.factorial(L):
        raise ValueError(f"rank {k} out of range [0, {L}!)")
    remaining = list(range(L))
    out = []
    for i in range(L):
        f = math.factorial(L - 1 - i)
        pos, k = divmod(k, f)
        out.append(remaining.pop(pos))
    return np.array(out, dtype=np.int64)


# -- rates ----------------------------------------------------------------------


def _log2_exact(n: int, what: str) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"{what} must be a power of two, got {n}")
    return n.bit_length() - 1


def perm_bits(L: int) -> int:
    """``floor(log2 L!)`` from the exact integer factorial."""
    return math.factorial(L).bit_length() - 1


def bits_per_waveform(scheme, L: int, psk_order: int = 4, M: int | None = None) -> int:
    scheme = parse_scheme(scheme)
    M = L if M is None else M
    b_psk = _log2_exact(psk_order, "psk_order")
    if scheme.fixed_frequency:
        return L * b_psk
    if scheme is Scheme.PERM:
        return perm_bits(L)
    if scheme is Scheme.PERM_QPSK:
        return perm_bits(L) + L * b_psk
    b_tone = _log2_exact(M, "M")
    if scheme is Scheme.FSK_QPSK:
        return L * (b_tone + b_psk)
    return L * b_tone


def bits_per_subpulse(scheme, L: int, psk_order: int = 4, M: int | None = None) -> float:
    return bits_per_waveform(scheme, L, psk_order, M) / L


def bits_per_subpulse_exact(scheme, L: int, psk_order: int = 4, M: int | None = None) -> float:
    """Rate without flooring the permutation field (``log2 L!`` itself)."""
    scheme = parse_scheme(scheme)
    if not scheme.permutation:
        return bits_per_subpulse(scheme, L, psk_order, M)
    extra = L * _log2_exact(psk_order, "psk_order") if scheme is Scheme.PERM_QPSK else 0
    return (math.lgamma(L + 1) / math.log(2) + extra) / L


# -- PSK labelling --------------------------------------------------------------


def gray_encode(k):
    k = np.asarray(k, dtype=np.int64)
    return k ^ (k >> 1)


def gray_decode(g):
    g = np.array(g, dtype=np.int64)
    k = g.copy()
    shift = g >> 1
    while np.any(shift):
        k ^= shift
        shift >>= 1
    return k


def psk_phases(order: int) -> np.ndarray:
    """Constellation phases ``2 pi k / order``, index ``k`` in natural order."""
    return 2 * np.pi * np.arange(order) / order


def _bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _int_to_bits(v: int, width: int) -> np.ndarray:
    return np.array([(v >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _pack_fields(bits, width: int, count: int) -> np.ndarray:
    """``count`` MSB-first integers of ``width`` bits each."""
    if width == 0:
        return np.zeros(count, dtype=np.int64)
    b = np.asarray(bits, dtype=np.int64).reshape(count, width)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return b @ weights


def _unpack_fields(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def random_bits(rng: np.random.Generator, scheme, L: int, psk_order: int = 4, M: int | None = None) -> np.ndarray:
    n = bits_per_waveform(scheme, L, psk_order, M)
    return rng.integers(0, 2, n, dtype=np.uint8)


def encode(scheme, bits, L: int, psk_order: int = 4, M: int | None = None, phase_provider=None):
    """Map a bit block to ``(freq, phases)``.

    ``phase_provider(freq) -> phases`` supplies the designed phases for
    ``fsk-pslmin``; without one that scheme transmits zero phases.
    """
    scheme = parse_scheme(scheme)
    M = L if M is None else M
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    need = bits_per_waveform(scheme, L, psk_order, M)
    if len(bits) != need:
        raise ValueError(f"{scheme} with L={L} carries {need} bits, got {len(bits)}")
    if bits.size and bits.max() > 1:
        raise ValueError("bits must be 0 or 1")
    b_psk = _log2_exact(psk_order, "psk_order")

    if scheme is Scheme.LSF_QPSK:
        freq, rest = lsf_sequence(L), bits
    elif scheme is Scheme.COSTAS_QPSK:
        freq, rest = costas_sequence(L), bits
    elif scheme.permutation:
        nb = perm_bits(L)
        k = _bits_to_int(bits[:nb])
        if k >= math.factorial(L):
            raise ValueError("permutation bit field exceeds L! - 1")
        freq, rest = perm_unrank(k, L), bits[nb:]
    else:
        b_tone = _log2_exact(M, "M")
        freq = _pack_fields(bits[: L * b_tone], b_tone, L)
        rest = bits[L * b_tone :]

    if scheme.psk:
        labels = _pack_fields(rest, b_psk, L)
        phases = psk_phases(psk_order)[gray_decode(labels)]
    elif scheme is Scheme.FSK_PSLMIN and phase_provider is not None:
        phases = np.asarray(phase_provider(freq), dtype=float)
    else:
        phases = np.zeros(L)
    return np.asarray(freq, dtype=np.int64), phases


def phase_indices(phases, psk_order: int) -> np.ndarray:
    """Nearest constellation index for each phase."""
    k = np.rint(np.mod(np.asarray(phases, dtype=float), 2 * np.pi) / (2 * np.pi / psk_order))
    return np.mod(k.astype(np.int64), psk_order)


def decode_map(scheme, freq, phases=None, L: int | None = None, psk_order: int = 4, M: int | None = None,
               psk_symbols=None) -> np.ndarray:
    """Inverse of :func:`encode`.

    PSK content comes from ``psk_symbols`` (constellation indices) when given,
    otherwise from ``phases`` rounded to the constellation.
    """
    scheme = parse_scheme(scheme)
    freq = np.asarray(freq, dtype=np.int64)
    L = len(freq) if L is None else L
    M = L if M is None else M
    if len(freq) != L:
        raise ValueError("frequency sequence length does not match L")
    b_psk = _log2_exact(psk_order, "psk_order")

    if scheme is Scheme.LSF_QPSK:
        if not np.array_equal(freq, lsf_sequence(L)):
            raise ValueError("invalid symbol: frequency pattern is not the LSF ramp")
        head = np.zeros(0, dtype=np.uint8)
    elif scheme is Scheme.COSTAS_QPSK:
        if not np.array_equal(freq, costas_sequence(L)):
            raise ValueError("invalid symbol: frequency pattern is not the Costas sequence")
        head = np.zeros(0, dtype=np.uint8)
    elif scheme.permutation:
        k = perm_rank(freq)
        nb = perm_bits(L)
        if k >= 1 << nb:
            raise ValueError("invalid symbol: permutation rank outside the codebook")
        head = _int_to_bits(k, nb)
    else:
        b_tone = _log2_exact(M, "M")
        if freq.min() < 0 or freq.max() >= M:
            raise ValueError("invalid symbol: tone index out of range")
        head = _unpack_fields(freq, b_tone)

    if not scheme.psk:
        return head
    if psk_symbols is None:
        if phases is None:
            raise ValueError(f"{scheme} needs phases or PSK symbols to decode")
        psk_symbols = phase_indices(phases, psk_order)
    labels = gray_encode(np.asarray(psk_symbols, dtype=np.int64))
    return np.concatenate([head, _unpack_fields(labels, b_psk)]).astype(np.uint8)
