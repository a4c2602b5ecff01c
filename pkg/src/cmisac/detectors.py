"""Receive chain at perfect synchronization.

A bank of per-subpulse tone correlators produces ``Y[l, m]``; each scheme's
detector works on ``Y`` alone. Permutation detection is a linear assignment
problem solved with the Hungarian algorithm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .modulation import Scheme, costas_sequence, decode_map, lsf_sequence, parse_scheme, psk_phases
from .signal import BasebandSignal, WaveformParams, tone_frequencies

__all__ = [
    "ChannelConfig",
    "DetectionResult",
    "matched_filter_bank",
    "awgn",
    "hungarian",
    "detect_permutation",
    "detect_perm_psk",
    "detect_fsk",
    "detect_fsk_psk",
    "detect_psk",
    "detect",
    "brute_force_ml",
    "complexity_per_subpulse",
    "simulate_detection",
]

MAX_HYPOTHESES = 10**7


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel.

    ``snr_db`` is the matched-filter SNR per subpulse (subpulse energy over
    noise spectral density); ``inf`` disables noise. ``known_gain`` is the
    unit-magnitude gain a coherent receiver assumes; with ``random_phase`` the
    channel applies a seeded random phase instead (non-coherent operation).
    """

    snr_db: float = math.inf
    known_gain: complex = 1.0 + 0.0j
    random_phase: bool = False
    seed: int | None = None

    def __post_init__(self):
        if not math.isclose(abs(self.known_gain), 1.0, rel_tol=1e-12):
            raise ValueError("channel gain must have unit magnitude")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")


@dataclass
class DetectionResult:
    freq_hat: np.ndarray
    phase_symbols_hat: np.ndarray | None
    bits_hat: np.ndarray | None
    score: float


def matched_filter_bank(rx: BasebandSignal, params: WaveformParams | None = None) -> np.ndarray:
    """``Y[l, m]``: subpulse ``l`` correlated with a unit-energy tone ``m``.

    References start at phase 0 at each subpulse boundary, matching the
    transmitter's phase reference.
    """
    params = params or rx.params
    x = np.asarray(rx.samples if isinstance(rx, BasebandSignal) else rx, dtype=complex)
    if len(x) != params.n_samples:
        raise ValueError(f"received signal has {len(x)} samples, expected {params.n_samples}")
    ns = params.samples_per_subpulse
    k = np.arange(ns) / params.sample_rate
    ref = np.exp(2j * np.pi * np.outer(k, tone_frequencies(params))) / np.sqrt(ns)
    return x.reshape(params.L, ns) @ np.conj(ref)


def awgn(sig: BasebandSignal, cfg: ChannelConfig) -> BasebandSignal:
    """Apply the channel gain and complex Gaussian noise (deterministic per seed)."""
    rng = np.random.default_rng(cfg.seed)
    gain = cfg.known_gain
    if cfg.random_phase:
        gain = np.exp(1j * rng.uniform(0.0, 2 * np.pi))
    x = gain * np.asarray(sig.samples, dtype=complex)
    if not math.isinf(cfg.snr_db):
        ns = sig.params.samples_per_subpulse
        es = np.mean(np.abs(x) ** 2) * ns
        sigma2 = es / 10 ** (cfg.snr_db / 10)
        noise = rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x))
        x = x + np.sqrt(sigma2 / 2) * noise
    return BasebandSignal(x, sig.sample_rate, sig.params, sig.freq, sig.phase)


# -- linear assignment ----------------------------------------------------------


def _lexicographic_refine(cost, assign, u, v):
    """Lexicographically smallest optimal assignment.

    Optimal assignments are exactly the perfect matchings on edges that are
    tight under the optimal potentials; walk rows in order and take the
    smallest tight column that still leaves a perfect matching.
    """
    n = cost.shape[0]
    scale = 1.0 + float(np.max(np.abs(cost)))
    tight = np.abs(cost - u[:, None] - v[None, :]) <= 1e-12 * scale * n
    if tight.sum() == n:
        return assign
    match = [int(a) for a in assign]
    owner = {c: r for r, c in enumerate(match)}
    for i in range(n):
        for j in np.flatnonzero(tight[i]):
            j = int(j)
            if j >= match[i]:
                break
            r = owner[j]
            if r < i:
                continue
            # re-route row r into the column row i frees, via rows > i
            target = match[i]
            seen = set()
            path = {}

            def augment(row):
                for c in np.flatnonzero(tight[row]):
                    c = int(c)
                    if c in seen or c == j:
                        continue
                    cr = owner.get(c)
                    if cr is not None and cr <= i and c != target:
                        continue
                    seen.add(c)
                    if c == target or augment(owner[c]):
                        path[row] = c
                        return True
                return False

            if augment(r):
                for row, c in path.items():
                    match[row] = c
                match[i] = j
                owner = {c: rr for rr, c in enumerate(match)}
                break
    out = np.array(match, dtype=np.int64)
    rows = np.arange(n)
    if cost[rows, out].sum() > cost[rows, assign].sum() + 1e-9 * scale * n:
        return assign
    return out


def hungarian(score, maximize: bool = True) -> np.ndarray:
    """Optimal assignment ``row -> column`` in O(n^3).

    Ties between optimal assignments resolve to the lexicographically smallest.
    """
    s = np.asarray(score, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("score matrix must be square")
    if not np.all(np.isfinite(s)):
        raise ValueError("score matrix has non-finite entries")
    if s.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    cost = -s if maximize else s
    cost = np.ascontiguousarray(cost)
    assign, u, v = _kernels.hungarian_min(cost)
    return _lexicographic_refine(cost, np.asarray(assign), np.asarray(u), np.asarray(v))


def _row_total(score, cols) -> float:
    total = 0.0
    for l, c in enumerate(cols):
        total += float(score[l, c])
    return total


# -- detectors ------------------------------------------------------------------


def _cell_scores(Y, gain, coherent):
    return np.real(np.conj(gain) * Y) if coherent else np.abs(Y)


def detect_permutation(Y, coherent: bool = False, gain: complex = 1.0) -> DetectionResult:
    Y = np.asarray(Y)
    if Y.shape[0] != Y.shape[1]:
        raise ValueError("permutation detection needs M == L")
    score = _cell_scores(Y, gain, coherent)
    a = hungarian(score)
    return DetectionResult(a, None, None, _row_total(score, a))


def _psk_cells(Y, order, gain):
    rot = np.exp(1j * psk_phases(order))
    Z = np.ascontiguousarray(np.conj(gain) * np.asarray(Y, dtype=complex))
    best, arg = _kernels.best_psk_cells(Z, rot)
    return np.asarray(best), np.asarray(arg)


def detect_perm_psk(Y, order: int = 4, gain: complex = 1.0) -> DetectionResult:
    """Joint permutation + PSK decision: best PSK symbol per cell, then assignment."""
    Y = np.asarray(Y)
    if Y.shape[0] != Y.shape[1]:
        raise ValueError("permutation detection needs M == L")
    best, arg = _psk_cells(Y, order, gain)
    a = hungarian(best)
    rows = np.arange(len(a))
    return DetectionResult(a, arg[rows, a], None, _row_total(best, a))


def detect_fsk(Y) -> DetectionResult:
    mag = np.abs(np.asarray(Y))
    f = np.argmax(mag, axis=1)
    return DetectionResult(f.astype(np.int64), None, None, _row_total(mag, f))


def detect_fsk_psk(Y, order: int = 4, gain: complex = 1.0) -> DetectionResult:
    best, arg = _psk_cells(Y, order, gain)
    f = np.argmax(best, axis=1)
    rows = np.arange(len(f))
    return DetectionResult(f.astype(np.int64), arg[rows, f], None, _row_total(best, f))


def detect_psk(Y, freq, order: int = 4, gain: complex = 1.0) -> DetectionResult:
    """PSK slicing on a known frequency pattern."""
    freq = np.asarray(freq, dtype=np.int64)
    best, arg = _psk_cells(Y, order, gain)
    rows = np.arange(len(freq))
    return DetectionResult(freq.copy(), arg[rows, freq], None, _row_total(best, freq))


def _known_pattern(scheme: Scheme, L: int):
    return lsf_sequence(L) if scheme is Scheme.LSF_QPSK else costas_sequence(L)


def _attach_bits(res: DetectionResult, scheme, L, order, M):
    try:
        res.bits_hat = decode_map(scheme, res.freq_hat, L=L, psk_order=order, M=M,
                                  psk_symbols=res.phase_symbols_hat)
    except ValueError:
        res.bits_hat = None  # decision outside the codebook
    return res


def detect(scheme, Y, order: int = 4, gain: complex = 1.0, coherent_perm: bool = False) -> DetectionResult:
    """Scheme-appropriate detector, with decoded bits when in-alphabet."""
    scheme = parse_scheme(scheme)
    Y = np.asarray(Y)
    L, M = Y.shape
    if scheme.fixed_frequency:
        res = detect_psk(Y, _known_pattern(scheme, L), order, gain)
    elif scheme is Scheme.PERM:
        res = detect_permutation(Y, coherent_perm, gain)
    elif scheme is Scheme.PERM_QPSK:
        res = detect_perm_psk(Y, order, gain)
    elif scheme is Scheme.FSK_QPSK:
        res = detect_fsk_psk(Y, order, gain)
    else:
        res = detect_fsk(Y)
    return _attach_bits(res, scheme, L, order, M)


def brute_force_ml(Y, scheme, order: int = 4, gain: complex = 1.0, coherent_perm: bool = False) -> DetectionResult:
    """Exhaustive maximization of the scheme's additive decision metric."""
    scheme = parse_scheme(scheme)
    Y = np.asarray(Y, dtype=complex)
    L, M = Y.shape
    rot = np.exp(1j * psk_phases(order))
    # proj[l, m, k] = Re{e^{-j theta_k} g* y[l, m]}
    proj = np.real(np.conj(rot)[None, None, :] * (np.conj(gain) * Y)[:, :, None])

    if scheme.fixed_frequency:
        freqs = [_known_pattern(scheme, L)]
        n_psk = order**L
    elif scheme.permutation:
        if M != L:
            raise ValueError("permutation detection needs M == L")
        freqs = None
        n_psk = order**L if scheme is Scheme.PERM_QPSK else 1
    else:
        freqs = None
        n_psk = order**L if scheme is Scheme.FSK_QPSK else 1

    n_freq = 1 if scheme.fixed_frequency else (math.factorial(L) if scheme.permutation else M**L)
    if n_freq * n_psk > MAX_HYPOTHESES:
        raise ValueError(f"search space of {n_freq * n_psk} hypotheses exceeds the guard {MAX_HYPOTHESES}")

    if freqs is None:
        it = itertools.permutations(range(L)) if scheme.permutation else itertools.product(range(M), repeat=L)
    else:
        it = iter(freqs)
    use_psk = scheme.psk
    metric = np.abs(Y) if not coherent_perm else np.real(np.conj(gain) * Y)
    psk_combos = np.array(list(itertools.product(range(order), repeat=L)), dtype=np.int64) if use_psk else None
    rows = np.arange(L)

    best_val, best_f, best_k = -np.inf, None, None
    for f in it:
        f = np.asarray(f, dtype=np.int64)
        if use_psk:
            cell = proj[rows, f, :]  # (L, order)
            totals = np.zeros(len(psk_combos))
            for l in range(L):
                totals += cell[l, psk_combos[:, l]]
            i = int(np.argmax(totals))
            val, k = totals[i], psk_combos[i]
        else:
            val, k = metric[rows, f].sum(), None
        if val > best_val:
            best_val, best_f, best_k = val, f, k
    if use_psk:
        total = _row_total(proj[rows, best_f, :], best_k)
    else:
        total = _row_total(metric, best_f)
    res = DetectionResult(best_f, best_k, None, total)
    return _attach_bits(res, scheme, L, order, M)


def complexity_per_subpulse(scheme, L: int, M: int | None = None, order: int = 4) -> float:
    """Detector cost per subpulse (argument of the O(.) bound divided by L)."""
    scheme = parse_scheme(scheme)
    M = L if M is None else M
    if scheme.fixed_frequency:
        return float(order)
    if scheme is Scheme.PERM:
        return float(L * L)
    if scheme is Scheme.PERM_QPSK:
        return float(L * L + M * order)
    if scheme is Scheme.FSK_QPSK:
        return float(M * order)
    return float(M)


def simulate_detection(scheme, params: WaveformParams, snr_db: float, trials: int, seed: int = 0,
                       order: int = 4, phase_provider=None) -> dict:
    """Noisy detection trials; returns error counts."""
    from .modulation import encode, phase_indices, random_bits
    from .signal import synthesize

    scheme = parse_scheme(scheme)
    sym_err = bit_err = bits_total = block_err = undecodable = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        bits = random_bits(rng, scheme, params.L, order, params.M)
        freq, phase = encode(scheme, bits, params.L, order, params.M, phase_provider)
        tx = synthesize(params, freq, phase)
        rx = awgn(tx, ChannelConfig(snr_db=snr_db, seed=int(rng.integers(2**63))))
        res = detect(scheme, matched_filter_bank(rx, params), order)
        wrong = res.freq_hat != freq
        if scheme.psk:
            wrong |= res.phase_symbols_hat != phase_indices(phase, order)
        sym_err += int(wrong.sum())
        bits_total += len(bits)
        if res.bits_hat is None:
            undecodable += 1
            block_err += 1
        else:
            e = int(np.sum(res.bits_hat != bits))
            bit_err += e
            block_err += int(e > 0)
    return {
        "scheme": scheme.value,
        "snr_db": snr_db,
        "trials": trials,
        "symbols": trials * params.L,
        "symbol_errors": sym_err,
        "bit_errors": bit_err,
        "bits": bits_total,
        "block_errors": block_err,
        "undecodable_blocks": undecodable,
    }
