"""Waveform parameters and constant-modulus baseband synthesis.

Each of the ``L`` subpulses of width ``T`` carries one tone from a grid of
``M`` frequencies spaced ``delta_f`` apart and centred on DC, plus an
independent initial phase::

    s(t) = sum_l g(t - lT) exp(j 2 pi f_l (t - lT) + j phi_l)

``g`` is either the ideal rectangle (exactly constant envelope) or the
rectangle passed through an ideal lowpass of two-sided bandwidth ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import sici

__all__ = [
    "WaveformParams",
    "BasebandSignal",
    "as_frequency_sequence",
    "as_phase_sequence",
    "tone_frequencies",
    "shape_pulse",
    "synthesize",
    "papr",
    "save_samples",
    "load_samples",
]

SHAPINGS = ("ideal", "bandlimited")


@dataclass(frozen=True)
class WaveformParams:
    """Parameterization shared by every scheme.

    ``delta_f`` defaults to ``1/T`` (orthogonal tones), ``M`` to ``L`` and the
    lowpass bandwidth ``B`` to ``1/T``. ``oversampling`` counts samples per
    ``1/(M delta_f)`` interval, so ``sample_rate = oversampling * M * delta_f``.
    """

    L: int
    T: float = 1.0
    delta_f: float | None = None
    M: int | None = None
    oversampling: int = 4
    shaping: str = "ideal"
    B: float | None = None
    truncation_span: float | None = None

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.delta_f is None:
            object.__setattr__(self, "delta_f", 1.0 / self.T)
        if self.M is None:
            object.__setattr__(self, "M", int(self.L))
        if self.B is None:
            object.__setattr__(self, "B", 1.0 / self.T)
        if self.truncation_span is None:
            object.__setattr__(self, "truncation_span", 8.0 * self.T)
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "M", int(self.M))
        if self.delta_f <= 0 or self.M < 1:
            raise ValueError("delta_f and M must be positive")
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            # fs = os * M * delta_f must cover the tone grid without aliasing
            raise ValueError("oversampling must be an integer >= 2 (sampling below Nyquist)")
        if self.shaping not in SHAPINGS:
            raise ValueError(f"unknown shaping {self.shaping!r}; expected one of {SHAPINGS}")
        if self.B <= 0:
            raise ValueError("B must be positive")
        if self.truncation_span < self.T:
            raise ValueError("truncation_span shorter than T")
        ns = self.T * self.sample_rate
        if abs(ns - round(ns)) > 1e-9 * max(1.0, ns):
            raise ValueError(
                f"T * sample_rate = {ns} is not an integer; choose delta_f*T and oversampling "
                "so each subpulse spans a whole number of samples"
            )

    @property
    def sample_rate(self) -> float:
        return self.oversampling * self.M * self.delta_f

    @property
    def samples_per_subpulse(self) -> int:
        return int(round(self.T * self.sample_rate))

    @property
    def n_samples(self) -> int:
        return self.L * self.samples_per_subpulse

    @property
    def duration(self) -> float:
        return self.L * self.T

    @property
    def orthogonal(self) -> bool:
        """True when ``delta_f * T == 1``."""
        return math.isclose(self.delta_f * self.T, 1.0, rel_tol=1e-12)

    def replace(self, **changes) -> "WaveformParams":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return WaveformParams(**kw)


@dataclass(frozen=True)
class BasebandSignal:
    """Complex samples plus the symbols and parameters that produced them."""

    samples: np.ndarray
    sample_rate: float
    params: WaveformParams
    freq: np.ndarray | None = field(default=None, repr=False)
    phase: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate


def as_frequency_sequence(freq, params: WaveformParams) -> np.ndarray:
    """Validate tone indices against ``params`` and return them as an int array."""
    arr = np.asarray(freq)
    if arr.ndim != 1 or len(arr) != params.L:
        raise ValueError(f"frequency sequence must have length L={params.L}, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("tone indices must be integers")
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= params.M):
        raise ValueError(f"tone index out of range [0, {params.M})")
    return arr


def as_phase_sequence(phase, params: WaveformParams) -> np.ndarray:
    arr = np.asarray(phase, dtype=float)
    if arr.ndim != 1 or len(arr) != params.L:
        raise ValueError(f"phase sequence must have length L={params.L}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("phases must be finite")
    return arr


def tone_frequencies(params: WaveformParams) -> np.ndarray:
    """Tone grid ``f_m = (m - (M-1)/2) delta_f``, symmetric about DC."""
    return (np.arange(params.M) - (params.M - 1) / 2.0) * params.delta_f


def shape_pulse(T, B, sample_rate, truncation_span=None) -> np.ndarray:
    """Rectangle of width ``T`` convolved with an ideal lowpass of bandwidth ``B``.

    The lowpass passes ``|f| <= B/2``. Samples sit at half-sample offsets
    around the pulse centre so the buffer is exactly even-symmetric; the
    result is truncated to ``truncation_span`` seconds and normalized to unit
    energy (``sum(p**2) / sample_rate == 1``). ``B=None`` or ``B=inf`` returns
    the plain rectangle.
    """
    if truncation_span is None:
        truncation_span = 8.0 * T
    if truncation_span < T:
        raise ValueError("truncation_span shorter than T")
    if B is not None and not B > 0:
        raise ValueError("B must be positive")
    ns = int(round(T * sample_rate))
    n = int(round(truncation_span * sample_rate))
    # keep the centre between samples when the rectangle has an even length
    if (n - ns) % 2:
        n += 1
    t = (np.arange(n) - (n - 1) / 2.0) / sample_rate
    if B is None or math.isinf(B):
        p = (np.abs(t) < T / 2).astype(float)
    else:
        a = np.pi * B * (t + T / 2)
        b = np.pi * B * (t - T / 2)
        p = (sici(a)[0] - sici(b)[0]) / np.pi
    energy = np.sum(p * p) / sample_rate
    return p / np.sqrt(energy)


def _subpulse_tables(params: WaveformParams, freq, phase):
    """Placement of each subpulse: (start index, envelope, tone offsets)."""
    ns = params.samples_per_subpulse
    fs = params.sample_rate
    if params.shaping == "ideal":
        env = np.ones(ns)
        offset = 0
    else:
        env = shape_pulse(params.T, params.B, fs, params.truncation_span)
        offset = (ns - len(env)) // 2
    return ns, fs, env, offset


def subpulse_waveforms(params: WaveformParams, freq) -> tuple[np.ndarray, np.ndarray]:
    """Unit-phase waveform of every subpulse on its own support.

    Returns ``(starts, waves)`` where ``waves[l]`` is the complex waveform of
    subpulse ``l`` (zero phase) beginning at sample ``starts[l]``; supports may
    extend outside ``[0, n_samples)`` for bandlimited shaping.
    """
    freq = as_frequency_sequence(freq, params)
    ns, fs, env, offset = _subpulse_tables(params, freq, None)
    tones = tone_frequencies(params)[freq]
    k = np.arange(len(env)) + offset
    # tone phase referenced to the subpulse start: exp(j 2 pi f (t - lT))
    waves = env[None, :] * np.exp(2j * np.pi * tones[:, None] * (k[None, :] / fs))
    starts = np.arange(params.L) * ns + offset
    return starts, waves


def synthesize(params: WaveformParams, freq, phase) -> BasebandSignal:
    """Baseband samples for one frequency/phase pattern, scaled to unit mean power."""
    freq = as_frequency_sequence(freq, params)
    phase = as_phase_sequence(phase, params)
    n = params.n_samples
    starts, waves = subpulse_waveforms(params, freq)
    width = waves.shape[1]
    out = np.zeros(n, dtype=complex)
    rot = np.exp(1j * phase)
    if params.shaping == "ideal":
        out[:] = (waves * rot[:, None]).reshape(-1)
    else:
        for l in range(params.L):
            lo, hi = starts[l], starts[l] + width
            a, b = max(lo, 0), min(hi, n)
            out[a:b] += rot[l] * waves[l, a - lo : b - lo]
    power = np.mean(np.abs(out) ** 2)
    if power <= 0:
        raise ValueError("synthesized signal has zero energy")
    out /= np.sqrt(power)
    return BasebandSignal(out, params.sample_rate, params, freq, phase)


def papr(sig) -> float:
    """Peak-to-average power ratio of a signal or raw sample buffer."""
    x = sig.samples if isinstance(sig, BasebandSignal) else np.asarray(sig)
    if x.size == 0:
        raise ValueError("empty signal")
    p = np.abs(x) ** 2
    mean = p.mean()
    if mean <= 0:
        raise ValueError("zero-energy signal")
    return float(p.max() / mean)


def save_samples(sig: BasebandSignal, path, fmt: str | None = None) -> None:
    """Write samples as interleaved re,im float64 (``.bin``) or a two-column CSV."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "bin")
    x = np.asarray(sig.samples, dtype=complex)
    inter = np.empty(2 * len(x))
    inter[0::2] = x.real
    inter[1::2] = x.imag
    if fmt == "csv":
        np.savetxt(path, inter.reshape(-1, 2), delimiter=",", header="re,im", comments="", fmt="%.17g")
    elif fmt == "bin":
        inter.astype("<f8").tofile(path)
    else:
        raise ValueError(f"unknown sample format {fmt!r}")


def load_samples(path, fmt: str | None = None) -> np.ndarray:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "bin")
    if fmt == "csv":
        inter = np.loadtxt(path, delimiter=",", skiprows=1).reshape(-1)
    else:
        inter = np.fromfile(path, dtype="<f8")
    return inter[0::2] + 1j * inter[1::2]
