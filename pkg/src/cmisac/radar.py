"""Ambiguity function, peak sidelobe level and RMS bandwidth.

Convention (magnitudes do not depend on it)::

    AF[d, nu] = sum_n s[n] conj(s[n - d]) exp(j 2 pi nu n / fs) / sum_n |s[n]|^2

Delays are whole samples; a positive ``d`` is a delay of ``d / fs`` seconds.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .signal import BasebandSignal, WaveformParams, tone_frequencies

__all__ = [
    "GridConfig",
    "Mainlobe",
    "AFGrid",
    "PSLReport",
    "BandwidthReport",
    "ambiguity",
    "ambiguity_complex",
    "psl",
    "power_spectrum",
    "rms_bandwidth",
    "duration",
]

# FFT batch size along Doppler; bounds peak memory for long signals
_DOPPLER_CHUNK = 32


@dataclass(frozen=True)
class GridConfig:
    """Delay-Doppler sampling, expressed relative to the waveform parameters.

    Delays run over ``|tau| <= delay_span * T`` in steps of
    ``T / delay_oversampling``; Dopplers over ``|nu| <= doppler_span * delta_f``
    in steps of ``delta_f / doppler_oversampling``. ``None`` picks the
    waveform's own oversampling, ``delay_span = L`` and ``doppler_span = M/2``.
    """

    delay_oversampling: int | None = None
    doppler_oversampling: int | None = None
    delay_span: float | None = None
    doppler_span: float | None = None

    def delay_lags(self, params: WaveformParams) -> np.ndarray:
        os_ = self.delay_oversampling or params.oversampling
        ns = params.samples_per_subpulse
        if os_ < 1 or ns % os_:
            raise ValueError(
                f"delay step T/{os_} is not a whole number of samples ({ns} samples per subpulse)"
            )
        span = params.L if self.delay_span is None else self.delay_span
        if span < 0 or span > params.L + 1e-12:
            raise ValueError("delay span exceeds the signal support")
        step = ns // os_
        kmax = int(math.floor(span * os_ + 1e-9))
        return np.arange(-kmax, kmax + 1) * step

    def dopplers(self, params: WaveformParams) -> np.ndarray:
        os_ = self.doppler_oversampling or params.oversampling
        if os_ < 1:
            raise ValueError("doppler_oversampling must be >= 1")
        span = params.M / 2 if self.doppler_span is None else self.doppler_span
        if span < 0:
            raise ValueError("doppler span must be non-negative")
        kmax = int(math.floor(span * os_ + 1e-9))
        return np.arange(-kmax, kmax + 1) * (params.delta_f / os_)

    def key(self) -> str:
        return (
            f"d{self.delay_oversampling}-n{self.doppler_oversampling}-"
            f"ds{self.delay_span}-ns{self.doppler_span}"
        )


@dataclass(frozen=True)
class Mainlobe:
    """Excluded rectangle ``|tau| <= delay and |nu| <= doppler`` (seconds, Hz).

    ``None`` means one subpulse width ``T`` in delay and the Doppler
    resolution ``1/(L T)``.
    """

    delay: float | None = None
    doppler: float | None = None

    def resolve(self, params: WaveformParams) -> tuple[float, float]:
        d = params.T if self.delay is None else self.delay
        v = 1.0 / (params.L * params.T) if self.doppler is None else self.doppler
        if d < 0 or v < 0:
            raise ValueError("mainlobe half-widths must be non-negative")
        return d, v


@dataclass
class AFGrid:
    delays: np.ndarray
    dopplers: np.ndarray
    mags: np.ndarray  # shape (len(delays), len(dopplers))
    params: WaveformParams | None = None

    def origin(self) -> tuple[int, int]:
        i = int(np.argmin(np.abs(self.delays)))
        j = int(np.argmin(np.abs(self.dopplers)))
        return i, j

    def mainlobe_mask(self, mainlobe: Mainlobe | None = None) -> np.ndarray:
        d, v = (mainlobe or Mainlobe()).resolve(self.params)
        tol_d = 1e-9 * max(abs(d), self.params.T)
        tol_v = 1e-9 * max(abs(v), self.params.delta_f)
        in_d = np.abs(self.delays) <= d + tol_d
        in_v = np.abs(self.dopplers) <= v + tol_v
        return in_d[:, None] & in_v[None, :]

    def to_csv(self, path) -> None:
        tt, vv = np.meshgrid(self.delays, self.dopplers, indexing="ij")
        table = np.column_stack([tt.ravel(), vv.ravel(), self.mags.ravel()])
        np.savetxt(path, table, delimiter=",", header="tau,nu,mag", comments="", fmt="%.17g")

    def to_npz(self, path) -> None:
        meta = json.dumps(dataclasses.asdict(self.params)) if self.params is not None else ""
        np.savez_compressed(path, delays=self.delays, dopplers=self.dopplers, mags=self.mags, params=meta)

    @classmethod
    def from_npz(cls, path) -> "AFGrid":
        with np.load(path) as z:
            meta = str(z["params"]) if "params" in z.files else ""
            params = WaveformParams(**json.loads(meta)) if meta else None
            return cls(z["delays"], z["dopplers"], z["mags"], params)


@dataclass(frozen=True)
class PSLReport:
    psl: float
    psl_db: float
    location: tuple[float, float]
    mainlobe_region: tuple[float, float]


@dataclass(frozen=True)
class BandwidthReport:
    beta_sq_T_sq: float
    centroid: float


def af_raw(x: np.ndarray, lags: np.ndarray, nus: np.ndarray, fs: float) -> np.ndarray:
    """Unnormalized AF of a raw buffer at integer ``lags`` and Dopplers ``nus``."""
    n = len(x)
    dmax = int(np.max(np.abs(lags)))
    nfft = sfft.next_fast_len(n + dmax)
    xf_conj = np.conj(sfft.fft(x, nfft))
    idx = np.mod(lags, nfft)
    ramp = np.arange(n) / fs
    out = np.empty((len(lags), len(nus)), dtype=complex)
    for j0 in range(0, len(nus), _DOPPLER_CHUNK):
        nu = nus[j0 : j0 + _DOPPLER_CHUNK]
        y = x[None, :] * np.exp(2j * np.pi * nu[:, None] * ramp[None, :])
        corr = sfft.ifft(sfft.fft(y, nfft, axis=1) * xf_conj[None, :], axis=1)
        out[:, j0 : j0 + len(nu)] = corr[:, idx].T
    return out


def ambiguity_complex(sig: BasebandSignal, grid: GridConfig | None = None):
    """Complex normalized AF on the grid: ``(lags, dopplers, values)``.

    One FFT cross-correlation per Doppler bin; ``values[i, j]`` belongs to lag
    ``lags[i]`` (samples) and Doppler ``dopplers[j]`` (Hz).
    """
    grid = grid or GridConfig()
    params = sig.params
    x = np.asarray(sig.samples, dtype=complex)
    n = len(x)
    if n == 0:
        raise ValueError("empty signal")
    lags = grid.delay_lags(params)
    nus = grid.dopplers(params)
    if len(lags) == 0 or len(nus) == 0:
        raise ValueError("empty delay-Doppler grid")
    dmax = int(np.max(np.abs(lags)))
    if dmax > n:
        raise ValueError("grid delays exceed the signal support")
    energy = float(np.vdot(x, x).real)
    if energy <= 0:
        raise ValueError("zero-energy signal")
    out = af_raw(x, lags, nus, sig.sample_rate)
    out /= energy
    return lags, nus, out


def ambiguity(sig: BasebandSignal, grid: GridConfig | None = None) -> AFGrid:
    """Normalized AF magnitude surface, ``|AF(0, 0)| = 1``."""
    lags, nus, vals = ambiguity_complex(sig, grid)
    return AFGrid(lags / sig.sample_rate, nus, np.abs(vals), sig.params)


def psl(af: AFGrid, mainlobe: Mainlobe | None = None) -> PSLReport:
    """Largest magnitude outside the mainlobe rectangle."""
    mask = af.mainlobe_mask(mainlobe)
    if not mask.any():
        raise ValueError("mainlobe region does not contain the grid origin")
    if mask.all():
        raise ValueError("mainlobe region covers the entire grid")
    side = np.where(mask, -np.inf, af.mags)
    # argmax returns the first maximum in C order: deterministic tie-break
    flat = int(np.argmax(side))
    i, j = np.unravel_index(flat, side.shape)
    value = float(side[i, j])
    db = 20.0 * math.log10(value) if value > 0 else -math.inf
    region = (mainlobe or Mainlobe()).resolve(af.params)
    return PSLReport(value, db, (float(af.delays[i]), float(af.dopplers[j])), region)


def _model_spectrum(sig: BasebandSignal, freqs: np.ndarray) -> np.ndarray:
    """Spectrum of the untruncated subpulse train at ``freqs`` (Hz).

    Used for bandlimited shaping, where the stored samples cut the lowpass
    tails at the waveform edges. The lowpass window is half-open so adjacent
    tones spaced ``B`` apart never share a bin.
    """
    p = sig.params
    tones = tone_frequencies(p)[sig.freq]
    spec = np.zeros(len(freqs), dtype=complex)
    for l in range(p.L):
        off = freqs - tones[l]
        x = off / p.B
        inside = (x >= -0.5 - 1e-9) & (x < 0.5 - 1e-9)
        if not inside.any():
            continue
        f_in = freqs[inside]
        o = off[inside]
        g = p.T * np.sinc(o * p.T) * np.exp(-1j * np.pi * o * p.T)
        spec[inside] += np.exp(1j * sig.phase[l] - 2j * np.pi * f_in * l * p.T) * g
    return spec


def power_spectrum(sig: BasebandSignal, pad: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """``(freqs, |S(f)|^2)`` on a ``pad``-times zero-padded FFT grid, DC-centred."""
    if pad < 4:
        raise ValueError("zero padding must be at least 4x the signal length")
    x = np.asarray(sig.samples, dtype=complex)
    if x.size == 0:
        raise ValueError("empty signal")
    nfft = pad * len(x)
    freqs = sfft.fftshift(sfft.fftfreq(nfft, 1.0 / sig.sample_rate))
    if sig.params.shaping == "bandlimited" and sig.freq is not None:
        power = np.abs(_model_spectrum(sig, freqs)) ** 2
    else:
        power = np.abs(sfft.fftshift(sfft.fft(x, nfft))) ** 2
    return freqs, power


def rms_bandwidth(sig: BasebandSignal, pad: int = 4) -> BandwidthReport:
    """Centred second moment of the power spectrum, reported as ``beta^2 T^2``."""
    freqs, power = power_spectrum(sig, pad)
    total = power.sum()
    if not total > 0:
        raise ValueError("zero-energy signal")
    centroid = float(np.dot(freqs, power) / total)
    beta_sq = float(np.dot((freqs - centroid) ** 2, power) / total)
    return BandwidthReport(beta_sq * sig.params.T**2, centroid)


def duration(sig: BasebandSignal) -> float:
    return sig.params.duration
