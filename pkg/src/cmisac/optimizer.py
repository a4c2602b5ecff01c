"""Initial-phase design that minimizes the ambiguity-function PSL.

Multi-start cyclic coordinate descent. With every other phase held fixed the
AF is a trigonometric polynomial of degree one in the free phase ``theta``::

    AF(theta) = P + exp(j theta) Q + exp(-j theta) R

so each coordinate step computes ``P, Q, R`` once (cost linear in the
subpulse support) and then scans a phase grid plus a golden-section
refinement without re-synthesizing the waveform.

Each restart is first warm-started by the same coordinate sweeps applied to
a smooth surrogate, the p-norm of the sidelobe magnitudes with p increasing
towards the max. The exact PSL descent that follows is what the trace
records.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .radar import GridConfig, Mainlobe, af_raw, ambiguity, psl
from .signal import WaveformParams, as_frequency_sequence, subpulse_waveforms, synthesize

__all__ = [
    "OptimizerConfig",
    "OptimizeResult",
    "PhaseObjective",
    "optimize_phases",
    "PhaseCache",
    "psl_table",
]

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings.

    ``phase_grid`` candidate phases ``2 pi k / phase_grid`` are scanned per
    coordinate step; with ``refine`` a golden-section search then polishes the
    best cell. ``refine=False`` keeps every phase on the grid alphabet.
    ``af_grid``/``mainlobe`` define the objective; ``None`` uses the defaults.
    The reported PSL is always re-evaluated on ``report_grid`` (default grid
    when ``None``), so the objective grid may be coarser.
    ``smoothing`` lists the p-norm exponents of the warm start, each run for
    ``smooth_sweeps`` sweeps; an empty tuple disables it. ``workers`` > 1
    runs restarts on a thread pool.
    """

    restarts: int = 4
    max_sweeps: int = 30
    phase_grid: int = 16
    refine: bool = True
    refine_iters: int = 16
    tol: float = 1e-9
    seed: int = 0
    smoothing: tuple = (4.0, 8.0, 16.0, 32.0, 64.0)
    smooth_sweeps: int = 4
    workers: int = 1
    af_grid: GridConfig | None = None
    report_grid: GridConfig | None = None
    mainlobe: Mainlobe | None = None

    def __post_init__(self):
        object.__setattr__(self, "smoothing", tuple(float(p) for p in self.smoothing))
        if self.restarts < 1 or self.max_sweeps < 1 or self.refine_iters < 0:
            raise ValueError("restarts and max_sweeps must be positive")
        if self.smooth_sweeps < 0 or self.workers < 1 or any(p < 1 for p in self.smoothing):
            raise ValueError("invalid smoothing or workers setting")
        if self.phase_grid < 8:
            raise ValueError("phase_grid must be at least 8")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def key(self) -> str:
        d = asdict(self)
        d["af_grid"] = (self.af_grid or GridConfig()).key()
        d["report_grid"] = (self.report_grid or GridConfig()).key()
        d.pop("workers")
        d["mainlobe"] = repr(self.mainlobe or Mainlobe())
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


@dataclass
class OptimizeResult:
    phases: np.ndarray
    psl_before: float
    psl_after: float
    sweeps_used: int
    restarts_used: int
    trace: list = field(default_factory=list)  # objective after each sweep, best restart


class PhaseObjective:
    """PSL of a fixed frequency pattern as a function of the phase vector.

    Keeps the unnormalized complex AF of the current phases on the objective
    grid and updates it in place when a single phase changes.
    """

    def __init__(self, freq, params: WaveformParams, grid: GridConfig | None = None,
                 mainlobe: Mainlobe | None = None):
        self.params = params
        self.freq = as_frequency_sequence(freq, params)
        grid = grid or GridConfig()
        self.lags = grid.delay_lags(params)
        self.nus = grid.dopplers(params)
        if len(self.lags) == 0 or len(self.nus) == 0:
            raise ValueError("degenerate objective grid")
        self.fs = params.sample_rate
        self.n = params.n_samples
        if int(np.max(np.abs(self.lags))) > self.n:
            raise ValueError("objective grid exceeds the signal support")

        d, v = (mainlobe or Mainlobe()).resolve(params)
        tau = self.lags / self.fs
        in_d = np.abs(tau) <= d + 1e-9 * max(d, params.T)
        in_v = np.abs(self.nus) <= v + 1e-9 * max(v, params.delta_f)
        mask = (in_d[:, None] & in_v[None, :]).ravel()
        if mask.all():
            raise ValueError("mainlobe region covers the entire objective grid")
        shape = (len(self.lags), len(self.nus))
        flat = np.arange(mask.size)
        self.origin = int(np.ravel_multi_index((len(self.lags) // 2, len(self.nus) // 2), shape))
        # the grid is point-symmetric and |AF(-tau,-nu)| = |AF(tau,nu)|: scan one half
        self.side = flat[(~mask) & (flat < self.origin)].astype(np.int64)

        starts, waves = subpulse_waveforms(params, self.freq)
        self._supports = []
        for l in range(params.L):
            lo, hi = starts[l], starts[l] + waves.shape[1]
            a, b = max(lo, 0), min(hi, self.n)
            self._supports.append((a, waves[l, a - lo : b - lo]))
        self.phases = np.zeros(params.L)
        self.samples = np.zeros(self.n, dtype=complex)
        self.af = np.zeros(shape[0] * shape[1], dtype=complex)

    def clone(self) -> "PhaseObjective":
        """Independent copy sharing only the immutable precomputation."""
        c = copy.copy(self)
        c.phases = self.phases.copy()
        c.samples = self.samples.copy()
        c.af = self.af.copy()
        return c

    # -- full evaluation -------------------------------------------------
    def assemble(self, phases) -> np.ndarray:
        x = np.zeros(self.n, dtype=complex)
        for l, (a, w) in enumerate(self._supports):
            x[a : a + len(w)] += np.exp(1j * phases[l]) * w
        return x

    def set_phases(self, phases) -> float:
        self.phases = np.array(phases, dtype=float)
        self.samples = self.assemble(self.phases)
        self.af = af_raw(self.samples, self.lags, self.nus, self.fs).ravel()
        return self.value()

    def value(self) -> float:
        side = np.abs(self.af[self.side]).max()
        return float(side / self.af[self.origin].real)

    def evaluate(self, phases) -> float:
        """Objective for arbitrary phases, computed from scratch."""
        x = self.assemble(np.asarray(phases, dtype=float))
        af = af_raw(x, self.lags, self.nus, self.fs).ravel()
        return float(np.abs(af[self.side]).max() / af[self.origin].real)

    # -- single-coordinate machinery ---------------------------------------
    def components(self, k: int):
        """``(P, Q, R)`` with ``AF(theta_k) = P + e^{j theta} Q + e^{-j theta} R``."""
        a, w = self._supports[k]
        ak = np.exp(1j * self.phases[k])
        rest = self.samples.copy()
        rest[a : a + len(w)] -= ak * w
        width = len(w)
        pos = a + np.arange(width)
        ramp = np.exp(2j * np.pi * np.outer(pos, self.nus) / self.fs)  # (width, nnu)
        n = self.n
        padded = np.concatenate([np.zeros(n), rest, np.zeros(n)])
        # Q[d] = sum_n w[n] conj(rest[n - d]) e^{j2pi nu n/fs}
        iq = (n + pos)[None, :] - self.lags[:, None]
        Q = np.conj(padded[iq]) @ (w[:, None] * ramp)
        # R[d] = sum_m rest[m + d] conj(w[m]) e^{j2pi nu (m + d)/fs}
        ir = (n + pos)[None, :] + self.lags[:, None]
        R = padded[ir] @ (np.conj(w)[:, None] * ramp)
        R *= np.exp(2j * np.pi * np.outer(self.lags, self.nus) / self.fs)
        Q = Q.ravel()
        R = R.ravel()
        P = self.af - ak * Q - np.conj(ak) * R
        return P, Q, R

    def scan(self, P, Q, R, thetas) -> np.ndarray:
        return _kernels.candidate_psl(P, Q, R, self.side, self.origin, np.asarray(thetas, dtype=float))

    def scan_smooth(self, P, Q, R, thetas, p: float) -> np.ndarray:
        return _kernels.candidate_logpnorm(P, Q, R, self.side, self.origin, np.asarray(thetas, dtype=float), float(p))

    def commit(self, k: int, theta: float, P, Q, R) -> None:
        a, w = self._supports[k]
        old = np.exp(1j * self.phases[k])
        new = np.exp(1j * theta)
        self.samples[a : a + len(w)] += (new - old) * w
        self.phases[k] = theta
        self.af = P + new * Q + np.conj(new) * R


def _coordinate_step(obj: PhaseObjective, k: int, cfg: OptimizerConfig, grid_thetas, current: float):
    P, Q, R = obj.components(k)
    vals = obj.scan(P, Q, R, grid_thetas)
    i = int(np.argmin(vals))  # lowest index on ties
    best_t, best_v = float(grid_thetas[i]), float(vals[i])
    if cfg.refine and cfg.refine_iters:
        h = 2 * np.pi / cfg.phase_grid
        lo, hi = best_t - h, best_t + h
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = obj.scan(P, Q, R, [x1, x2])
        for _ in range(cfg.refine_iters):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = float(obj.scan(P, Q, R, [x1])[0])
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = float(obj.scan(P, Q, R, [x2])[0])
        t, v = (x1, f1) if f1 <= f2 else (x2, f2)
        if v < best_v:
            best_t, best_v = float(np.mod(t, 2 * np.pi)), float(v)
    if best_v < current:
        obj.commit(k, best_t, P, Q, R)
        return best_v
    return current


def _smooth_warm_start(obj: PhaseObjective, cfg: OptimizerConfig, grid_thetas) -> None:
    """Coordinate sweeps on the log p-norm surrogate, phases restricted to the grid."""
    for p in cfg.smoothing:
        for _ in range(cfg.smooth_sweeps):
            moved = False
            for k in range(1, obj.params.L):
                P, Q, R = obj.components(k)
                vals = obj.scan_smooth(P, Q, R, grid_thetas, p)
                i = int(np.argmin(vals))
                cur = obj.scan_smooth(P, Q, R, [obj.phases[k]], p)[0]
                if vals[i] < cur - 1e-12:
                    obj.commit(k, float(grid_thetas[i]), P, Q, R)
                    moved = True
            obj.set_phases(obj.phases)
            if not moved:
                break


def _descend(obj: PhaseObjective, init, cfg: OptimizerConfig):
    grid_thetas = 2 * np.pi * np.arange(cfg.phase_grid) / cfg.phase_grid
    obj.set_phases(init)
    if cfg.smoothing and cfg.smooth_sweeps:
        _smooth_warm_start(obj, cfg, grid_thetas)
    value = obj.set_phases(obj.phases)
    trace = [value]
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        start = value
        for k in range(1, obj.params.L):
            value = _coordinate_step(obj, k, cfg, grid_thetas, value)
        # resynchronize the incrementally updated AF with a full evaluation
        value = obj.set_phases(obj.phases)
        trace.append(value)
        if start - value < cfg.tol:
            break
    return obj.phases.copy(), value, sweeps, trace


def restart_init(cfg: OptimizerConfig, L: int, r: int) -> np.ndarray:
    """Starting phases of restart ``r``: zeros first, then seeded random draws."""
    if r == 0:
        return np.zeros(L)
    rng = np.random.default_rng([cfg.seed, r])
    if cfg.refine:
        init = rng.uniform(0.0, 2 * np.pi, L)
    else:
        init = 2 * np.pi * rng.integers(0, cfg.phase_grid, L) / cfg.phase_grid
    init[0] = 0.0
    return init


def optimize_phases(freq, params: WaveformParams, cfg: OptimizerConfig | None = None) -> OptimizeResult:
    """Phase sequence minimizing the PSL of ``freq``; phase 0 is pinned to 0.

    ``psl_before`` is the zero-phase PSL and ``psl_after`` the PSL of the
    returned phases, both measured with ``ambiguity``/``psl`` on the
    report grid.
    """
    cfg = cfg or OptimizerConfig()
    obj = PhaseObjective(freq, params, cfg.af_grid, cfg.mainlobe)
    zero = np.zeros(params.L)
    psl_before = _report_psl(obj.freq, zero, params, cfg)
    if params.L == 1:
        return OptimizeResult(zero, psl_before, psl_before, 0, 0, [psl_before])

    def run(r):
        return _descend(obj.clone(), restart_init(cfg, params.L, r), cfg)

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(min(cfg.workers, cfg.restarts)) as ex:
            results = list(ex.map(run, range(cfg.restarts)))
    else:
        results = [run(r) for r in range(cfg.restarts)]
    # argmin over restarts, earliest index wins ties
    phases, value, sweeps, trace = min(enumerate(results), key=lambda ir: (ir[1][1], ir[0]))[1]
    phases = np.mod(phases - phases[0], 2 * np.pi)
    after = _report_psl(obj.freq, phases, params, cfg)
    if after > psl_before:
        phases, after = zero, psl_before
    return OptimizeResult(phases, psl_before, after, sweeps, cfg.restarts, trace)


def _report_psl(freq, phases, params, cfg) -> float:
    sig = synthesize(params, freq, phases)
    return psl(ambiguity(sig, cfg.report_grid), cfg.mainlobe).psl


class PhaseCache:
    """Optimized phases keyed by frequency sequence, persistable to JSON.

    A cache is bound to one (L, M, delta_f*T, shaping, optimizer config)
    combination; loading a file written for a different one raises.
    Lookups and inserts are guarded by a lock.
    """

    VERSION = 1

    def __init__(self, params: WaveformParams, cfg: OptimizerConfig | None = None):
        self.params = params
        self.cfg = cfg or OptimizerConfig()
        self._store: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    def header(self) -> dict:
        p = self.params
        return {
            "version": self.VERSION,
            "L": p.L,
            "M": p.M,
            "delta_f_T": p.delta_f * p.T,
            "oversampling": p.oversampling,
            "shaping": p.shaping,
            "optimizer": self.cfg.key(),
            "seed": self.cfg.seed,
        }

    def __len__(self):
        return len(self._store)

    def items(self):
        with self._lock:
            return [(k, v.copy()) for k, v in sorted(self._store.items())]

    def __contains__(self, freq):
        return tuple(int(f) for f in freq) in self._store

    def get(self, freq) -> np.ndarray:
        key = tuple(int(f) for f in freq)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit.copy()
        log.info("optimizing phases for new frequency sequence (cache size %d)", len(self._store))
        phases = optimize_phases(np.array(key), self.params, self.cfg).phases
        with self._lock:
            self._store.setdefault(key, phases)
        return phases.copy()

    def put(self, freq, phases) -> None:
        with self._lock:
            self._store[tuple(int(f) for f in freq)] = np.asarray(phases, dtype=float).copy()

    def save(self, path) -> None:
        entries = [
            {"freq": list(k), "phases": [float(x) for x in v]}
            for k, v in sorted(self._store.items())
        ]
        Path(path).write_text(json.dumps({"header": self.header(), "entries": entries}))

    def load(self, path) -> "PhaseCache":
        data = json.loads(Path(path).read_text())
        if data.get("header") != self.header():
            raise ValueError(f"phase cache {path} was built for different settings")
        for e in data["entries"]:
            self.put(e["freq"], e["phases"])
        return self


def psl_table(params: WaveformParams, freq_sequences, cfg: OptimizerConfig | None = None) -> PhaseCache:
    """Optimize every distinct sequence once and return the filled cache."""
    cache = PhaseCache(params, cfg)
    for f in freq_sequences:
        cache.get(as_frequency_sequence(f, params))
    return cache
