"""Monte-Carlo comparison of the seven schemes.

Every trial draws fresh data bits from a stream seeded by
``(seed, scheme index, trial)``, so results do not depend on scheduling or
on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .detectors import complexity_per_subpulse, detect, matched_filter_bank
from .modulation import ALL_SCHEMES, Scheme, encode, parse_scheme, random_bits, bits_per_subpulse
from .optimizer import OptimizerConfig, PhaseCache, optimize_phases
from .radar import GridConfig, Mainlobe, ambiguity, psl, rms_bandwidth
from .signal import WaveformParams, synthesize

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "BoxStats",
    "run_experiment",
    "box_stats",
    "summarize",
    "emit",
    "TRIAL_COLUMNS",
    "default_jobs",
]

log = logging.getLogger(__name__)

TRIAL_COLUMNS = ("scheme", "trial", "psl", "psl_db", "beta_sq_T_sq", "bits_per_subpulse", "complexity", "wall_ms")
SCHEMA_VERSION = 1


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("CMISAC_JOBS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    schemes: tuple = ALL_SCHEMES
    L: int = 16
    M: int | None = None
    T: float = 1.0
    delta_f: float | None = None
    trials: int = 50
    seed: int = 0
    oversampling: int = 2
    shaping: str = "bandlimited"
    psk_order: int = 4
    grid: GridConfig = field(default_factory=GridConfig)
    mainlobe: Mainlobe = field(default_factory=Mainlobe)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    jobs: int = 1
    timing: bool = False
    phase_cache: str | None = None

    def __post_init__(self):
        schemes = tuple(parse_scheme(s) for s in self.schemes)
        if not schemes:
            raise ValueError("at least one scheme is required")
        object.__setattr__(self, "schemes", schemes)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def params(self) -> WaveformParams:
        return WaveformParams(L=self.L, T=self.T, delta_f=self.delta_f, M=self.M,
                              oversampling=self.oversampling, shaping=self.shaping)

    def optimizer_config(self) -> OptimizerConfig:
        """Optimizer objective tied to the reporting grid and mainlobe."""
        opt = self.optimizer
        return replace(opt, af_grid=opt.af_grid or self.grid, report_grid=self.grid,
                       mainlobe=opt.mainlobe or self.mainlobe)

    def describe(self) -> dict:
        p = self.params
        return {
            "schemes": [s.value for s in self.schemes],
            "L": p.L,
            "M": p.M,
            "T": p.T,
            "delta_f": p.delta_f,
            "delta_f_T": p.delta_f * p.T,
            "trials": self.trials,
            "seed": self.seed,
            "oversampling": p.oversampling,
            "shaping": p.shaping,
            "psk_order": self.psk_order,
            "grid": asdict(self.grid),
            "mainlobe": list(self.mainlobe.resolve(p)),
            "optimizer": {k: v for k, v in asdict(self.optimizer).items()
                          if k not in ("af_grid", "report_grid", "mainlobe", "workers")},
        }


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    trial: int
    psl: float
    psl_db: float
    beta_sq_T_sq: float
    bits_per_subpulse: float
    complexity: float
    wall_ms: float = 0.0


@dataclass(frozen=True)
class BoxStats:
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple
    n: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outliers"] = list(self.outliers)
        return d


def box_stats(values) -> BoxStats:
    """Tukey box statistics: type-7 quartiles, whiskers at the furthest datum within 1.5 IQR."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("box_stats needs at least one value")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxStats(
        mean=float(x.mean()),
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
        n=int(x.size),
    )


def _scheme_index(scheme: Scheme) -> int:
    return ALL_SCHEMES.index(scheme)


def trial_symbols(cfg: ExperimentConfig, scheme: Scheme, trial: int, phase_provider=None):
    rng = np.random.default_rng([cfg.seed, _scheme_index(scheme), trial])
    p = cfg.params
    bits = random_bits(rng, scheme, p.L, cfg.psk_order, p.M)
    return bits, encode(scheme, bits, p.L, cfg.psk_order, p.M, phase_provider)


def _run_trial(cfg: ExperimentConfig, scheme: Scheme, trial: int, cache: PhaseCache | None) -> TrialRecord:
    p = cfg.params
    provider = cache.get if scheme is Scheme.FSK_PSLMIN else None
    bits, (freq, phase) = trial_symbols(cfg, scheme, trial, provider)
    sig = synthesize(p, freq, phase)
    rep = psl(ambiguity(sig, cfg.grid), cfg.mainlobe)
    bw = rms_bandwidth(sig)
    wall = 0.0
    if cfg.timing:
        Y = matched_filter_bank(synthesize(p.replace(shaping="ideal"), freq, phase), p.replace(shaping="ideal"))
        t0 = time.perf_counter()
        detect(scheme, Y, cfg.psk_order)
        wall = (time.perf_counter() - t0) * 1e3
    return TrialRecord(
        scheme=scheme.value,
        trial=trial,
        psl=rep.psl,
        psl_db=rep.psl_db,
        beta_sq_T_sq=bw.beta_sq_T_sq,
        bits_per_subpulse=bits_per_subpulse(scheme, p.L, cfg.psk_order, p.M),
        complexity=complexity_per_subpulse(scheme, p.L, p.M, cfg.psk_order),
        wall_ms=wall,
    )


# worker-side state: each process keeps its own phase cache
_WORKER = {}


def _worker_init(cfg, cache_entries):
    cache = PhaseCache(cfg.params, cfg.optimizer_config())
    for f, ph in cache_entries:
        cache.put(f, ph)
    _WORKER["cfg"] = cfg
    _WORKER["cache"] = cache


def _worker_trials(items):
    cfg, cache = _WORKER["cfg"], _WORKER["cache"]
    return [_run_trial(cfg, parse_scheme(s), t, cache) for s, t in items]


def _optimize_one(args):
    freq, params, opt = args
    return tuple(int(f) for f in freq), optimize_phases(np.asarray(freq), params, opt).phases


def build_phase_cache(cfg: ExperimentConfig) -> PhaseCache:
    """Optimized phases for every frequency sequence the pslmin trials will draw."""
    p = cfg.params
    opt = cfg.optimizer_config()
    cache = PhaseCache(p, opt)
    if cfg.phase_cache and Path(cfg.phase_cache).exists():
        cache.load(cfg.phase_cache)
    if Scheme.FSK_PSLMIN not in cfg.schemes:
        return cache
    todo = []
    for t in range(cfg.trials):
        _, (freq, _) = trial_symbols(cfg, Scheme.FSK_PSLMIN, t)
        if freq not in cache and all(not np.array_equal(freq, f) for f in todo):
            todo.append(freq)
    if todo:
        log.info("optimizing phases for %d frequency sequences", len(todo))
    if cfg.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            for key, phases in ex.map(_optimize_one, [(f, p, opt) for f in todo]):
                cache.put(key, phases)
    else:
        for i, f in enumerate(todo):
            key, phases = _optimize_one((f, p, opt))
            cache.put(key, phases)
            log.debug("optimized %d/%d", i + 1, len(todo))
    if cfg.phase_cache:
        cache.save(cfg.phase_cache)
    return cache


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """``trials`` records per scheme, in canonical (scheme, trial) order."""
    p = cfg.params  # validates the waveform parameters up front
    if cfg.grid.delay_lags(p).size * cfg.grid.dopplers(p).size > 5_000_000:
        raise ValueError("delay-Doppler grid too large (resource guard)")
    if Scheme.COSTAS_QPSK in cfg.schemes:
        from .modulation import costas_sequence

        costas_sequence(p.L)
    cache = build_phase_cache(cfg)
    items = [(s.value, t) for s in cfg.schemes for t in range(cfg.trials)]
    if cfg.jobs > 1 and len(items) > 1:
        entries = cache.items()
        chunks = [items[i :: cfg.jobs * 4] for i in range(cfg.jobs * 4)]
        records = []
        with ProcessPoolExecutor(cfg.jobs, initializer=_worker_init, initargs=(cfg, entries)) as ex:
            for part in ex.map(_worker_trials, [c for c in chunks if c]):
                records.extend(part)
    else:
        records = [_run_trial(cfg, parse_scheme(s), t, cache) for s, t in items]
    order = {s.value: i for i, s in enumerate(ALL_SCHEMES)}
    records.sort(key=lambda r: (order[r.scheme], r.trial))
    return records


def summarize(records, cfg: ExperimentConfig | None = None) -> dict:
    by = {}
    for r in records:
        by.setdefault(r.scheme, []).append(r)
    schemes = {}
    for name, rs in by.items():
        schemes[name] = {
            "n": len(rs),
            "bits_per_subpulse": rs[0].bits_per_subpulse,
            "complexity": rs[0].complexity,
            "psl": box_stats([r.psl for r in rs]).to_dict(),
            "psl_variance": float(np.var([r.psl for r in rs], ddof=1)) if len(rs) > 1 else 0.0,
            "beta_sq_T_sq": box_stats([r.beta_sq_T_sq for r in rs]).to_dict(),
            "beta_sq_T_sq_variance": float(np.var([r.beta_sq_T_sq for r in rs], ddof=1)) if len(rs) > 1 else 0.0,
        }
    out = {"schema_version": SCHEMA_VERSION, "schemes": schemes}
    if cfg is not None:
        out["config"] = cfg.describe()
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    return str(v)


def trials_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in TRIAL_COLUMNS])
    return buf.getvalue()


def emit(records, out_dir, cfg: ExperimentConfig | None = None, figures: bool = True) -> dict:
    """Write ``trials.csv``, ``summary.json`` and the four box-plot figures."""
    if not records:
        raise ValueError("no records to emit")
    from .plots import render_figures

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(records, cfg)
    paths = {"trials": out / "trials.csv", "summary": out / "summary.json"}
    paths["trials"].write_text(trials_csv(records))
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if figures:
        for name, svg in render_figures(summary).items():
            paths[name] = out / f"{name}.svg"
            paths[name].write_text(svg)
    return paths
