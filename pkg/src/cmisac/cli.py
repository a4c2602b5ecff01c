"""Command-line front end: ``cmisac <command> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
``--config FILE`` reads flat ``key = value`` lines whose keys are the long
flag names without dashes (``L = 16``, ``doppler-span = 4``); values from
the file override flags given on the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .modulation import ALL_SCHEMES, Scheme, bits_per_waveform, encode, parse_scheme, random_bits

log = logging.getLogger("cmisac")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p, schemes_multi=False, shaping="ideal"):
    if schemes_multi:
        p.add_argument("--scheme", action="append", help="scheme name; repeat or comma-separate (default: all)")
    else:
        p.add_argument("--scheme", default="fsk", help="scheme name (default fsk)")
    p.add_argument("--L", type=int, default=None, help="number of subpulses")
    p.add_argument("--M", type=int, default=None, help="number of tones (default L)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oversampling", type=int, default=None)
    p.add_argument("--shaping", choices=("ideal", "bandlimited"), default=shaping)
    p.add_argument("--psk-order", type=int, default=4)
    p.add_argument("--config", help="flat key = value file overriding flags")
    p.add_argument("--verbose", "-v", action="store_true")


def _add_af(p):
    p.add_argument("--doppler-span", type=float, default=None, help="Doppler half-span in units of delta_f")
    p.add_argument("--delay-span", type=float, default=None, help="delay half-span in units of T")
    p.add_argument("--mainlobe", default=None,
                   help="mainlobe half-widths 'DELAY,DOPPLER' in units of T and 1/(L T) (default 1,1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmisac", description="Communication-modulated stepped-frequency radar waveforms.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("generate", help="synthesize one waveform and dump its samples")
    _add_common(p)
    p.add_argument("--bits", help="data bits as a 0/1 string (default: random from --seed)")
    p.add_argument("--out", help="output file (.bin interleaved float64 or .csv)")

    p = sub.add_parser("af", help="ambiguity function and PSL of one waveform")
    _add_common(p)
    _add_af(p)
    p.add_argument("--bits")
    p.add_argument("--out", help="write the AF magnitude grid (.csv or .npz)")

    p = sub.add_parser("metrics", help="RMS bandwidth, PAPR and duration of one waveform")
    _add_common(p)
    p.add_argument("--bits")

    p = sub.add_parser("detect-sim", help="noisy detection trials")
    _add_common(p)
    p.add_argument("--snr", type=float, default=10.0, help="per-subpulse Es/N0 in dB")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("optimize-phases", help="build or extend a phase cache for random FSK sequences")
    _add_common(p)
    _add_af(p)
    p.add_argument("--trials", type=int, default=10, help="number of random frequency sequences")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--out", required=True, help="phase cache JSON (extended if it exists)")
    p.add_argument("--jobs", type=int, default=None)

    for name, help_ in (("bench", "Monte-Carlo comparison of the schemes"),
                        ("reproduce-figures", "bench with the full-comparison defaults")):
        p = sub.add_parser(name, help=help_)
        _add_common(p, schemes_multi=True, shaping="bandlimited")
        _add_af(p)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--timing", action="store_true", help="record detector wall time (not reproducible)")
        p.add_argument("--phase-cache", default=None, help="phase cache JSON to reuse and extend")
        p.add_argument("--paper", action="store_true", help="L=64, 1000 trials, oversampling 4")
    return parser


def _read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from e
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.lstrip("-").replace("_", "-")] = v
    return out


def _apply_config(parser, args, argv):
    """Re-parse with the config file's entries appended, so they take precedence."""
    if not getattr(args, "config", None):
        return args
    extra = []
    for k, v in _read_config(args.config).items():
        if k in ("config", "command"):
            continue
        flag = "--" + k
        if v.lower() in ("true", "yes", "on"):
            extra.append(flag)
        elif v.lower() in ("false", "no", "off"):
            continue
        else:
            extra += [flag, v]
    return parser.parse_args(list(argv) + extra)


def _params(args, default_L=16, default_os=4):
    from .signal import WaveformParams

    L = args.L if args.L is not None else default_L
    os_ = args.oversampling if args.oversampling is not None else default_os
    try:
        return WaveformParams(L=L, M=args.M, oversampling=os_, shaping=args.shaping)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _grid(args):
    from .radar import GridConfig

    for name in ("delay_span", "doppler_span"):
        v = getattr(args, name)
        if v is not None and not v >= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be non-negative")
    return GridConfig(delay_span=args.delay_span, doppler_span=args.doppler_span)


def _mainlobe(args, params):
    from .radar import Mainlobe

    if not args.mainlobe:
        return Mainlobe()
    try:
        d, v = (float(x) for x in args.mainlobe.split(","))
    except ValueError as e:
        raise UsageError("--mainlobe expects 'DELAY,DOPPLER'") from e
    return Mainlobe(delay=d * params.T, doppler=v / (params.L * params.T))


def _symbols(args, params):
    scheme = parse_scheme(args.scheme)
    n = bits_per_waveform(scheme, params.L, args.psk_order, params.M)
    if getattr(args, "bits", None):
        if set(args.bits) - {"0", "1"}:
            raise UsageError("--bits must contain only 0 and 1")
        bits = np.array([int(c) for c in args.bits], dtype=np.uint8)
        if len(bits) != n:
            raise UsageError(f"{scheme.value} at L={params.L} carries {n} bits, got {len(bits)}")
    else:
        bits = random_bits(np.random.default_rng(args.seed), scheme, params.L, args.psk_order, params.M)
    provider = None
    if scheme is Scheme.FSK_PSLMIN:
        from .optimizer import OptimizerConfig, optimize_phases

        provider = lambda f: optimize_phases(f, params, OptimizerConfig(seed=args.seed)).phases  # noqa: E731
    freq, phase = encode(scheme, bits, params.L, args.psk_order, params.M, provider)
    return scheme, bits, freq, phase


def _emit_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_generate(args):
    from .signal import papr, save_samples, synthesize

    params = _params(args)
    scheme, bits, freq, phase = _symbols(args, params)
    sig = synthesize(params, freq, phase)
    ideal = synthesize(params.replace(shaping="ideal"), freq, phase)
    if args.out:
        save_samples(sig, args.out)
    _emit_json({
        "scheme": scheme.value,
        "n_samples": len(sig),
        "sample_rate": sig.sample_rate,
        "papr": papr(ideal),
        "papr_samples": papr(sig),
        "bits": "".join(str(int(b)) for b in bits),
        "freq": [int(f) for f in freq],
        "phases": [float(p) for p in phase],
        "out": args.out,
    })


def _cmd_af(args):
    from .radar import ambiguity, psl
    from .signal import synthesize

    params = _params(args)
    _, _, freq, phase = _symbols(args, params)
    af = ambiguity(synthesize(params, freq, phase), _grid(args))
    rep = psl(af, _mainlobe(args, params))
    if args.out:
        if str(args.out).endswith(".npz"):
            af.to_npz(args.out)
        else:
            af.to_csv(args.out)
    _emit_json({
        "psl": rep.psl,
        "psl_db": rep.psl_db,
        "location": {"tau": rep.location[0], "nu": rep.location[1]},
        "grid_shape": list(af.mags.shape),
        "out": args.out,
    })


def _cmd_metrics(args):
    from .radar import duration, rms_bandwidth
    from .signal import papr, synthesize

    params = _params(args)
    scheme, _, freq, phase = _symbols(args, params)
    sig = synthesize(params, freq, phase)
    bw = rms_bandwidth(sig)
    _emit_json({
        "scheme": scheme.value,
        "beta_sq_T_sq": bw.beta_sq_T_sq,
        "centroid": bw.centroid,
        "papr": papr(synthesize(params.replace(shaping="ideal"), freq, phase)),
        "duration": duration(sig),
    })


def _cmd_detect_sim(args):
    from .detectors import simulate_detection

    params = _params(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    _emit_json(simulate_detection(args.scheme, params, args.snr, args.trials, args.seed, args.psk_order))


def _cmd_optimize_phases(args):
    from .bench import default_jobs
    from .optimizer import OptimizerConfig, PhaseCache, optimize_phases

    params = _params(args, default_os=2)
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    cfg = OptimizerConfig(seed=args.seed, af_grid=_grid(args), report_grid=_grid(args),
                          mainlobe=_mainlobe(args, params))
    if args.restarts is not None:
        cfg = replace(cfg, restarts=args.restarts)
    cfg = replace(cfg, workers=args.jobs or default_jobs())
    cache = PhaseCache(params, cfg)
    if Path(args.out).exists():
        cache.load(args.out)
    rng = np.random.default_rng(args.seed)
    before, after, added = [], [], 0
    for _ in range(args.trials):
        f = rng.integers(0, params.M, params.L)
        if f in cache:
            continue
        res = optimize_phases(f, params, cfg)
        cache.put(f, res.phases)
        before.append(res.psl_before)
        after.append(res.psl_after)
        added += 1
        log.info("sequence %d: psl %.4f -> %.4f", added, res.psl_before, res.psl_after)
    cache.save(args.out)
    _emit_json({
        "entries": len(cache),
        "added": added,
        "mean_psl_before": float(np.mean(before)) if before else None,
        "mean_psl_after": float(np.mean(after)) if after else None,
        "out": args.out,
    })


def _bench_config(args, reproduce: bool):
    from .bench import ExperimentConfig, default_jobs

    if reproduce:
        L, trials, os_ = 64, 100, 2
    else:
        L, trials, os_ = 16, 50, 2
    if args.paper:
        L, trials, os_ = 64, 1000, 4
    L = args.L if args.L is not None else L
    trials = args.trials if args.trials is not None else trials
    os_ = args.oversampling if args.oversampling is not None else os_
    if args.scheme:
        names = [n for s in args.scheme for n in s.split(",") if n]
        try:
            schemes = tuple(parse_scheme(n) for n in names)
        except ValueError as e:
            raise UsageError(str(e)) from e
    else:
        schemes = ALL_SCHEMES
    params_probe = _params(argparse.Namespace(L=L, M=args.M, oversampling=os_, shaping=args.shaping))
    if args.jobs is not None and args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    return ExperimentConfig(
        schemes=schemes,
        L=L,
        M=args.M,
        trials=trials,
        seed=args.seed,
        oversampling=os_,
        shaping=args.shaping,
        psk_order=args.psk_order,
        grid=_grid(args),
        mainlobe=_mainlobe(args, params_probe),
        jobs=args.jobs or default_jobs(),
        timing=args.timing,
        phase_cache=args.phase_cache,
    )


def _cmd_bench(args, reproduce=False):
    from .bench import emit, run_experiment

    cfg = _bench_config(args, reproduce)
    out = args.out or ("figures" if reproduce else "bench_out")
    records = run_experiment(cfg)
    paths = emit(records, out, cfg)
    summary = json.loads(Path(paths["summary"]).read_text())
    _emit_json({
        "out": {k: str(v) for k, v in paths.items()},
        "mean_psl": {k: v["psl"]["mean"] for k, v in summary["schemes"].items()},
    })


COMMANDS = {
    "generate": _cmd_generate,
    "af": _cmd_af,
    "metrics": _cmd_metrics,
    "detect-sim": _cmd_detect_sim,
    "optimize-phases": _cmd_optimize_phases,
    "bench": _cmd_bench,
    "reproduce-figures": lambda a: _cmd_bench(a, reproduce=True),
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        if getattr(args, "scheme", None) and isinstance(args.scheme, str):
            parse_scheme(args.scheme)
    except UsageError as e:
        print(f"cmisac: usage error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"cmisac: usage error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"cmisac: usage error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, KeyError) as e:
        print(f"cmisac: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
