"""Command line interface: ``besovtrace <command> ...``.

Exit status is 0 when every enabled check passes, 1 when a check fails and
2 for invalid parameters or configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import kernels
from .config import dump_config, load_config
from .errors import BesovTraceError, FormatError, ParameterError

VERIFY_TARGETS = ["protr1", "trace-decay", "lower-bound", "volume-bound", "spectrum-line", "holder"]

# flag name -> config key
CONFIG_FLAGS = {
    "N": ("N", int),
    "r": ("r", int),
    "D": ("D", int),
    "d": ("d", int),
    "s": ("s", float),
    "p": ("p", float),
    "q": ("q", float),
    "j_max": ("j_max", int),
    "seed": ("seed", int),
    "eps": ("eps", float),
    "mc_samples": ("mc_samples", int),
    "output_dir": ("output_dir", str),
}


def _add_config_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("configuration")
    g.add_argument("--config", help="key = value file (default: $BESOVTRACE_CONFIG)")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    for flag, (_, kind) in CONFIG_FLAGS.items():
        name = "--" + flag.replace("_", "-")
        g.add_argument(name, dest="cfg_" + flag, type=kind, default=None)


def _config(args):
    overrides = {key: getattr(args, "cfg_" + flag) for flag, (key, _) in CONFIG_FLAGS.items()}
    for item in args.set:
        if "=" not in item:
            raise ParameterError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    return load_config(args.config, overrides)


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _offsets(text, count: int):
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) != count:
        raise ParameterError(f"expected {count} comma-separated coordinates, got {text!r}")
    return vals


# ---------------------------------------------------------------------------
# commands


def cmd_wavelet(args) -> int:
    from .wavelets import build_G, check_hypothesis_HN, daubechies, save_wavelet_system

    cfg = _config(args)
    system = daubechies(cfg.N, cfg.r)
    if args.action == "generate":
        summary = {
            "N": cfg.N,
            "r": cfg.r,
            "filter": system.filter.tolist(),
            "refinement_residual": system.refinement_residual(),
            "moment_residual": float(np.max(system.moment_residuals())),
            "partition_of_unity_residual": system.partition_of_unity_residual(),
            "regularity_estimate": system.regularity_estimate,
        }
        if args.out:
            save_wavelet_system(system, args.out)
            summary["path"] = args.out
        _emit(summary)
        return 0
    report = check_hypothesis_HN(build_G(system, 1))
    _emit(report.to_dict(), args.json)
    return 0 if report.verdict == "holds" else 1


def _build_field(kind: str, cfg, j_max: int):
    from .fields import BesovParams, synthesize_random_field
    from .probe import build_probe_family, choose_J0, synthesize_g

    P = BesovParams(cfg.s, cfg.p, cfg.q, cfg.D)
    if kind == "random":
        return synthesize_random_field(P, j_max, cfg.seed, cfg.delta)
    if kind == "g":
        P.require_gap()
        return synthesize_g(P, cfg.d, j_max)
    if kind == "proxy":
        from .experiments import Context, spectrum_field
        from dataclasses import replace

        f, _, _ = spectrum_field(replace(cfg, j_max=j_max), Context(cfg))
        return f
    if kind == "probes":
        H = cfg.s - cfg.d / cfg.p
        g = synthesize_g(P, cfg.d, j_max)
        return build_probe_family(g, choose_J0(cfg.d, H + cfg.gamma_gap, H))
    raise ParameterError(f"unknown field kind {kind!r}")


def cmd_synthesize(args) -> int:
    from .fields import save_field, write_energy_csv
    from .probe import save_probe_family

    cfg = _config(args).validate(probes=args.kind != "random")
    j_max = args.j_max_store or min(cfg.j_max, 26 // cfg.D)
    if j_max * cfg.D > 26:
        raise ParameterError(f"a stored field needs j_max * D <= 26, got {j_max * cfg.D}")
    obj = _build_field(args.kind, cfg, j_max)
    if args.kind == "probes":
        save_probe_family(obj, args.out)
        _emit({"kind": "probes", "directory": args.out, **obj.manifest()})
        return 0
    save_field(obj, args.out)
    if args.energy_csv:
        write_energy_csv(obj, args.energy_csv, cfg.p, cfg.s)
    _emit({"kind": args.kind, "path": args.out, "j_max": j_max, "D": cfg.D})
    return 0


def cmd_trace(args) -> int:
    from .fields import load_field
    from .trace import save_trace, trace
    from .wavelets import daubechies

    cfg = _config(args)
    if args.field:
        f = load_field(args.field)
    else:
        cfg.validate(probes=args.kind != "random")
        f = _build_field(args.kind, cfg, cfg.j_max)
    a = _offsets(args.a, f.dim - cfg.d)
    tf = trace(f, a, cfg.d, daubechies(cfg.N, cfg.r))
    save_trace(tf, args.out)
    _emit({"path": args.out, "a": a, "d": cfg.d, "j_max": tf.j_max, "bands": len(tf.bands)})
    return 0


def cmd_holder(args) -> int:
    from .regularity import estimate_holder
    from .trace import load_trace

    tf = load_trace(args.trace)
    x = _offsets(args.x, tf.d)
    est = estimate_holder(tf, x, args.L, method=args.method)
    print(est.to_json())
    return 0


def cmd_spectrum(args) -> int:
    from .regularity import estimate_spectrum
    from .trace import load_trace, trace

    cfg = _config(args)
    if args.trace:
        tf = load_trace(args.trace)
    else:
        from .experiments import Context, spectrum_field

        cfg.validate()
        ctx = Context(cfg)
        f, _, _ = spectrum_field(cfg, ctx)
        a, _ = ctx.pick_slice((6, cfg.j_max), cfg.seed)
        tf = trace(f, a, cfg.d, ctx.system)
    est = estimate_spectrum(tf, bin_width=cfg.spectrum_bin)
    if args.csv is not None:
        if args.csv == "-":
            print("h,dhat")
            for h, v in zip(est.h, est.dhat):
                print(f"{h:.6g},{v:.6g}" if np.isfinite(v) else f"{h:.6g},nan")
        else:
            est.to_csv(args.csv)
    else:
        _emit(est.to_dict())
    return 0


def cmd_verify(args) -> int:
    from .experiments import run_all

    cfg = _config(args)
    names = VERIFY_TARGETS if args.target == "all" else [args.target]
    report = run_all(cfg, names, jobs=args.jobs)
    out_dir = args.out or cfg.output_dir
    report.write(out_dir)
    print(report.to_json())
    for r in report.results:
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} ({r.runtime:.1f} s)", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_config(args) -> int:
    cfg = _config(args)
    sys.stdout.write(dump_config(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besovtrace", description="Wavelet traces of Besov functions and their pointwise regularity.")
    ap.add_argument("--version", action="store_true", help="print version and kernel implementation")
    sub = ap.add_subparsers(dest="command")

    sp = sub.add_parser("wavelet", help="generate a Daubechies system or check (H_N)")
    sp.add_argument("action", choices=["generate", "check-hn"])
    sp.add_argument("--out", help="binary wavelet file (generate)")
    sp.add_argument("--json", help="write the check report here instead of stdout")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_wavelet)

    sp = sub.add_parser("synthesize", help="write a coefficient field (BCF1) or probe family")
    sp.add_argument("kind", choices=["random", "g", "probes", "proxy"])
    sp.add_argument("--out", required=True)
    sp.add_argument("--store-j-max", dest="j_max_store", type=int, default=None,
                    help="finest stored scale (default: min(j_max, 26 // D))")
    sp.add_argument("--energy-csv", help="also write (j, A_j)")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("trace", help="trace a field on the slice x' = a")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--field", help="BCF1 field file")
    src.add_argument("--kind", choices=["random", "g", "proxy"], default="proxy")
    sp.add_argument("--a", required=True, help="slice offset, comma separated")
    sp.add_argument("--out", required=True)
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("holder", help="pointwise Hoelder estimate from a trace file")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--x", required=True, help="point, comma separated")
    sp.add_argument("--L", type=float, default=2.0, help="cone width")
    sp.add_argument("--method", choices=["regression", "liminf"], default="regression")
    sp.set_defaults(func=cmd_holder)

    sp = sub.add_parser("spectrum", help="coarse-grained spectrum of a trace")
    sp.add_argument("--trace", help="trace file (default: the prevalent proxy of the config)")
    sp.add_argument("--csv", nargs="?", const="-", default=None, help="CSV output path ('-' or bare flag: stdout)")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("verify", help="run experiments and report")
    sp.add_argument("target", choices=VERIFY_TARGETS + ["all"])
    sp.add_argument("--out", help="report directory (default: output_dir)")
    sp.add_argument("--jobs", type=int, default=1)
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("config", help="print the effective configuration")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_config)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        from . import __version__

        print(f"besovtrace {__version__} ({kernels.IMPLEMENTATION} kernels)")
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return int(args.func(args))
    except (ParameterError, FormatError) as exc:
        print(f"besovtrace: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"besovtrace: {exc}", file=sys.stderr)
        return 2
    except BesovTraceError as exc:
        print(f"besovtrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
