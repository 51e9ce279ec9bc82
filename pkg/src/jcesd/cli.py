"""Command line interface.

Subcommands: ``generate`` (write a slot dataset), ``run`` (receiver sweep
from a config document), ``perturb`` (apply CFO / asymmetric noise to an
existing dataset), ``report`` (merge / convert reports), ``flops`` (print
operation counts).

Every option can also be supplied through an environment variable named
``JCESD_<OPTION>`` (uppercase, dashes replaced by underscores).  Precedence
is: command-line flag, then environment variable, then config-file entry,
then the built-in default.  Config documents are plain ``key = value``
lines; list values are comma separated and ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench, datasets
from .bench import SweepConfig, flop_convention_text, flop_report, run_sweep
from .channel import ChannelParams, slot_seed, synthesize_slot
from .perturb import apply_asymmetric_noise, apply_cfo

ENV_PREFIX = "JCESD_"


def _env_name(option):
    return ENV_PREFIX + option.replace("-", "_").upper()


def _resolve(option, cli_value, config_values, default, cast):
    """flag > environment > config file > default."""
    if cli_value is not None:
        return cli_value
    env = os.environ.get(_env_name(option))
    if env is not None:
        return cast(env)
    if config_values is not None and option in config_values:
        return cast(config_values[option])
    return default


def _parse_config_file(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("_", "-")] = value.strip()
    return values


def _float_list(text):
    return tuple(float(v) for v in str(text).split(",") if str(v).strip())


def _str_list(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# --------------------------------------------------------------------------
# generate
# --------------------------------------------------------------------------

def _cmd_generate(args):
    cfg = None
    get = lambda opt, default, cast: _resolve(opt, getattr(args, opt.replace("-", "_")), cfg, default, cast)
    out = get("out", None, str)
    if not out:
        raise SystemExit("generate: --out is required")
    doppler = get("doppler", 90.0, float)
    snr = get("snr", 10.0, float)
    num_slots = get("num-slots", 600, int)
    seed = get("seed", 1234, int)
    delay = get("delay-spread", 100e-9, float)
    tag = get("channel-tag", "kron", str)
    f = get("grid-f", 24, int)
    s = get("grid-s", 12, int)
    nr = get("grid-nr", 4, int)

    params = ChannelParams(doppler_hz=doppler, delay_spread_s=delay, F=f, S=s, Nr=nr)
    slots = [synthesize_slot(params, snr, seed=slot_seed(seed, i)) for i in range(num_slots)]
    datasets.write_dataset(slots, out, channel_tag=tag, doppler_hz=doppler, snr_db=snr,
                           delay_spread_s=delay, master_seed=seed)
    print(f"wrote {num_slots} slots to {out}")
    return 0


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------

def _cmd_run(args):
    cfg = _parse_config_file(args.config) if args.config else {}
    get = lambda opt, default, cast: _resolve(opt, getattr(args, opt.replace("-", "_"), None), cfg, default, cast)

    config = SweepConfig(
        channel_tag=get("channel-tag", "kron", str),
        doppler_list=get("doppler-list", (90.0,), _float_list),
        snr_list=get("snr-list", (10.0,), _float_list),
        num_slots=get("num-slots", 100, int),
        methods=get("methods", ("noniterative", "iterative"), _str_list),
        perturbation=get("perturbation", "none", str),
        noise_mode=get("noise-mode", "known", str),
        master_seed=get("master-seed", 1234, int),
        iterations=get("iterations", 6, int),
        delay_spread_s=get("delay-spread", 100e-9, float),
        F=get("grid-f", 24, int),
        S=get("grid-s", 12, int),
        Nr=get("grid-nr", 4, int),
        params_file=get("params-file", None, str),
        dataset=get("dataset", None, str),
        eval_split=get("eval-split", "test", str),
        measure_timing=get("measure-timing", False, _bool),
    )
    out = get("out", "report.csv", str)
    fmt = get("format", "csv", str)

    rows, failures = run_sweep(config)
    bench.emit_report(rows, fmt, out)
    print(f"wrote {len(rows)} rows to {out}")
    for failure in failures:
        print(f"FAILED row method={failure.method} doppler={failure.doppler_hz} "
              f"snr={failure.snr_db}: {failure.error}", file=sys.stderr)
    return 2 if failures else 0


# --------------------------------------------------------------------------
# perturb
# --------------------------------------------------------------------------

def _cmd_perturb(args):
    get = lambda opt, default, cast: _resolve(opt, getattr(args, opt.replace("-", "_"), None), None, default, cast)
    src = get("in", None, str) or args.infile
    out = get("out", None, str)
    if not src or not out:
        raise SystemExit("perturb: --in and --out are required")
    cfo = get("cfo", None, float)
    asym = get("asym", None, str)
    if (cfo is None) == (asym is None):
        raise SystemExit("perturb: give exactly one of --cfo or --asym s1sq,s2sq")

    meta, slots = datasets.read_dataset(src)
    new_slots = []
    for slot in slots:
        if cfo is not None:
            y = apply_cfo(slot.y, cfo)
            tag = f"{meta.channel_tag}+cfo{cfo:g}"
        else:
            s1, s2 = _float_list(asym)
            rng = np.random.default_rng(np.random.SeedSequence((slot.seed, 0x5EED)))
            y = apply_asymmetric_noise(slot.y, s1, s2, rng)
            tag = f"{meta.channel_tag}+asym{s1:g},{s2:g}"
        new_slots.append(datasets.Slot(x=slot.x, bits=slot.bits, h=slot.h, y=y,
                                       sigma2=slot.sigma2, snr_db=slot.snr_db,
                                       doppler_hz=slot.doppler_hz, seed=slot.seed))
    datasets.write_dataset(new_slots, out, channel_tag=tag, doppler_hz=meta.doppler_hz,
                           snr_db=meta.snr_db, delay_spread_s=meta.delay_spread_s,
                           master_seed=meta.master_seed)
    print(f"wrote perturbed dataset to {out}")
    return 0


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

def _cmd_report(args):
    get = lambda opt, default, cast: _resolve(opt, getattr(args, opt.replace("-", "_"), None), None, default, cast)
    out = get("out", None, str)
    fmt = get("format", "csv", str)
    if not out:
        raise SystemExit("report: --out is required")
    rows = []
    for path in args.inputs:
        rows.extend(bench.load_report(path))
    bench.emit_report(rows, fmt, out)
    print(f"merged {len(args.inputs)} report(s), {len(rows)} rows -> {out}")
    return 0


# --------------------------------------------------------------------------
# flops
# --------------------------------------------------------------------------

def _cmd_flops(args):
    get = lambda opt, default, cast: _resolve(opt, getattr(args, opt.replace("-", "_"), None), None, default, cast)
    f = get("grid-f", 24, int)
    s = get("grid-s", 12, int)
    nr = get("grid-nr", 4, int)
    iters = get("iterations", 6, int)
    non, it = flop_report(f, s, nr, iters)
    print(f"F={f} S={s} Nr={nr} iterations={iters}")
    print(f"noniterative: {non}")
    print(f"iterative:    {it}")
    print(f"ratio:        {it / non:.4f}")
    print(flop_convention_text())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jcesd",
        description="SIMO-OFDM receiver benchmark harness",
        epilog=f"every option may be set via {ENV_PREFIX}<OPTION> environment variables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize and write a slot dataset")
    p.add_argument("--out")
    p.add_argument("--doppler", type=float)
    p.add_argument("--snr", type=float)
    p.add_argument("--num-slots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--delay-spread", type=float)
    p.add_argument("--channel-tag")
    p.add_argument("--grid-f", type=int)
    p.add_argument("--grid-s", type=int)
    p.add_argument("--grid-nr", type=int)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="run a receiver sweep")
    p.add_argument("--config", help="key = value config document")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--channel-tag")
    p.add_argument("--doppler-list", type=_float_list)
    p.add_argument("--snr-list", type=_float_list)
    p.add_argument("--num-slots", type=int)
    p.add_argument("--methods", type=_str_list)
    p.add_argument("--perturbation")
    p.add_argument("--noise-mode", choices=("known", "estimated"))
    p.add_argument("--master-seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--delay-spread", type=float)
    p.add_argument("--grid-f", type=int)
    p.add_argument("--grid-s", type=int)
    p.add_argument("--grid-nr", type=int)
    p.add_argument("--params-file")
    p.add_argument("--dataset")
    p.add_argument("--eval-split", choices=("test", "all"))
    p.add_argument("--measure-timing", action="store_const", const=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("perturb", help="apply a perturbation to a dataset")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.add_argument("--cfo", type=float, help="carrier frequency offset in Hz")
    p.add_argument("--asym", help="asymmetric noise variances: s1sq,s2sq")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("report", help="merge / convert reports")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("flops", help="print operation counts")
    p.add_argument("--grid-f", type=int)
    p.add_argument("--grid-s", type=int)
    p.add_argument("--grid-nr", type=int)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=_cmd_flops)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
