"""Command-line front end.

Subcommands: enhance, link-sim, mix, eval, sweep, info, init-weights.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .dsp import ConfigError
from .enhancer import enhance
from .features import Mode
from .link import LinkConfig, transmit
from .metrics import evaluate
from .mixer import load_scene, mix_scene
from .qnn.container import load_weights, save_weights, to_bytes
from .qnn.weights import (
    FormatError,
    ModelHyperparams,
    count_macs_per_second,
    count_parameters,
    count_parameters_closed_form,
    init_random,
    passthrough_weights,
)
from .wavio import read_wav, write_wav

log = logging.getLogger("bilateral_se")


def _atomic_write(path, write):
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=path.suffix)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _mics(text):
    mics = _int_list(text)
    if len(mics) != 4 or len(set(mics)) != 4:
        raise argparse.ArgumentTypeError("--mics needs four distinct indices: L-front,L-rear,R-front,R-rear")
    return mics


def _link_from_args(args, mode: Mode):
    if mode is Mode.LOWB:
        if args.delay_ms is None or args.bits is None:
            raise ConfigError("lowb mode requires --delay-ms and --bits")
        return LinkConfig(args.delay_ms, args.bits)
    if mode is Mode.BIN and args.bits is not None:
        return LinkConfig(0, args.bits)
    return None


def _select(data, mics, path):
    if data.shape[0] <= max(mics):
        raise ConfigError(f"{path}: has {data.shape[0]} channels, --mics needs index {max(mics)}")
    return data[mics]


def _write_csv(path, header, rows):
    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    _atomic_write(path, write)


def cmd_enhance(args):
    weights = load_weights(args.weights)
    mode = Mode(args.mode) if args.mode else weights.mode
    _, data = read_wav(args.input)
    mics = _select(data, args.mics, args.input)
    out = enhance(weights, mics, mode, _link_from_args(args, mode))
    _atomic_write(args.output, lambda tmp: write_wav(tmp, out))
    log.info("wrote %s (%d samples, 2 channels)", args.output, out.shape[1])


def cmd_link_sim(args):
    _, data = read_wav(args.input)
    out = transmit(data, LinkConfig(args.delay_ms, args.bits))
    _atomic_write(args.output, lambda tmp: write_wav(tmp, out))


def cmd_mix(args):
    spec = load_scene(args.scene, read_wav)
    if args.seed is not None:
        spec.seed = args.seed
    bundle = mix_scene(spec)
    out = Path(args.out_dir)
    _atomic_write(out / "mixture.wav", lambda tmp: write_wav(tmp, bundle.mixture))
    _atomic_write(out / "target_direct.wav", lambda tmp: write_wav(tmp, bundle.target_direct))
    rows = [[f"interferer{i}", s] for i, s in enumerate(bundle.interferer_snr_db)]
    if bundle.noise_snr_db is not None:
        rows.append(["noise", bundle.noise_snr_db])
    rows.append(["output_level_dbfs", bundle.output_level_dbfs])
    _write_csv(out / "scene.csv", ["component", "value"], rows)


def _front_pair(data, mics, path):
    """Reduce a 4-channel recording to its two reference mics; pass 1-2 channel data through."""
    if data.shape[0] == 4 or data.shape[0] > 2:
        return _select(data, [mics[0], mics[2]], path)
    return data


def cmd_eval(args):
    _, ref = read_wav(args.reference)
    _, est = read_wav(args.estimate)
    mix = None
    if args.mixture:
        _, mix = read_wav(args.mixture)
        mix = _front_pair(mix, args.mics, args.mixture)
    n = min(ref.shape[1], est.shape[1])
    scores = evaluate(ref[:, :n], est[:, :n], None if mix is None else mix[:, :n])
    name = Path(args.estimate).name
    _write_csv(args.output, ["file", "metric", "value"], [[name, k, f"{v:.6f}"] for k, v in scores.items()])


def _sweep_cell(job):
    blob, mics, ref, delay, bits = job
    from .qnn.container import from_bytes

    weights = from_bytes(blob)
    out = enhance(weights, mics, Mode.LOWB, LinkConfig(delay, bits))
    scores = evaluate(ref, out, mics[[0, 2]])
    return [delay, bits] + [f"{scores[k]:.6f}" for k in ("si_sdr", "cmse", "pcm", "combined")]


def cmd_sweep(args):
    weights = load_weights(args.weights)
    if weights.kind != "passthrough" and weights.mode is not Mode.LOWB:
        raise ConfigError("sweep needs lowb weights")
    _, data = read_wav(args.input)
    mics = _select(data, args.mics, args.input)
    _, ref = read_wav(args.reference)
    if ref.shape != (2, mics.shape[1]):
        raise ConfigError(f"{args.reference}: expected 2 channels of {mics.shape[1]} samples, got {ref.shape}")
    blob = to_bytes(weights)
    jobs = [(blob, mics, ref, d, b) for d in args.delays for b in args.bits]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    _write_csv(args.output, ["delay_ms", "bits", "si_sdr", "cmse", "pcm", "combined"], rows)


def cmd_info(args):
    modes = [Mode(args.mode)] if args.mode else list(Mode)
    buf = io.StringIO()
    buf.write(f"{'mode':<6} {'B':>4} {'params':>8} {'GMAC/s':>8}\n")
    for mode in modes:
        hp = ModelHyperparams.for_mode(mode, post_taps=args.post_taps)
        params = count_parameters(init_random(hp, 0, mode))
        if params != count_parameters_closed_form(hp):
            raise RuntimeError("parameter count disagrees with the closed form")
        buf.write(f"{mode.value:<6} {hp.B:>4} {params:>8d} {count_macs_per_second(hp) / 1e9:>8.4f}\n")
    if args.weights:
        w = load_weights(args.weights)
        if w.kind == "passthrough":
            buf.write(f"weights {args.weights}: passthrough fixture ({w.mode.value})\n")
        else:
            buf.write(f"weights {args.weights}: {w.mode.value}, {count_parameters(w)} params per side\n")
    sys.stdout.write(buf.getvalue())


def cmd_init_weights(args):
    mode = Mode(args.mode)
    hp = ModelHyperparams.for_mode(mode, post_taps=args.post_taps)
    if args.fixture == "passthrough":
        weights = passthrough_weights(hp, mode)
    else:
        weights = init_random(hp, args.seed, mode)
    _atomic_write(args.output, lambda tmp: save_weights(weights, tmp))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bilateral-se", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    modes = [m.value for m in Mode]

    def link_flags(sp):
        sp.add_argument("--delay-ms", type=int)
        sp.add_argument("--bits", type=int)

    sp = sub.add_parser("enhance", help="enhance a 4-channel 16 kHz recording")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--mode", choices=modes)
    sp.add_argument("--mics", type=_mics, default=[0, 1, 2, 3], help="L-front,L-rear,R-front,R-rear")
    link_flags(sp)
    sp.set_defaults(func=cmd_enhance)

    sp = sub.add_parser("link-sim", help="delay and quantize a recording like the binaural link")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--delay-ms", type=int, required=True)
    sp.add_argument("--bits", type=int, required=True)
    sp.set_defaults(func=cmd_link_sim)

    sp = sub.add_parser("mix", help="build a mixture from a JSON scene description")
    sp.add_argument("scene")
    sp.add_argument("out_dir")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_mix)

    sp = sub.add_parser("eval", help="SI-SDR and loss values as CSV")
    sp.add_argument("--reference", required=True)
    sp.add_argument("--estimate", required=True)
    sp.add_argument("--mixture")
    sp.add_argument("--mics", type=_mics, default=[0, 1, 2, 3])
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="evaluate lowb weights over a delay x bits grid")
    sp.add_argument("--input", required=True, help="4-channel mixture")
    sp.add_argument("--reference", required=True, help="2-channel target (left, right)")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--delays", type=_int_list, required=True)
    sp.add_argument("--bits", type=_int_list, required=True)
    sp.add_argument("--mics", type=_mics, default=[0, 1, 2, 3])
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("info", help="parameter and MAC counts")
    sp.add_argument("--mode", choices=modes)
    sp.add_argument("--post-taps", type=int)
    sp.add_argument("--weights")
    sp.set_defaults(func=cmd_info)

    sp = sub.add_parser("init-weights", help="write a seeded random weight container")
    sp.add_argument("output")
    sp.add_argument("--mode", choices=modes, default="lowb")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--post-taps", type=int)
    sp.add_argument("--fixture", choices=["passthrough"])
    sp.set_defaults(func=cmd_init_weights)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
