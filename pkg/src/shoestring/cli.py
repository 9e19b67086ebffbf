"""Command-line entry point: ``shoestring synth|quantize|bench|selftest|init|features``.

Machine-readable results go to stdout as JSON lines; human summaries and
errors go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .kernels import Q_SCALE, ActivationCoeffs
from .quantizer import QuantizerConfig
from .sampling import DEFAULT_XI

EXIT_OK = 0
EXIT_FAIL = 1


class CLIError(Exception):
    """Fatal, user-facing error; the message is printed as is."""


def _say(msg):
    print(msg, file=sys.stderr)


def thread_count():
    raw = os.environ.get("SHOESTRING_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise CLIError(f"SHOESTRING_THREADS must be a positive integer, got {raw!r}")
    return n


def _load_model(path):
    from .model.network import load_model
    from .model.weights import WeightFileError

    try:
        return load_model(path)
    except WeightFileError as exc:
        text = str(exc)
        raise CLIError(text if str(path) in text else f"{path}: {text}") from None


def cmd_synth(args):
    from .model.features import FeatureFileError, read_features
    from .model.synthesis import SynthConfig, Synthesizer, write_wav

    try:
        features = read_features(args.features)
    except FeatureFileError as exc:
        raise CLIError(str(exc)) from None
    model = _load_model(args.weights)
    try:
        synth = Synthesizer(model, SynthConfig(xi=args.xi))
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    pcm, stats = synth.synthesize(features, seed=args.seed)
    try:
        write_wav(args.out, pcm)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    print(stats.to_json())
    _say(
        f"{args.out}: {stats.samples} samples ({stats.audio_seconds:.2f} s) from {stats.frames} frames, "
        f"{stats.mode} {stats.model}, {stats.percent_of_core:.1f}% of one core"
    )
    return EXIT_OK


def cmd_quantize(args):
    from .model.quantize import quantize_weights
    from .model.weights import WeightFileError

    model = _load_model(args.input)
    try:
        qmodel = quantize_weights(model, QuantizerConfig(q=args.q))
    except WeightFileError as exc:
        raise CLIError(f"{args.input}: {exc}") from None
    except ValueError as exc:
        raise CLIError(f"{args.input}: {exc}") from None
    try:
        qmodel.save(args.out)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    _say(f"{args.out}: {qmodel.config.name or 'model'} with int8 block-sparse per-sample matrices (q={args.q:g})")
    return EXIT_OK


def cmd_bench(args):
    from .bench import available_modes, pin_to_one_core, run_bench, speedup

    threads = thread_count()
    model = _load_model(args.weights)
    modes = [args.mode] if args.mode else available_modes(model)
    if "quantized" in modes and not model.config.quantized:
        raise CLIError(f"{args.weights}: quantized mode needs a quantized weight file (run `shoestring quantize`)")
    core = pin_to_one_core()
    _say(f"pinned to core {core}" if core is not None else "core pinning unavailable")
    if threads > 1:
        _say(f"SHOESTRING_THREADS={threads}: a single stream is sequential, running on one thread")
    try:
        reports = [run_bench(model, args.seconds, mode) for mode in modes]
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    for rep in reports:
        print(rep.to_json())
        _say(
            f"{rep.mode:>9}: {rep.samples} samples in {rep.wall_clock_s:.3f} s, "
            f"RTF {rep.real_time_factor:.2f}x real time, {rep.percent_of_core:.1f}% of one core"
        )
    if len(reports) == 2:
        ratio = speedup(*reports)
        print(json.dumps({"speedup_quantized_over_float": ratio}))
        _say(f"quantized/float throughput: {ratio:.2f}x")
    return EXIT_OK


def _parse_coeffs(text):
    try:
        values = [float(v) for v in text.split(",")]
        return ActivationCoeffs(*values)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError("expected five comma-separated numbers N0,N1,D0,D1,D2") from None


def cmd_selftest(args):
    from .kernels import DEFAULT_COEFFS
    from .selftest import run_checks

    results = run_checks(args.coeffs or DEFAULT_COEFFS)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    _say(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_init(args):
    from .model.config import PRESETS
    from .model.random_init import random_model

    model = random_model(PRESETS[args.preset], seed=args.seed)
    try:
        model.save(args.out)
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    _say(f"{args.out}: random float {args.preset} weights (seed {args.seed})")
    return EXIT_OK


def cmd_features(args):
    from .model.features import synthetic_features, write_features

    if args.frames < 1:
        raise CLIError("--frames must be at least 1")
    try:
        write_features(args.out, synthetic_features(args.frames, args.seed))
    except OSError as exc:
        raise CLIError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    _say(f"{args.out}: {args.frames} synthetic feature frames (seed {args.seed})")
    return EXIT_OK


def build_parser():
    from .model.config import PRESETS

    parser = argparse.ArgumentParser(prog="shoestring", description="LPCNet-style vocoder engine and tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a WAV file from a feature file")
    p.add_argument("--features", required=True, help="raw little-endian f32 features, 36 per frame")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xi", type=float, default=DEFAULT_XI, help="sampling bias floor (default %(default)s)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("quantize", help="convert a float weight file to int8 block-sparse")
    p.add_argument("--in", dest="input", required=True, help="float weight file")
    p.add_argument("--out", required=True)
    p.add_argument("--q", type=float, default=Q_SCALE, help="lattice step, a multiple of 1/128 (default %(default)s)")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("bench", help="measure synthesis throughput")
    p.add_argument("--weights", required=True)
    p.add_argument("--seconds", type=float, required=True, help="audio seconds to synthesize per mode")
    p.add_argument("--mode", choices=["quantized", "float"], help="default: every mode the weights support")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run the embedded invariant checks")
    p.add_argument("--coeffs", type=_parse_coeffs, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("init", help="write seeded random float weights for a preset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("features", help="write seeded synthetic feature frames")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        _say(f"shoestring {args.command}: error: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
