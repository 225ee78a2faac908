"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid input file, 3 numerical
anomaly. Every failure writes one ``capdetect: error=<kind> message=<text>``
line to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import channels as C
from . import numkernel as nk
from .detection import (
    DetectConfig,
    detect,
    max_rank_search,
    maximize_ic,
    perturbation_curve,
)
from .errors import (
    CapDetectError,
    ConvergenceFailure,
    InvalidChannel,
    InvalidChoi,
    NumericalAnomaly,
    RankInconsistency,
)
from .harness import ExperimentConfig, Mode, boundary_check, dumps_summary, run_campaign
from .sampling import SeededStream, sample_channel

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _read_channel(path):
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path) as fh:
                text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return C.loads_channel(text)
    except (InvalidChannel, InvalidChoi) as exc:
        raise InputError(str(exc)) from exc


def _emit(text, out="-"):
    if out in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def cmd_sample(a):
    ch = sample_channel(a.d, a.dout, a.denv, SeededStream(a.seed, a.stream))
    _emit(C.dumps_channel(ch), a.out)


def cmd_builtin(a):
    try:
        ch = C.BUILTINS[a.name](a.d, a.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(C.dumps_channel(ch), a.out)


def cmd_inspect(a):
    ch = _read_channel(a.channel)
    dims = C.minimal_dims(ch)
    spectrum = nk.hermitian_eig(C.choi(ch).J).eigenvalues
    info = {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "d_env": ch.d_env,
        "d_star_out": dims.d_star_out,
        "d_star_env": dims.d_star_env,
        "rank_J": dims.rank_reports[0].rank,
        "rank_phi_id": dims.rank_reports[1].rank,
        "rank_threshold_J": dims.rank_reports[0].threshold,
        "choi_spectrum": [float(x) for x in spectrum],
        "isometry_residual": C.isometry_residual(ch.V),
    }
    _emit(json.dumps(info, indent=2), a.out)


def _detect_config(a):
    return DetectConfig(tries=a.tries, climb_steps=a.climb, seed=a.seed)


def cmd_detect(a):
    ch = _read_channel(a.channel)
    rep = detect(ch, _detect_config(a), stream=SeededStream(a.seed, 0))
    _emit(json.dumps(rep.to_dict(), indent=2), a.out)


def cmd_ic_curve(a):
    ch = _read_channel(a.channel)
    stream = SeededStream(a.seed, 0)
    rep = detect(ch, _detect_config(a), stream=stream)
    psi = rep.witness_psi
    if psi is None:
        psi = max_rank_search(ch, a.tries, stream, climb_steps=a.climb).psi
    grid = np.logspace(np.log10(a.eps_min), np.log10(a.eps_max), a.points)
    sigma = np.eye(ch.d_in, dtype=np.complex128) / ch.d_in
    curve = perturbation_curve(ch, psi, sigma, grid)
    _emit(curve.to_csv(), a.out)
    if a.json:
        _emit(json.dumps(curve.to_dict(), indent=2), a.json)


def cmd_maximize(a):
    ch = _read_channel(a.channel)
    stream = SeededStream(a.seed, 0)
    res = maximize_ic(ch, a.restarts, a.iters, stream, config=_detect_config(a))
    out = {
        "ic_lower_bound": res.value,
        "history": res.history,
        "rho": C.matrix_to_pairs(res.rho),
        "d_in": ch.d_in,
    }
    _emit(json.dumps(out, indent=2), a.out)


def cmd_mc(a):
    cfg = ExperimentConfig(
        d=a.d,
        d_out=a.dout,
        d_env=a.denv,
        n_samples=a.n,
        seed=a.seed,
        tries=a.tries,
        climb_steps=a.climb,
        output_path=a.out,
        mode=Mode(a.mode),
        restarts=a.restarts,
        iters=a.iters,
    )
    _, summary = run_campaign(cfg, threads=a.threads)
    if not a.out:
        _emit(dumps_summary(summary))


def cmd_boundary(a):
    _emit(json.dumps(boundary_check(a.d, a.n, a.seed, threads=a.threads), indent=2), a.out)


def build_parser():
    p = _Parser(prog="capdetect", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def search_flags(sp):
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--tries", type=int, default=64)
        sp.add_argument("--climb", type=int, default=200, help="hill-climbing steps")

    def dims_flags(sp):
        sp.add_argument("--d", type=int, required=True)
        sp.add_argument("--dout", type=int, required=True)
        sp.add_argument("--denv", type=int, required=True)

    sp = sub.add_parser("sample", help="emit a random channel as JSON")
    dims_flags(sp)
    sp.add_argument("--seed", type=_u64, required=True)
    sp.add_argument("--stream", type=_u64, default=0)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("builtin", help="emit a built-in channel as JSON")
    sp.add_argument("--name", choices=sorted(C.BUILTINS), required=True)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_builtin)

    sp = sub.add_parser("inspect", help="dimensions, ranks and Choi spectrum")
    sp.add_argument("channel")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("detect", help="trace-gap detection report as JSON")
    sp.add_argument("channel")
    search_flags(sp)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("ic-curve", help="coherent information along rho(eps) as CSV")
    sp.add_argument("channel")
    search_flags(sp)
    sp.add_argument("--eps-min", type=float, default=1e-6)
    sp.add_argument("--eps-max", type=float, default=1e-1)
    sp.add_argument("--points", type=int, default=48)
    sp.add_argument("--json", default=None, help="also write the full curve as JSON here")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_ic_curve)

    sp = sub.add_parser("maximize", help="lower bound on one-shot coherent information")
    sp.add_argument("channel")
    search_flags(sp)
    sp.add_argument("--restarts", type=int, default=4)
    sp.add_argument("--iters", type=int, default=100)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_maximize)

    sp = sub.add_parser("mc", help="Monte Carlo campaign")
    dims_flags(sp)
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--seed", type=_u64, required=True)
    sp.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.DETECT.value)
    sp.add_argument("--tries", type=int, default=64)
    sp.add_argument("--climb", type=int, default=200)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--iters", type=int, default=40)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default=None, help="output directory")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("boundary", help="interior fraction of random square channels")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--seed", type=_u64, default=0)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_boundary)
    return p


def _fail(code, kind, message):
    one_line = " ".join(str(message).split())
    sys.stderr.write(f"capdetect: error={kind} message={one_line}\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except InputError as exc:
        return _fail(EXIT_INPUT, "invalid_input", exc)
    except (NumericalAnomaly, RankInconsistency, ConvergenceFailure) as exc:
        return _fail(EXIT_NUMERIC, "numerical_anomaly", exc)
    except (CapDetectError, ValueError) as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except OSError as exc:
        return _fail(EXIT_INPUT, "io", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
