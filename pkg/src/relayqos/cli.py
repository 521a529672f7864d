"""Command-line front end: ``solve``, ``sweep`` and ``verify``.

Exit codes: 0 on success, 1 on bad arguments or unusable input, 2 when a
verification suite fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from .bounds import solve_mode
from .channel import decompose, generate_channel, read_channel_file
from .linear import QosVector
from .sweep import (METHODS, PRESETS, SweepConfig, emit_csv, eta_pattern, load_config,
                    pattern_of, preset, run_sweep)
from . import verify

EXIT_OK, EXIT_ARGS, EXIT_VERIFY = 0, 1, 2


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(f"{self.prog}: {message}")


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _build_parser():
    p = _Parser(prog="relayqos", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="allocate power on one channel")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", type=int, help="draw a random channel from this seed")
    src.add_argument("--channel-file", help="read H1 and H2 from a text file")
    s.add_argument("--trial", type=int, default=0, help="trial index for --seed")
    s.add_argument("--n-antennas", type=int, help="antennas per node (default: number of streams)")
    s.add_argument("--mode", choices=("linear", "dfe"), default="linear")
    s.add_argument("--eta", type=_float_list, required=True,
                   help="comma-separated, non-decreasing MSE targets")
    s.add_argument("--rho", type=float, default=1.0, help="noise variance")

    w = sub.add_parser("sweep", help="Monte Carlo sweep to CSV")
    w.add_argument("--preset", choices=sorted(PRESETS))
    w.add_argument("--config", help="key = value configuration file")
    w.add_argument("--n-antennas", type=int)
    w.add_argument("--k-streams", type=int)
    w.add_argument("--rho", type=_float_list)
    w.add_argument("--eta", type=_float_list, help="sweep points (scalars)")
    w.add_argument("--pattern", choices=("equal", "quarter-half"))
    w.add_argument("--trials", type=int)
    w.add_argument("--seed", type=int)
    w.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    w.add_argument("--out", help="CSV path (default: standard output)")

    v = sub.add_parser("verify", help="run the oracle cross-check suites")
    v.add_argument("--instances", type=int, default=1000)
    v.add_argument("--all", action="store_true",
                   help="also run the statistical experiments (slow)")
    return p


def _cmd_solve(args):
    qos = QosVector(args.eta)
    if args.channel_file:
        ch = read_channel_file(args.channel_file, args.rho)
    else:
        n = args.n_antennas or qos.k
        ch = generate_channel(n, n, args.rho, args.seed, args.trial)
    eigen = decompose(ch, qos.k)
    rep = solve_mode(args.mode, eigen, qos, args.rho)
    al = rep.allocation
    with np.printoptions(precision=10, linewidth=120):
        print(f"mode           {args.mode}")
        print(f"eta            {qos.eta}")
        print(f"lambda*        {al.lam}")
        print(f"A              {al.a}")
        print(f"B              {al.b}")
        print(f"stream power   {al.stream_power}")
    print(f"total power    {rep.approx_power:.12g}")
    print(f"lower bound    {rep.lower_bound:.12g}")
    print(f"relative gap   {rep.gap:.6e}")
    return EXIT_OK


def _sweep_config(args):
    if args.config:
        cfg = load_config(args.config, preset(args.preset) if args.preset else None)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = None
    kw = {}
    for key, attr in (("n_antennas", "n_antennas"), ("k_streams", "k_streams"),
                      ("trials", "trials"), ("seed", "seed"), ("out", "out_path")):
        val = getattr(args, key)
        if val is not None:
            kw[attr] = val
    if args.rho is not None:
        kw["rho_list"] = tuple(args.rho)
    if args.methods is not None:
        kw["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.eta is not None or args.pattern is not None or args.k_streams is not None:
        k = kw.get("k_streams", cfg.k_streams if cfg else None)
        if k is None:
            raise _ArgumentError("--k-streams is required without a preset")
        if args.eta is not None:
            etas = args.eta
        elif cfg is not None:
            etas = [float(q.eta[-1]) for q in cfg.eta_grid]
        else:
            raise _ArgumentError("--eta is required without a preset")
        pattern = args.pattern or pattern_of(cfg)
        kw["eta_grid"] = tuple(eta_pattern(e, k, pattern) for e in etas)
    if cfg is None:
        if "k_streams" in kw and "n_antennas" not in kw:
            kw["n_antennas"] = kw["k_streams"]
        missing = {"n_antennas", "k_streams", "rho_list", "eta_grid"} - set(kw)
        if missing:
            raise _ArgumentError(f"missing settings without a preset: {sorted(missing)}")
        return SweepConfig(**kw)
    fields = dict(cfg.__dict__)
    fields.update(kw)
    return SweepConfig(**fields)


def _cmd_sweep(args):
    cfg = _sweep_config(args)
    rows = run_sweep(cfg)
    if cfg.out_path:
        emit_csv(rows, cfg.out_path)
        print(f"wrote {len(rows)} rows to {cfg.out_path}", file=sys.stderr)
    else:
        emit_csv(rows, sys.stdout)
    return EXIT_OK


def _cmd_verify(args):
    n = args.instances
    if n < 1:
        raise _ArgumentError("--instances must be >= 1")
    small = max(1, n // 10)
    suites = [
        lambda: verify.check_constants(),
        lambda: verify.check_residuals(),
        lambda: verify.check_closed_form(instances=n),
        lambda: verify.check_rho_scaling(instances=max(1, n // 50)),
        lambda: verify.check_matrices(instances=small),
        lambda: verify.check_alternating(instances=small),
    ]
    if args.all:
        suites += [
            lambda: verify.check_bound_gap(),
            lambda: verify.check_table1(),
            lambda: verify.check_global_grid(),
            lambda: verify.check_convex_regime(),
        ]
    ok = True
    for run in suites:
        t0 = time.perf_counter()
        res = run()
        ok &= res.passed
        print(f"{res.line()} ({time.perf_counter() - t0:.1f}s)", flush=True)
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"solve": _cmd_solve, "sweep": _cmd_sweep, "verify": _cmd_verify}
        return handler[args.command](args)
    except _ArgumentError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ARGS
    except (ValueError, OSError) as exc:
        # invalid targets, infeasible dimensions, unreadable files
        print(f"relayqos: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
