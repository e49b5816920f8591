"""Command-line entry point: ``ialign <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

import numpy as np

from .channel import InterferenceChannel, covariances, gen_rayleigh, sum_rate_bits
from .experiments import SweepConfig, run_sweep, write_csv
from .feasibility import check_dof
from .hardness import Graph, reduce_3col, reduce_mis
from .transceiver import (AlgoConfig, IterationTrace, TraceRecord, leakage_min_baseline, psi2,
                          run_sum_rate, run_unselfish, weighted_sum_rate)


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _one_or_many(values: List[float]):
    return values[0] if len(values) == 1 else values


def _encode(mats) -> list:
    return [[[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)] for m in mats]


def cmd_gen_channel(args) -> int:
    ch = gen_rayleigh(args.K, _one_or_many(_ints(args.M)), _one_or_many(_ints(args.N)), args.sigma2,
                      _one_or_many(_floats(args.p)), seed=args.seed)
    if args.out:
        ch.save(args.out)
    else:
        print(ch.dumps())
    return 0


def cmd_check_dof(args) -> int:
    ch = InterferenceChannel.load(args.channel)
    out = check_dof(ch, _ints(args.dof))
    print(json.dumps(out.to_dict()))
    return 0


def cmd_reduce(args) -> int:
    g = Graph.load(args.graph)
    ch = reduce_mis(g) if args.problem == "mis" else reduce_3col(g).channel
    ch.save(args.out)
    return 0


def _leakage_trace(ch: InterferenceChannel, d, iters: int, tol: float):
    alpha = np.ones(ch.K)
    const = float(np.dot(alpha, ch.N))
    trace = IterationTrace()
    prev = [None]

    def record(it, v):
        q = covariances(v)
        dq = float("nan") if prev[0] is None else float(
            np.sqrt(sum(np.linalg.norm(q[k] - prev[0][k]) ** 2 for k in range(ch.K))))
        prev[0] = q
        trace.records.append(TraceRecord(it, psi2(ch, q, alpha) + const, weighted_sum_rate(ch, q, alpha), dq))

    v, u, hist = leakage_min_baseline(ch, d, iters, tol=tol, callback=record)
    for rec, leak in zip(trace.records, hist[1::2]):
        rec.leakage = leak
    trace.converged = bool(hist and hist[-1] <= tol)
    return v, trace


def cmd_optimize(args) -> int:
    ch = InterferenceChannel.load(args.channel)
    d = _ints(args.dof) if args.dof else [1] * ch.K
    alpha = _floats(args.alpha) if args.alpha else None
    cfg = AlgoConfig(alpha=alpha, relax=args.relax, tol=args.tol, max_outer=args.max_iter,
                     extrapolate=args.extrapolate)
    if args.alg == "sum-rate":
        q, trace = run_sum_rate(ch, cfg)
        result = {"covariances": _encode(q)}
    elif args.alg == "unselfish":
        v, trace = run_unselfish(ch, d, cfg)
        q = covariances(v)
        result = {"precoders": _encode(v)}
    else:
        v, trace = _leakage_trace(ch, d, args.max_iter, args.tol)
        q = covariances(v)
        result = {"precoders": _encode(v)}
    if args.trace:
        trace.to_csv(args.trace)
    summary = {
        "alg": args.alg,
        "sum_rate_bits": sum_rate_bits(ch, q),
        "iterations": trace.records[-1].iter if trace.records else 0,
        "converged": trace.converged,
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({**summary, **result}, fh)
    print(json.dumps(summary))
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.load(args.config)
    rows = run_sweep(cfg)
    write_csv(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ialign", description="Transceiver design and DoF feasibility on MIMO "
                                                            "interference channels.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-channel", help="draw an iid Rayleigh channel")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--M", default="2", help="antennas per transmitter (one value or comma list)")
    p.add_argument("--N", default="2", help="antennas per receiver (one value or comma list)")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--p", default="1.0", help="power budget (one value or comma list)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.set_defaults(func=cmd_gen_channel)

    p = sub.add_parser("check-dof", help="decide whether a DoF tuple is achievable (at most 2 antennas)")
    p.add_argument("--channel", required=True)
    p.add_argument("--dof", required=True, help="comma list, e.g. 1,1,1")
    p.set_defaults(func=cmd_check_dof)

    p = sub.add_parser("reduce", help="build the channel encoding a graph problem")
    p.add_argument("problem", choices=["mis", "3col"])
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("optimize", help="run one transceiver design algorithm")
    p.add_argument("--channel", required=True)
    p.add_argument("--alg", choices=["sum-rate", "unselfish", "leakage"], default="sum-rate")
    p.add_argument("--dof", help="streams per user (default one each)")
    p.add_argument("--alpha", help="user weights, comma list (default all ones)")
    p.add_argument("--relax", type=float, default=1.0)
    p.add_argument("--extrapolate", action="store_true", help="safeguarded extrapolation after each sweep (sum-rate)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--trace", help="per-iteration CSV")
    p.add_argument("--out", help="JSON with the designed covariances or precoders")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="sum rate versus SNR over random channels")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
