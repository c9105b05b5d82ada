"""Command line interface: verify, search, scan, wieferich, bounds, count-pairs.

Exit codes: 0 success (and no quadruple), 2 a quadruple was found,
1 error or invalid usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bounds import DEFAULT_PRECISION, reduce_fixpoint
from .campaign import VARIANTS, CampaignError, count_pairs, run_campaign
from .ntcore import PrimePair, is_prime
from .primes import sieve_primes
from .search import ConstantInapplicable, search_pair
from .tuples import (
    TupleError,
    VerificationFailure,
    check_divisor_bounds,
    check_min_coincide,
    check_mod4_pattern,
    check_nondivisibility,
    classify_table_case,
    verify_tuple,
)
from .wieferich import profile, valuations

log = logging.getLogger("pqquad")

EXIT_OK, EXIT_ERROR, EXIT_FOUND = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _prime(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if not is_prime(n):
        raise argparse.ArgumentTypeError(f"{n} is not prime")
    return n


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if n < 1:
        raise argparse.ArgumentTypeError(f"{n} must be positive")
    return n


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated integer list")


def _pair(p: int, q: int) -> PrimePair:
    if p == q:
        raise UsageError("p and q must be distinct")
    return PrimePair(min(p, q), max(p, q))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision-bits", type=_positive, default=argparse.SUPPRESS,
                        help=f"minimum working precision (default {DEFAULT_PRECISION})")
    common.add_argument("--format", choices=("json", "jsonl", "human"), default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress diagnostics on stderr")

    parser = _Parser(prog="pqquad", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common], help="certify an S-Diophantine tuple")
    v.add_argument("--primes", type=_int_list, required=True, help="p,q")
    v.add_argument("--tuple", type=_int_list, required=True, help="ascending entries, 2 to 4 of them")

    s = sub.add_parser("search", parents=[common], help="search one prime pair for quadruples")
    s.add_argument("--p", type=_prime, required=True)
    s.add_argument("--q", type=_prime, required=True)
    s.add_argument("--override-c0", type=float, default=None,
                   help="initial bound on log d (needed when p = q = 1 mod 4)")

    c = sub.add_parser("scan", parents=[common], help="run a prime-pair campaign")
    c.add_argument("--variant", choices=sorted(VARIANTS), required=True)
    c.add_argument("--workers", type=_positive, default=1)
    c.add_argument("--checkpoint", type=Path, default=None)
    c.add_argument("--out", type=Path, default=None)
    c.add_argument("--sample-every", type=_positive, default=1)
    c.add_argument("--block-size", type=_positive, default=1 << 20)
    c.add_argument("--count-only", action="store_true",
                   help="count pairs passing the filter without searching")

    w = sub.add_parser("wieferich", parents=[common], help="Wieferich profiles of prime pairs")
    w.add_argument("--p", type=_prime, default=None)
    w.add_argument("--q", type=_prime, default=None)
    w.add_argument("--p-max", type=_positive, default=None, help="scan all pairs p < q with p <= P_MAX")
    w.add_argument("--q-max", type=_positive, default=None, help="... and q <= Q_MAX")
    w.add_argument("--only-ordinary", action="store_true")
    w.add_argument("--only-extreme", action="store_true")

    b = sub.add_parser("bounds", parents=[common], help="trace the bound reduction for a pair")
    b.add_argument("--p", type=_prime, required=True)
    b.add_argument("--q", type=_prime, required=True)

    n = sub.add_parser("count-pairs", parents=[common], help="count the pairs of a campaign")
    n.add_argument("--variant", choices=sorted(VARIANTS), required=True)
    return parser


# -- output ----------------------------------------------------------------

def _emit(obj, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(obj, indent=2))
    else:
        print(json.dumps(obj))


def _trace_table(trace) -> str:
    rows = [f"{'iter':>4}  {'C':>14}  {'C1':>10}  {'delta':>12}"]
    for s in trace:
        rows.append(f"{s.iteration:>4}  {s.C:>14.4f}  {s.C1:>10.4f}  {s.delta:>12.6g}")
    return "\n".join(rows)


# -- commands --------------------------------------------------------------

def cmd_verify(args) -> int:
    if len(args.primes) != 2:
        raise UsageError("--primes takes exactly two primes")
    for x in args.primes:
        if not is_prime(x):
            raise UsageError(f"{x} is not prime")
    pair = _pair(*args.primes)
    try:
        t = verify_tuple(args.tuple, pair)
    except VerificationFailure as e:
        out = {"certified": False, "entries": args.tuple, "p": pair.p, "q": pair.q,
               "failure": {"i": e.i, "j": e.j, "value": e.value}}
    except TupleError as e:
        raise UsageError(str(e))
    else:
        out = {"certified": True, **t.to_dict()}
        if len(t.entries) == 3:
            out["nondivisibility"] = check_nondivisibility(t)
        if len(t.entries) == 4:
            m = t.matrix
            out["matrix"] = {"alphas": list(m.alphas), "betas": list(m.betas)}
            out["min_coincide"] = check_min_coincide(m)
            out["divisor_bounds"] = check_divisor_bounds(t)
            if pair.p == 2 or pair.p % 4 == 3:
                out["mod4_pattern"] = check_mod4_pattern(m, pair)
                out["table_case"] = classify_table_case(m, pair)
    if args.format == "human":
        status = "certified" if out["certified"] else f"not certified ({out['failure']['value']} is not an S-unit)"
        print(f"{tuple(args.tuple)} over {{{pair.p},{pair.q}}}: {status}")
        for k, e in zip(("s%d" % i for i in range(1, 7)), out.get("exponents", [])):
            print(f"  {k} = {pair.p}^{e[0]} * {pair.q}^{e[1]}")
    else:
        _emit(out, args.format)
    return EXIT_OK


def cmd_search(args) -> int:
    pair = _pair(args.p, args.q)
    try:
        report = search_pair(pair, c0_override=args.override_c0, prec=args.precision_bits)
    except ConstantInapplicable as e:
        raise UsageError(str(e))
    if args.format == "human":
        r = report.to_record()
        print(f"pair ({pair.p}, {pair.q}): u_p={r['u_p']} u_q={r['u_q']} C0={r['c0']:.3f}")
        print(_trace_table(report.bound_state.trace))
        print(f"triples: {r['triples_count']}  quadruples: {r['quadruples']}  ({r['millis']} ms)")
    else:
        _emit(report.to_dict(), args.format)
    return EXIT_FOUND if report.quadruples else EXIT_OK


def cmd_scan(args) -> int:
    criteria = VARIANTS[args.variant]

    def progress(state):
        if not args.quiet:
            log.info("block %d/%d  passed=%d searched=%d quadruples=%d",
                     state.cursor_block, state.blocks_total, state.pairs_passed,
                     state.pairs_searched, state.quadruples_found)

    try:
        state = run_campaign(
            criteria,
            workers=args.workers,
            checkpoint_path=args.checkpoint,
            output_path=None if args.count_only else args.out,
            block_size=args.block_size,
            sample_every=args.sample_every,
            search=not args.count_only,
            progress=progress,
        )
    except (CampaignError, OSError) as e:
        raise UsageError(str(e))
    out = {"variant": args.variant, "total_pairs": state.total_pairs,
           "sample_every": state.sample_every, **state.counts,
           "finished": state.finished, "out": state.output_path}
    if args.format == "human":
        for k, v in out.items():
            print(f"{k:>18}: {v}")
    else:
        _emit(out, args.format)
    return EXIT_FOUND if state.quadruples_found else EXIT_OK


def cmd_wieferich(args) -> int:
    if args.p is not None and args.q is not None:
        pairs = [_pair(args.p, args.q)]
    elif args.p_max is not None and args.q_max is not None:
        primes = sieve_primes(max(args.q_max, 2)).primes.tolist()
        pairs = (PrimePair(p, q) for p in primes if p <= args.p_max
                 for q in primes if p < q <= args.q_max)
    else:
        raise UsageError("give --p and --q, or --p-max and --q-max")
    for pair in pairs:
        if args.only_ordinary or args.only_extreme:
            u_p, u_q = valuations(pair)
            if u_p < 2 or u_q < 2:
                continue
        prof = profile(pair)
        if args.only_extreme and not prof.extreme:
            continue
        if args.format == "human":
            kind = "extreme" if prof.extreme else "ordinary" if prof.ordinary else "-"
            print(f"({pair.p}, {pair.q}) u_p={prof.u_p} u_q={prof.u_q} "
                  f"ord_p(q)={prof.ord_p_of_q} ord_q(p)={prof.ord_q_of_p} {kind}")
        else:
            print(json.dumps(prof.to_dict()))
    return EXIT_OK


def cmd_bounds(args) -> int:
    pair = _pair(args.p, args.q)
    u_p, u_q = valuations(pair)
    state = reduce_fixpoint(pair, u_p, u_q, prec=args.precision_bits)
    if args.format == "human":
        print(f"pair ({pair.p}, {pair.q}): u_p={u_p} u_q={u_q} C0={float(state.C0):.3f}")
        print(_trace_table(state.trace))
        print(f"final C={float(state.C):.4f} C1={float(state.C1):.4f}")
    else:
        for s in state.trace:
            print(json.dumps({"p": pair.p, "q": pair.q, **vars(s)}))
    return EXIT_OK


def cmd_count_pairs(args) -> int:
    n = count_pairs(VARIANTS[args.variant])
    if args.format == "human":
        print(f"{args.variant}: {n} pairs")
    else:
        print(n)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "search": cmd_search,
    "scan": cmd_scan,
    "wieferich": cmd_wieferich,
    "bounds": cmd_bounds,
    "count-pairs": cmd_count_pairs,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help, --version and parse errors
        return e.code if isinstance(e.code, int) else EXIT_ERROR
    args.precision_bits = max(getattr(args, "precision_bits", DEFAULT_PRECISION), 53)
    args.quiet = getattr(args, "quiet", False)
    args.format = getattr(args, "format", "json")
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as e:
        print(f"pqquad {args.command}: error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(dispatch())
