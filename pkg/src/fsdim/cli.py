"""Command-line interface: ``fsdim COMMAND [options]``.

Exit status is 0 on success, 1 on usage errors and 2 on data or model
errors.  Every report embeds the resolved run configuration, and the
same arguments always produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import dimension, empirical, infotheory, machine, markov, selection, sequence
from .errors import FsdimError

COMMANDS = ("gen", "analyze", "dim", "select", "agafonov", "stationary", "martingale")
ORACLE_MAX_BITS = 100_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    source: Optional[str] = None
    n: Optional[int] = None
    machines: list = field(default_factory=list)
    select: Optional[str] = None
    family: str = dimension.DEFAULT_FAMILY
    checkpoints: str = f"geometric:{empirical.DEFAULT_POINTS}"
    cluster_tol: float = empirical.DEFAULT_CLUSTER_TOL
    format: str = "json"
    oracle: bool = False
    extra: dict = field(default_factory=dict)


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "-inf" if v < 0 else ("inf" if v > 0 else "nan")
    if isinstance(v, dict):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    if isinstance(v, np.generic):
        return _finite(v.item())
    return v


def _dump(obj) -> str:
    return json.dumps(_finite(obj), indent=2, ensure_ascii=False) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--gen", metavar="KIND[:INNER]", help="generated source, e.g. diluted:champernowne")
    common.add_argument("--file", metavar="PATH", help="bit file (ASCII 0/1, or packed .bits)")
    common.add_argument("-n", type=int, metavar="BITS", help="prefix length")
    common.add_argument("--machine", action="append", default=[], metavar="PATH", help="machine spec file")
    common.add_argument("--select", metavar="STATES", help="comma-separated selecting states (overrides the file)")
    common.add_argument("--family", default=dimension.DEFAULT_FAMILY, metavar="SPEC",
                        help="chain family: blocks:K, phase:D[,K'], file:PATH joined by +")
    common.add_argument("--checkpoints", default=f"geometric:{empirical.DEFAULT_POINTS}",
                        metavar="geometric:K|list:N1,N2,...")
    common.add_argument("--cluster-tol", type=float, default=empirical.DEFAULT_CLUSTER_TOL, metavar="T")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--oracle", action="store_true", help="run brute-force cross-checks on small inputs")

    parser = _Parser(prog="fsdim", description="Finite-state dimension via fair Markov chains.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="generate bits from a source")
    p.add_argument("--out", metavar="PATH", help="write the bits to PATH (.bits packs them)")

    p = sub.add_parser("analyze", parents=[common], help="ergodic structure and empirical trace of a machine")
    p.add_argument("--trace-out", metavar="PATH", help="write the trace as JSON lines")

    sub.add_parser("dim", parents=[common], help="estimate dim_FS and Dim_FS over a chain family")

    p = sub.add_parser("select", parents=[common], help="apply a selector")
    p.add_argument("--out-selected", metavar="PATH")
    p.add_argument("--out-complement", metavar="PATH")
    p.add_argument("--lower-bound", action="store_true", help="also report the selection lower bound")

    p = sub.add_parser("agafonov", parents=[common], help="evaluate the selection inequality")
    p.add_argument("--tight-tol", type=float, default=selection.TIGHT_TOL, metavar="T")
    p.add_argument("--epsilon", type=float, default=None, metavar="EPS")
    p.add_argument("--no-lift", action="store_true", help="do not lift the family through the selector")

    p = sub.add_parser("stationary", parents=[common], help="stationary distribution of a machine's fair chain")
    p.add_argument("--method", choices=("linear_solve", "power_iteration"), default="linear_solve")

    sub.add_parser("martingale", parents=[common], help="run one or more betting machines (N accounts)")
    return parser


# --- argument resolution --------------------------------------------------------

def _source_bits(args, config):
    if args.gen and args.file:
        raise UsageError("give either --gen or --file, not both")
    if not args.gen and not args.file:
        raise UsageError("a source is required (--gen or --file)")
    src = sequence.parse_source(args.gen) if args.gen else sequence.from_file(args.file)
    n = args.n
    if n is None:
        if src.length_hint is None:
            raise UsageError("-n is required for unbounded sources")
        n = src.length_hint
    if n < 0:
        raise UsageError("-n must be nonnegative")
    config.source = str(src)
    config.n = n
    return sequence.generate(src, n)


def _machines(args, config, need=1):
    if len(args.machine) < need:
        raise UsageError("--machine is required")
    out = []
    for path in args.machine:
        m = machine.load(path)
        if args.select is not None:
            m = m.with_selecting([s for s in args.select.split(",") if s])
        out.append(m)
    config.machines = list(args.machine)
    config.select = args.select
    return out


def _schedule(args, n):
    cps = dimension.parse_schedule(args.checkpoints, n)
    return [c for c in cps if 0 < c <= n] or ([n] if n > 0 else [])


def _text_table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


# --- commands ----------------------------------------------------------------

def cmd_gen(args, config):
    bits = _source_bits(args, config)
    if args.out:
        sequence.write_bits(args.out, bits)
        config.extra["out"] = args.out
    if args.format == "text":
        return sequence.to_str(bits) + "\n"
    return _dump({"config": asdict(config), "n": int(bits.size), "bits": sequence.to_str(bits)})


def cmd_analyze(args, config):
    (m,) = _machines(args, config)[:1]
    bits = _source_bits(args, config)
    erg = machine.ergodic_analysis(m)
    cps = _schedule(args, bits.size)
    if not cps:
        raise UsageError("-n must be positive for analyze")
    trace = empirical.run_trace(m, bits, cps)
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            fh.write(trace.to_jsonl())
    if args.format == "csv":
        return trace.to_csv()
    names = m.names
    report = {
        "config": asdict(config),
        "states": list(names),
        "classes": [[names[q] for q in cls] for cls in erg.classes],
        "ergodic_sets": [[names[q] for q in cls] for cls in erg.ergodic_sets],
        "irreducible": erg.irreducible,
        "snapshots": [
            dict(s.to_record(m), conditional_entropy=infotheory.conditional_entropy(s))
            for s in trace.snapshots
        ],
        "clusters": len(empirical.cluster_set(trace, args.cluster_tol)),
    }
    if erg.irreducible:
        chain = markov.induce_chain(m, with_stationary=True)
        report["stationary"] = {names[q]: float(p) for q, p in enumerate(chain.stationary)}
        report["state_gap"] = empirical.state_gap(chain, trace)
    if args.format == "text":
        rows = [("states", len(names)), ("irreducible", erg.irreducible), ("clusters", report["clusters"])]
        if "state_gap" in report:
            rows.append(("state_gap", f"{report['state_gap']:.6f}"))
        rows.append(("H(E|Q) at n", f"{report['snapshots'][-1]['conditional_entropy']:.6f}"))
        return _text_table(rows)
    return _dump(report)


def cmd_dim(args, config):
    bits = _source_bits(args, config)
    if bits.size == 0:
        raise UsageError("-n must be positive for dim")
    cps = _schedule(args, bits.size)
    rep = dimension.family_dimension(bits, bits.size, args.family, cps, args.cluster_tol)
    out = {"config": asdict(config), **rep.to_dict()}
    if args.oracle:
        k = min(dimension.MAX_BLOCK, 8)
        be_dim, be_strong = dimension.block_entropy_dimension(bits, bits.size, k, cps)
        out["oracle"] = {"block_entropy_dim": be_dim, "block_entropy_strong_dim": be_strong, "max_block": k}
    if args.format == "csv":
        raise UsageError("csv output is only available for checkpoint traces (analyze)")
    if args.format == "text":
        rows = [("dim_est (upper bound)", f"{rep.dim_est:.6f}"),
                ("strong_dim_est (upper bound)", f"{rep.strong_dim_est:.6f}"),
                ("witness chain", rep.witness_chain),
                ("strong witness chain", rep.strong_witness_chain)]
        rows += [(e.label, f"{e.dim_upper:.6f} / {e.strong_dim_upper:.6f}") for e in rep.per_chain]
        return _text_table(rows)
    return _dump(out)


def cmd_select(args, config):
    (s,) = _machines(args, config)[:1]
    bits = _source_bits(args, config)
    sel = selection.apply_selector(s, bits)
    for path, part in ((args.out_selected, sel.selected), (args.out_complement, sel.complement)):
        if path:
            sequence.write_bits(path, part)
    out = {
        "config": asdict(config),
        "selected_length": int(sel.selected.size),
        "complement_length": int(sel.complement.size),
        "selected_head": sequence.to_str(sel.selected[:64]),
        "complement_head": sequence.to_str(sel.complement[:64]),
    }
    if machine.ergodic_analysis(s).irreducible:
        out["lambda"] = selection.lambda_of(s)
    if args.lower_bound:
        lb = selection.selection_lower_bound(s, bits, bits.size, args.family, args.cluster_tol)
        out["lower_bound"] = lb.to_dict()
    if args.format == "csv":
        raise UsageError("csv output is only available for checkpoint traces (analyze)")
    if args.format == "text":
        return _text_table([(k, v) for k, v in out.items() if k != "config"])
    return _dump(out)


def cmd_agafonov(args, config):
    (s,) = _machines(args, config)[:1]
    bits = _source_bits(args, config)
    config.extra.update(tight_tol=args.tight_tol, epsilon=args.epsilon, lift=not args.no_lift)
    rep = selection.agafonov_report(s, bits, bits.size, args.family, args.cluster_tol,
                                    args.tight_tol, args.epsilon, lift=not args.no_lift)
    if args.format == "csv":
        raise UsageError("csv output is only available for checkpoint traces (analyze)")
    if args.format == "text":
        d = rep.to_dict()
        return _text_table([(k, v) for k, v in d.items() if k != "diagnostics"])
    return _dump({"config": asdict(config), **rep.to_dict()})


def cmd_stationary(args, config):
    (m,) = _machines(args, config)[:1]
    config.extra["method"] = args.method
    pi = markov.stationary(markov.induce_chain(m), args.method)
    out = {"config": asdict(config), "stationary": {name: float(p) for name, p in zip(m.names, pi)}}
    if args.oracle:
        other = "power_iteration" if args.method == "linear_solve" else "linear_solve"
        out["oracle"] = {"method": other, "l1_gap": float(np.abs(pi - markov.stationary(m, other)).sum())}
    if args.format == "csv":
        raise UsageError("csv output is only available for checkpoint traces (analyze)")
    if args.format == "text":
        return _text_table([(name, f"{p:.12f}") for name, p in zip(m.names, pi)])
    return _dump(out)


def _direct_log2_capital(m, bits) -> float:
    cap = 1.0
    q = m.start
    for b in bits.tolist():
        beta = float(m.betting[q])
        cap *= 2.0 * (beta if b == 0 else 1.0 - beta)
        q = int(m.delta[q, b])
    return math.log2(cap) if cap > 0 else -math.inf


def cmd_martingale(args, config):
    ms = _machines(args, config)
    for path, m in zip(args.machine, ms):
        if m.betting is None:
            raise FsdimError(f"{path}: machine has no bet lines")
    bits = _source_bits(args, config)
    res = dimension.multi_account_run(ms, bits)
    cps = _schedule(args, bits.size)
    accounts = [
        {"machine": path, "final_log2_capital": t.final,
         "checkpoints": {str(c): float(t.log2_capital[c]) for c in cps}}
        for path, t in zip(args.machine, res.traces)
    ]
    out = {
        "config": asdict(config),
        "accounts": accounts,
        "best_index": res.best_index,
        "best_final_log2_capital": res.best.final,
        "total_final_log2_capital": float(res.total[-1]),
    }
    if args.oracle and bits.size <= ORACLE_MAX_BITS:
        offset = math.log2(len(ms))
        out["oracle"] = [
            {"direct_log2_capital": _direct_log2_capital(m, bits) - offset} for m in ms
        ]
    if args.format == "csv":
        raise UsageError("csv output is only available for checkpoint traces (analyze)")
    if args.format == "text":
        rows = [(a["machine"], a["final_log2_capital"]) for a in accounts]
        rows.append(("best account", res.best_index))
        return _text_table(rows)
    return _dump(out)


HANDLERS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "dim": cmd_dim,
    "select": cmd_select,
    "agafonov": cmd_agafonov,
    "stationary": cmd_stationary,
    "martingale": cmd_martingale,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = RunConfig(
            command=args.command,
            family=args.family,
            checkpoints=args.checkpoints,
            cluster_tol=args.cluster_tol,
            format=args.format,
            oracle=args.oracle,
        )
        if args.cluster_tol <= 0:
            raise UsageError("--cluster-tol must be positive")
        output = HANDLERS[args.command](args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FsdimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
