"""Command-line entry point: ``pdqp <command> [flags] [config-file]``.

Config files hold ``key = value`` lines (``#`` comments allowed); keys use
the long flag names without dashes (``n-min = 6``).  Flags given on the
command line override config values.  Exit codes: 0 success, 1 a
verification check failed, 2 usage or parse error.
"""

import argparse
import csv
import io
import json
import platform
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import algorithms as alg
from .circuit import load_circuit, load_function_table
from .errors import BudgetExceeded, CircuitParseError
from .exact_sim import ExactSampler, path_sum_amplitude
from .hidden_variables import dieks_joint, product_theory_joint, unitary_block_structure
from .qp_oracle import sample_histories
from .rng import DEFAULT_SEED, make_rng
from .statevector import StateVector, apply_gates
from .verify import SUITES, run_suite


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _metadata(args, extra=None):
    meta = {
        "command": args.command,
        "seed": args.seed,
        "pdqp": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    meta["config"] = {k: v for k, v in sorted(_params(args).items())}
    if extra:
        meta.update(extra)
    return meta


def _params(args):
    skip = {"command", "func", "out", "format", "config"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(args, columns, rows, summary=None):
    """CSV (header, rows, trailing ``#`` metadata block) or one JSON document."""
    meta = _metadata(args, {"summary": summary} if summary else None)
    if args.format == "json":
        doc = {"meta": meta, "rows": [dict(zip(columns, r)) for r in rows]}
        return json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    for k in sorted(meta):
        v = meta[k]
        if isinstance(v, dict):
            v = json.dumps(v, sort_keys=True, default=_json_default)
        buf.write(f"# {k}: {v}\n")
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (Fraction, Path)):
        return str(o)
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _bits(bits):
    return "".join(str(b) for b in bits)


def cmd_run(args):
    circ = load_circuit(args.circuit)
    hist = sample_histories(circ, make_rng(args.seed), args.samples)
    cols = ["trial"] + [f"v{t}" for t in range(circ.T + 1)] + ["collapse"]
    rows = [[k, *h.samples, "|".join(_bits(c) for c in h.collapse_outcomes)] for k, h in enumerate(hist)]
    emit(args, render(args, cols, rows))
    return 0


def cmd_search(args):
    modes = ["pdqp", "baseline"] if args.mode == "both" else [args.mode]
    ns = list(range(args.n_min, args.n_max + 1))
    if not ns:
        raise UsageError("empty n range")
    if args.n_max + 1 > 24:
        raise UsageError("n-max exceeds the simulator cap")
    cols = ["mode", "n", "N", "K", "R", "Q", "successes", "trials", "success_rate", "min_cost", "amp_exact", "amp_closed_form"]
    rows, summary = [], {}
    for mi, mode in enumerate(modes):
        out, slope = alg.search_scaling(ns, args.trials, make_rng(args.seed, mi), mode, args.k_mult, args.r_mult)
        rows += [[r.mode, r.n, r.N, r.K, r.R, r.Q, r.successes, r.trials, r.success_rate, r.min_cost, r.amp_exact, r.amp_closed_form] for r in out]
        summary[f"{mode}_slope"] = slope
        print(f"{mode} slope: {slope:.4f}", file=sys.stderr)
    emit(args, render(args, cols, rows, summary))
    return 0


def _load_sd_dir(path):
    """Instances from ``NAME.p0.tbl`` / ``NAME.p1.tbl`` pairs plus optional ``NAME.promise``."""
    path = Path(path)
    if not path.is_dir():
        raise UsageError(f"{path} is not a directory")
    out = []
    for p0 in sorted(path.glob("*.p0.tbl")):
        name = p0.name[: -len(".p0.tbl")]
        p1 = path / f"{name}.p1.tbl"
        if not p1.exists():
            raise UsageError(f"{p0.name} has no matching {p1.name}")
        f0 = load_function_table(p0, name="p0")
        f1 = load_function_table(p1, name="p1")
        if (f0.n, f0.m) != (f1.n, f1.m):
            raise UsageError(f"table mismatch in instance {name}: widths {f0.n}x{f0.m} vs {f1.n}x{f1.m}")
        prom = path / f"{name}.promise"
        promise = prom.read_text().strip() if prom.exists() else None
        out.append((name, alg.SDInstance(f0, f1, promise)))
    if not out:
        raise UsageError(f"no *.p0.tbl files in {path}")
    return out


def cmd_sd(args):
    if args.instance_dir:
        insts = _load_sd_dir(args.instance_dir)
    else:
        corpus = alg.sd_corpus(make_rng(args.seed, 0), args.corpus, (args.n_min, args.n_max), (args.m_min, args.m_max))
        insts = [(f"inst{k:03d}", inst) for k, inst in enumerate(corpus)]
    cols = ["instance", "n", "m", "promise", "tvd", "far", "trials", "correct"]
    rows = []
    correct = total = 0
    for k, (name, inst) in enumerate(insts):
        far = alg.sd_far_count(inst, make_rng(args.seed, 1, k), args.trials)
        good = ""
        if inst.promise:
            good = far if inst.promise == "far" else args.trials - far
            correct += good
            total += args.trials
        rows.append([name, inst.n, inst.m, inst.promise or "", alg.output_distance(inst.p0, inst.p1), far, args.trials, good])
    summary = {"accuracy": correct / total} if total else {}
    if total:
        print(f"accuracy: {correct / total:.4f}", file=sys.stderr)
    emit(args, render(args, cols, rows, summary))
    return 0


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    lines = []
    rows = []
    for name in names:
        kwargs = {"count": args.count} if args.count is not None and name not in ("hybrid",) else {}
        res = run_suite(name, args.seed, **kwargs)
        ok &= res.passed
        print(("PASS " if res.passed else "FAIL ") + res.summary(), file=sys.stderr)
        for key, val in sorted(res.notes.items()):
            print(f"  {key}: {json.dumps(val, sort_keys=True)}", file=sys.stderr)
        lines.append(res.json_lines())
        rows += [[name, r["checker"], r["instance"], r["lhs"], r["rhs"], r["holds"]] for r in res.records]
    if args.format == "json":
        emit(args, "".join(lines))
    else:
        emit(args, render(args, ["suite", "checker", "instance", "lhs", "rhs", "holds"], rows, {"passed": ok}))
    return 0 if ok else 1


def cmd_phenomena(args):
    rng = make_rng(args.seed)
    d = args.demo
    if d is None:
        raise UsageError("--demo is required")
    if d == "ftl":
        rate = alg.ftl_error_rate(args.k, rng, args.trials)
        had = alg.ftl_signal_demo("hadamard", args.k, rng, args.trials)
        miss = sum(h != "hadamard" for h in had) / args.trials
        pred = 2.0 ** (1 - args.k)
        cols = ["demo", "k", "trials", "hadamard_error", "predicted", "mixed_error", "mixed_predicted"]
        rows = [[d, args.k, args.trials, miss, pred, rate, pred / 2]]
    elif d == "one-query":
        N = args.N
        if N < 2 or N & (N - 1):
            raise UsageError("N must be a power of two >= 2")
        x = rng.integers(2, size=N)
        R = args.R or alg.coupon_samples(N, 0.01)
        rate = alg.one_query_recovery_rate(x, R, rng, args.trials)
        cols = ["demo", "N", "R", "trials", "recovery_rate", "bound"]
        rows = [[d, N, R, args.trials, rate, max(0.0, 1 - N * (1 - 1 / N) ** R)]]
    elif d == "one-qubit-comm":
        R = args.R or 1 << 12
        err = alg.one_qubit_error_rate(args.n, R, rng, args.trials)
        cols = ["demo", "n", "R", "trials", "error_rate"]
        rows = [[d, args.n, R, args.trials, err]]
    else:
        R = args.R or 10_000
        dists = [alg.clone_via_tomography(alg.haar_preparation(rng), R, rng).trace_distance for _ in range(args.states)]
        cols = ["demo", "R", "states", "mean_trace_distance", "max_trace_distance"]
        rows = [[d, R, args.states, float(np.mean(dists)), float(np.max(dists))]]
    emit(args, render(args, cols, rows))
    return 0


def cmd_exact(args):
    circ = load_circuit(args.circuit)
    if args.amplitude:
        a, b = args.amplitude
        amp = path_sum_amplitude(circ.all_gates(), circ.num_qubits, a, b)
        cols = ["in", "out", "numerator", "half_exponent", "value"]
        emit(args, render(args, cols, [[a, b, amp.numerator, amp.half_exponent, float(amp)]]))
        return 0
    dist = ExactSampler(circ).distribution()
    cols = ["history", "probability", "value"]
    rows = [[" ".join(map(str, h)), str(p), float(p)] for h, p in sorted(dist.items())]
    emit(args, render(args, cols, rows))
    return 0


def cmd_hv(args):
    circ = load_circuit(args.circuit)
    gates = circ.all_gates()
    ell = circ.num_qubits
    if not 0 <= args.initial < 1 << ell:
        raise UsageError(f"initial basis index must be in [0, {1 << ell})")
    state = StateVector.basis(ell, args.initial)
    if args.theory == "pt":
        joint = product_theory_joint(state, gates, unitary_block_structure(gates, ell))
    else:
        joint = dieks_joint(state, gates)
    if args.format == "json":
        emit(args, joint.to_json(tol=0.0) + "\n")
        return 0
    r, c = np.nonzero(joint.entries)
    rows = [[int(i), int(j), float(joint.entries[i, j])] for i, j in zip(r, c)]
    beta = apply_gates(state, gates)
    emit(args, render(args, ["i", "j", "p"], rows, {"blocks": joint.blocks.as_lists(), "dimension": beta.dim}))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _common(p):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="pdqp", description="Non-collapsing measurement simulator and verification lab")
    parser.add_argument("--version", action="version", version=f"pdqp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sample histories of a circuit file")
    p.add_argument("circuit")
    p.add_argument("config", nargs="?")
    p.add_argument("--samples", type=_positive, default=1)
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("search", help="search scaling experiment")
    p.add_argument("config", nargs="?")
    p.add_argument("--n-min", type=int, default=6)
    p.add_argument("--n-max", type=int, default=15)
    p.add_argument("--k-mult", type=float, default=1.0)
    p.add_argument("--r-mult", type=float, default=1.0)
    p.add_argument("--trials", type=_positive, default=200)
    p.add_argument("--mode", choices=["pdqp", "baseline", "both"], default="both")
    _common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sd", help="statistical difference decider")
    p.add_argument("config", nargs="?")
    p.add_argument("--instance-dir", default=None)
    p.add_argument("--corpus", type=_positive, default=200, help="generated corpus size when no directory is given")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--m-min", type=int, default=2)
    p.add_argument("--m-max", type=int, default=8)
    p.add_argument("--trials", type=_positive, default=20)
    _common(p)
    p.set_defaults(func=cmd_sd)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("config", nargs="?")
    p.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    p.add_argument("--count", type=_positive, default=None, help="instances per suite (suite default if omitted)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("phenomena", help="demonstrations")
    p.add_argument("config", nargs="?")
    p.add_argument("--demo", choices=["ftl", "one-query", "one-qubit-comm", "clone"], default=None)
    p.add_argument("--k", type=int, default=11)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--R", type=int, default=None)
    p.add_argument("--states", type=_positive, default=100)
    p.add_argument("--trials", type=_positive, default=10_000)
    _common(p)
    p.set_defaults(func=cmd_phenomena)

    p = sub.add_parser("exact", help="exact history distribution or amplitude")
    p.add_argument("circuit")
    p.add_argument("config", nargs="?")
    p.add_argument("--amplitude", type=int, nargs=2, metavar=("IN", "OUT"), default=None)
    _common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("hv", help="hidden-variable joint matrix of a circuit's unitary")
    p.add_argument("circuit")
    p.add_argument("config", nargs="?")
    p.add_argument("--theory", choices=["pt", "dieks"], default="dieks")
    p.add_argument("--initial", type=int, default=0)
    _common(p)
    p.set_defaults(func=cmd_hv)
    return parser


def read_config(path):
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(parser, argv):
    """Parse once to find the config file, then re-parse with its values as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    for k, v in cfg.items():
        if k not in known or k in ("help", "config", "circuit"):
            raise UsageError(f"unknown config key {k!r} for {args.command}")
        act = known[k]
        if act.type is not None:
            try:
                v = act.type(v)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {k!r}: {exc}") from None
        if act.choices is not None and v not in act.choices:
            raise UsageError(f"config key {k!r}: {v!r} not in {sorted(act.choices)}")
        subparser.set_defaults(**{k: v})
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (UsageError, CircuitParseError, BudgetExceeded, FileNotFoundError) as exc:
        print(f"pdqp: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"pdqp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
