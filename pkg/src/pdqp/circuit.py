"""Circuit IR ``(U_1, M_1, ..., U_T, M_T)``, truth-table functions, text format.

Text format (line oriented, ``#`` starts a comment)::

    qubits 3
    table f n=2 m=1 file=f.tbl
    step
      h 0
      h 1
      xor-oracle f 0 1 -> 2
      measure 2
    step

Gate lines: ``h q``, ``x q``, ``cnot c t``, ``toff c1 c2 t``,
``phase-oracle name q...``, ``xor-oracle name in... -> out...``,
``cphase-oracle c name q...``.  An optional ``measure q...`` must be the
last line of its step.  Table files hold ``2**n`` lines, each an ``m``-bit
binary string (most significant bit first).
"""

from dataclasses import dataclass, field
import io
import os

import numpy as np

from .errors import CircuitParseError, GateError
from .statevector import (
    CNot,
    ControlledPhaseOracle,
    Hadamard,
    PauliX,
    PhaseOracle,
    SingleQubitUnitary,
    Toffoli,
    XorOracle,
    check_gate,
)


class ClassicalFunction:
    """Truth table of ``f: {0,1}^n -> {0,1}^m``."""

    __slots__ = ("name", "n", "m", "table", "source")

    def __init__(self, name, n, m, table, source=None):
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (1 << n,):
            raise ValueError(f"table for {name!r} needs {1 << n} entries, got {table.size}")
        if table.size and (table.min() < 0 or table.max() >= (1 << m)):
            raise ValueError(f"table values for {name!r} must lie in [0, {1 << m})")
        table.setflags(write=False)
        self.name = name
        self.n = int(n)
        self.m = int(m)
        self.table = table
        self.source = source

    @classmethod
    def from_callable(cls, name, n, m, f):
        return cls(name, n, m, [f(x) for x in range(1 << n)])

    def __call__(self, x):
        return int(self.table[x])

    def __eq__(self, other):
        return (
            isinstance(other, ClassicalFunction)
            and (self.name, self.n, self.m) == (other.name, other.n, other.m)
            and np.array_equal(self.table, other.table)
        )

    def __hash__(self):
        return hash((self.name, self.n, self.m, self.table.tobytes()))

    def __repr__(self):
        return f"ClassicalFunction({self.name!r}, n={self.n}, m={self.m})"


def marked_function(n, marked, name="f"):
    """Search predicate with ``f(marked) = 1``; ``marked=None`` gives the all-zero function."""
    table = np.zeros(1 << n, dtype=np.int64)
    if marked is not None:
        table[marked] = 1
    return ClassicalFunction(name, n, 1, table)


def zero_indicator(n, name="zero"):
    """``f(y) = 1`` iff ``y = 0``; as a phase oracle it is the Grover reflection up to sign."""
    return marked_function(n, 0, name=name)


@dataclass(frozen=True)
class Step:
    gates: tuple = ()
    measured: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "measured", tuple(int(q) for q in self.measured))

    @property
    def empty(self):
        return not self.gates and not self.measured


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    steps: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def T(self):
        return len(self.steps)

    def functions(self):
        """Oracle functions referenced by the circuit, by name."""
        out = {}
        for step in self.steps:
            for g in step.gates:
                fn = getattr(g, "function", None)
                if fn is None:
                    continue
                prev = out.setdefault(fn.name, fn)
                if prev != fn:
                    raise ValueError(f"two different functions named {fn.name!r}")
        return out

    def all_gates(self):
        return [g for step in self.steps for g in step.gates]

    def has_collapse(self):
        return any(step.measured for step in self.steps)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(circuit, mode="basic"):
    """List of violation messages; empty means valid.

    ``mode="write-once"`` additionally flags any gate that modifies a qubit
    measured in an earlier step.  Controls and diagonal oracles do not modify
    their qubits.
    """
    if mode not in ("basic", "write-once"):
        raise ValueError(f"unknown validation mode {mode!r}")
    problems = []
    if circuit.num_qubits < 1:
        problems.append("circuit needs at least one qubit")
    if circuit.T < 1:
        problems.append("circuit needs at least one step (T >= 1)")
    measured_before = set()
    for t, step in enumerate(circuit.steps, start=1):
        for g in step.gates:
            try:
                check_gate(g, circuit.num_qubits)
            except GateError as exc:
                problems.append(f"step {t}: {exc}")
                continue
            if mode == "write-once":
                hit = measured_before.intersection(g.targets)
                if hit:
                    problems.append(
                        f"step {t}: {type(g).__name__} modifies previously measured qubit(s) {sorted(hit)}"
                    )
        ms = step.measured
        if len(set(ms)) != len(ms):
            problems.append(f"step {t}: duplicate measured qubits")
        bad = [q for q in ms if not 0 <= q < circuit.num_qubits]
        if bad:
            problems.append(f"step {t}: measured qubit(s) {bad} out of range")
        measured_before.update(ms)
    return problems


def require_valid(circuit, mode="basic"):
    problems = validate(circuit, mode)
    if problems:
        raise ValueError("invalid circuit: " + "; ".join(problems))
    return circuit


# ---------------------------------------------------------------------------
# Function tables
# ---------------------------------------------------------------------------


def _read_text(path_or_stream):
    if hasattr(path_or_stream, "read"):
        return path_or_stream.read(), None
    with open(path_or_stream, encoding="utf-8") as fh:
        return fh.read(), os.fspath(path_or_stream)


def load_function_table(path_or_stream, name=None, n=None, m=None):
    """Read a truth table: ``2**n`` lines of ``m``-bit binary strings."""
    text, source = _read_text(path_or_stream)
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if any(c not in "01" for c in line):
            raise CircuitParseError(f"non-binary characters in {line!r}", lineno)
        rows.append((lineno, line))
    if not rows:
        raise CircuitParseError("empty function table")
    width = len(rows[0][1])
    for lineno, line in rows:
        if len(line) != width:
            raise CircuitParseError(f"inconsistent width: expected {width} bits, got {len(line)}", lineno)
    count = len(rows)
    if n is None:
        n = count.bit_length() - 1
        if 1 << n != count:
            raise CircuitParseError(f"line count {count} is not a power of two")
    elif count != 1 << n:
        raise CircuitParseError(f"expected {1 << n} lines for n={n}, got {count}")
    if m is not None and m != width:
        raise CircuitParseError(f"expected {m}-bit entries, got {width}")
    if name is None:
        name = os.path.splitext(os.path.basename(source))[0] if source else "f"
    return ClassicalFunction(name, n, width, [int(line, 2) for _, line in rows], source=source)


def format_function_table(fn):
    return "".join(format(int(v), f"0{fn.m}b") + "\n" for v in fn.table)


def write_function_table(fn, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_function_table(fn))


# ---------------------------------------------------------------------------
# Parsing / serialization
# ---------------------------------------------------------------------------


def _ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise CircuitParseError(f"expected qubit indices, got {' '.join(tokens)!r}", lineno) from None


def _kv(token, key, lineno):
    if not token.startswith(key + "="):
        raise CircuitParseError(f"expected {key}=..., got {token!r}", lineno)
    return token[len(key) + 1:]


def parse_circuit(text, base_dir=None, tables=None):
    """Parse circuit text into a validated ``Circuit``.

    ``tables`` maps function names to ``ClassicalFunction`` objects and takes
    precedence over ``file=`` paths; relative paths resolve against
    ``base_dir``.
    """
    if hasattr(text, "read"):
        text = text.read()
    tables = dict(tables or {})
    functions = {}
    num_qubits = None
    steps = []
    gates = measured = None
    measure_line = None

    def close_step():
        if gates is not None:
            steps.append(Step(gates, measured or ()))

    def fn_ref(name, lineno):
        if name not in functions:
            raise CircuitParseError(f"unknown function {name!r}", lineno)
        return functions[name]

    def qubit_check(qs, lineno):
        for q in qs:
            if not 0 <= q < num_qubits:
                raise CircuitParseError(f"qubit index {q} out of range for {num_qubits} qubits", lineno)
        if len(set(qs)) != len(qs):
            raise CircuitParseError("duplicate qubit indices", lineno)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw, args = tok[0].lower(), tok[1:]
        if kw == "qubits":
            if num_qubits is not None:
                raise CircuitParseError("duplicate qubits header", lineno)
            if len(args) != 1:
                raise CircuitParseError("usage: qubits <count>", lineno)
            (num_qubits,) = _ints(args, lineno)
            if num_qubits < 1:
                raise CircuitParseError("need at least one qubit", lineno)
            continue
        if num_qubits is None:
            raise CircuitParseError("missing 'qubits' header before first statement", lineno)
        if kw == "table":
            if gates is not None:
                raise CircuitParseError("table declarations must precede the first step", lineno)
            if len(args) != 4:
                raise CircuitParseError("usage: table <name> n=<n> m=<m> file=<path>", lineno)
            name = args[0]
            try:
                n = int(_kv(args[1], "n", lineno))
                m = int(_kv(args[2], "m", lineno))
            except ValueError:
                raise CircuitParseError("n and m must be integers", lineno) from None
            path = _kv(args[3], "file", lineno)
            if name in functions:
                raise CircuitParseError(f"duplicate table {name!r}", lineno)
            if name in tables:
                fn = tables[name]
                if (fn.n, fn.m) != (n, m):
                    raise CircuitParseError(f"table {name!r} is {fn.n}->{fn.m}, declared {n}->{m}", lineno)
            else:
                full = path if base_dir is None or os.path.isabs(path) else os.path.join(base_dir, path)
                try:
                    fn = load_function_table(full, name=name, n=n, m=m)
                except OSError as exc:
                    raise CircuitParseError(f"cannot read table file {path!r}: {exc.strerror}", lineno) from None
                except CircuitParseError as exc:
                    raise CircuitParseError(f"table {name!r}: {exc}", lineno) from None
                fn.source = path
            functions[name] = fn
            continue
        if kw == "step":
            if args:
                raise CircuitParseError("'step' takes no arguments", lineno)
            close_step()
            gates, measured, measure_line = [], None, None
            continue
        if gates is None:
            raise CircuitParseError(f"{kw!r} outside of a step", lineno)
        if measured is not None:
            raise CircuitParseError(f"measure (line {measure_line}) must be the last line of its step", lineno)
        if kw == "measure":
            qs = _ints(args, lineno)
            if not qs:
                raise CircuitParseError("measure needs at least one qubit", lineno)
            qubit_check(qs, lineno)
            measured, measure_line = qs, lineno
            continue
        if kw in ("h", "x"):
            if len(args) != 1:
                raise CircuitParseError(f"usage: {kw} <q>", lineno)
            qs = _ints(args, lineno)
            gate = Hadamard(qs[0]) if kw == "h" else PauliX(qs[0])
        elif kw == "cnot":
            if len(args) != 2:
                raise CircuitParseError("usage: cnot <c> <t>", lineno)
            qs = _ints(args, lineno)
            gate = CNot(*qs)
        elif kw == "toff":
            if len(args) != 3:
                raise CircuitParseError("usage: toff <c1> <c2> <t>", lineno)
            qs = _ints(args, lineno)
            gate = Toffoli(*qs)
        elif kw == "phase-oracle":
            if len(args) < 2:
                raise CircuitParseError("usage: phase-oracle <name> <q...>", lineno)
            fn = fn_ref(args[0], lineno)
            qs = _ints(args[1:], lineno)
            gate = PhaseOracle(fn, qs)
        elif kw == "cphase-oracle":
            if len(args) < 3:
                raise CircuitParseError("usage: cphase-oracle <c> <name> <q...>", lineno)
            (c,) = _ints(args[:1], lineno)
            fn = fn_ref(args[1], lineno)
            qs = _ints(args[2:], lineno)
            gate = ControlledPhaseOracle(c, fn, qs)
            qs = [c] + qs
        elif kw == "xor-oracle":
            if "->" not in args or len(args) < 4:
                raise CircuitParseError("usage: xor-oracle <name> <in-q...> -> <out-q...>", lineno)
            fn = fn_ref(args[0], lineno)
            arrow = args.index("->")
            ins = _ints(args[1:arrow], lineno)
            outs = _ints(args[arrow + 1:], lineno)
            gate = XorOracle(fn, ins, outs)
            qs = ins + outs
        else:
            raise CircuitParseError(f"unknown keyword {kw!r}", lineno)
        qubit_check(qs, lineno)
        try:
            check_gate(gate, num_qubits)
        except GateError as exc:
            raise CircuitParseError(str(exc), lineno) from None
        gates.append(gate)

    if num_qubits is None:
        raise CircuitParseError("missing 'qubits' header")
    close_step()
    if not steps:
        raise CircuitParseError("circuit has no steps")
    return Circuit(num_qubits, steps)


def load_circuit(path, tables=None):
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)), tables=tables)


def _gate_line(g):
    j = lambda qs: " ".join(str(q) for q in qs)  # noqa: E731
    if isinstance(g, Hadamard):
        return f"h {g.qubit}"
    if isinstance(g, PauliX):
        return f"x {g.qubit}"
    if isinstance(g, CNot):
        return f"cnot {g.control} {g.target}"
    if isinstance(g, Toffoli):
        return f"toff {g.control1} {g.control2} {g.target}"
    if isinstance(g, PhaseOracle):
        return f"phase-oracle {g.function.name} {j(g.qubits)}"
    if isinstance(g, ControlledPhaseOracle):
        return f"cphase-oracle {g.control} {g.function.name} {j(g.oracle_qubits)}"
    if isinstance(g, XorOracle):
        return f"xor-oracle {g.function.name} {j(g.inputs)} -> {j(g.outputs)}"
    if isinstance(g, SingleQubitUnitary):
        raise ValueError("SingleQubitUnitary has no text form")
    raise TypeError(f"unknown gate {g!r}")


def serialize_circuit(circuit):
    """Canonical text form of ``circuit``."""
    out = io.StringIO()
    out.write(f"qubits {circuit.num_qubits}\n")
    for name, fn in sorted(circuit.functions().items()):
        path = fn.source or f"{name}.tbl"
        out.write(f"table {name} n={fn.n} m={fn.m} file={path}\n")
    for step in circuit.steps:
        out.write("step\n")
        for g in step.gates:
            out.write(f"  {_gate_line(g)}\n")
        if step.measured:
            out.write("  measure " + " ".join(str(q) for q in step.measured) + "\n")
    return out.getvalue()


def save_circuit(circuit, path):
    """Write ``circuit`` and the table files it references next to it."""
    base = os.path.dirname(os.path.abspath(path))
    for name, fn in circuit.functions().items():
        rel = fn.source or f"{name}.tbl"
        full = rel if os.path.isabs(rel) else os.path.join(base, rel)
        if not os.path.exists(full):
            write_function_table(fn, full)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_circuit(circuit))
