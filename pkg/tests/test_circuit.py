import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdqp.circuit import (
    Circuit,
    ClassicalFunction,
    Step,
    format_function_table,
    load_circuit,
    load_function_table,
    parse_circuit,
    save_circuit,
    serialize_circuit,
    validate,
)
from pdqp.errors import CircuitParseError
from pdqp.rng import make_rng
from pdqp.statevector import CNot, Hadamard
from pdqp.verify import random_write_once_circuit


def test_parse_single_h():
    c = parse_circuit("qubits 1\nstep\n  h 0\n")
    assert c == Circuit(1, [Step([Hadamard(0)])])


def test_parse_with_measure():
    c = parse_circuit("qubits 2\nstep\n  h 0\n  cnot 0 1\n  measure 0\n")
    assert c.T == 1
    assert c.steps[0].gates == (Hadamard(0), CNot(0, 1))
    assert c.steps[0].measured == (0,)


@pytest.mark.parametrize(
    "text, line",
    [
        ("qubits 2\nstep\n  measure 5\n", 3),
        ("qubits 2\nstep\n  measure 0\n  h 1\n", 4),
        ("qubits 1\nstep\n  hh 0\n", 3),
        ("qubits 1\n# c\nstep\n  cnot 0\n", 4),
        ("step\n", 1),
        ("qubits 1\nstep\n  phase-oracle f 0\n", 3),
    ],
)
def test_parse_errors_have_line_numbers(text, line):
    with pytest.raises(CircuitParseError) as exc:
        parse_circuit(text)
    assert exc.value.lineno == line
    assert str(exc.value).startswith(f"line {line}:")


def test_function_tables():
    ident = load_function_table(io.StringIO("0\n1\n"))
    assert (ident.n, ident.m) == (1, 1) and list(ident.table) == [0, 1]
    conj = load_function_table(io.StringIO("00\n00\n00\n01\n"))
    assert (conj.n, conj.m) == (2, 2) and list(conj.table) == [0, 0, 0, 1]
    with pytest.raises(CircuitParseError):
        load_function_table(io.StringIO("0\n1\n1\n"))
    with pytest.raises(CircuitParseError):
        load_function_table(io.StringIO("0\n2\n"))
    with pytest.raises(CircuitParseError):
        load_function_table(io.StringIO("0\n11\n"))


def test_table_bits_are_msb_first():
    f = load_function_table(io.StringIO("00\n10\n01\n11\n"))
    assert list(f.table) == [0, 2, 1, 3]
    assert format_function_table(f).split() == ["00", "10", "01", "11"]


def test_validate_modes():
    ok = Circuit(1, [Step([Hadamard(0)], (0,))])
    assert validate(ok) == [] and validate(ok, "write-once") == []
    bad = Circuit(1, [Step([], (0,)), Step([Hadamard(0)])])
    assert validate(bad) == []
    assert validate(bad, "write-once")
    assert validate(Circuit(1, []))


def test_save_and_load_roundtrip(tmp_path):
    f = ClassicalFunction("f", 2, 1, [0, 1, 1, 0])
    text = (
        "qubits 3\n"
        "table f n=2 m=1 file=f.tbl\n"
        "step\n  h 0\n  h 1\n  xor-oracle f 0 1 -> 2\n  measure 2\n"
        "step\n  phase-oracle f 0 1\n"
        "step\n  cphase-oracle 2 f 0 1\n"
    )
    (tmp_path / "f.tbl").write_text("0\n1\n1\n0\n")
    (tmp_path / "c.circ").write_text(text)
    c = load_circuit(tmp_path / "c.circ")
    assert c.functions()["f"] == f
    assert serialize_circuit(c) == text
    save_circuit(c, tmp_path / "d.circ")
    assert load_circuit(tmp_path / "d.circ") == c


def test_canonical_form_normalizes_whitespace_and_comments():
    messy = "# header\nqubits   2\n\nstep  \n h 0   # gate\n\tcnot 0 1\n measure 0 1\n"
    canon = serialize_circuit(parse_circuit(messy))
    assert canon == "qubits 2\nstep\n  h 0\n  cnot 0 1\n  measure 0 1\n"
    assert serialize_circuit(parse_circuit(canon)) == canon


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 4), T=st.integers(1, 4))
def test_parse_serialize_roundtrip(seed, ell, T):
    c = random_write_once_circuit(make_rng(seed), ell, T)
    tables = c.functions()
    assert parse_circuit(serialize_circuit(c), tables=tables) == c
    assert validate(c, "write-once") == []
