import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdqp.circuit import marked_function
from pdqp.errors import GateError, NormalizationError
from pdqp.rng import make_rng
from pdqp.statevector import (
    CNot,
    ControlledPhaseOracle,
    Hadamard,
    PauliX,
    PhaseOracle,
    StateVector,
    Toffoli,
    XorOracle,
    apply_gate,
    apply_gates,
    born_sample,
    collapse_measure,
    gates_unitary,
    l2_distance,
    marginal_probability,
    random_state,
    trace_distance,
)
from pdqp.circuit import ClassicalFunction

from conftest import binomial_ok

S = 1 / math.sqrt(2)


def plus():
    return StateVector(1, [S, S])


def bell():
    return StateVector(2, [S, 0, 0, S])


def test_hadamard_on_zero():
    out = apply_gate(StateVector.zero(1), Hadamard(0))
    assert np.allclose(out.amplitudes, [S, S])


def test_cnot_control_zero_is_identity():
    out = apply_gate(StateVector.zero(2), CNot(0, 1))
    assert np.allclose(out.amplitudes, [1, 0, 0, 0])


def test_cnot_builds_bell_pair():
    # control qubit 0 in superposition, target qubit 1 in |0>
    psi = StateVector(2, [S, S, 0, 0])
    out = apply_gate(psi, CNot(0, 1))
    assert np.allclose(out.amplitudes, [S, 0, 0, S])


def test_bit_order_convention():
    # X on qubit 1 of |00> gives |10> = index 2
    out = apply_gate(StateVector.zero(2), PauliX(1))
    assert np.argmax(np.abs(out.amplitudes)) == 2
    assert born_sample(out, make_rng(0)) == 2


def test_toffoli_truth_table():
    U = gates_unitary([Toffoli(0, 1, 2)], 3)
    perm = np.argmax(np.abs(U), axis=0)
    assert list(perm) == [0, 1, 2, 7, 4, 5, 6, 3]


def test_phase_oracle_signs():
    f = marked_function(2, 3)
    U = gates_unitary([PhaseOracle(f, (0, 1))], 2)
    assert np.allclose(np.diag(U), [1, 1, 1, -1])


def test_xor_oracle_writes_function():
    f = ClassicalFunction("f", 1, 1, [1, 0])  # NOT
    psi = apply_gate(StateVector.zero(2), XorOracle(f, (0,), (1,)))
    assert np.allclose(psi.amplitudes, [0, 0, 1, 0])


def test_controlled_phase_only_when_control_set():
    f = marked_function(1, 1)
    U = gates_unitary([ControlledPhaseOracle(1, f, (0,))], 2)
    assert np.allclose(np.diag(U), [1, 1, 1, -1])


@pytest.mark.parametrize("gate", [Hadamard(2), CNot(0, 0), Toffoli(0, 1, 1), CNot(0, 5)])
def test_bad_gates_rejected(gate):
    with pytest.raises(GateError):
        apply_gate(StateVector.zero(2), gate)


def test_collapse_zero_state():
    out, post = collapse_measure(StateVector.zero(1), (0,), make_rng(1))
    assert out == (0,)
    assert np.allclose(post.amplitudes, [1, 0])


def test_collapse_empty_set_is_identity():
    psi = plus()
    out, post = collapse_measure(psi, (), make_rng(1))
    assert out == () and post is psi


def test_collapse_plus_frequencies():
    rng = make_rng(2)
    outs = [collapse_measure(plus(), (0,), rng) for _ in range(4000)]
    ones = sum(o for (o,), _ in outs)
    assert binomial_ok(ones, 4000, 0.5)
    for (o,), post in outs[:20]:
        assert np.allclose(np.abs(post.amplitudes) ** 2, [1 - o, o])


def test_collapse_bell_gives_matching_pair():
    rng = make_rng(3)
    for _ in range(50):
        (b,), post = collapse_measure(bell(), (0,), rng)
        assert np.isclose(abs(post.amplitudes[3 * b]), 1)


def test_collapse_rejects_unnormalized():
    with pytest.raises(NormalizationError):
        collapse_measure(StateVector(1, [1, 1]), (0,), make_rng(0))


def test_born_sample_plus_and_noncollapse():
    psi = plus()
    before = psi.amplitudes.copy()
    rng = make_rng(4)
    ones = sum(born_sample(psi, rng) for _ in range(4000))
    assert binomial_ok(ones, 4000, 0.5)
    assert np.array_equal(psi.amplitudes, before)


def test_born_sample_grover_state():
    # four Grover iterations on N = 64: marked frequency ~ sin^2(9 asin(1/8))
    n, marked = 6, 17
    f = marked_function(n, marked)
    z = marked_function(n, 0)
    hs = [Hadamard(q) for q in range(n)]
    gates = list(hs)
    for _ in range(4):
        gates += [PhaseOracle(f, tuple(range(n)))] + hs + [PhaseOracle(z, tuple(range(n)))] + hs
    psi = apply_gates(StateVector.zero(n), gates)
    p = math.sin(9 * math.asin(1 / 8)) ** 2
    assert abs(p - 0.816) < 1e-3
    assert abs(abs(psi.amplitudes[marked]) ** 2 - p) < 1e-10
    rng = make_rng(5)
    draws = [born_sample(psi, rng) for _ in range(5000)]
    assert binomial_ok(sum(d == marked for d in draws), 5000, p)


def test_born_frequencies_large_sample():
    psi = random_state(2, make_rng(6))
    from pdqp.statevector import sample_indices

    draws = sample_indices(psi.probabilities(), make_rng(7), 100_000)
    counts = np.bincount(draws, minlength=4)
    for c, p in zip(counts, psi.probabilities()):
        assert binomial_ok(c, 100_000, p)


def test_marginal_probability_examples():
    assert marginal_probability(bell(), (0,), "1") == pytest.approx(0.5)
    assert marginal_probability(StateVector.zero(3), (0, 1, 2), "000") == pytest.approx(1.0)
    uniform = StateVector(2, [0.5] * 4)
    assert marginal_probability(uniform, (1,), "0") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        marginal_probability(bell(), (0, 1), "1")


def test_distance_examples():
    z, o = StateVector.zero(1), StateVector.basis(1, 1)
    assert l2_distance(z, z) == 0
    assert l2_distance(z, o) == pytest.approx(math.sqrt(2))
    assert l2_distance(z, plus()) == pytest.approx(math.sqrt(2 - math.sqrt(2)))
    assert trace_distance(z, z) == 0
    assert trace_distance(z, o) == pytest.approx(1)
    assert trace_distance(z, plus()) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        l2_distance(z, StateVector.zero(2))


def test_width_cap():
    with pytest.raises(ValueError):
        StateVector.zero(25)


_gate_strategy = st.sampled_from(["h", "x", "cx", "ccx", "phase", "xor"])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kinds=st.lists(_gate_strategy, min_size=1, max_size=6))
def test_gates_preserve_norm(seed, kinds):
    rng = make_rng(seed)
    ell = 3
    psi = random_state(ell, rng)
    for k in kinds:
        q = [int(v) for v in rng.permutation(ell)]
        g = {
            "h": Hadamard(q[0]),
            "x": PauliX(q[0]),
            "cx": CNot(q[0], q[1]),
            "ccx": Toffoli(q[0], q[1], q[2]),
            "phase": PhaseOracle(ClassicalFunction("f", 2, 1, rng.integers(2, size=4)), (q[0], q[1])),
            "xor": XorOracle(ClassicalFunction("g", 2, 1, rng.integers(2, size=4)), (q[0], q[1]), (q[2],)),
        }[k]
        psi = apply_gate(psi, g)
        assert abs(psi.norm() - 1) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 4))
def test_trace_distance_below_l2(seed, ell):
    rng = make_rng(seed)
    a, b = random_state(ell, rng), random_state(ell, rng)
    assert trace_distance(a, b) <= l2_distance(a, b) + 1e-12
