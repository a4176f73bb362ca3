"""Dense state-vector simulation core.

Basis-index convention: qubit 0 is the least-significant bit of a basis
index, so on two qubits the ket ``|q1 q0> = |1 0>`` is index 2.

Gate kernels act on axis 0 of an amplitude array, so the same code evolves a
single state of shape ``(2**l,)`` or a batch of states of shape
``(2**l, k)`` (one column per state).  The batched form is what the
hidden-variable and lower-bound checkers use to build dense unitaries and to
push many oracle variants through a circuit at once.
"""

from dataclasses import dataclass
from functools import lru_cache
import math
import warnings

import numpy as np

from .errors import GateError, NormalizationError

MAX_QUBITS = 24
WARN_QUBITS = 20
NORM_TOL = 1e-10

_SQRT1_2 = 1.0 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hadamard:
    qubit: int

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def targets(self):
        return (self.qubit,)


@dataclass(frozen=True)
class PauliX:
    qubit: int

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def targets(self):
        return (self.qubit,)


@dataclass(frozen=True)
class CNot:
    control: int
    target: int

    @property
    def qubits(self):
        return (self.control, self.target)

    @property
    def targets(self):
        return (self.target,)


@dataclass(frozen=True)
class Toffoli:
    control1: int
    control2: int
    target: int

    @property
    def qubits(self):
        return (self.control1, self.control2, self.target)

    @property
    def targets(self):
        return (self.target,)


@dataclass(frozen=True)
class PhaseOracle:
    """``|y> -> (-1)^f(y) |y>`` where ``y`` is read from ``qubits`` (first = LSB)."""

    function: object
    qubits: tuple

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))

    @property
    def targets(self):
        return ()


@dataclass(frozen=True)
class XorOracle:
    """``|x>|z> -> |x>|z xor f(x)>`` with ``x`` on ``inputs`` and ``z`` on ``outputs``."""

    function: object
    inputs: tuple
    outputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def qubits(self):
        return self.inputs + self.outputs

    @property
    def targets(self):
        return self.outputs


@dataclass(frozen=True)
class ControlledPhaseOracle:
    """Phase oracle on ``oracle_qubits`` applied only when ``control`` is 1."""

    control: int
    function: object
    oracle_qubits: tuple

    def __post_init__(self):
        object.__setattr__(self, "oracle_qubits", tuple(self.oracle_qubits))

    @property
    def qubits(self):
        return (self.control,) + self.oracle_qubits

    @property
    def targets(self):
        return ()


@dataclass(frozen=True, eq=False)
class SingleQubitUnitary:
    """Arbitrary 2x2 unitary on one qubit.

    Outside the fixed gate set.  Used only as a state-preparation primitive by
    the phenomena demos (rotations, basis changes); the exact simulator and the
    text format reject it.
    """

    qubit: int
    matrix: np.ndarray
    label: str = "u"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex).reshape(2, 2)
        if not np.allclose(m.conj().T @ m, np.eye(2), atol=1e-10):
            raise GateError("matrix is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def targets(self):
        return (self.qubit,)

    def __eq__(self, other):
        return (
            isinstance(other, SingleQubitUnitary)
            and self.qubit == other.qubit
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.qubit, self.matrix.tobytes()))


def ry(qubit, angle):
    """Real rotation ``|0> -> cos(a/2)|0> + sin(a/2)|1>``."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return SingleQubitUnitary(qubit, [[c, -s], [s, c]], label=f"ry({angle!r})")


def s_dagger(qubit):
    return SingleQubitUnitary(qubit, [[1, 0], [0, -1j]], label="sdg")


def s_gate(qubit):
    return SingleQubitUnitary(qubit, [[1, 0], [0, 1j]], label="s")


PERMUTATION_GATES = (PauliX, CNot, Toffoli, XorOracle)
DIAGONAL_GATES = (PhaseOracle, ControlledPhaseOracle)


def check_gate(gate, num_qubits):
    """Raise ``GateError`` unless the gate's qubits are distinct and in range."""
    qs = gate.qubits
    for q in qs:
        if not (0 <= int(q) < num_qubits):
            raise GateError(f"{gate!r}: qubit {q} out of range for {num_qubits} qubits")
    if len(set(qs)) != len(qs):
        raise GateError(f"{gate!r}: duplicate qubit indices")
    fn = getattr(gate, "function", None)
    if fn is not None:
        if isinstance(gate, XorOracle):
            if len(gate.inputs) != fn.n or len(gate.outputs) != fn.m:
                raise GateError(
                    f"oracle {fn.name!r} is {fn.n}->{fn.m} bits but wired "
                    f"{len(gate.inputs)}->{len(gate.outputs)}"
                )
        else:
            width = len(gate.oracle_qubits if isinstance(gate, ControlledPhaseOracle) else gate.qubits)
            if width != fn.n:
                raise GateError(f"oracle {fn.name!r} takes {fn.n} bits, wired to {width}")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _indices(dim):
    idx = np.arange(dim, dtype=np.int64)
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=256)
def _register_values(qubits, dim):
    """Integer value of the register ``qubits`` (first = LSB) for every basis index."""
    idx = _indices(dim)
    val = np.zeros(dim, dtype=np.int64)
    for k, q in enumerate(qubits):
        val |= ((idx >> q) & 1) << k
    val.setflags(write=False)
    return val


def _scatter_bits(values, qubits):
    out = np.zeros_like(values)
    for k, q in enumerate(qubits):
        out |= ((values >> k) & 1) << q
    return out


def _phase_signs(fn, qubits, dim):
    vals = np.asarray(fn.table)[_register_values(tuple(qubits), dim)]
    return 1 - 2 * (vals & 1)


def gate_permutation(gate, num_qubits):
    """Index map ``src`` with ``new[i] = old[src[i]]`` for a permutation gate.

    Every permutation gate in the set is an involution, so ``src`` is also
    the forward map ``i -> gate(i)``.
    """
    dim = 1 << num_qubits
    idx = _indices(dim)
    if isinstance(gate, PauliX):
        return idx ^ (1 << gate.qubit)
    if isinstance(gate, CNot):
        return idx ^ (((idx >> gate.control) & 1) << gate.target)
    if isinstance(gate, Toffoli):
        on = ((idx >> gate.control1) & 1) & ((idx >> gate.control2) & 1)
        return idx ^ (on << gate.target)
    if isinstance(gate, XorOracle):
        x = _register_values(gate.inputs, dim)
        fx = np.asarray(gate.function.table, dtype=np.int64)[x]
        return idx ^ _scatter_bits(fx, gate.outputs)
    raise TypeError(f"{type(gate).__name__} is not a permutation gate")


def gate_diagonal(gate, num_qubits):
    """The +-1 diagonal of a phase-oracle gate."""
    dim = 1 << num_qubits
    if isinstance(gate, PhaseOracle):
        return _phase_signs(gate.function, gate.qubits, dim)
    if isinstance(gate, ControlledPhaseOracle):
        signs = _phase_signs(gate.function, gate.oracle_qubits, dim)
        ctrl = (_indices(dim) >> gate.control) & 1
        return np.where(ctrl == 1, signs, 1)
    raise TypeError(f"{type(gate).__name__} is not a diagonal gate")


def apply_gate_array(amps, gate, num_qubits):
    """Apply ``gate`` along axis 0 of ``amps``; returns a new array."""
    dim = 1 << num_qubits
    if amps.shape[0] != dim:
        raise GateError(f"array has {amps.shape[0]} rows, expected {dim}")
    check_gate(gate, num_qubits)
    batch = amps.shape[1:]
    if isinstance(gate, (Hadamard, SingleQubitUnitary)):
        q = gate.qubit
        r = amps.reshape((dim >> (q + 1), 2, 1 << q) + batch)
        a0, a1 = r[:, 0], r[:, 1]
        out = np.empty_like(r, dtype=np.result_type(amps.dtype, complex))
        if isinstance(gate, Hadamard):
            out[:, 0] = (a0 + a1) * _SQRT1_2
            out[:, 1] = (a0 - a1) * _SQRT1_2
        else:
            m = gate.matrix
            out[:, 0] = m[0, 0] * a0 + m[0, 1] * a1
            out[:, 1] = m[1, 0] * a0 + m[1, 1] * a1
        return out.reshape(amps.shape)
    if isinstance(gate, PERMUTATION_GATES):
        return amps[gate_permutation(gate, num_qubits)]
    if isinstance(gate, DIAGONAL_GATES):
        d = gate_diagonal(gate, num_qubits)
        return amps * d.reshape((dim,) + (1,) * len(batch))
    raise TypeError(f"unknown gate {gate!r}")


def gates_unitary(gates, num_qubits, columns=None):
    """Dense matrix of the product of ``gates`` (first gate applied first).

    ``columns`` restricts to a subset of columns, which keeps memory at
    ``2**l * len(columns)`` for block checks on larger registers.
    """
    dim = 1 << num_qubits
    if columns is None:
        m = np.eye(dim, dtype=complex)
    else:
        columns = np.asarray(columns, dtype=np.int64)
        m = np.zeros((dim, len(columns)), dtype=complex)
        m[columns, np.arange(len(columns))] = 1.0
    for g in gates:
        m = apply_gate_array(m, g, num_qubits)
    return m


# ---------------------------------------------------------------------------
# State vector
# ---------------------------------------------------------------------------


class StateVector:
    """Dense amplitude array over ``num_qubits`` qubits.

    Instances are treated as immutable by every function in the package;
    operations return new states.
    """

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits, amplitudes=None):
        num_qubits = int(num_qubits)
        if not (1 <= num_qubits <= MAX_QUBITS):
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
        if num_qubits > WARN_QUBITS:
            warnings.warn(f"{num_qubits}-qubit state uses {16 << num_qubits} bytes", ResourceWarning)
        dim = 1 << num_qubits
        if amplitudes is None:
            amplitudes = np.zeros(dim, dtype=complex)
            amplitudes[0] = 1.0
        else:
            amplitudes = np.asarray(amplitudes, dtype=complex)
            if amplitudes.shape != (dim,):
                raise ValueError(f"expected {dim} amplitudes, got shape {amplitudes.shape}")
        self.num_qubits = num_qubits
        self.amplitudes = amplitudes

    @classmethod
    def zero(cls, num_qubits):
        return cls(num_qubits)

    @classmethod
    def basis(cls, num_qubits, index):
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(num_qubits, amps)

    @property
    def dim(self):
        return 1 << self.num_qubits

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def copy(self):
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def check_normalized(self, tol=NORM_TOL):
        dev = abs(float(np.sum(self.probabilities())) - 1.0)
        if dev > tol:
            raise NormalizationError(f"state norm^2 deviates from 1 by {dev:.3e}")

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits}, amplitudes={self.amplitudes!r})"


def random_state(num_qubits, rng):
    """Haar-random pure state."""
    dim = 1 << num_qubits
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(num_qubits, v / np.linalg.norm(v))


def apply_gate(state, gate):
    return StateVector(state.num_qubits, apply_gate_array(state.amplitudes, gate, state.num_qubits))


def apply_gates(state, gates):
    amps = state.amplitudes
    for g in gates:
        amps = apply_gate_array(amps, g, state.num_qubits)
    return StateVector(state.num_qubits, amps)


def _outcome_bits(outcome):
    if isinstance(outcome, str):
        if any(c not in "01" for c in outcome):
            raise ValueError(f"outcome {outcome!r} is not a bit string")
        return tuple(int(c) for c in outcome)
    return tuple(int(b) for b in outcome)


def outcome_mask(num_qubits, qubits, outcome):
    """Boolean mask of basis indices whose bits on ``qubits`` equal ``outcome``."""
    qubits = tuple(int(q) for q in qubits)
    bits = _outcome_bits(outcome)
    if len(bits) != len(qubits):
        raise ValueError(f"outcome has {len(bits)} bits for {len(qubits)} qubits")
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise GateError(f"qubit {q} out of range")
    want = sum(b << k for k, b in enumerate(bits))
    return _register_values(qubits, 1 << num_qubits) == want


def marginal_probability(state, qubits, outcome):
    """Probability that measuring ``qubits`` yields ``outcome`` (``outcome[k]`` is qubit ``qubits[k]``)."""
    mask = outcome_mask(state.num_qubits, qubits, outcome)
    return float(np.sum(state.probabilities()[mask]))


def register_distribution(probs, qubits, num_qubits):
    """Distribution of the register ``qubits`` given basis probabilities ``probs``."""
    vals = _register_values(tuple(qubits), 1 << num_qubits)
    return np.bincount(vals, weights=probs, minlength=1 << len(qubits))


def sample_indices(probs, rng, size=None):
    """Inverse-CDF sampling of basis indices from a probability vector."""
    cdf = np.cumsum(probs)
    total = cdf[-1]
    u = rng.random(size) * total
    out = np.searchsorted(cdf, u, side="right")
    return np.minimum(out, len(probs) - 1)


def born_sample(state, rng):
    """Non-collapsing computational-basis read; ``state`` is left untouched."""
    state.check_normalized()
    return int(sample_indices(state.probabilities(), rng))


def collapse_measure(state, qubits, rng):
    """Projective measurement of ``qubits``.

    Returns ``(outcome, post_state)`` where ``outcome[k]`` is the bit of
    ``qubits[k]`` and ``post_state`` is the renormalized projection.
    """
    qubits = tuple(int(q) for q in qubits)
    if not qubits:
        return (), state
    for q in qubits:
        if not 0 <= q < state.num_qubits:
            raise GateError(f"qubit {q} out of range")
    if len(set(qubits)) != len(qubits):
        raise GateError("duplicate measured qubits")
    state.check_normalized()
    probs = state.probabilities()
    dist = register_distribution(probs, qubits, state.num_qubits)
    value = int(sample_indices(dist, rng))
    outcome = tuple((value >> k) & 1 for k in range(len(qubits)))
    return outcome, project(state, qubits, outcome)


def project(state, qubits, outcome):
    """Renormalized projection of ``state`` onto ``outcome`` of ``qubits``."""
    mask = outcome_mask(state.num_qubits, qubits, outcome)
    amps = np.where(mask, state.amplitudes, 0)
    nrm = np.linalg.norm(amps)
    if nrm == 0:
        raise ValueError(f"outcome {outcome} has probability zero")
    return StateVector(state.num_qubits, amps / nrm)


def inner(a, b):
    """``<a|b>``."""
    _same_dim(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def l2_distance(a, b):
    _same_dim(a, b)
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))


def trace_distance(a, b):
    """Pure-state trace distance ``sqrt(1 - |<a|b>|^2)``."""
    ov = abs(inner(a, b)) ** 2
    return math.sqrt(max(0.0, 1.0 - ov))


def _same_dim(a, b):
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")
