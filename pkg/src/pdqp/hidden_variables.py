"""Block structures and block-wise hidden-variable theories.

Two theories are provided, both of the form "resample Born weights inside a
block":

* product theory on a caller-supplied block structure ``B``:
  ``S_ij = |b_j|^2 / sum_{k~j} |b_k|^2`` for ``i ~ j`` and 0 otherwise, with
  joint matrix ``P_ij = |a_i|^2 S_ij``;
* Dieks theory for circuit block structure: the same formula with ``B`` the
  circuit block structure, i.e. the partition generated by the nonzero
  pattern of every individual gate.

Here ``a = psi`` and ``b = U psi``.  Dense ``N x N`` matrices are capped at
``N <= 2**12``.
"""

from dataclasses import dataclass
import json
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import BlockStructureError, BudgetExceeded
from .history import HistoryDistribution
from .statevector import (
    DIAGONAL_GATES,
    PERMUTATION_GATES,
    Hadamard,
    SingleQubitUnitary,
    StateVector,
    _register_values,
    apply_gate_array,
    check_gate,
    gate_permutation,
    gates_unitary,
)

MAX_DENSE_DIM = 1 << 12
ENTRY_TOL = 1e-12
ZERO_MASS = 1e-14
_CHUNK = 256


class BlockStructure:
    """Partition of ``[0, N)`` given by a label per index.

    Labels are canonicalized to ``0, 1, ...`` in order of first appearance,
    so two structures are equal iff they are the same partition.
    """

    __slots__ = ("labels", "_members")

    def __init__(self, labels):
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-d array")
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        canon = order[inverse].astype(np.int64)
        canon.setflags(write=False)
        self.labels = canon
        self._members = None

    @classmethod
    def trivial(cls, dimension):
        return cls(np.zeros(dimension, dtype=np.int64))

    @classmethod
    def singletons(cls, dimension):
        return cls(np.arange(dimension))

    @classmethod
    def from_function(cls, b, dimension):
        """``x ~ y`` iff ``b(x) == b(y)``."""
        return cls(np.array([b(x) for x in range(dimension)]))

    @classmethod
    def from_qubits(cls, num_qubits, qubits):
        """Partition by the values of ``qubits``; no qubits gives the trivial partition."""
        qubits = tuple(sorted(set(int(q) for q in qubits)))
        return cls(_register_values(qubits, 1 << num_qubits))

    @classmethod
    def from_blocks(cls, blocks, dimension):
        labels = np.full(dimension, -1, dtype=np.int64)
        for k, block in enumerate(blocks):
            block = np.asarray(list(block), dtype=np.int64)
            if np.any(labels[block] >= 0):
                raise ValueError("blocks overlap")
            labels[block] = k
        if np.any(labels < 0):
            raise ValueError("blocks do not cover [0, N)")
        return cls(labels)

    @property
    def dimension(self):
        return self.labels.size

    @property
    def num_blocks(self):
        return int(self.labels.max()) + 1

    def _member_lists(self):
        if self._members is None:
            order = np.argsort(self.labels, kind="stable")
            bounds = np.cumsum(np.bincount(self.labels))[:-1]
            self._members = np.split(order, bounds)
        return self._members

    def blocks(self):
        """Blocks as sorted index arrays, ordered by smallest member."""
        return list(self._member_lists())

    def members(self, i):
        return self._member_lists()[self.labels[i]]

    def same_block(self, i, j):
        return self.labels[i] == self.labels[j]

    def same_block_matrix(self):
        return self.labels[:, None] == self.labels[None, :]

    def refines(self, other):
        """True when every block of ``self`` lies inside a block of ``other``."""
        if other.dimension != self.dimension:
            return False
        first = np.full(self.num_blocks, -1, dtype=np.int64)
        first[self.labels[::-1]] = other.labels[::-1]
        return bool(np.all(first[self.labels] == other.labels))

    def as_lists(self):
        return [b.tolist() for b in self.blocks()]

    def __eq__(self, other):
        return isinstance(other, BlockStructure) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self):
        blocks = self.as_lists()
        if len(blocks) > 8:
            return f"BlockStructure(N={self.dimension}, {len(blocks)} blocks)"
        return f"BlockStructure({blocks})"


# ---------------------------------------------------------------------------
# Circuit block structure
# ---------------------------------------------------------------------------


def _gate_edges(gate, num_qubits):
    """Pairs ``(i, j)`` with ``|g_ij| > ENTRY_TOL`` (off-diagonal only)."""
    dim = 1 << num_qubits
    idx = np.arange(dim, dtype=np.int64)
    if isinstance(gate, DIAGONAL_GATES):
        return idx[:0], idx[:0]
    if isinstance(gate, PERMUTATION_GATES):
        return idx, gate_permutation(gate, num_qubits)
    if isinstance(gate, Hadamard):
        return idx, idx ^ (1 << gate.qubit)
    if isinstance(gate, SingleQubitUnitary):
        m = gate.matrix
        if abs(m[0, 1]) > ENTRY_TOL or abs(m[1, 0]) > ENTRY_TOL:
            return idx, idx ^ (1 << gate.qubit)
        return idx[:0], idx[:0]
    return _dense_edges([gate], num_qubits)


def _dense_edges(gates, num_qubits):
    """Nonzero off-diagonal pattern of the product of ``gates``, column-chunked."""
    dim = 1 << num_qubits
    rows, cols = [], []
    for start in range(0, dim, _CHUNK):
        columns = np.arange(start, min(dim, start + _CHUNK))
        m = gates_unitary(gates, num_qubits, columns)
        r, c = np.nonzero(np.abs(m) > ENTRY_TOL)
        rows.append(r)
        cols.append(columns[c])
    return np.concatenate(rows), np.concatenate(cols)


def _components(dim, rows, cols):
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(dim, dim))
    _, labels = connected_components(graph, directed=False)
    return BlockStructure(labels)


def circuit_block_structure(gates, num_qubits):
    """Finest partition that every individual gate respects."""
    dim = 1 << num_qubits
    if dim > MAX_DENSE_DIM:
        raise BudgetExceeded(f"dimension {dim} exceeds {MAX_DENSE_DIM}")
    rows, cols = [np.empty(0, dtype=np.int64)], [np.empty(0, dtype=np.int64)]
    for g in gates:
        check_gate(g, num_qubits)
        r, c = _gate_edges(g, num_qubits)
        rows.append(r)
        cols.append(c)
    return _components(dim, np.concatenate(rows), np.concatenate(cols))


def unitary_block_structure(gates, num_qubits):
    """Finest partition respected by the composed unitary (always refines the circuit one)."""
    dim = 1 << num_qubits
    if dim > MAX_DENSE_DIM:
        raise BudgetExceeded(f"dimension {dim} exceeds {MAX_DENSE_DIM}")
    return _components(dim, *_dense_edges(gates, num_qubits))


def cross_block_leakage(gates, num_qubits, blocks):
    """Largest ``|U_ij|`` with ``i``, ``j`` in different blocks."""
    dim = 1 << num_qubits
    worst = 0.0
    for start in range(0, dim, _CHUNK):
        columns = np.arange(start, min(dim, start + _CHUNK))
        m = gates_unitary(gates, num_qubits, columns)
        cross = blocks.labels[:, None] != blocks.labels[columns][None, :]
        if cross.any():
            worst = max(worst, float(np.abs(m[cross]).max()))
    return worst


def check_respects(gates, num_qubits, blocks, where="unitary", tol=ENTRY_TOL):
    leak = cross_block_leakage(gates, num_qubits, blocks)
    if leak > tol:
        raise BlockStructureError(f"{where} connects different blocks (|U_ij| = {leak:.3e})")


def check_refinement_chain(blocks):
    for t in range(1, len(blocks)):
        if not blocks[t].refines(blocks[t - 1]):
            raise BlockStructureError(f"B_{t + 1} does not refine B_{t}")


# ---------------------------------------------------------------------------
# Product theory / Dieks theory
# ---------------------------------------------------------------------------


@dataclass
class StochasticMatrix:
    matrix: np.ndarray
    blocks: BlockStructure

    def row_errors(self):
        return np.abs(self.matrix.sum(axis=1) - 1.0)


@dataclass
class JointProbabilityMatrix:
    entries: np.ndarray
    blocks: BlockStructure = None

    @property
    def dimension(self):
        return self.entries.shape[0]

    def to_json(self, tol=0.0):
        """``{dimension, blocks, entries: [[i, j, p], ...]}`` with entries above ``tol``."""
        r, c = np.nonzero(np.abs(self.entries) > tol)
        return json.dumps(
            {
                "dimension": self.dimension,
                "blocks": self.blocks.as_lists() if self.blocks is not None else None,
                "entries": [[int(i), int(j), float(self.entries[i, j])] for i, j in zip(r, c)],
            },
            sort_keys=True,
        )


def block_transition_weights(beta_sq, blocks):
    """``w_j = |b_j|^2 / (mass of j's block)``; zero-mass blocks get uniform weights."""
    beta_sq = np.asarray(beta_sq, dtype=float)
    mass = np.bincount(blocks.labels, weights=beta_sq)
    sizes = np.bincount(blocks.labels)
    m = mass[blocks.labels]
    empty = m < ZERO_MASS
    safe = np.where(empty, 1.0, m)
    return np.where(empty, 1.0 / sizes[blocks.labels], beta_sq / safe)


def _evolve(state, gates):
    amps = state.amplitudes
    for g in gates:
        amps = apply_gate_array(amps, g, state.num_qubits)
    return amps


def _dense_guard(dim):
    if dim > MAX_DENSE_DIM:
        raise BudgetExceeded(f"dense {dim}x{dim} matrix exceeds cap {MAX_DENSE_DIM}")


def product_theory_stochastic(state, gates, blocks, check=True):
    """Product-theory transition matrix for ``psi -> U psi`` on ``blocks``."""
    _dense_guard(state.dim)
    if blocks.dimension != state.dim:
        raise ValueError("block structure dimension does not match the state")
    if check:
        check_respects(gates, state.num_qubits, blocks)
    beta = _evolve(state, gates)
    w = block_transition_weights(np.abs(beta) ** 2, blocks)
    return StochasticMatrix(np.where(blocks.same_block_matrix(), w[None, :], 0.0), blocks)


def product_theory_joint(state, gates, blocks, check=True):
    s = product_theory_stochastic(state, gates, blocks, check=check)
    alpha_sq = state.probabilities()
    return JointProbabilityMatrix(alpha_sq[:, None] * s.matrix, blocks)


def dieks_joint(state, gates, blocks=None):
    """Dieks theory for circuit block structure.

    ``blocks`` defaults to ``circuit_block_structure(gates)``; passing it
    explicitly avoids recomputing it for families of circuits known to share
    it (for example oracle variants differing only in diagonal gates).
    """
    if blocks is None:
        blocks = circuit_block_structure(gates, state.num_qubits)
    # the composed unitary always refines the circuit block structure
    return product_theory_joint(state, gates, blocks, check=False)


@dataclass
class HVReport:
    row_error: float
    col_error: float
    leakage: float

    def ok(self, tol=1e-10):
        return max(self.row_error, self.col_error, self.leakage) <= tol


def validate_hv_matrix(P, alpha, beta, blocks=None):
    """Marginal-identity and block-leakage errors of a joint probability matrix."""
    entries = P.entries if isinstance(P, JointProbabilityMatrix) else np.asarray(P, dtype=float)
    if blocks is None and isinstance(P, JointProbabilityMatrix):
        blocks = P.blocks
    a = np.abs(getattr(alpha, "amplitudes", alpha)) ** 2
    b = np.abs(getattr(beta, "amplitudes", beta)) ** 2
    if entries.shape != (a.size, b.size):
        raise ValueError("matrix shape does not match amplitude arrays")
    row = float(np.max(np.abs(entries.sum(axis=1) - a)))
    col = float(np.max(np.abs(entries.sum(axis=0) - b)))
    leak = 0.0
    if blocks is not None:
        cross = ~blocks.same_block_matrix()
        if cross.any():
            leak = float(np.max(np.abs(entries[cross])))
    return HVReport(row, col, leak)


@dataclass
class ContinuityCheck:
    lhs: float
    bound: float
    holds: bool
    eps: float
    input_distance: float
    output_distance: float


def trace_norm_pure(a, b):
    """Trace norm ``|| |a><a| - |b><b| ||_1 = 2 sqrt(1 - |<a|b>|^2)``."""
    ov = abs(np.vdot(a, b)) ** 2
    return 2.0 * math.sqrt(max(0.0, 1.0 - ov))


def dieks_continuity_check(psi, psi_x, gates, gates_x, eps=None):
    """Check ``|P(psi, C) - P(psi_x, C_x)|_1 <= 3 eps`` for Dieks theory.

    ``eps`` bounds the trace norm of both the input pair and the output pair;
    when omitted it is taken as the larger of the two measured distances.
    """
    ell = psi.num_qubits
    blocks = circuit_block_structure(gates, ell)
    if circuit_block_structure(gates_x, ell) != blocks:
        raise BlockStructureError("circuits have different circuit block structures")
    out = _evolve(psi, gates)
    out_x = _evolve(psi_x, gates_x)
    d_in = trace_norm_pure(psi.amplitudes, psi_x.amplitudes)
    d_out = trace_norm_pure(out, out_x)
    if eps is None:
        eps = max(d_in, d_out)
    elif max(d_in, d_out) > eps + 1e-12:
        raise ValueError(f"hypothesis violated: input distance {d_in:.3e}, output distance {d_out:.3e} > eps {eps:.3e}")
    p = dieks_joint(psi, gates, blocks).entries
    px = dieks_joint(psi_x, gates_x, blocks).entries
    lhs = float(np.abs(p - px).sum())
    bound = 3.0 * eps
    return ContinuityCheck(lhs, bound, lhs <= bound + 1e-9, eps, d_in, d_out)


# ---------------------------------------------------------------------------
# History distribution of the block-structured oracle
# ---------------------------------------------------------------------------


def history_distribution_pt(unitaries, blocks, initial=0, budget=1 << 21, check=True):
    """Exact product-theory history distribution over ``(v_0, ..., v_T)``."""
    if len(unitaries) != len(blocks) or not blocks:
        raise ValueError("need one block structure per unitary")
    dim = blocks[0].dimension
    ell = dim.bit_length() - 1
    if check:
        check_refinement_chain(blocks)
        for t, (gates, b) in enumerate(zip(unitaries, blocks), start=1):
            check_respects(gates, ell, b, where=f"U_{t}")
    state = StateVector.zero(ell)
    amps = state.amplitudes
    partial = {(int(initial),): 1.0}
    for gates, b in zip(unitaries, blocks):
        for g in gates:
            amps = apply_gate_array(amps, g, ell)
        w = block_transition_weights(np.abs(amps) ** 2, b)
        nxt = {}
        for hist, p in partial.items():
            members = b.members(hist[-1])
            for j in members[w[members] > 0]:
                nxt[hist + (int(j),)] = p * float(w[j])
        if len(nxt) > budget:
            raise BudgetExceeded(f"{len(nxt)} histories exceed budget {budget}")
        partial = nxt
    return HistoryDistribution(partial)
