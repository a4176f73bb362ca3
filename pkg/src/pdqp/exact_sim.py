"""Exact path-sum simulation of Hadamard/Toffoli-class circuits.

Every amplitude of a circuit built from Hadamards and classical reversible
gates is ``(sum of +-1 path weights) / 2**(h/2)`` with ``h`` the number of
Hadamards, so probabilities are ratios of integers.  The sampler below draws
collapse outcomes and non-collapsing samples one bit at a time from exact
conditional probabilities, the same way a counting oracle would be used to
simulate the sampling oracle classically.

Paths are enumerated explicitly (each Hadamard doubles the path set,
permutation gates move paths, phase oracles flip signs, recorded collapse
outcomes discard inconsistent paths) and summed into integer accumulators.
"""

from dataclasses import dataclass
from fractions import Fraction
import itertools

import numpy as np

from .circuit import require_valid
from .errors import BudgetExceeded
from .history import History, HistoryDistribution
from .statevector import (
    DIAGONAL_GATES,
    PERMUTATION_GATES,
    Hadamard,
    check_gate,
    gate_diagonal,
    gate_permutation,
)

MAX_HADAMARDS = 26
MAX_PATHS = 1 << 24


@dataclass(frozen=True)
class DyadicAmplitude:
    """Exact amplitude ``numerator / 2**(half_exponent / 2)``.

    Stored in lowest terms (the numerator is odd unless the exponent is 0 or
    1), so dataclass equality is value equality.
    """

    numerator: int
    half_exponent: int

    def __post_init__(self):
        num, k = int(self.numerator), int(self.half_exponent)
        if num == 0:
            k = 0
        while k >= 2 and num % 2 == 0:
            num //= 2
            k -= 2
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "half_exponent", k)

    def squared(self):
        """``|amplitude|^2`` as an exact fraction."""
        return Fraction(self.numerator * self.numerator, 1 << self.half_exponent)

    def __float__(self):
        return float(self.numerator) / 2.0 ** (self.half_exponent / 2)

    def __complex__(self):
        return complex(float(self))


def _supported(gate):
    return isinstance(gate, (Hadamard,) + PERMUTATION_GATES + DIAGONAL_GATES)


def count_hadamards(gates):
    return sum(isinstance(g, Hadamard) for g in gates)


class PathSum:
    """Integer path-weight accumulator for a circuit prefix.

    ``basis[k]`` carries total weight ``weights[k]`` (an exact integer);
    the true amplitude is ``weights[k] / 2**(h/2)``.
    """

    def __init__(self, basis, weights, h):
        self.basis = basis
        self.weights = weights
        self.h = h

    def amplitude(self, index):
        hit = np.flatnonzero(self.basis == index)
        num = int(self.weights[hit[0]]) if hit.size else 0
        return DyadicAmplitude(num, self.h)

    def mass(self, mask_fn=None):
        """Exact ``sum of weight^2`` over basis states passing ``mask_fn``."""
        sel = self.weights if mask_fn is None else self.weights[mask_fn(self.basis)]
        return sum(int(w) * int(w) for w in sel)


def _enumerate(num_qubits, initial, stages, max_paths):
    """Run path enumeration.

    ``stages`` is a list of ``(gates, keep)`` where ``keep`` is an optional
    predicate on basis arrays applied after the stage's gates.
    """
    basis = np.array([int(initial)], dtype=np.int64)
    sign = np.ones(1, dtype=np.int64)
    h = 0
    for gates, keep in stages:
        for g in gates:
            check_gate(g, num_qubits)
            if not _supported(g):
                raise TypeError(f"exact simulation does not support {type(g).__name__}")
            if isinstance(g, Hadamard):
                h += 1
                if h > MAX_HADAMARDS:
                    raise BudgetExceeded(f"more than {MAX_HADAMARDS} Hadamard gates")
                if 2 * basis.size > max_paths:
                    raise BudgetExceeded(f"path count would exceed {max_paths}")
                m = 1 << g.qubit
                bit = (basis >> g.qubit) & 1
                basis = np.concatenate([basis & ~m, basis | m])
                sign = np.concatenate([sign, sign * (1 - 2 * bit)])
            elif isinstance(g, PERMUTATION_GATES):
                basis = gate_permutation(g, num_qubits)[basis]
            else:
                sign = sign * gate_diagonal(g, num_qubits)[basis]
        if keep is not None:
            sel = keep(basis)
            basis, sign = basis[sel], sign[sel]
    uniq, inverse = np.unique(basis, return_inverse=True)
    weights = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(weights, inverse, sign)
    return PathSum(uniq, weights, h)


def path_sum(gates, num_qubits, initial=0, max_paths=MAX_PATHS):
    return _enumerate(num_qubits, initial, [(list(gates), None)], max_paths)


def path_sum_amplitude(gates, num_qubits, in_index, out_index, max_paths=MAX_PATHS):
    """Exact ``<out| U |in>`` for ``U`` the product of ``gates``."""
    return path_sum(gates, num_qubits, in_index, max_paths).amplitude(out_index)


def _bits_predicate(conditions):
    """Predicate on basis arrays: every ``(qubit, bit)`` in ``conditions`` holds."""
    conditions = tuple(conditions)
    if not conditions:
        return None

    def keep(basis):
        ok = np.ones(basis.shape, dtype=bool)
        for q, b in conditions:
            ok &= ((basis >> q) & 1) == b
        return ok

    return keep


class ExactSampler:
    """Exact conditional probabilities and sampling for one circuit.

    Path sums are cached per (step, collapse record of earlier steps), so
    repeated sampling only pays for enumeration once per distinct record.
    """

    def __init__(self, circuit, max_paths=MAX_PATHS):
        require_valid(circuit)
        for g in circuit.all_gates():
            if not _supported(g):
                raise TypeError(f"exact simulation does not support {type(g).__name__}")
        self.circuit = circuit
        self.max_paths = max_paths
        self._sums = {}
        self._cond = {}

    def _prior_key(self, t, record):
        key = []
        for s in range(1, t):
            for q in self.circuit.steps[s - 1].measured:
                if (s, q) not in record:
                    raise ValueError(f"collapse outcome of qubit {q} at step {s} is not recorded")
                key.append((s, q, int(record[(s, q)])))
        return tuple(key)

    def path_sum_at(self, t, record):
        """Path sum of the unnormalized step-``t`` state, postselected on earlier collapses."""
        key = (t, self._prior_key(t, record))
        ps = self._sums.get(key)
        if ps is None:
            stages = []
            for s in range(1, t + 1):
                step = self.circuit.steps[s - 1]
                conds = [(q, int(record[(s, q)])) for q in step.measured] if s < t else []
                stages.append((step.gates, _bits_predicate(conds)))
            ps = _enumerate(self.circuit.num_qubits, 0, stages, self.max_paths)
            self._sums[key] = ps
        return ps

    def conditional_bit_probability(self, record, target):
        """``P(qubit = 1)`` at step ``t`` given the record.

        Record entries for steps before ``t`` are collapse outcomes and must
        cover every measured qubit; entries at step ``t`` condition on bits of
        the step-``t`` state (collapse outcomes or already-drawn sample bits).
        """
        t, q = target
        if not 1 <= t <= self.circuit.T:
            raise ValueError(f"step {t} out of range")
        if not 0 <= q < self.circuit.num_qubits:
            raise ValueError(f"qubit {q} out of range")
        if any(s > t for s, _ in record):
            raise ValueError("record contains entries after the target step")
        same = tuple(sorted((qq, int(b)) for (s, qq), b in record.items() if s == t))
        key = (t, self._prior_key(t, record), same, q)
        p = self._cond.get(key)
        if p is None:
            ps = self.path_sum_at(t, record)
            given = _bits_predicate(same)
            den = ps.mass(given)
            if den == 0:
                raise ValueError("conditioning event has probability zero")
            num = ps.mass(_bits_predicate(same + ((q, 1),)))
            p = Fraction(num, den)
            self._cond[key] = p
        return p

    def _decisions(self, t):
        """Qubits decided at step ``t``: collapse bits, then the sample bits."""
        step = self.circuit.steps[t - 1]
        return list(step.measured), [q for q in range(self.circuit.num_qubits)]

    def sample(self, rng):
        record = {}
        samples = [0]
        collapses = []
        for t in range(1, self.circuit.T + 1):
            measured, sample_qubits = self._decisions(t)
            bits = []
            for q in measured:
                b = int(_flip(rng, self.conditional_bit_probability(record, (t, q))))
                record[(t, q)] = b
                bits.append(b)
            collapses.append(tuple(bits))
            cond = dict(record)
            v = 0
            for q in sample_qubits:
                if (t, q) in cond:
                    b = cond[(t, q)]
                else:
                    b = int(_flip(rng, self.conditional_bit_probability(cond, (t, q))))
                    cond[(t, q)] = b
                v |= b << q
            samples.append(v)
        return History(tuple(samples), tuple(collapses))

    def sample_many(self, rng, shots):
        """``shots`` independent draws; identical in law to repeated ``sample``.

        Shots sharing the same decisions so far share one conditional
        probability, so coins are flipped per group rather than per shot.
        """
        T, ell = self.circuit.T, self.circuit.num_qubits
        samples = np.zeros((shots, T + 1), dtype=np.int64)
        collapse = [[None] * T for _ in range(shots)]
        groups = [({}, np.arange(shots))]
        for t in range(1, T + 1):
            measured, sample_qubits = self._decisions(t)
            for q in measured:
                nxt = []
                for record, idx in groups:
                    ones = _flip_many(rng, self.conditional_bit_probability(record, (t, q)), idx.size)
                    for b in (0, 1):
                        sub = idx[ones == b]
                        if sub.size:
                            nxt.append(({**record, (t, q): b}, sub))
                groups = nxt
            for record, idx in groups:
                bits = tuple(record[(t, q)] for q in measured)
                for k in idx:
                    collapse[k][t - 1] = bits
            # sample bits refine the groups only within this step
            for record, idx in groups:
                sub_groups = [(dict(record), idx)]
                for q in sample_qubits:
                    nxt = []
                    for cond, sidx in sub_groups:
                        if (t, q) in cond:
                            nxt.append((cond, sidx))
                            continue
                        ones = _flip_many(rng, self.conditional_bit_probability(cond, (t, q)), sidx.size)
                        for b in (0, 1):
                            sel = sidx[ones == b]
                            if sel.size:
                                nxt.append(({**cond, (t, q): b}, sel))
                    sub_groups = nxt
                for cond, sidx in sub_groups:
                    samples[sidx, t] = sum(cond[(t, q)] << q for q in range(ell))
        return [
            History(tuple(int(v) for v in samples[k]), tuple(collapse[k]))
            for k in range(shots)
        ]

    def distribution(self):
        """Exact history distribution induced by the bitwise sampler (as fractions)."""
        out = {}
        T = self.circuit.T

        def walk(t, record, prefix, weight):
            if t > T:
                out[prefix] = out.get(prefix, 0) + weight
                return
            measured, _ = self._decisions(t)
            for bits in itertools.product((0, 1), repeat=len(measured)):
                rec = dict(record)
                w = weight
                for q, b in zip(measured, bits):
                    p1 = self.conditional_bit_probability(rec, (t, q))
                    w *= p1 if b else 1 - p1
                    if w == 0:
                        break
                    rec[(t, q)] = b
                if w == 0:
                    continue
                for v, pv in self._sample_distribution(t, rec).items():
                    walk(t + 1, rec, prefix + (v,), w * pv)

        walk(1, {}, (0,), Fraction(1))
        return out

    def _sample_distribution(self, t, record):
        ps = self.path_sum_at(t, record)
        same = [(q, int(b)) for (s, q), b in record.items() if s == t]
        keep = _bits_predicate(same)
        sel = np.ones(ps.basis.shape, dtype=bool) if keep is None else keep(ps.basis)
        den = ps.mass(keep)
        return {
            int(i): Fraction(int(w) * int(w), den)
            for i, w in zip(ps.basis[sel], ps.weights[sel])
            if w != 0
        }


def _flip(rng, p):
    """Exact Bernoulli(p) for a rational ``p``."""
    if p <= 0:
        return False
    if p >= 1:
        return True
    num, den = p.numerator, p.denominator
    if den < (1 << 62):
        return int(rng.integers(den)) < num
    nbits = den.bit_length()
    nbytes = (nbits + 7) // 8
    while True:
        u = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - nbits)
        if u < den:
            return u < num


def _flip_many(rng, p, size):
    """``size`` independent exact Bernoulli(p) draws as a 0/1 array."""
    if p <= 0:
        return np.zeros(size, dtype=np.int64)
    if p >= 1:
        return np.ones(size, dtype=np.int64)
    if p.denominator < (1 << 62):
        return (rng.integers(p.denominator, size=size) < p.numerator).astype(np.int64)
    return np.array([int(_flip(rng, p)) for _ in range(size)], dtype=np.int64)


def conditional_bit_probability(circuit, record, target):
    return ExactSampler(circuit).conditional_bit_probability(record, target)


def exact_sample_history(circuit, rng, sampler=None):
    return (sampler or ExactSampler(circuit)).sample(rng)


def exact_sample_histories(circuit, rng, shots):
    return ExactSampler(circuit).sample_many(rng, shots)


def exact_history_distribution(circuit):
    """``HistoryDistribution`` of the exact sampler, converted to floats."""
    return HistoryDistribution({k: float(v) for k, v in ExactSampler(circuit).distribution().items()})
