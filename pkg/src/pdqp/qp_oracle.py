"""The non-collapsing sampling oracle and its block-structured variant.

``sample_history`` runs ``psi_0 = |0...0>`` through the steps of a circuit:
apply ``U_t``, perform the collapsing measurement ``M_t``, then draw the
non-collapsing sample ``v_t`` from the resulting state.  ``v_0`` is drawn
from ``psi_0`` and is therefore always 0.

``sample_history_blocks`` is the alternative oracle driven by unitaries plus
a refinement chain of block structures; ``to_block_form`` converts a
write-once circuit into that form.
"""

import math

import numpy as np

from .circuit import require_valid, validate
from .errors import BudgetExceeded
from .hidden_variables import (
    BlockStructure,
    block_transition_weights,
    check_refinement_chain,
    check_respects,
)
from .history import History, HistoryDistribution
from .statevector import (
    NORM_TOL,
    apply_gate_array,
    outcome_mask,
    register_distribution,
    sample_indices,
)

DEFAULT_BUDGET = 1 << 21
_SUPPORT_CUTOFF = 1e-24


def _check_norm(probs):
    dev = abs(float(np.sum(probs)) - 1.0)
    if dev > NORM_TOL:
        raise ValueError(f"state norm^2 deviates from 1 by {dev:.3e}")


def _value_to_bits(value, width):
    return tuple((int(value) >> k) & 1 for k in range(width))


def sample_histories(circuit, rng, shots):
    """Draw ``shots`` independent histories; the batched form of ``sample_history``.

    Shots that share a collapse record share one state vector, so circuits
    without collapsing measurements are simulated once regardless of
    ``shots``.  Runs of empty steps are sampled in one vectorized draw.
    """
    require_valid(circuit)
    ell, T = circuit.num_qubits, circuit.T
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    samples = np.zeros((shots, T + 1), dtype=np.int64)
    collapse = np.full((shots, T), -1, dtype=np.int64)
    amps0 = np.zeros(1 << ell, dtype=complex)
    amps0[0] = 1.0
    # groups: (amplitudes, probabilities, shot indices)
    groups = [(amps0, None, np.arange(shots))]
    probs0 = np.abs(amps0) ** 2
    samples[:, 0] = sample_indices(probs0, rng, shots)

    t = 1
    while t <= T:
        step = circuit.steps[t - 1]
        if step.empty:
            run = 1
            while t + run <= T and circuit.steps[t + run - 1].empty:
                run += 1
            for i, (amps, probs, idx) in enumerate(groups):
                if probs is None:
                    probs = np.abs(amps) ** 2
                    groups[i] = (amps, probs, idx)
                draws = sample_indices(probs, rng, len(idx) * run).reshape(len(idx), run)
                samples[idx, t:t + run] = draws
            t += run
            continue
        new_groups = []
        for amps, _, idx in groups:
            for g in step.gates:
                amps = apply_gate_array(amps, g, ell)
            probs = np.abs(amps) ** 2
            _check_norm(probs)
            if not step.measured:
                new_groups.append((amps, probs, idx))
                continue
            dist = register_distribution(probs, step.measured, ell)
            values = sample_indices(dist, rng, len(idx))
            collapse[idx, t - 1] = values
            for value in np.unique(values):
                sub = idx[values == value]
                mask = outcome_mask(ell, step.measured, _value_to_bits(value, len(step.measured)))
                projected = np.where(mask, amps, 0)
                projected = projected / np.linalg.norm(projected)
                new_groups.append((projected, np.abs(projected) ** 2, sub))
        groups = new_groups
        for amps, probs, idx in groups:
            samples[idx, t] = sample_indices(probs, rng, len(idx))
        t += 1

    widths = [len(s.measured) for s in circuit.steps]
    out = []
    for k in range(shots):
        rec = tuple(
            _value_to_bits(collapse[k, j], widths[j]) if widths[j] else ()
            for j in range(T)
        )
        out.append(History(tuple(int(v) for v in samples[k]), rec))
    return out


def sample_history(circuit, rng):
    """One draw of ``(v_0, ..., v_T)`` from the oracle."""
    return sample_histories(circuit, rng, 1)[0]


def collapse_branches(circuit, budget=DEFAULT_BUDGET):
    """Enumerate collapse records with their probabilities.

    Returns a list of ``(record, probability, step_probs)`` where
    ``step_probs[t]`` is the Born distribution of ``psi_t`` on that branch
    (``t = 0..T``).
    """
    require_valid(circuit)
    ell = circuit.num_qubits
    amps0 = np.zeros(1 << ell, dtype=complex)
    amps0[0] = 1.0
    branches = [((), 1.0, amps0, [np.abs(amps0) ** 2])]
    for step in circuit.steps:
        nxt = []
        for rec, p, amps, dists in branches:
            for g in step.gates:
                amps = apply_gate_array(amps, g, ell)
            probs = np.abs(amps) ** 2
            if not step.measured:
                nxt.append((rec + ((),), p, amps, dists + [probs]))
                continue
            dist = register_distribution(probs, step.measured, ell)
            for value in np.flatnonzero(dist > _SUPPORT_CUTOFF):
                bits = _value_to_bits(value, len(step.measured))
                mask = outcome_mask(ell, step.measured, bits)
                projected = np.where(mask, amps, 0) / math.sqrt(dist[value])
                nxt.append((rec + (bits,), p * float(dist[value]), projected, dists + [np.abs(projected) ** 2]))
        if len(nxt) > budget:
            raise BudgetExceeded(f"{len(nxt)} collapse branches exceed budget {budget}")
        branches = nxt
    return [(rec, p, dists) for rec, p, _, dists in branches]


def product_support(dists, weight, budget, key_suffix=()):
    """Expand a product of independent distributions into ``{tuple: prob}``."""
    supports = [np.flatnonzero(d > _SUPPORT_CUTOFF) for d in dists]
    size = math.prod(len(s) for s in supports)
    if size > budget:
        raise BudgetExceeded(f"{size} history tuples exceed budget {budget}")
    keys = [()]
    vals = np.array([weight])
    for d, s in zip(dists, supports):
        keys = [k + (int(j),) for k in keys for j in s]
        vals = np.multiply.outer(vals, d[s]).ravel()
    if key_suffix:
        keys = [(k, key_suffix) for k in keys]
    return zip(keys, vals.tolist())


def history_distribution_exact(circuit, budget=DEFAULT_BUDGET, with_collapse=False):
    """Exact distribution of ``(v_0, ..., v_T)`` by enumerating collapse branches.

    With ``with_collapse=True`` the keys are ``(samples, collapse_record)``.
    """
    out = {}
    used = 0
    for rec, p, dists in collapse_branches(circuit, budget):
        terms = product_support(dists, p, budget - used, rec if with_collapse else ())
        for k, v in terms:
            out[k] = out.get(k, 0.0) + v
            used += 1
    return HistoryDistribution(out)


# ---------------------------------------------------------------------------
# Block-structured oracle
# ---------------------------------------------------------------------------


def to_block_form(circuit):
    """Keep each ``U_t``; ``B_t`` is the partition induced by ``M_1..M_{t-1}``.

    Requires the write-once discipline so that every ``U_t`` respects ``B_t``.
    """
    problems = validate(circuit, "write-once")
    if problems:
        raise ValueError("block conversion needs a write-once circuit: " + "; ".join(problems))
    ell = circuit.num_qubits
    unitaries, blocks = [], []
    seen = []
    for step in circuit.steps:
        unitaries.append(list(step.gates))
        blocks.append(BlockStructure.from_qubits(ell, seen))
        seen = sorted(set(seen) | set(step.measured))
    return unitaries, blocks


def _prepare_block_chain(unitaries, blocks, num_qubits, check):
    if len(unitaries) != len(blocks):
        raise ValueError("need one block structure per unitary")
    if not unitaries:
        raise ValueError("need at least one unitary")
    dim = 1 << num_qubits
    for b in blocks:
        if b.dimension != dim:
            raise ValueError(f"block structure dimension {b.dimension} != {dim}")
    if check:
        check_refinement_chain(blocks)
        for t, (gates, b) in enumerate(zip(unitaries, blocks), start=1):
            check_respects(gates, num_qubits, b, where=f"U_{t}")


def _infer_qubits(blocks):
    dim = blocks[0].dimension
    ell = dim.bit_length() - 1
    if 1 << ell != dim:
        raise ValueError("block dimension must be a power of two")
    return ell


def sample_history_blocks(unitaries, blocks, rng, check=True):
    """One draw from the block-structured oracle.

    ``v_0 = 0``; ``v_t`` is drawn from row ``v_{t-1}`` of the product-theory
    stochastic matrix for ``(U_{t-1}...U_1|0>, U_t)`` on blocks ``B_t``.
    """
    ell = _infer_qubits(blocks)
    _prepare_block_chain(unitaries, blocks, ell, check)
    amps = np.zeros(1 << ell, dtype=complex)
    amps[0] = 1.0
    v = [0]
    for gates, b in zip(unitaries, blocks):
        for g in gates:
            amps = apply_gate_array(amps, g, ell)
        weights = block_transition_weights(np.abs(amps) ** 2, b)
        prev = v[-1]
        members = b.members(prev)
        v.append(int(members[sample_indices(weights[members], rng)]))
    return History(tuple(v), ())


def history_distribution_blocks(unitaries, blocks, budget=DEFAULT_BUDGET, check=True):
    """Exact distribution of the block oracle; see ``hidden_variables.history_distribution_pt``."""
    from .hidden_variables import history_distribution_pt

    return history_distribution_pt(unitaries, blocks, budget=budget, check=check)
