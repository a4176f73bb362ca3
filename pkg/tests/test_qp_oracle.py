import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from pdqp.analysis import markov_defect, total_variation
from pdqp.circuit import Circuit, Step
from pdqp.hidden_variables import BlockStructure, history_distribution_pt
from pdqp.history import HistoryDistribution
from pdqp.qp_oracle import (
    history_distribution_blocks,
    history_distribution_exact,
    sample_histories,
    sample_history,
    sample_history_blocks,
    to_block_form,
)
from pdqp.errors import BlockStructureError
from pdqp.rng import make_rng
from pdqp.statevector import CNot, Hadamard, PhaseOracle
from pdqp.circuit import marked_function
from pdqp.verify import circuit_corpus, random_write_once_circuit

H3 = Circuit(1, [Step([Hadamard(0)]), Step(), Step()])


def test_empty_step_gives_zero_history(rng):
    c = Circuit(1, [Step()])
    assert all(h.samples == (0, 0) for h in sample_histories(c, rng, 50))


def test_measured_h_sample_matches_collapse(rng):
    c = Circuit(1, [Step([Hadamard(0)], (0,))])
    for h in sample_histories(c, rng, 200):
        assert h.samples[1] == h.collapse_outcomes[0][0]


def test_three_independent_uniform_samples():
    d = history_distribution_exact(H3)
    assert len(d) == 8
    for bits in itertools.product((0, 1), repeat=3):
        assert d[(0,) + bits] == pytest.approx(1 / 8, abs=1e-12)


def test_measured_h_exact():
    d = history_distribution_exact(Circuit(1, [Step([Hadamard(0)], (0,))]), with_collapse=True)
    assert d.probs == pytest.approx({((0, 0), ((0,),)): 0.5, ((0, 1), ((1,),)): 0.5})


def test_bell_measure_exact(bell_measure):
    d = history_distribution_exact(bell_measure)
    assert d.probs == pytest.approx({(0, 0, 0): 0.5, (0, 3, 3): 0.5})


def test_v0_always_zero(rng):
    c = random_write_once_circuit(rng, 3, 3)
    assert all(h.samples[0] == 0 for h in sample_histories(c, rng, 100))


def test_single_and_batched_samplers_agree_in_law():
    c = circuit_corpus(3, 8)[5]
    rng = make_rng(9)
    singles = HistoryDistribution.empirical(sample_history(c, rng) for _ in range(4000))
    exact = history_distribution_exact(c)
    assert total_variation(singles, exact) < 0.06


def test_block_oracle_trivial_block_is_born_sampling():
    d = history_distribution_pt([[Hadamard(0)]], [BlockStructure.trivial(2)])
    assert d.probs == pytest.approx({(0, 0): 0.5, (0, 1): 0.5})


def test_block_oracle_singletons_freeze_history(rng):
    f = marked_function(2, 1)
    us = [[PhaseOracle(f, (0, 1))], []]
    bs = [BlockStructure.singletons(4)] * 2
    assert history_distribution_pt(us, bs).probs == {(0, 0, 0): 1.0}
    assert sample_history_blocks(us, bs, rng).samples == (0, 0, 0)


def test_block_oracle_rejects_bad_chains(rng):
    with pytest.raises(BlockStructureError):
        sample_history_blocks([[Hadamard(0)]], [BlockStructure.singletons(2)], rng)
    with pytest.raises(BlockStructureError):
        sample_history_blocks([[], []], [BlockStructure.singletons(2), BlockStructure.trivial(2)], rng)


def test_bell_conversion_matches(bell_measure):
    us, bs = to_block_form(bell_measure)
    assert bs[0] == BlockStructure.trivial(4)
    assert bs[1] == BlockStructure.from_qubits(2, (0,))
    diff = history_distribution_exact(bell_measure).max_abs_diff(history_distribution_blocks(us, bs))
    assert diff <= 1e-10


def test_block_sampler_matches_enumeration(bell_measure):
    us, bs = to_block_form(bell_measure)
    rng = make_rng(11)
    emp = HistoryDistribution.empirical(sample_history_blocks(us, bs, rng) for _ in range(3000))
    assert total_variation(emp, history_distribution_exact(bell_measure)) < 0.05


def test_conversion_requires_write_once():
    c = Circuit(1, [Step([], (0,)), Step([Hadamard(0)])])
    with pytest.raises(ValueError):
        to_block_form(c)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 3), T=st.integers(1, 3))
def test_qp_equals_block_form(seed, ell, T):
    c = random_write_once_circuit(make_rng(seed), ell, T)
    exact = history_distribution_exact(c).check()
    us, bs = to_block_form(c)
    assert exact.max_abs_diff(history_distribution_pt(us, bs)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 3), T=st.integers(2, 4))
def test_history_is_markov(seed, ell, T):
    c = random_write_once_circuit(make_rng(seed), ell, T)
    assert markov_defect(history_distribution_exact(c)) <= 1e-10


def test_final_marginal_matches_mixture():
    rng = make_rng(13)
    for k in range(3):
        c = random_write_once_circuit(rng, 3, 3)
        exact = history_distribution_exact(c).marginal(3)
        hist = sample_histories(c, rng, 100_000)
        emp = HistoryDistribution.empirical([(h.samples[3],) for h in hist]).marginal(0)
        assert total_variation(emp, exact) <= 0.02


def test_samples_independent_without_collapse():
    # one chi-square test of the full joint table against the product of its marginals
    c = Circuit(2, [Step([Hadamard(0), CNot(0, 1), Hadamard(1)]), Step(), Step([Hadamard(0)])])
    n = 100_000
    hist = sample_histories(c, make_rng(14), n)
    v = np.array([h.samples[1:] for h in hist])
    observed = np.zeros((4, 4, 4))
    np.add.at(observed, (v[:, 0], v[:, 1], v[:, 2]), 1)
    m = [observed.sum(axis=tuple(j for j in range(3) if j != i)) / n for i in range(3)]
    expected = n * np.einsum("a,b,c->abc", *m)
    keep = expected > 0
    stat = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
    sizes = [int(np.count_nonzero(x)) for x in m]
    dof = int(np.prod(sizes)) - 1 - sum(k - 1 for k in sizes)
    assert chi2.sf(stat, dof) > 1e-3
