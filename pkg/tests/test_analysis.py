import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdqp import analysis
from pdqp.analysis import (
    MarkovChain,
    check_hybrid_bound,
    check_markov_tv_lemma,
    check_markov_tv_lemma_histories,
    check_pairwise_tv_bound,
    check_product_fidelity_chain,
    check_trace_vs_l2,
    correlated_coin_counterexample,
    deferred_pair_distribution,
    operational_pair_distribution,
    pair_dict_to_array,
    pair_marginal,
    random_markov_chain,
    total_variation,
)
from pdqp.circuit import Circuit, Step
from pdqp.errors import BudgetExceeded
from pdqp.history import HistoryDistribution
from pdqp.qp_oracle import history_distribution_exact
from pdqp.rng import make_rng
from pdqp.statevector import Hadamard, StateVector, random_state
from pdqp.verify import _grover_measured_pair, _grover_measurement_free, _oracle_circuit_pair


def test_total_variation_examples():
    p = {0: 0.5, 1: 0.5}
    assert total_variation(p, p) == 0
    assert total_variation({0: 1.0}, {1: 1.0}) == 1
    assert total_variation(p, {0: 0.75, 1: 0.25}) == pytest.approx(0.25)
    assert total_variation(np.array([0.5, 0.5]), np.array([0.75, 0.25])) == pytest.approx(0.25)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 8))
def test_total_variation_metric(seed, k):
    rng = make_rng(seed)
    p, q, r = (rng.dirichlet(np.ones(k)) for _ in range(3))
    assert total_variation(p, q) == pytest.approx(total_variation(q, p))
    assert total_variation(p, r) <= total_variation(p, q) + total_variation(q, r) + 1e-12
    assert 0 <= total_variation(p, q) <= 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 6), j=st.integers(2, 6))
def test_data_processing(seed, k, j):
    rng = make_rng(seed)
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    M = rng.dirichlet(np.ones(j), size=k)
    assert total_variation(p @ M, q @ M) <= total_variation(p, q) + 1e-12


def test_markov_spec_validation():
    with pytest.raises(ValueError):
        MarkovChain([0.5, 0.6], [])
    with pytest.raises(ValueError):
        MarkovChain([0.5, 0.5], [np.array([[1.0, 0.0], [0.3, 0.3]])])
    with pytest.raises(ValueError):
        MarkovChain([1.0], [np.eye(2)])


def test_markov_identical_chains():
    v = random_markov_chain(make_rng(1), 3, [2, 3, 2, 4])
    c = check_markov_tv_lemma(v, v)
    assert (c.lhs, c.rhs, c.holds, c.marginal_sum) == (0, 0, True, 0)


def test_markov_counterexample():
    v, w = correlated_coin_counterexample()
    c = check_markov_tv_lemma(v, w)
    assert c.lhs == pytest.approx(1) and c.rhs == pytest.approx(2)
    assert c.holds and c.marginal_sum == 0


def test_markov_budget():
    v = random_markov_chain(make_rng(2), 12, [4] * 13)
    with pytest.raises(BudgetExceeded):
        check_markov_tv_lemma(v, v)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 5), conc=st.sampled_from([0.1, 1.0, 10.0]))
def test_markov_lemma_holds(seed, T, conc):
    rng = make_rng(seed)
    sizes = [int(s) for s in rng.integers(2, 5, size=T + 1)]
    c = check_markov_tv_lemma(random_markov_chain(rng, T, sizes, conc), random_markov_chain(rng, T, sizes, conc))
    assert c.holds


def test_markov_lemma_on_oracle_histories():
    base, var = _grover_measured_pair(5)
    c = check_markov_tv_lemma_histories(history_distribution_exact(base), history_distribution_exact(var))
    assert c.holds


def test_trace_vs_l2_examples():
    z, o = StateVector.zero(1), StateVector.basis(1, 1)
    r = check_trace_vs_l2([(z, z), (z, o)])
    assert r.holds and r.count == 2
    rng = make_rng(3)
    r = check_trace_vs_l2((random_state(3, rng), random_state(3, rng)) for _ in range(500))
    assert r.holds and r.max_ratio <= 1 + 1e-12


def test_hybrid_examples():
    r = check_hybrid_bound(8, 6)
    assert r.sums[0] == 0 and r.queries[0] == 0
    assert r.holds
    assert len(r.sums) == 1 + 2 * 6


def test_hybrid_single_query_value():
    # one query moves each variant by 2/sqrt(N) in amplitude: sum_x 4/N = 4
    r = check_hybrid_bound(5, 1)
    assert r.sums[1] == pytest.approx(4.0)


def test_pair_marginal_examples(bell_measure):
    d = HistoryDistribution({(0, 1, 1): 1.0})
    assert pair_marginal(d, 2) == {(1, 1): 1.0}
    h3 = Circuit(1, [Step([Hadamard(0)]), Step()])
    assert pair_marginal(history_distribution_exact(h3), 2) == pytest.approx({(a, b): 0.25 for a in (0, 1) for b in (0, 1)})
    assert pair_marginal(history_distribution_exact(bell_measure), 2) == pytest.approx({(0, 0): 0.5, (3, 3): 0.5})
    with pytest.raises(IndexError):
        pair_marginal(d, 3)


def test_pairwise_identity_variant():
    base, _ = _grover_measured_pair(0)
    for i in range(1, base.T + 1):
        c = check_pairwise_tv_bound(base, base, i)
        assert c.d == 0 and c.bound == 0 and c.holds


def test_pairwise_grover_all_marked_items():
    for x in range(8):
        base, var = _grover_measured_pair(x)
        for i in range(1, base.T + 1):
            assert check_pairwise_tv_bound(base, var, i).holds


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 3), T=st.integers(2, 4))
def test_deferred_pair_law_matches_oracle(seed, ell, T):
    rng = make_rng(seed)
    base, var = _oracle_circuit_pair(rng, ell, T, int(rng.integers(1 << ell)), 0.4)
    for circ in (base, var):
        for i in range(1, T + 1):
            p, _ = deferred_pair_distribution(circ, i)
            op = pair_dict_to_array(operational_pair_distribution(circ, i), 1 << ell)
            assert np.max(np.abs(p - op)) <= 1e-10
        assert check_pairwise_tv_bound(base, var, int(rng.integers(1, T + 1))).holds


def test_product_fidelity_examples():
    base = _grover_measurement_free(6, 2, None)
    c = check_product_fidelity_chain(base, base)
    # rhs is a square root of a rounding-level infidelity
    assert c.lhs == 0 and c.rhs == pytest.approx(0, abs=1e-6) and c.holds
    for x in range(64):
        assert check_product_fidelity_chain(base, _grover_measurement_free(6, 2, x)).holds
    with pytest.raises(ValueError):
        check_product_fidelity_chain(Circuit(1, [Step([], (0,))]), Circuit(1, [Step([], (0,))]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ell=st.integers(1, 3))
def test_single_step_fidelity_is_data_processing(seed, ell):
    # with T = 1 the bound is TVD(Born(a), Born(b)) <= trace distance
    rng = make_rng(seed)
    base, var = _oracle_circuit_pair(rng, ell, 1, int(rng.integers(1 << ell)), 0.0)
    c = check_product_fidelity_chain(base, var)
    assert c.holds
