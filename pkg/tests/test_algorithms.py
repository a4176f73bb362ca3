import math

import numpy as np
import pytest

from pdqp import algorithms as alg
from pdqp.circuit import ClassicalFunction, validate
from pdqp.history import HistoryDistribution
from pdqp.qp_oracle import history_distribution_exact
from pdqp.rng import make_rng
from pdqp.statevector import Hadamard, StateVector, apply_gates, trace_distance

from conftest import binomial_ok


def test_search_instance_validation():
    with pytest.raises(ValueError):
        alg.SearchInstance(3, marked=8)
    with pytest.raises(ValueError):
        alg.SearchInstance(3, K=0)
    inst = alg.SearchInstance(4, 3, K=2, R=5)
    assert (inst.N, inst.Q, inst.T) == (16, 3, 5)


def test_canonical_parameters():
    assert alg.canonical_parameters(6) == (4, 24)
    assert alg.canonical_parameters(9) == (8, 72)
    assert alg.canonical_parameters(7) == (6, 36)


def test_search_circuit_is_write_once():
    c = alg.build_search_circuit(4, 5, 2, 6)
    assert validate(c, "write-once") == []
    assert c.T == 6 and c.num_qubits == 5


def test_search_without_marked_item(rng):
    inst = alg.SearchInstance(5, None, K=2, R=20, trials=50)
    assert not alg.pdqp_search(inst, rng).success
    assert alg.pdqp_search_successes(inst, rng) == 0


def test_per_sample_probability_n6_k4():
    p = alg.marked_probabilities(6, 4)
    theta = math.asin(1 / 8)
    assert p[4] == pytest.approx(math.sin(9 * theta) ** 2, abs=1e-12)
    assert p[4] == pytest.approx(0.816, abs=1e-3)
    inst = alg.SearchInstance(6, 11, K=4, R=12, trials=2000)
    assert alg.pdqp_search_successes(inst, make_rng(1)) == 2000


def test_exact_search_success_from_enumeration():
    # small instance: compare the sampled success rate with the exact history law
    n, x, K, R = 3, 6, 1, 3
    c = alg.build_search_circuit(n, x, K, R)
    d = history_distribution_exact(c)
    exact = sum(p for h, p in d.items() if any((v >> n) & 1 for v in h[1:]))
    p = alg.marked_probabilities(n, K, marked=x)[K]
    assert exact == pytest.approx(1 - (1 - p) ** R, abs=1e-12)
    inst = alg.SearchInstance(n, x, K, R, trials=20000)
    assert binomial_ok(alg.pdqp_search_successes(inst, make_rng(2)), 20000, exact)


def test_pdqp_search_returns_marked_item(rng):
    res = alg.pdqp_search(alg.SearchInstance(7, 99, K=5, R=40), rng)
    assert res.found == 99


def test_grover_baseline_examples():
    n = 8
    N = 1 << n
    theta = math.asin(1 / math.sqrt(N))
    # rounding pi/4 sqrt(N) = 12.57 up to 13 overshoots slightly; 12 iterations clear 0.99
    K_round = round(math.pi / 4 * math.sqrt(N))
    assert K_round == 13
    assert alg.marked_probabilities(n, K_round)[K_round] == pytest.approx(math.sin(27 * theta) ** 2, abs=1e-12)
    assert 0.98 < math.sin(27 * theta) ** 2 < 0.99
    K = math.floor(math.pi / 4 * math.sqrt(N))
    assert math.sin((2 * K + 1) * theta) ** 2 >= 0.99
    assert alg.marked_probabilities(n, K)[K] >= 0.99
    assert alg.grover_baseline_successes(alg.SearchInstance(n, 77, K=K, trials=500), make_rng(3)) >= 480
    K12, _ = alg.canonical_parameters(12)
    p12 = alg.marked_probabilities(12, K12)[K12]
    assert p12 == pytest.approx(math.sin((2 * K12 + 1) * math.asin(2 ** -6)) ** 2)
    assert p12 < 1 / 3  # (2K+1)^2/N scale, far below the 2/3 target
    assert alg.grover_baseline_successes(alg.SearchInstance(5, None, K=3, trials=100), make_rng(4)) == 0
    assert not alg.grover_baseline(alg.SearchInstance(5, None, K=3), make_rng(4)).success


def test_success_monotone_in_samples():
    n, x, K = 6, 9, 2
    rates = []
    for R in (1, 2, 4, 8):
        rates.append(alg.pdqp_search_successes(alg.SearchInstance(n, x, K, R, trials=3000), make_rng(5, R)) / 3000)
    # allow sampling noise between neighbours
    assert all(b >= a - 0.03 for a, b in zip(rates, rates[1:]))
    p = alg.marked_probabilities(n, K)[K]
    exact = [1 - (1 - p) ** R for R in (1, 2, 4, 8)]
    assert exact == sorted(exact)


def test_minimal_cost_and_samples_needed():
    assert alg.samples_needed(0.9) == 1
    assert alg.samples_needed(0.5) == 2
    assert alg.samples_needed(0.0) == math.inf
    pt = alg.minimal_search_cost(10, "pdqp")
    assert 1 - (1 - alg.marked_probabilities(10, pt.K)[pt.K]) ** pt.R >= 2 / 3
    b = alg.minimal_search_cost(10, "baseline")
    assert b.probability >= 2 / 3
    assert pt.cost < b.cost


def test_loglog_slope_recovers_power():
    ns = range(4, 12)
    assert alg.loglog_slope(ns, [(1 << n) ** 0.4 for n in ns]) == pytest.approx(0.4)


def test_sd_instance_validation():
    f = ClassicalFunction("a", 2, 2, [0, 1, 2, 3])
    g = ClassicalFunction("b", 2, 1, [0, 1, 1, 0])
    with pytest.raises(ValueError):
        alg.SDInstance(f, g)
    with pytest.raises(ValueError):
        alg.SDInstance(f, f, "maybe")


def test_sd_identical_functions_quarter():
    f = ClassicalFunction("p", 3, 2, [0, 1, 2, 3, 0, 1, 2, 3])
    inst = alg.SDInstance(f, f, "close")
    assert alg.sd_agree_probability_exact(inst) == pytest.approx(0.25, abs=1e-12)
    # cross-check with the full history enumeration
    d = history_distribution_exact(alg.build_sd_circuit(inst))
    agree = sum(p for h, p in d.items() if len({v & 1 for v in h[1:]}) == 1)
    assert agree == pytest.approx(0.25, abs=1e-12)
    far = alg.sd_far_count(inst, make_rng(6), 8000)
    assert binomial_ok(far, 8000, 0.25)


def test_sd_disjoint_ranges_always_far():
    p0 = ClassicalFunction("p0", 2, 2, [0, 1, 0, 1])
    p1 = ClassicalFunction("p1", 2, 2, [2, 3, 3, 2])
    inst = alg.SDInstance(p0, p1, "far")
    assert alg.output_distance(p0, p1) == 1
    assert alg.sd_agree_probability_exact(inst) == pytest.approx(1.0)
    assert alg.sd_far_count(inst, make_rng(7), 500) == 500
    assert alg.solve_statistical_difference(inst, make_rng(8)) == "far"


def test_sd_nearly_disjoint_error_bound():
    # distance 1 - 2^-n: error probability at most 1/4 + O(2^-n)
    n = 4
    t0 = np.zeros(1 << n, dtype=int)
    t1 = np.ones(1 << n, dtype=int)
    t1[0] = 0
    p0, p1 = ClassicalFunction("p0", n, 1, t0), ClassicalFunction("p1", n, 1, t1)
    assert alg.output_distance(p0, p1) == pytest.approx(1 - 2 ** -n)
    miss = 1 - alg.sd_agree_probability_exact(alg.SDInstance(p0, p1, "far"))
    assert miss <= 0.25 + 2 ** -n


def test_sd_corpus_promises():
    for inst in alg.sd_corpus(make_rng(9), 40):
        d = alg.output_distance(inst.p0, inst.p1)
        assert (d <= 0.01) if inst.promise == "close" else (d >= 0.99)
        assert inst.n <= 8 and inst.m <= 8


def test_ftl_examples():
    rng = make_rng(10)
    assert alg.ftl_signal_demo("computational", 5, rng, 2000) == ["computational"] * 2000
    got = alg.ftl_signal_demo("hadamard", 4, rng, 20000)
    assert binomial_ok(sum(g == "computational" for g in got), 20000, 2 ** -3)
    with pytest.raises(ValueError):
        alg.ftl_signal_demo("hadamard", 1, rng)
    assert 2.0 ** (1 - 11) <= 2 ** -10


def test_ftl_exact_error():
    for k in (2, 3, 5):
        d = history_distribution_exact(alg.build_ftl_circuit("hadamard", k))
        agree = sum(p for h, p in d.items() if len({(v >> 1) & 1 for v in h[1:]}) == 1)
        assert agree == pytest.approx(2.0 ** (1 - k))


def test_one_query_examples():
    rng = make_rng(11)
    x = [0, 1, 1, 0, 1, 1, 1, 0]
    one = alg.one_query_evaluate(x, 1, rng)
    assert len(one.unseen) == 7
    res = alg.one_query_evaluate([0] * 8, 30, rng)
    assert all(v in (-1, 0) for v in res.recovered)
    R = alg.coupon_samples(8, 0.01)
    assert R == 54
    assert 8 * (1 - 1 / 8) ** R <= 0.01
    assert alg.one_query_recovery_rate(x, R, rng, 3000) >= 0.98


def test_one_qubit_examples():
    rng = make_rng(12)
    assert alg.one_qubit_communicate(0, 3, 64, rng, 20) == [0] * 20
    assert math.sin(alg.encoding_angle(2, 2)) ** 2 == pytest.approx(0.5)
    c = alg.build_one_qubit_circuit(2, 2, 1)
    psi = apply_gates(StateVector.zero(1), c.steps[0].gates)
    assert psi.probabilities()[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        alg.one_qubit_communicate(0, 6, 10, rng)


def test_clone_examples():
    rng = make_rng(13)
    R = 4000
    z = alg.clone_via_tomography([], R, rng)
    assert np.allclose(z.bloch, [0, 0, 1], atol=3 / math.sqrt(R))
    x = alg.clone_via_tomography([Hadamard(0)], R, rng)
    assert np.allclose(x.bloch, [1, 0, 0], atol=4 / math.sqrt(R))
    prep = alg.haar_preparation(rng)
    res = alg.clone_via_tomography(prep, R, rng)
    target = apply_gates(StateVector.zero(1), prep)
    assert np.allclose(res.bloch, alg.bloch_vector(target), atol=5 / math.sqrt(R))
    made = apply_gates(StateVector.zero(1), res.recipe)
    assert trace_distance(made, target) == pytest.approx(res.trace_distance)
    assert res.trace_distance < 0.1


def test_preparation_from_bloch_exact():
    rng = make_rng(14)
    for _ in range(20):
        target = apply_gates(StateVector.zero(1), alg.haar_preparation(rng))
        made = apply_gates(StateVector.zero(1), alg.preparation_from_bloch(alg.bloch_vector(target)))
        assert trace_distance(made, target) <= 1e-7


def test_closed_form_amplitude_is_reported_not_identity():
    # the closed form is an asymptotic estimate; at n=6, K=4 the exact
    # amplitude is sin(9 theta) with sin(theta) = 1/8
    assert alg.asymptotic_marked_amplitude(6) == pytest.approx(1 / math.sqrt(4 + 0.5 + 1))
    theta = math.asin(1 / 8)
    exact = math.sqrt(alg.marked_probabilities(6, 4)[4])
    assert exact == pytest.approx(abs(math.sin(9 * theta)), abs=1e-12)
    rows, _ = alg.search_scaling([6], 5, np.random.default_rng(0), "pdqp")
    assert rows[0].amp_exact == pytest.approx(exact, abs=1e-12)
    assert rows[0].amp_closed_form != pytest.approx(exact, abs=1e-3)
