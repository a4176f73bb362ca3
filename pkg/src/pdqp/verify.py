"""Verification suites: random instance corpora run through the checkers.

Each suite returns a ``SuiteResult`` whose records serialize to JSON lines
``{checker, instance, lhs, rhs, holds, ...}``.  Instance ids are stable for a
given seed, and every instance draws from its own keyed stream.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import analysis
from .algorithms import grover_iteration
from .circuit import Circuit, ClassicalFunction, Step, marked_function, zero_indicator
from .exact_sim import ExactSampler
from .hidden_variables import (
    BlockStructure,
    circuit_block_structure,
    dieks_continuity_check,
    dieks_joint,
    history_distribution_pt,
    product_theory_joint,
    unitary_block_structure,
    validate_hv_matrix,
)
from .history import HistoryDistribution
from .qp_oracle import history_distribution_exact, sample_histories, to_block_form
from .rng import make_rng
from .statevector import (
    CNot,
    Hadamard,
    PauliX,
    PhaseOracle,
    StateVector,
    Toffoli,
    XorOracle,
    apply_gates,
    random_state,
)

SUITES = (
    "markov",
    "trace",
    "hybrid",
    "pairwise",
    "product-fidelity",
    "hv-validity",
    "continuity",
    "qpqb-equiv",
    "exactsim-equiv",
)


@dataclass
class SuiteResult:
    name: str
    records: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def failures(self):
        return sum(not r["holds"] for r in self.records)

    @property
    def passed(self):
        return self.failures == 0

    def add(self, checker, instance, lhs, rhs, holds, **extra):
        rec = {"checker": checker, "instance": instance, "lhs": float(lhs), "rhs": float(rhs), "holds": bool(holds)}
        rec.update(extra)
        self.records.append(rec)

    def json_lines(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def summary(self):
        return f"{self.name}: {len(self.records) - self.failures}/{len(self.records)} pass"


# ---------------------------------------------------------------------------
# Random circuits
# ---------------------------------------------------------------------------


def _random_function(rng, n, m=1, name="g"):
    # a random suffix keeps names distinct within one circuit
    return ClassicalFunction(f"{name}_{int(rng.integers(1 << 30)):08x}", n, m, rng.integers(1 << m, size=1 << n))


def random_gate(rng, ell, free, allow_phase=True):
    """A random gate whose modified qubits lie in ``free``; ``None`` if impossible."""
    free = sorted(free)
    kinds = []
    if free:
        kinds += ["h", "x"]
        if ell >= 2:
            kinds += ["cx", "xor"]
        if ell >= 3:
            kinds.append("ccx")
    if allow_phase:
        kinds.append("phase")
    if not kinds:
        return None
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "h":
        return Hadamard(int(rng.choice(free)))
    if kind == "x":
        return PauliX(int(rng.choice(free)))
    if kind == "phase":
        k = int(rng.integers(1, ell + 1))
        qs = tuple(int(q) for q in rng.choice(ell, size=k, replace=False))
        return PhaseOracle(_random_function(rng, k, name=f"p{k}"), qs)
    t = int(rng.choice(free))
    others = [q for q in range(ell) if q != t]
    if kind == "cx":
        return CNot(int(rng.choice(others)), t)
    if kind == "ccx":
        c = rng.choice(others, size=2, replace=False)
        return Toffoli(int(c[0]), int(c[1]), t)
    k = int(rng.integers(1, len(others) + 1))
    ins = tuple(int(q) for q in rng.choice(others, size=k, replace=False))
    return XorOracle(_random_function(rng, k, name=f"x{k}"), ins, (t,))


def random_write_once_circuit(rng, ell, T, max_gates=3, p_measure=0.35, allow_phase=True):
    """Random circuit over H/X/CNOT/Toffoli/oracle gates that never modifies a measured qubit."""
    measured = set()
    steps = []
    for _ in range(T):
        gates = []
        for _ in range(int(rng.integers(0, max_gates + 1))):
            g = random_gate(rng, ell, set(range(ell)) - measured, allow_phase)
            if g is not None:
                gates.append(g)
        ms = tuple(q for q in range(ell) if q not in measured and rng.random() < p_measure)
        measured.update(ms)
        steps.append(Step(gates, ms))
    return Circuit(ell, steps)


def circuit_corpus(seed, count=40, max_qubits=3, max_steps=3):
    """Mixed corpus of small write-once circuits; about half contain collapses."""
    out = []
    for k in range(count):
        rng = make_rng(seed, 1, k)
        ell = int(rng.integers(1, max_qubits + 1))
        T = int(rng.integers(1, max_steps + 1))
        out.append(random_write_once_circuit(rng, ell, T, p_measure=0.35 if k % 2 else 0.0))
    return out


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_markov(seed, count=10_000):
    res = SuiteResult("markov")
    for k in range(count):
        rng = make_rng(seed, 2, k)
        T = int(rng.integers(1, 6))
        sizes = [int(s) for s in rng.integers(2, 5, size=T + 1)]
        conc = float(rng.choice([0.2, 1.0, 5.0]))
        v = analysis.random_markov_chain(rng, T, sizes, conc)
        w = analysis.random_markov_chain(rng, T, sizes, conc)
        c = analysis.check_markov_tv_lemma(v, w)
        res.add("markov_tv", f"markov-{k}", c.lhs, c.rhs, c.holds, marginal_sum=c.marginal_sum)
    v, w = analysis.correlated_coin_counterexample()
    c = analysis.check_markov_tv_lemma(v, w)
    flaw = c.marginal_sum < c.lhs
    res.add("markov_tv", "correlated-coins", c.lhs, c.rhs, c.holds, marginal_sum=c.marginal_sum, marginal_bound_fails=flaw)
    res.notes["counterexample"] = {"lhs": c.lhs, "rhs": c.rhs, "marginal_sum": c.marginal_sum, "marginal_bound_fails": flaw}
    return res


def suite_trace(seed, count=10_000):
    res = SuiteResult("trace")
    for k in range(count):
        rng = make_rng(seed, 3, k)
        ell = int(rng.integers(1, 5))
        a = random_state(ell, rng)
        if k % 4 == 0:
            # nearby pairs exercise the small-distance regime
            b = StateVector(ell, a.amplitudes + 0.05 * random_state(ell, rng).amplitudes)
            b = StateVector(ell, b.amplitudes / np.linalg.norm(b.amplitudes))
        else:
            b = random_state(ell, rng)
        r = analysis.check_trace_vs_l2([(a, b)])
        res.add("trace_vs_l2", f"trace-{k}", analysis.trace_distance(a, b), analysis.l2_distance(a, b), r.holds)
    return res


def grover_k(n):
    return max(1, int(round(math.pi / 4 * math.sqrt(1 << n))))


def suite_hybrid(seed, max_n=10):
    res = SuiteResult("hybrid")
    for n in range(1, max_n + 1):
        K = grover_k(n) + 1
        r = analysis.check_hybrid_bound(n, K)
        for t, (q, s) in enumerate(zip(r.queries, r.sums)):
            res.add("hybrid", f"grover-n{n}-K{K}-t{t}", s, 4 * q * q, s <= 4 * q * q + 1e-9, queries=q)
    return res


def _oracle_circuit_pair(rng, ell, T, marked, p_measure):
    """Base circuit with a blank phase oracle and its variant marking ``marked``.

    Every step is either a single oracle call or oracle-free.
    """
    blank = PhaseOracle(marked_function(ell, None), tuple(range(ell)))
    mark = PhaseOracle(marked_function(ell, marked), tuple(range(ell)))
    measured = set()
    base, var = [], []
    for t in range(T):
        ms = tuple(q for q in range(ell) if q not in measured and rng.random() < p_measure)
        if t > 0 and rng.random() < 0.4:
            base.append(Step([blank], ms))
            var.append(Step([mark], ms))
        else:
            gates = []
            for _ in range(int(rng.integers(1, 4))):
                g = random_gate(rng, ell, set(range(ell)) - measured, allow_phase=False)
                if g is not None:
                    gates.append(g)
            base.append(Step(gates, ms))
            var.append(Step(gates, ms))
        measured.update(ms)
    return Circuit(ell, base), Circuit(ell, var)


def _grover_measured_pair(x):
    """3-qubit Grover run with one collapsing measurement partway."""
    n = 3
    reg = tuple(range(n))
    hs = [Hadamard(q) for q in reg]
    zero = zero_indicator(n)

    def build(f):
        o = PhaseOracle(f, reg)
        return Circuit(n, [
            Step(hs),
            Step([o]),
            Step(hs + [PhaseOracle(zero, reg)] + hs, (2,)),
            Step([o]),
            Step(),
        ])

    return build(marked_function(n, None)), build(marked_function(n, x))


def suite_pairwise(seed, count=1000):
    res = SuiteResult("pairwise")
    worst_gap = 0.0
    for x in range(8):
        base, var = _grover_measured_pair(x)
        for i in range(1, base.T + 1):
            c = analysis.check_pairwise_tv_bound(base, var, i)
            res.add("pairwise_tv", f"grover3-x{x}-i{i}", c.d, c.bound, c.holds)
    for k in range(count):
        rng = make_rng(seed, 4, k)
        ell = int(rng.integers(1, 4))
        T = int(rng.integers(2, 5))
        marked = int(rng.integers(1 << ell))
        base, var = _oracle_circuit_pair(rng, ell, T, marked, 0.3)
        i = int(rng.integers(1, T + 1))
        c = analysis.check_pairwise_tv_bound(base, var, i)
        # the deferred pair law must agree with the oracle's own pair marginal
        dim = 1 << ell
        p, _ = analysis.deferred_pair_distribution(base, i)
        op = analysis.pair_dict_to_array(analysis.operational_pair_distribution(base, i), dim)
        gap = float(np.max(np.abs(p - op)))
        worst_gap = max(worst_gap, gap)
        res.add("pairwise_tv", f"random-{k}-i{i}", c.d, c.bound, c.holds and gap <= 1e-10, deferred_gap=gap)
    res.notes["max_deferred_vs_operational"] = worst_gap
    return res


def _grover_measurement_free(n, K, marked):
    reg = tuple(range(n))
    hs = [Hadamard(q) for q in reg]
    f = marked_function(n, marked)
    zero = zero_indicator(n)
    steps = [Step(hs)] + [Step(grover_iteration(f, zero, n)) for _ in range(K)]
    return Circuit(n, steps)


def suite_product_fidelity(seed, count=300):
    res = SuiteResult("product-fidelity")
    base = _grover_measurement_free(6, 2, None)
    for x in range(64):
        c = analysis.check_product_fidelity_chain(base, _grover_measurement_free(6, 2, x))
        res.add("product_fidelity", f"grover6-K2-x{x}", c.lhs, c.rhs, c.holds, exp_bound=c.exp_bound)
    for k in range(count):
        rng = make_rng(seed, 5, k)
        ell = int(rng.integers(1, 4))
        T = int(rng.integers(1, 4))
        b, v = _oracle_circuit_pair(rng, ell, T, int(rng.integers(1 << ell)), 0.0)
        c = analysis.check_product_fidelity_chain(b, v)
        res.add("product_fidelity", f"random-{k}", c.lhs, c.rhs, c.holds, exp_bound=c.exp_bound)
    return res


def _random_gates(rng, ell, count):
    return [random_gate(rng, ell, set(range(ell))) for _ in range(count)]


def suite_hv_validity(seed, count=1000):
    res = SuiteResult("hv-validity")
    # H twice on one qubit composes to the identity, yet each gate connects |0> and |1>
    hh = [Hadamard(0), Hadamard(0)]
    cbs = circuit_block_structure(hh, 1)
    ubs = unitary_block_structure(hh, 1)
    ok = cbs == BlockStructure.trivial(2) and ubs == BlockStructure.singletons(2)
    res.add("hh_example", "hh-one-qubit", float(cbs.num_blocks), float(ubs.num_blocks), ok)
    worst = 0.0
    for k in range(count):
        rng = make_rng(seed, 6, k)
        ell = int(rng.integers(1, 5))
        psi = random_state(ell, rng)
        gates = _random_gates(rng, ell, int(rng.integers(0, 5)))
        beta = apply_gates(psi, gates)
        blocks = unitary_block_structure(gates, ell)
        pt = validate_hv_matrix(product_theory_joint(psi, gates, blocks), psi, beta)
        dk = validate_hv_matrix(dieks_joint(psi, gates), psi, beta)
        err = max(pt.row_error, pt.col_error, pt.leakage, dk.row_error, dk.col_error, dk.leakage)
        worst = max(worst, err)
        res.add("hv_marginals", f"hv-{k}", err, 1e-10, err <= 1e-10)
    res.notes["max_marginal_error"] = worst
    return res


def suite_continuity(seed, count=1000):
    res = SuiteResult("continuity")
    for k in range(count):
        rng = make_rng(seed, 7, k)
        ell = int(rng.integers(1, 4))
        psi = random_state(ell, rng)
        scale = float(10.0 ** rng.uniform(-3, 0))
        pert = psi.amplitudes + scale * random_state(ell, rng).amplitudes
        psi_x = StateVector(ell, pert / np.linalg.norm(pert))
        gates = _random_gates(rng, ell, int(rng.integers(1, 5)))
        # the variant swaps diagonal oracles only, so both share a circuit block structure
        gates_x = [
            PhaseOracle(_random_function(rng, len(g.qubits), name="q"), g.qubits) if isinstance(g, PhaseOracle) else g
            for g in gates
        ]
        c = dieks_continuity_check(psi, psi_x, gates, gates_x)
        res.add("dieks_continuity", f"cont-{k}", c.lhs, c.bound, c.holds, eps=c.eps)
    return res


def _empirical_tvd(histories, exact):
    return analysis.total_variation(HistoryDistribution.empirical(histories), exact)


def suite_qpqb_equiv(seed, count=40, shots=100_000):
    res = SuiteResult("qpqb-equiv")
    for k, circ in enumerate(circuit_corpus(seed, count)):
        exact = history_distribution_exact(circ)
        unitaries, blocks = to_block_form(circ)
        pt = history_distribution_pt(unitaries, blocks)
        diff = exact.max_abs_diff(pt)
        res.add("qp_vs_blocks", f"circuit-{k}", diff, 1e-10, diff <= 1e-10)
        hist = sample_histories(circ, make_rng(seed, 8, k), shots)
        tvd = _empirical_tvd(hist, exact)
        res.add("sampler_tvd", f"circuit-{k}", tvd, 0.02, tvd <= 0.02, support=len(exact))
    return res


def suite_exactsim_equiv(seed, count=40, shots=100_000):
    res = SuiteResult("exactsim-equiv")
    for k, circ in enumerate(circuit_corpus(seed, count)):
        exact = history_distribution_exact(circ)
        sampler = ExactSampler(circ)
        induced = HistoryDistribution({h: float(p) for h, p in sampler.distribution().items()})
        diff = exact.max_abs_diff(induced)
        res.add("exact_vs_statevector", f"circuit-{k}", diff, 1e-10, diff <= 1e-10)
        hist = sampler.sample_many(make_rng(seed, 9, k), shots)
        tvd = _empirical_tvd(hist, exact)
        res.add("exact_sampler_tvd", f"circuit-{k}", tvd, 0.02, tvd <= 0.02, support=len(exact))
    return res


_RUNNERS = {
    "markov": suite_markov,
    "trace": suite_trace,
    "hybrid": suite_hybrid,
    "pairwise": suite_pairwise,
    "product-fidelity": suite_product_fidelity,
    "hv-validity": suite_hv_validity,
    "continuity": suite_continuity,
    "qpqb-equiv": suite_qpqb_equiv,
    "exactsim-equiv": suite_exactsim_equiv,
}


def run_suite(name, seed, **kwargs):
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _RUNNERS[name](seed, **kwargs)
