"""Distances between distributions and numerical checks of the search lower-bound inequalities.

Total variation distance is always ``(1/2) * l1``.  Checkers return small
dataclasses with ``lhs``/``rhs``-style fields and a ``holds`` flag; the
verification suites serialize them as JSON lines.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .circuit import validate
from .errors import BudgetExceeded
from .history import HistoryDistribution
from .qp_oracle import history_distribution_exact
from .statevector import (
    Hadamard,
    _register_values,
    apply_gate_array,
    l2_distance,
    trace_distance,
)

STOCH_TOL = 1e-10


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def _as_mapping(p):
    if isinstance(p, HistoryDistribution):
        return p.probs
    if isinstance(p, np.ndarray):
        return {idx: float(v) for idx, v in np.ndenumerate(p)}
    return p


def total_variation(p, q):
    """``(1/2) sum |p - q|`` over the union of supports."""
    if isinstance(p, np.ndarray) and isinstance(q, np.ndarray):
        if p.shape != q.shape:
            raise ValueError("array distributions must have the same shape")
        return 0.5 * float(np.abs(p - q).sum())
    p, q = _as_mapping(p), _as_mapping(q)
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def pair_marginal(h, i):
    """Distribution of ``(v_{i-1}, v_i)`` under a history distribution."""
    some = next(iter(h.probs), None)
    T = len(some) - 1 if some is not None else 0
    if not 1 <= i <= T:
        raise IndexError(f"i must be in [1, {T}]")
    return h.marginal((i - 1, i))


def markov_defect(h):
    """Largest gap between ``P(v)`` and its first-order Markov factorization."""
    some = next(iter(h.probs))
    T = len(some) - 1
    if T < 2:
        return 0.0
    pairs = [h.marginal((i - 1, i)) for i in range(1, T + 1)]
    singles = [h.marginal(i) for i in range(T + 1)]
    worst = 0.0
    # any history outside the support must also get factorized mass 0; check over
    # the product of pair supports reachable from the observed histories
    candidates = set(h.probs)
    frontier = [(k,) for k in singles[0]]
    for i in range(1, T + 1):
        frontier = [f + (b,) for f in frontier for (a, b) in pairs[i - 1] if a == f[-1]]
    candidates.update(frontier)
    for k in candidates:
        f = pairs[0].get((k[0], k[1]), 0.0)
        for i in range(2, T + 1):
            if f == 0.0:
                break
            f *= pairs[i - 1].get((k[i - 1], k[i]), 0.0) / singles[i - 1][k[i - 1]]
        worst = max(worst, abs(h[k] - f))
    return worst


# ---------------------------------------------------------------------------
# Markov chains
# ---------------------------------------------------------------------------


@dataclass
class MarkovChain:
    """Initial distribution plus one row-stochastic matrix per step."""

    initial: np.ndarray
    transitions: list = field(default_factory=list)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transitions = [np.asarray(m, dtype=float) for m in self.transitions]
        if abs(self.initial.sum() - 1) > STOCH_TOL or np.any(self.initial < 0):
            raise ValueError("initial distribution is not a distribution")
        prev = self.initial.size
        for t, m in enumerate(self.transitions, start=1):
            if m.ndim != 2 or m.shape[0] != prev:
                raise ValueError(f"transition {t} has shape {m.shape}, expected ({prev}, *)")
            if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1)) > STOCH_TOL:
                raise ValueError(f"transition {t} is not row-stochastic")
            prev = m.shape[1]

    @property
    def T(self):
        return len(self.transitions)

    @property
    def sizes(self):
        return [self.initial.size] + [m.shape[1] for m in self.transitions]

    def joint(self, budget=1 << 22):
        """Full history distribution as an array indexed ``[v_0, ..., v_T]``."""
        if math.prod(self.sizes) > budget:
            raise BudgetExceeded(f"{math.prod(self.sizes)} histories exceed budget {budget}")
        p = self.initial
        for m in self.transitions:
            p = p[..., None] * m.reshape((1,) * (p.ndim - 1) + m.shape)
        return p

    def marginal(self, i):
        p = self.initial
        for m in self.transitions[:i]:
            p = p @ m
        return p

    def pair(self, i):
        """Joint of ``(v_{i-1}, v_i)``."""
        return self.marginal(i - 1)[:, None] * self.transitions[i - 1]


def random_markov_chain(rng, T, sizes, concentration=1.0):
    """Chain with Dirichlet-distributed initial law and transition rows."""
    if len(sizes) != T + 1:
        raise ValueError("need T+1 state-space sizes")
    initial = rng.dirichlet(np.full(sizes[0], concentration))
    trans = [rng.dirichlet(np.full(sizes[t + 1], concentration), size=sizes[t]) for t in range(T)]
    return MarkovChain(initial, trans)


def correlated_coin_counterexample():
    """Two chains with identical one-step marginals but disjoint supports.

    ``v`` is uniform on {(0,0), (1,1)}, ``w`` uniform on {(0,1), (1,0)}.
    """
    v = MarkovChain([0.5, 0.5], [np.eye(2)])
    w = MarkovChain([0.5, 0.5], [np.array([[0.0, 1.0], [1.0, 0.0]])])
    return v, w


@dataclass
class MarkovCheck:
    lhs: float
    rhs: float
    holds: bool
    marginal_sum: float


def check_markov_tv_lemma(v, w):
    """Full-history TVD against twice the sum of consecutive-pair TVDs.

    ``marginal_sum`` is ``sum_{i=0..T} d_TV(v_i, w_i)``, the single-site bound
    that fails for correlated chains; it is reported for contrast only.
    """
    if v.sizes != w.sizes:
        raise ValueError("chains must share T and state-space sizes")
    lhs = total_variation(v.joint(), w.joint())
    rhs = 2.0 * sum(total_variation(v.pair(i), w.pair(i)) for i in range(1, v.T + 1))
    marg = sum(total_variation(v.marginal(i), w.marginal(i)) for i in range(v.T + 1))
    return MarkovCheck(lhs, rhs, lhs <= rhs + 1e-10, marg)


def check_markov_tv_lemma_histories(p, q):
    """The same bound for two exact history distributions (assumed Markov)."""
    some = next(iter(p.probs))
    T = len(some) - 1
    lhs = total_variation(p, q)
    rhs = 2.0 * sum(total_variation(pair_marginal(p, i), pair_marginal(q, i)) for i in range(1, T + 1))
    marg = sum(total_variation(p.marginal(i), q.marginal(i)) for i in range(T + 1))
    return MarkovCheck(lhs, rhs, lhs <= rhs + 1e-10, marg)


# ---------------------------------------------------------------------------
# Trace distance vs 2-norm
# ---------------------------------------------------------------------------


@dataclass
class TraceL2Report:
    count: int
    failures: int
    max_ratio: float

    @property
    def holds(self):
        return self.failures == 0


def check_trace_vs_l2(pairs):
    """``trace_distance <= l2_distance`` (with 1e-12 slack) for every pair."""
    count = failures = 0
    worst = 0.0
    for a, b in pairs:
        td, l2 = trace_distance(a, b), l2_distance(a, b)
        count += 1
        if td > l2 + 1e-12:
            failures += 1
        if l2 > 0:
            worst = max(worst, td / l2)
    return TraceL2Report(count, failures, worst)


# ---------------------------------------------------------------------------
# Grover circuits and the hybrid bound
# ---------------------------------------------------------------------------


def _zero_indicator_table(n):
    t = np.zeros(1 << n, dtype=np.int64)
    t[0] = 1
    return t


def _hadamards(amps, n):
    for q in range(n):
        amps = apply_gate_array(amps, Hadamard(q), n)
    return amps


@dataclass
class HybridReport:
    n: int
    K: int
    queries: list
    sums: list
    holds: bool

    @property
    def bounds(self):
        return [4.0 * q * q for q in self.queries]


def check_hybrid_bound(n, K, chunk=1024):
    """Sum over all marked items of ``||psi_t - psi_t(x)||^2`` against ``4 Q^2``.

    Evaluated after the initial Hadamards and after every oracle call and
    every diffusion of ``K`` Grover iterations, with no measurements.  All
    ``N`` marked variants are simulated as columns of one array.
    """
    if n > 12:
        raise BudgetExceeded("hybrid check supports n <= 12")
    N = 1 << n
    base = _hadamards(np.eye(N, 1, dtype=complex).ravel(), n)
    zero_sign = 1 - 2 * _zero_indicator_table(n)
    queries, sums = [0], [0.0]
    columns = [np.arange(s, min(N, s + chunk)) for s in range(0, N, chunk)]
    variants = [np.repeat(base[:, None], len(c), axis=1) for c in columns]
    q = 0
    for _ in range(K):
        q += 1
        for c, v in zip(columns, variants):
            v[c, np.arange(len(c))] *= -1  # marked phase on column x's item x
        queries.append(q)
        sums.append(sum(float(np.sum(np.abs(v - base[:, None]) ** 2)) for v in variants))
        base = _hadamards(zero_sign * _hadamards(base, n), n)
        variants = [_hadamards(zero_sign[:, None] * _hadamards(v, n), n) for v in variants]
        queries.append(q)
        sums.append(sum(float(np.sum(np.abs(v - base[:, None]) ** 2)) for v in variants))
    holds = all(s <= 4.0 * qq * qq + 1e-9 for s, qq in zip(sums, queries))
    return HybridReport(n, K, queries, sums, holds)


# ---------------------------------------------------------------------------
# Pairwise TVD bound
# ---------------------------------------------------------------------------


@dataclass
class PairwiseCheck:
    d: float
    bound: float
    holds: bool


def _pure_prefix(circuit, i):
    ell = circuit.num_qubits
    amps = np.zeros(1 << ell, dtype=complex)
    amps[0] = 1.0
    for step in circuit.steps[: i - 1]:
        for g in step.gates:
            amps = apply_gate_array(amps, g, ell)
    return amps


def deferred_pair_distribution(circuit, i):
    """Joint law of ``(v_{i-1}, v_i)`` with earlier collapses deferred.

    Uses the un-collapsed state ``phi = U_{i-1}...U_1|0>`` and the set ``S``
    of qubits measured in steps ``1..i-1``:
    ``P(a, b) = |phi_a|^2 |(U_i phi)_b|^2 / |alpha_s|^2`` when ``a`` and ``b``
    agree on ``S`` with value ``s``, else 0.
    """
    problems = validate(circuit, "write-once")
    if problems:
        raise ValueError("deferred form needs a write-once circuit: " + "; ".join(problems))
    if not 1 <= i <= circuit.T:
        raise IndexError(f"i must be in [1, {circuit.T}]")
    ell = circuit.num_qubits
    phi = _pure_prefix(circuit, i)
    out = phi
    for g in circuit.steps[i - 1].gates:
        out = apply_gate_array(out, g, ell)
    measured = sorted({q for s in circuit.steps[: i - 1] for q in s.measured})
    s = _register_values(tuple(measured), 1 << ell)
    a2, b2 = np.abs(phi) ** 2, np.abs(out) ** 2
    mass = np.bincount(s, weights=a2, minlength=1 << len(measured))
    same = s[:, None] == s[None, :]
    denom = np.where(mass[s] > 0, mass[s], 1.0)
    return np.where(same, (a2 / denom)[:, None] * b2[None, :], 0.0), phi


def check_pairwise_tv_bound(circuit, variant, i):
    """``d_TV`` of the step-``i`` pair laws against ``5 ||phi(x) - phi||_2``."""
    if circuit.num_qubits != variant.num_qubits or circuit.T != variant.T:
        raise ValueError("circuit and variant must have the same shape")
    p, phi = deferred_pair_distribution(circuit, i)
    px, phi_x = deferred_pair_distribution(variant, i)
    d = total_variation(p, px)
    bound = 5.0 * float(np.linalg.norm(phi_x - phi))
    return PairwiseCheck(d, bound, d <= bound + 1e-9)


# ---------------------------------------------------------------------------
# Product-fidelity chain (no collapsing measurements)
# ---------------------------------------------------------------------------


@dataclass
class ProductFidelityCheck:
    lhs: float
    rhs: float
    holds: bool
    exp_bound: float
    exp_bound_applies: bool


def _step_states(circuit):
    ell = circuit.num_qubits
    amps = np.zeros(1 << ell, dtype=complex)
    amps[0] = 1.0
    out = [amps]
    for step in circuit.steps:
        for g in step.gates:
            amps = apply_gate_array(amps, g, ell)
        out.append(amps)
    return out


def product_tvd(dists_p, dists_q, budget=1 << 22):
    """TVD between two products of independent factors; shared factors are dropped."""
    fp, fq = [], []
    for a, b in zip(dists_p, dists_q):
        if not np.array_equal(a, b):
            fp.append(a)
            fq.append(b)
    if not fp:
        return 0.0
    if math.prod(a.size for a in fp) > budget:
        raise BudgetExceeded("product distribution exceeds budget")
    P = fp[0]
    Q = fq[0]
    for a, b in zip(fp[1:], fq[1:]):
        P = np.multiply.outer(P, a).ravel()
        Q = np.multiply.outer(Q, b).ravel()
    return 0.5 * float(np.abs(P - Q).sum())


def check_product_fidelity_chain(circuit, variant):
    """History TVD against ``sqrt(1 - prod_t |<psi_t|psi_t^x>|^2)``.

    Without collapsing measurements each history is a product of
    independent per-step Born samples, so its TVD is at most the trace
    distance of the product states.  ``exp_bound`` is the further
    relaxation ``sqrt(1 - exp(-sum_t ||psi_t - psi_t^x||^2))``, valid when
    every ``||psi_t - psi_t^x||^2 <= 0.02``.
    """
    if circuit.has_collapse() or variant.has_collapse():
        raise ValueError("product-fidelity chain needs circuits without collapsing measurements")
    if circuit.num_qubits != variant.num_qubits or circuit.T != variant.T:
        raise ValueError("circuit and variant must have the same shape")
    sa, sb = _step_states(circuit), _step_states(variant)
    lhs = product_tvd([np.abs(a) ** 2 for a in sa], [np.abs(b) ** 2 for b in sb])
    overlaps = [abs(np.vdot(a, b)) ** 2 for a, b in zip(sa, sb)]
    if min(overlaps) > 0:
        infid = -math.expm1(math.fsum(math.log(o) for o in overlaps))
    else:
        infid = 1.0
    rhs = math.sqrt(max(0.0, infid))
    sq = [float(np.linalg.norm(a - b)) ** 2 for a, b in zip(sa, sb)]
    exp_bound = math.sqrt(max(0.0, 1.0 - math.exp(-sum(sq))))
    applies = all(x <= 0.02 for x in sq)
    # compare the squared forms: square roots magnify rounding near zero
    chain_ok = not applies or infid <= -math.expm1(-sum(sq)) + 1e-12
    holds = lhs <= rhs + 1e-9 and chain_ok
    return ProductFidelityCheck(lhs, rhs, holds, exp_bound, applies)


def operational_pair_distribution(circuit, i):
    """Pair law of ``(v_{i-1}, v_i)`` from the oracle's own history distribution."""
    return pair_marginal(history_distribution_exact(circuit), i)


def pair_dict_to_array(pairs, dim):
    out = np.zeros((dim, dim))
    for (a, b), p in pairs.items():
        out[a, b] += p
    return out

