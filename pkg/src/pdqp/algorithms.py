"""Algorithms run against the non-collapsing sampling oracle.

* unstructured search with ``K`` Grover iterations followed by many
  non-collapsing samples, and the ordinary Grover baseline;
* a decider for the close/far statistical difference promise problem;
* small demonstrations of what non-collapsing reads allow (signalling over a
  shared Bell pair, reading a whole truth table with one query, sending many
  bits through one qubit, cloning an unknown qubit via tomography).

All randomness comes from the ``rng`` argument.  Batched helpers simulate
the state once and draw every trial's samples from it, which is exact
because trials are independent runs of the same circuit.
"""

from dataclasses import dataclass
import math

import numpy as np

from .circuit import Circuit, ClassicalFunction, Step, marked_function, zero_indicator
from .qp_oracle import collapse_branches, sample_histories
from .statevector import (
    MAX_QUBITS,
    CNot,
    Hadamard,
    PhaseOracle,
    SingleQubitUnitary,
    StateVector,
    XorOracle,
    apply_gate_array,
    apply_gates,
    ry,
    s_dagger,
    s_gate,
    trace_distance,
)

SUCCESS_TARGET = 2.0 / 3.0


def _width_check(num_qubits):
    if num_qubits > MAX_QUBITS:
        raise ValueError(f"{num_qubits} qubits exceed the {MAX_QUBITS}-qubit cap")


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchInstance:
    """Search over ``N = 2**n`` items with at most one marked item."""

    n: int
    marked: int = None
    K: int = 1
    R: int = 1
    trials: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.marked is not None and not 0 <= self.marked < self.N:
            raise ValueError(f"marked item {self.marked} outside [0, {self.N})")
        if self.K < 1 or self.R < 1:
            raise ValueError("K and R must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def N(self):
        return 1 << self.n

    @property
    def Q(self):
        """Oracle queries of the non-collapsing algorithm: K iterations plus the flag query."""
        return self.K + 1

    @property
    def T(self):
        return self.R


def canonical_parameters(n):
    """``K = ceil(N^(1/3))`` and ``R = ceil(N^(1/3) log2 N)``."""
    c = (1 << n) ** (1.0 / 3.0)
    # guard against 4.0000000001-style rounding for exact cubes
    c = round(c) if abs(c - round(c)) < 1e-9 else c
    return int(math.ceil(c)), int(math.ceil(c * n))


def asymptotic_marked_amplitude(n):
    """Closed-form estimate ``1/sqrt(2^(n/3) + 2^(1-n/3) + 1)`` of the marked amplitude.

    Only an asymptotic device: at desk-scale ``n`` it differs from the exact
    amplitude after ``ceil(N^(1/3))`` iterations, which is what the search
    actually uses.  Reported alongside the exact value, never asserted equal.
    """
    return 1.0 / math.sqrt(2 ** (n / 3) + 2 ** (1 - n / 3) + 1)


def grover_iteration(f, zero, n):
    """One query to ``f`` followed by the diffusion ``H^n Z_0 H^n``."""
    reg = tuple(range(n))
    hs = [Hadamard(q) for q in reg]
    return [PhaseOracle(f, reg)] + hs + [PhaseOracle(zero, reg)] + hs


def _grover_gates(n, marked, K):
    f = marked_function(n, marked)
    zero = zero_indicator(n)
    gates = [Hadamard(q) for q in range(n)]
    for _ in range(K):
        gates += grover_iteration(f, zero, n)
    return f, gates


def build_search_circuit(n, marked, K, R):
    """Register on qubits ``0..n-1``, flag ancilla on qubit ``n``.

    Step 1 prepares the amplified state and writes ``f`` into the ancilla;
    steps ``2..R`` are empty.  The circuit has ``T = R`` steps and makes
    ``K + 1`` queries.
    """
    _width_check(n + 1)
    f, gates = _grover_gates(n, marked, K)
    gates.append(XorOracle(f, tuple(range(n)), (n,)))
    steps = [Step(gates)] + [Step() for _ in range(R - 1)]
    return Circuit(n + 1, steps)


def build_grover_circuit(n, marked, K):
    """``K`` Grover iterations then a collapsing measurement of the register."""
    _width_check(n)
    _, gates = _grover_gates(n, marked, K)
    return Circuit(n, [Step(gates, tuple(range(n)))])


@dataclass(frozen=True)
class SearchResult:
    found: int = None

    @property
    def success(self):
        return self.found is not None


def _flagged(samples, n):
    """First sampled register value whose ancilla bit is set, per row (-1 if none)."""
    hit = (samples >> n) & 1
    first = np.argmax(hit, axis=1)
    out = samples[np.arange(samples.shape[0]), first] & ((1 << n) - 1)
    return np.where(hit.any(axis=1), out, -1)


def _search_samples(inst, rng, shots):
    circ = build_search_circuit(inst.n, inst.marked, inst.K, inst.R)
    hist = sample_histories(circ, rng, shots)
    return np.array([h.samples[1:] for h in hist], dtype=np.int64)


def pdqp_search(inst, rng):
    """One run: return the first flagged sample, or ``found=None``."""
    v = _flagged(_search_samples(inst, rng, 1), inst.n)[0]
    return SearchResult(None if v < 0 else int(v))


def pdqp_search_successes(inst, rng):
    """Number of ``inst.trials`` independent runs that return the marked item."""
    found = _flagged(_search_samples(inst, rng, inst.trials), inst.n)
    if inst.marked is None:
        return 0
    return int(np.sum(found == inst.marked))


def grover_baseline(inst, rng):
    """One run of plain Grover search; ``inst.R`` is ignored."""
    circ = build_grover_circuit(inst.n, inst.marked, inst.K)
    h = sample_histories(circ, rng, 1)[0]
    value = sum(b << k for k, b in enumerate(h.collapse_outcomes[0]))
    return SearchResult(value if value == inst.marked else None)


def grover_baseline_successes(inst, rng):
    circ = build_grover_circuit(inst.n, inst.marked, inst.K)
    hist = sample_histories(circ, rng, inst.trials)
    if inst.marked is None:
        return 0
    vals = [sum(b << k for k, b in enumerate(h.collapse_outcomes[0])) for h in hist]
    return int(np.sum(np.array(vals) == inst.marked))


def marked_probabilities(n, K_max, marked=None):
    """``p[K]`` = probability of reading the marked item after ``K`` iterations.

    Computed by state-vector simulation of the same gates the search circuit
    uses; ``p[0]`` is the uniform value ``1/N``.
    """
    _width_check(n)
    marked = (1 << n) // 3 if marked is None else marked
    f = marked_function(n, marked)
    zero = zero_indicator(n)
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1.0
    for q in range(n):
        amps = apply_gate_array(amps, Hadamard(q), n)
    out = [abs(amps[marked]) ** 2]
    it = grover_iteration(f, zero, n)
    for _ in range(K_max):
        for g in it:
            amps = apply_gate_array(amps, g, n)
        out.append(abs(amps[marked]) ** 2)
    return np.array(out)


def samples_needed(p, target=SUCCESS_TARGET):
    """Least ``R`` with ``1 - (1-p)^R >= target``."""
    if p >= target:
        return 1
    if p <= 0:
        return math.inf
    return int(math.ceil(math.log(1 - target) / math.log1p(-p) - 1e-12))


@dataclass(frozen=True)
class CostPoint:
    n: int
    K: int
    R: int
    cost: int
    probability: float


def minimal_search_cost(n, mode="pdqp", target=SUCCESS_TARGET):
    """Least total cost ``Q + T`` that reaches ``target`` success probability.

    ``pdqp``: minimize ``(K + 1) + R(K)`` over ``K``.  ``baseline``: least
    ``K`` whose single measurement succeeds, cost ``K + 1`` (K queries, one
    step).
    """
    N = 1 << n
    K_max = int(math.ceil(math.pi / 4 * math.sqrt(N))) + 2
    p = marked_probabilities(n, K_max)
    if mode == "baseline":
        for K in range(1, K_max + 1):
            if p[K] >= target:
                return CostPoint(n, K, 1, K + 1, float(p[K]))
        raise RuntimeError("no K reaches the target")
    if mode != "pdqp":
        raise ValueError(f"unknown mode {mode!r}")
    best = None
    for K in range(1, K_max + 1):
        R = samples_needed(p[K], target)
        cost = K + 1 + R
        if best is None or cost < best.cost:
            best = CostPoint(n, K, R, cost, float(1 - (1 - p[K]) ** R))
    return best


def loglog_slope(ns, costs):
    """Least-squares slope of ``log cost`` against ``log N``."""
    x = np.log(np.exp2(np.asarray(ns, dtype=float)))
    return float(np.polyfit(x, np.log(np.asarray(costs, dtype=float)), 1)[0])


@dataclass
class ScalingRow:
    mode: str
    n: int
    N: int
    K: int
    R: int
    Q: int
    successes: int
    trials: int
    min_cost: int
    amp_exact: float = math.nan
    amp_closed_form: float = math.nan

    @property
    def success_rate(self):
        return self.successes / self.trials


def search_scaling(ns, trials, rng, mode="pdqp", k_mult=1.0, r_mult=1.0):
    """Per-``n`` success counts at the canonical parameters plus minimal costs.

    Returns ``(rows, slope)``; the slope is the log-log fit of the minimal
    cost reaching 2/3 success.  Each ``n`` gets its own marked item, drawn
    from ``rng``.
    """
    rows = []
    for n in ns:
        K, R = canonical_parameters(n)
        K = max(1, int(math.ceil(K * k_mult)))
        R = max(1, int(math.ceil(R * r_mult)))
        marked = int(rng.integers(1 << n))
        if mode == "pdqp":
            inst = SearchInstance(n, marked, K, R, trials)
            succ = pdqp_search_successes(inst, rng)
            Q = inst.Q
        elif mode == "baseline":
            inst = SearchInstance(n, marked, K, 1, trials)
            succ = grover_baseline_successes(inst, rng)
            Q, R = K, 1
        else:
            raise ValueError(f"unknown mode {mode!r}")
        amp = math.sqrt(marked_probabilities(n, K, marked)[K])
        rows.append(
            ScalingRow(
                mode, n, 1 << n, K, R, Q, succ, trials, minimal_search_cost(n, mode).cost,
                amp, asymptotic_marked_amplitude(n),
            )
        )
    slope = loglog_slope([r.n for r in rows], [r.min_cost for r in rows]) if len(rows) > 1 else math.nan
    return rows, slope


# ---------------------------------------------------------------------------
# Statistical difference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SDInstance:
    """Two functions ``P_0, P_1 : {0,1}^n -> {0,1}^m`` and the promised answer."""

    p0: ClassicalFunction
    p1: ClassicalFunction
    promise: str = None

    def __post_init__(self):
        if (self.p0.n, self.p0.m) != (self.p1.n, self.p1.m):
            raise ValueError("P_0 and P_1 must have the same input and output widths")
        if self.promise not in (None, "close", "far"):
            raise ValueError(f"promise must be 'close' or 'far', got {self.promise!r}")

    @property
    def n(self):
        return self.p0.n

    @property
    def m(self):
        return self.p0.m


def output_distance(p0, p1):
    """TVD between the output distributions of two functions on uniform input."""
    size = 1 << p0.m
    a = np.bincount(p0.table, minlength=size) / (1 << p0.n)
    b = np.bincount(p1.table, minlength=size) / (1 << p1.n)
    return 0.5 * float(np.abs(a - b).sum())


def build_sd_circuit(inst):
    """``b`` on qubit 0, ``x`` on ``1..n``, ``y`` on ``n+1..n+m``.

    Step 1 prepares the uniform superposition over ``(b, x)``, writes
    ``P_b(x)`` into ``y`` and collapses ``y``; steps 2 and 3 are empty, so
    the history holds three samples of the post-collapse state.
    """
    n, m = inst.n, inst.m
    _width_check(1 + n + m)
    table = np.empty(1 << (n + 1), dtype=np.int64)
    table[0::2] = inst.p0.table
    table[1::2] = inst.p1.table
    g = ClassicalFunction("sd", n + 1, m, table)
    bx = tuple(range(n + 1))
    y = tuple(range(n + 1, n + 1 + m))
    gates = [Hadamard(q) for q in bx] + [XorOracle(g, bx, y)]
    return Circuit(1 + n + m, [Step(gates, y), Step(), Step()])


def _decide(samples):
    b = samples & 1
    agree = np.all(b == b[:, :1], axis=1)
    return agree


def solve_statistical_difference(inst, rng):
    """``"far"`` iff the three samples agree on the ``b`` qubit, else ``"close"``."""
    return "far" if sd_far_count(inst, rng, 1) else "close"


def sd_far_count(inst, rng, trials):
    circ = build_sd_circuit(inst)
    hist = sample_histories(circ, rng, trials)
    samples = np.array([h.samples[1:] for h in hist], dtype=np.int64)
    return int(np.sum(_decide(samples)))


def sd_agree_probability_exact(inst):
    """Exact probability that the three ``b`` samples agree.

    Sums ``p^3 + (1-p)^3`` over collapse branches, ``p`` being the branch's
    probability of ``b = 0``.
    """
    circ = build_sd_circuit(inst)
    total = 0.0
    for _, w, dists in collapse_branches(circ):
        p0 = float(dists[1][0::2].sum())
        total += w * (p0 ** 3 + (1 - p0) ** 3)
    return total


def random_sd_instance(rng, n, m, promise):
    """Instance whose output distance is 0 (``close``) or at least 0.99 (``far``).

    ``close`` pairs are ``P_1 = P_0 o pi`` for a random input permutation.
    ``far`` pairs draw outputs from disjoint halves of ``{0,1}^m`` with a
    fraction ``< 0.01`` of inputs of ``P_1`` moved into ``P_0``'s half.
    """
    N, M = 1 << n, 1 << m
    if promise == "close":
        t0 = rng.integers(M, size=N)
        t1 = t0[rng.permutation(N)]
    elif promise == "far":
        if m < 1:
            raise ValueError("far instances need m >= 1")
        half = M // 2
        t0 = rng.integers(half, size=N)
        t1 = half + rng.integers(M - half, size=N)
        leak = int(rng.integers(0, int(math.ceil(0.01 * N))))
        if leak:
            idx = rng.choice(N, size=leak, replace=False)
            t1[idx] = t0[rng.integers(N, size=leak)]
    else:
        raise ValueError(f"unknown promise {promise!r}")
    p0 = ClassicalFunction("p0", n, m, t0)
    p1 = ClassicalFunction("p1", n, m, t1)
    return SDInstance(p0, p1, promise)


def sd_corpus(rng, count=200, n_range=(2, 8), m_range=(2, 8)):
    """Half close, half far instances with ``n, m`` drawn from the given ranges."""
    out = []
    for k in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        out.append(random_sd_instance(rng, n, m, "far" if k % 2 else "close"))
    return out


# ---------------------------------------------------------------------------
# Demonstrations
# ---------------------------------------------------------------------------


def build_ftl_circuit(basis_choice, k):
    """Bell pair, optional H on qubit 0, collapse of qubit 0, then ``k`` samples."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if basis_choice not in ("computational", "hadamard"):
        raise ValueError(f"unknown basis {basis_choice!r}")
    gates = [Hadamard(0), CNot(0, 1)]
    if basis_choice == "hadamard":
        gates.append(Hadamard(0))
    return Circuit(2, [Step(gates, (0,))] + [Step() for _ in range(k - 1)])


def ftl_signal_demo(basis_choice, k, rng, trials=1):
    """Inferred basis per trial: ``computational`` iff B's ``k`` bits all agree."""
    hist = sample_histories(build_ftl_circuit(basis_choice, k), rng, trials)
    bits = (np.array([h.samples[1:] for h in hist]) >> 1) & 1
    agree = np.all(bits == bits[:, :1], axis=1)
    return ["computational" if a else "hadamard" for a in agree]


def ftl_error_rate(k, rng, trials):
    """Empirical misidentification rate with the choice drawn uniformly per trial."""
    choices = rng.integers(2, size=trials)
    wrong = 0
    for c, name in enumerate(("computational", "hadamard")):
        cnt = int(np.sum(choices == c))
        if cnt:
            got = ftl_signal_demo(name, k, rng, cnt)
            wrong += sum(g != name for g in got)
    return wrong / trials


@dataclass
class OneQueryResult:
    recovered: np.ndarray  # -1 marks an unseen index
    unseen: tuple

    @property
    def complete(self):
        return not self.unseen


def _bits_function(x):
    x = np.asarray(x, dtype=np.int64)
    n = int(x.size).bit_length() - 1
    if x.size < 2 or 1 << n != x.size:
        raise ValueError("length of x must be a power of two >= 2")
    if np.any((x != 0) & (x != 1)):
        raise ValueError("x must be a bit string")
    return n, ClassicalFunction("x", n, 1, x)


def build_one_query_circuit(x, R):
    n, f = _bits_function(x)
    _width_check(n + 1)
    reg = tuple(range(n))
    gates = [Hadamard(q) for q in reg] + [XorOracle(f, reg, (n,))]
    return Circuit(n + 1, [Step(gates)] + [Step() for _ in range(R - 1)])


def _recover(samples, n, N):
    rec = np.full(N, -1, dtype=np.int64)
    rec[samples & (N - 1)] = samples >> n
    return OneQueryResult(rec, tuple(int(i) for i in np.flatnonzero(rec < 0)))


def one_query_evaluate(x, R, rng):
    """Recover ``x`` from ``R`` samples of ``sum_i |i>|x_i>`` prepared with one query."""
    n, _ = _bits_function(x)
    h = sample_histories(build_one_query_circuit(x, R), rng, 1)[0]
    return _recover(np.array(h.samples[1:], dtype=np.int64), n, 1 << n)


def one_query_recovery_rate(x, R, rng, trials):
    """Fraction of trials recovering every bit of ``x`` correctly."""
    n, _ = _bits_function(x)
    xs = np.asarray(x, dtype=np.int64)
    hist = sample_histories(build_one_query_circuit(x, R), rng, trials)
    ok = 0
    for h in hist:
        res = _recover(np.array(h.samples[1:], dtype=np.int64), n, 1 << n)
        ok += res.complete and bool(np.array_equal(res.recovered, xs))
    return ok / trials


def coupon_samples(N, delta):
    """``R`` with ``N (1 - 1/N)^R <= delta`` via ``R = ceil(N ln(N/delta))``."""
    return int(math.ceil(N * math.log(N / delta)))


def encoding_angle(x, n):
    """``theta_x = (x / 2^n) (pi / 2)``."""
    return (x / (1 << n)) * (math.pi / 2)


def build_one_qubit_circuit(x, n, R):
    if not 0 <= x < 1 << n:
        raise ValueError(f"x must be in [0, {1 << n})")
    prep = ry(0, 2 * encoding_angle(x, n))
    return Circuit(1, [Step([prep])] + [Step() for _ in range(R - 1)])


def decode_ones(ones, R, n):
    return int(round((1 << n) * (2 / math.pi) * math.asin(math.sqrt(ones / R))))


def one_qubit_communicate(x, n, R, rng, trials=1):
    """Decoded value per trial from ``R`` samples of ``cos t|0> + sin t|1>``."""
    if n > 5:
        raise ValueError("n must be <= 5")
    hist = sample_histories(build_one_qubit_circuit(x, n, R), rng, trials)
    ones = np.array([sum(h.samples[1:]) for h in hist])
    return [decode_ones(int(o), R, n) for o in ones]


def one_qubit_error_rate(n, R, rng, trials):
    """Decoding error rate with a uniformly random input per trial."""
    xs = rng.integers(1 << n, size=trials)
    wrong = 0
    for x in np.unique(xs):
        cnt = int(np.sum(xs == x))
        wrong += sum(d != x for d in one_qubit_communicate(int(x), n, R, rng, cnt))
    return wrong / trials


@dataclass
class CloneResult:
    bloch: np.ndarray
    stderr: np.ndarray
    recipe: list
    trace_distance: float


def _phase(qubit, phi):
    return SingleQubitUnitary(qubit, [[1, 0], [0, np.exp(1j * phi)]], label=f"phase({phi!r})")


def preparation_from_bloch(r):
    """Gates taking ``|0>`` to the pure state nearest the Bloch vector ``r``."""
    r = np.asarray(r, dtype=float)
    nrm = np.linalg.norm(r)
    if nrm < 1e-12:
        return [ry(0, 0.0)]
    x, y, z = r / nrm
    theta = math.acos(max(-1.0, min(1.0, z)))
    return [ry(0, theta), _phase(0, math.atan2(y, x))]


def bloch_vector(state):
    a, b = state.amplitudes
    return np.array([2 * (np.conj(a) * b).real, 2 * (np.conj(a) * b).imag, abs(a) ** 2 - abs(b) ** 2])


def build_tomography_circuit(prep, R):
    """Z, X and Y statistics from ``R`` samples each, with basis changes undone after use."""
    H = Hadamard(0)
    block = [Step() for _ in range(R - 1)]
    steps = [Step(list(prep))] + block
    steps += [Step([H])] + block + [Step([H])]
    steps += [Step([s_dagger(0), H])] + block + [Step([H, s_gate(0)])]
    return Circuit(1, steps)


def clone_via_tomography(prep, R, rng):
    """Estimate the Bloch vector of ``prep|0>`` and return a preparation recipe."""
    prep = list(prep)
    h = sample_histories(build_tomography_circuit(prep, R), rng, 1)[0]
    v = np.array(h.samples[1:])
    z_s, x_s, y_s = v[:R], v[R:2 * R], v[2 * R + 1:3 * R + 1]
    est = np.array([1 - 2 * x_s.mean(), 1 - 2 * y_s.mean(), 1 - 2 * z_s.mean()])
    err = np.sqrt(np.maximum(1 - est ** 2, 0) / R)
    recipe = preparation_from_bloch(est)
    target = apply_gates(StateVector.zero(1), prep)
    made = apply_gates(StateVector.zero(1), recipe)
    return CloneResult(est, err, recipe, trace_distance(target, made))


def haar_preparation(rng):
    """Single-qubit unitary whose first column is a Haar-random state."""
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    a, b = v / np.linalg.norm(v)
    return [SingleQubitUnitary(0, [[a, -np.conj(b)], [b, np.conj(a)]], label="haar")]
