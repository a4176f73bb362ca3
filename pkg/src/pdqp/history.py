"""Histories of non-collapsing samples and exact distributions over them."""

from collections import defaultdict
from dataclasses import dataclass, field
import math

DIST_TOL = 1e-10


@dataclass(frozen=True)
class History:
    """One oracle output ``(v_0, ..., v_T)``.

    ``collapse_outcomes[t-1]`` holds the bits of ``M_t`` (in the step's
    qubit order); it is auxiliary and not part of the oracle's answer.
    """

    samples: tuple
    collapse_outcomes: tuple = field(default=())

    @property
    def T(self):
        return len(self.samples) - 1


class HistoryDistribution:
    """Exact finite distribution over history tuples."""

    __slots__ = ("probs",)

    def __init__(self, probs=None):
        self.probs = dict(probs or {})

    @classmethod
    def empirical(cls, histories):
        counts = defaultdict(int)
        total = 0
        for h in histories:
            counts[h.samples if isinstance(h, History) else tuple(h)] += 1
            total += 1
        return cls({k: c / total for k, c in counts.items()})

    def __getitem__(self, key):
        return self.probs.get(tuple(key), 0.0)

    def __len__(self):
        return len(self.probs)

    def __iter__(self):
        return iter(self.probs)

    def items(self):
        return self.probs.items()

    def total(self):
        return math.fsum(self.probs.values())

    def check(self, tol=DIST_TOL):
        if any(p < -tol for p in self.probs.values()):
            raise ValueError("negative probability")
        dev = abs(self.total() - 1.0)
        if dev > tol:
            raise ValueError(f"probabilities sum to 1{dev:+.3e}")
        return self

    def marginal(self, indices):
        """Distribution of the sub-tuple at ``indices`` (a single int gives scalar keys)."""
        out = defaultdict(float)
        if isinstance(indices, int):
            for k, p in self.probs.items():
                out[k[indices]] += p
        else:
            for k, p in self.probs.items():
                out[tuple(k[i] for i in indices)] += p
        return dict(out)

    def max_abs_diff(self, other):
        keys = set(self.probs) | set(other.probs)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def __repr__(self):
        return f"HistoryDistribution({len(self.probs)} histories)"
