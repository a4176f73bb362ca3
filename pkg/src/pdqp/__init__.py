"""Simulator and verification lab for quantum circuits with non-collapsing measurements."""

__version__ = "0.1.0"

from .circuit import Circuit, ClassicalFunction, Step, load_circuit, parse_circuit, serialize_circuit
from .history import History, HistoryDistribution
from .qp_oracle import history_distribution_exact, sample_histories, sample_history
from .rng import make_rng
from .statevector import StateVector

__all__ = [
    "Circuit",
    "ClassicalFunction",
    "History",
    "HistoryDistribution",
    "StateVector",
    "Step",
    "history_distribution_exact",
    "load_circuit",
    "make_rng",
    "parse_circuit",
    "sample_histories",
    "sample_history",
    "serialize_circuit",
]
