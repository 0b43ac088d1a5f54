"""Two coupled resonators, one of them coupled to a finite equidistant mode comb.

Exact single-excitation dynamics, its Markovian non-Hermitian reduction,
the memory functional and loss-protection phase diagrams.
"""

from lossprotect.model import IndexConvention, SystemParams, build_hamiltonian
from lossprotect.dynamics import (
    SpectralDecomposition,
    Trajectory,
    diagonalize,
    propagate,
    propagate_series,
    rk4_integrate,
    overlap,
)
from lossprotect.markovian import MarkovianModel, PTPhase
from lossprotect.memory import MemoryEstimate, MemorySettings
from lossprotect.phase import PhaseClassification, PhaseDiagram, Verdict, sweep

__version__ = "0.1.0"

__all__ = [
    "IndexConvention",
    "SystemParams",
    "build_hamiltonian",
    "SpectralDecomposition",
    "Trajectory",
    "diagonalize",
    "propagate",
    "propagate_series",
    "rk4_integrate",
    "overlap",
    "MarkovianModel",
    "PTPhase",
    "MemoryEstimate",
    "MemorySettings",
    "PhaseClassification",
    "PhaseDiagram",
    "Verdict",
    "sweep",
]
