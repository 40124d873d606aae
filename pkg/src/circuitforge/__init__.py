"""circuitforge: nematode learning-circuit extraction and the image
classifiers built from its wiring.

The pipeline runs in stages, each usable on its own:

    connectome  load/aggregate the synapse graph
    cri         score neurons by gene fold changes, select the top set
    extraction  carve the sparse functional circuit
    arch        compile the circuit (or controls) into a network layout
    engine      train and evaluate compiled layouts on image data
    bench       the side-by-side comparison harness
"""

from .connectome import Connectome, Direction, Role
from .cri import CriTable, SelectedNeurons, TopK, ZScore
from .errors import CircuitForgeError
from .extraction import ExtractionConfig, FunctionalCircuit

__version__ = "0.1.0"

__all__ = [
    "CircuitForgeError",
    "Connectome",
    "CriTable",
    "Direction",
    "ExtractionConfig",
    "FunctionalCircuit",
    "Role",
    "SelectedNeurons",
    "TopK",
    "ZScore",
    "__version__",
]
