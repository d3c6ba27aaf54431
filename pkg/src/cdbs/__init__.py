"""Simulation and compilation toolkit for constant-depth linear optics.

Modules: ``fock`` (permanents and exact Fock-space distributions),
``circuit`` (the layered optical circuit IR), ``qubit`` (graph states and the
statevector oracle), ``klm`` (dual-rail compiler), ``shallow`` (efficient
depth-2 simulators), ``textio`` (file formats) and ``cli``.
"""

from .circuit import (
    BALANCED,
    CircuitBuilder,
    Layer,
    OpticalCircuit,
    PhaseShifter,
    PostselectionSpec,
    TwoModeGate,
    depth,
    interferometer,
    normalize,
    sparsity,
    validate,
)
from .errors import (
    CdbsError,
    ConservationError,
    DimensionError,
    InfeasiblePostselectionError,
    ParseError,
    ResourceLimitError,
    UnsupportedDepthError,
    ValidationError,
)
from .fock import (
    Distribution,
    occupancy_support,
    output_distribution,
    permanent,
    postselect,
    postselected_distribution,
    sample,
    transition_amplitude,
)
from .klm import (
    CompiledArtifact,
    DualRailMap,
    GateBlock,
    artifact_distribution,
    compile_depth4,
    compile_naive,
    cz_on_zero_rails,
    encode_single_qubit,
    knill_cz,
    teleport_mode,
)
from .qubit import (
    GraphProgram,
    Measurement,
    QubitCircuit,
    QubitGate,
    brickwork_graph,
    flatten_postselect,
    graph_state,
    logical_distribution,
    simulate,
)
from .shallow import ChainPlan, chain_plan, exact_distribution_depth2, simulate_depth2_optical, simulate_depth2_qubits
from .textio import dump_circuit, dump_graph, parse_circuit, parse_graph

__version__ = "0.1.0"
