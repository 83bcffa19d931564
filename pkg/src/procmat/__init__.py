"""Process matrices of open quantum dynamics and their memory structure."""
from .choi import (
    ChoiOperator,
    Instrument,
    born_rule,
    choi_of_kraus,
    choi_of_unitary,
    kraus_from_choi,
    link_all,
    link_product,
    measure_and_prepare,
    povm_effects,
    trace_effect,
)
from .config import TOL, Tolerances, tolerances
from .dilation import (
    ControlledUnitary,
    DilatedCircuit,
    Gate,
    InstrumentDilation,
    Prepare,
    assemble_controlled,
    classical_memory_circuit,
    classical_memory_circuit_process,
    dilate_mixed_unitary,
    instrument_dilation,
    stochastic_control,
    stochastic_controls,
)
from .dynamics import (
    Constant,
    HamiltonianSpec,
    PiecewiseConstant,
    ProbeTimes,
    ProductTerms,
    PulseTrain,
    expm_hermitian,
    propagator,
    segment_unitaries,
)
from .errors import InputError, NumericalError, ProcmatError
from .process import (
    ClassicalMemorySpec,
    ProcessMatrix,
    build_ccc,
    build_classical_memory,
    build_from_dynamics,
    build_markov,
    build_mixed_unitary,
    build_unitary_markov,
)
from .structure import (
    Certificate,
    EnvBlockFamily,
    MixedUnitaryDecomposition,
    SchmidtTerms,
    commuting_family_check,
    env_blocks,
    mixed_unitary_components,
    operator_schmidt,
    simultaneous_eigenbasis,
    theorem1_certificate,
)
from .tensor import (
    LabeledOperator,
    Wire,
    hermitian_eigen,
    partial_trace,
    partial_transpose,
    permute_wires,
    tensor,
)
from .witness import (
    ClassificationReport,
    classify,
    default_cuts,
    markov_residual,
    negativity,
    normalize_process,
    theorem1_residual,
)

__version__ = "0.1.0"
