"""Selective and efficient quantum process tomography, simulated."""
from .channels import (
    Channel,
    ChiMatrix,
    ModifiedChannel,
    apply_channel,
    apply_modified_channel,
    builtin_channel,
    convert,
    random_channel,
    validate_channel,
)
from .designs import SamplingPlan, TwoDesign, make_plan, mub_design, verify_2design
from .experiment import (
    NoiseModel,
    channel_fidelity,
    convergence_report,
    error_bound,
    sample_counts,
)
from .qmath import OperatorBasis, PureState, DensityMatrix, haar_random_state, pauli_basis, uhlmann_fidelity
from .tomography import (
    chi_from_fidelity,
    design_average_fidelity,
    haar_average_fidelity,
    resource_count,
    run_offdiagonal_circuit,
    seqpt_ancilla_free,
    seqpt_diagonal,
    seqpt_element,
    seqpt_full,
    seqpt_offdiagonal,
    standard_qpt,
)

__version__ = "0.1.0"
