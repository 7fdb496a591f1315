"""shockstab: spectral stability certification and nonlinear decay runs
for Riemann shocks, half-line boundary equilibria, and constant states of
1-D hyperbolic systems of balance laws."""

from . import errors
from .systems import (
    SystemDescriptor,
    ShockProfile,
    ShockBoundaryMap,
    ShockLinearization,
    PiecewiseTraces,
    evaluate_linearization,
    rankine_hugoniot_residual,
    compatibility_residuals,
    appendix_3x3,
    appendix_3x3_eps,
    appendix_3x3_quadratic,
    two_by_two,
    burgers_bistable,
    burgers_bistable_shock,
    decoupled_diagonal,
    linear_system,
    load_system,
    system_from_dict,
)
from .spectral import (
    SpectralDecomposition,
    DichotomyData,
    HFExpansion,
    FourierSpectrum,
    diagonalize_convection,
    kawashima_compensator,
    decompose,
    fourier_symbol_spectrum,
    symbol_stability_sweep,
    spatial_projectors,
    hf_expansion,
)
from .lopatinskii import (
    LopatinskiiSample,
    GapCertificate,
    LaxReport,
    ShockDeterminant,
    IBVPDeterminant,
    lopatinskii_det_shock,
    lopatinskii_det_ibvp,
    count_roots,
    rectangle_contour,
    certify_gap,
    lax_check,
)
from .greenkernel import (
    ConstantLin,
    GEOMETRIES,
    SingularPart,
    PropagatorConfig,
    TimeSignal,
    zero_signal,
    exp_signal,
    spectral_kernel,
    singular_part,
    whole_line_kernel,
    kernel_remainder,
    invert_laplace_remainder,
    apply_linear_propagator,
    propagate_whole_line,
    propagate_half_line,
    propagate_shock,
    resolve_whole_line,
    resolvent_residual_whole_line,
)
from .energy import (
    EnergyConfig,
    EnergyReport,
    functional_e1,
    functional_e2,
    functional_boundary_split,
    dissipation_monitor,
    p_field,
)
from .simulate import (
    SimConfig,
    Trajectory,
    simulate_constant,
    simulate_ibvp,
    simulate_shock,
    fit_decay_rate,
    measure_norms,
)
from .symmetrizer import (
    SymmetrizerVerdict,
    TransitionReport,
    stability_2x2,
    symmetrizer_2x2,
    transition_check_3x3,
    diagonal_symmetrizer_search_3x3,
    separation_report,
    write_separation_report,
)

__version__ = "0.1.0"
