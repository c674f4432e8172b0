"""dampwave: a desk-scale laboratory for damped one-way wave propagation.

Builds the damping-factor parametrix (1 + sum_j K^(j)) exp(-I) for
dissipative hyperbolic initial value problems on the periodic grid,
compares it against a direct spectral solver, and numerically certifies
the growth and structure bounds the construction relies on.
"""

__version__ = "0.1.0"

from .symbols import (
    AssumptionParams,
    CutoffFamily,
    SampleSpec,
    SymbolModel,
    build_cutoff_b,
    check_assumption_b1,
    check_h_inequality,
    eval_jet,
    hyperbolic_a,
    multiplier_b,
    shipped_cutoff_family,
    zero_symbol,
)
from .rays import (
    RaySolution,
    RaySystem,
    damping_integral_I,
    damping_integral_Itilde,
    trace_ray,
)
from .quantize import (
    Grid,
    GridSymbol,
    WaveField,
    apply_op,
    compose_symbols,
    dealias_two_thirds,
    wave_packet,
)
from .solver import (
    EvolutionTrace,
    IVPProblem,
    energy_report,
    evolve,
    evolve_inverse_E0,
)
from .parametrix import (
    CompositionLedger,
    ParametrixSymbol,
    build_parametrix,
    composition_terms_M,
    conjugated_parametrix,
    parametrix_apply,
)
from .sqrt_symbol import SqrtSymbol, build_sqrt, sqrt_residual_report
from .estimates import (
    EstimationProblem,
    check_exp_I_class,
    check_I_derivative_bounds,
    check_z_uniform_bounds,
    fit_growth_exponent,
)
from .reports import EstimateReport, FitResult
from .egorov import ConjugationProbe, conjugation_error
from .cli import ExperimentConfig, run_experiment
