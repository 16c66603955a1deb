"""Master-equation simulator for bosonic oscillators coupled to heat baths.

Integrates the occupation-number dynamics driven by time-dependent friction
and diffusion coefficients (single oscillator in first- or second-order form,
or any finite number of pairwise-coupled oscillators) and analyzes the
resulting non-stationary late-time oscillations.
"""

from .analysis import (
    AmbiguousPeriod,
    AnalysisError,
    EnvelopeReport,
    NoOscillation,
    OscillationReport,
    SyncReport,
    TooFewPeaks,
    TooShort,
    TransientEstimate,
    detect_transient,
    eigenfrequency_candidates,
    envelope,
    extract_period,
    nearest_candidate,
    synchronization_metrics,
)
from .coefficients import (
    ConstantProvider,
    OutOfRange,
    PhenomenologicalParams,
    PhenomenologicalProvider,
    TabulatedCoefficients,
    TabulatedProvider,
    check_derivatives,
    eval_constant,
    eval_phenomenological,
    eval_tabulated,
    make_provider,
    read_coefficient_csv,
)
from .csvio import CsvData, CsvSchemaError, read_timeseries_csv, write_timeseries_csv
from .integrator import (
    IntegratorError,
    StepSizeUnderflow,
    convergence_order,
    integrate_coupled,
    integrate_single_first_order,
    integrate_single_second_order,
    rk4_fixed,
)
from .model import (
    BathSpec,
    BathStatistics,
    CoefficientSample,
    CouplingNetwork,
    InvalidConfig,
    OscillatorSpec,
    ProviderConfig,
    SimulationConfig,
    TimeSeries,
    validate_config,
)
from .scenario import (
    apply_override,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)

__version__ = "0.1.0"
