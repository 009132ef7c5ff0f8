"""Multi-observer state estimation under sparse sensor attacks.

Simulates discrete-time nonlinear plants whose sensors are partly
compromised, runs a bank of observers over sensor subsets, fuses them
by deviation-minimizing selection, and isolates the attacked sensors
by windowed threshold voting.
"""

__version__ = "0.1.0"

from .combinatorics import BankIndex, SubsetIndex, bank_index, enumerate_subsets
from .errors import (
    AssumptionViolatedError,
    CalibrationError,
    ConfigurationError,
    EstimatorStarvedError,
    InternalConsistencyError,
    MultiObserverError,
    PlumbingError,
    SimulationDivergedError,
)
from .model import (
    AttackScenario,
    CircleStructure,
    InitSpec,
    PlantModel,
    ReducedStructure,
    SignalSpec,
    Trajectory,
    measure,
    sample_signal,
    signal_stream,
    simulate,
    step_plant,
)
from .observers import (
    CircleCriterionObserver,
    ISSGainModel,
    LuenbergerObserver,
    Observer,
    ObserverBank,
    ReducedOrderObserver,
    build_reduced_observer,
    certify_linear_gain,
    check_slope_condition,
    observer_step,
)
from .calibration import (
    CalibrationSettings,
    calibrate_bank,
    calibrate_estimator,
    estimate_iss_gains,
)
from .estimator import (
    EstimatorFrame,
    EstimatorRun,
    compute_all_pi,
    compute_pi,
    estimator_step,
    run_estimator,
    select_sigma,
)
from .isolation import (
    IsolationReport,
    IsolationWindow,
    ThresholdTable,
    attack_free_union,
    compute_thresholds,
    windowed_isolation,
)
from .config import ScenarioConfig, build_bank, load_config
from .harness import RunArtifacts, calibrate, emit_plots, run_scenario
