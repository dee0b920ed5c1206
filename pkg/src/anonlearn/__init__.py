"""Learning dynamics (fictitious play, online mirror descent) in monotone anonymous games."""

from .game import (
    CapabilityError,
    GameInstance,
    MonotonicityReport,
    Profile,
    StructuralError,
    check_monotonicity,
    exploitability,
    monotonicity_value,
    profile_pushforward,
    verify_equilibrium,
)
from .kernels import BACKEND
from .learning import (
    CSV_COLUMNS,
    Reference,
    RunError,
    RunTrace,
    StopRule,
    drift_check,
    fp_init,
    fp_step,
    omd_init,
    omd_step,
    run,
    sequence_lemma_check,
)
from .measure import (
    EUCLIDEAN,
    SUP_PATH,
    TOTAL_VARIATION,
    DiscreteMeasure,
    IntegrationError,
    MeasureError,
    Metric,
    SupportTooLarge,
    dirac,
    integrate,
    mix,
    pushforward,
    wasserstein1,
)
from .population import PopulationGame, best_response_finite, brute_force_equilibrium, cost_table

__version__ = "0.1.0"
