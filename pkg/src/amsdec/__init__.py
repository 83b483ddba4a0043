"""Ergodic decomposition of asymptotically mean stationary measures, computed exactly on finite spaces."""

from .decomposition import (
    appendix_identity_suite,
    conditional_expectation,
    conditional_measures,
    decompose,
    uniform_convergence_profile,
    verify_theorem1,
)
from .dynamics import (
    EndoMap,
    cesaro_average,
    invariant_atoms,
    is_ams,
    is_stationary,
    orbit_structure,
    preimage,
    pushforward,
    stationary_mean,
)
from .krengel import (
    ContractionState,
    apply_U,
    build_dominating,
    classify_convergence,
    hopf_decompose,
    krengel_average,
    liminf_identity_check,
)
from .measure import (
    Density,
    FiniteSpace,
    SignedMeasure,
    dominates,
    event_sup_deviation,
    jordan_decompose,
    mixture,
    phi_isometry_check,
    radon_nikodym,
    tv_norm,
)
from .sources import (
    MarkovSource,
    empirical_frequency,
    entropy_rate,
    marginal,
    recurrent_classes,
    sample_path,
    shifted_cylinder_prob,
    stationary_mean_source,
)

__version__ = "0.1.0"
