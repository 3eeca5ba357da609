"""Closed-form and trajectory-level analyses of EW dynamics."""
from .drift import coordination_2x2, drift_2x2, drift_by_enumeration
from .example18 import (
    CountingChain,
    always_L_probability,
    always_T_probability,
    counts_from_ew,
    ecdf_distance,
    example18_chain,
    jump_probabilities,
    stay_probabilities,
)
from .potentials import (
    PotentialReport,
    SupermartingaleConstants,
    ZprimeCalibration,
    X_formula,
    alphas,
    calibrate_zprime_threshold,
    enumerate_X,
    expected_next_potential,
    expected_next_Zprime,
    one_step_expected_potential,
    potential_Z,
    potential_Zprime,
    random_interior_profiles,
    supermartingale_constants,
)
from .products import AbsorptionQuery, Enclosure, enclose_product, prob_always_play
from .statistics import (
    ConvergenceVerdict,
    L_statistic,
    classify_trajectory,
    distance_to_Z,
    levy_average,
)
