"""Ribosome flow models on directed compartmental graphs."""

__version__ = "0.1.0"

from .crn import (
    assign_crn,
    check_conserved_support,
    conservation_vectors,
    deficiency_by_rank,
    deficiency_terms,
    enumerate_siphons,
    exact_rank,
    is_siphon,
)
from .errors import *  # noqa: F401,F403
from .graph import (
    CompartmentalModel,
    build_model,
    chordless_cycles,
    condensation,
    connectivity,
    count_chordless_cycles,
    cyclomatic_number,
    donors_receptors,
)
from .longtime import (
    classify_nsc_limit,
    common_period,
    entrainment_analysis,
    equilibrium_curve,
    find_equilibrium,
)
from .lyapunov import (
    LyapunovSpec,
    convergence_gap,
    lyapunov_profile,
    manifold_surface,
    v_general,
    v_hill,
    v_lab,
    v_ltv,
)
from .rates import DenominatorPoly, RateSpec, TimeCoefficient, Transform, eval_rate, make_kinetics, rate_envelope
from .simulator import (
    RateNetwork,
    SimOptions,
    Trajectory,
    conservation_report,
    factored_matrix,
    persistence_margin,
    simulate_full,
    simulate_reduced,
    vector_field,
)
from .scenario import Scenario, emit_scenario, parse_scenario, run_scenario
