"""Urban UAV-to-UAV line-of-sight blockage modelling toolkit.

Submodules:

* scene        synthetic building patches from built-up parameters
* los          exact geometric LOS tests against building prisms
* analytic     closed-form LOS probability chain and distance averages
* markov       two-state LOS/NLOS chain estimation over distance
* experiments  Monte Carlo harness, flight traces, height sweeps
* cli          command-line front end and CSV emission
"""

__version__ = "0.1.0"

from .analytic import (
    DistanceMoments,
    HeightPair,
    average_p_los_closed,
    average_p_los_numeric,
    corrected_p_los,
    distance_moments,
    distance_pdf_gauss,
    distance_pdf_poly,
    expected_buildings,
    p_los_at_distance,
    p_los_single,
    q_function,
    same_street_probability,
)
from .los import (
    Link,
    count_crossed_buildings,
    footprint_crossing,
    is_blocked_by,
    is_los,
)
from .markov import (
    MarkovRates,
    StateTrace,
    TransitionEstimate,
    estimate_transitions,
    expected_life_time,
    fit_exponential,
    life_distance_expectations,
    pooled_transition_estimate,
    rates_from_transitions,
    run_lengths,
    simulate_two_state,
)
from .scene import (
    Building,
    ItuParams,
    UrbanScene,
    generate_scene,
    rayleigh_height,
    scene_from_csv,
    scene_to_csv,
)
from .experiments import (
    SweepConfig,
    SweepResult,
    SweepRow,
    estimate_avg_plos_mc,
    sample_uniform_pair,
    sweep_heights,
    trace_path,
    tx_positions,
    validate_building_count,
    validate_distance_pdf,
)
