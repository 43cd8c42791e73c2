"""Simulator for a star-topology qubit network under collision-model reservoirs."""
from .dynamics import (
    CollisionSchedule,
    SteadyReport,
    TraceRecord,
    collision_channel_choi,
    collision_fixed_point,
    collision_transfer_matrix,
    detect_steady_state,
    evolve_closed,
    markov_collision_step,
    run_markov,
    run_non_markov,
    unit_post_state,
)
from .network import (
    QnnTopology,
    ReservoirSpec,
    TargetState,
    build_collision_hamiltonian,
    build_system_hamiltonian,
    build_unit_unit_hamiltonian,
    mixture_of,
    predict_pointer_steady_state,
    target_density,
)
from .output import emit_csv, emit_svg, read_csv
from .scenario import (
    PRESET_NAMES,
    ClosedGrid,
    RunReport,
    ScenarioConfig,
    ScenarioError,
    SweepReport,
    SweepSpec,
    load_scenario,
    parse_scenario,
    preset,
    run_scenario,
    run_sweep,
    serialize_scenario,
)
from .states import (
    DOWN,
    PLUS,
    UP,
    InvalidStateError,
    Observable,
    PureBlochState,
    bloch_pure,
    expectation,
    fidelity,
    l1_coherence,
    mutual_information,
    product_state,
    validate_density,
    von_neumann_entropy,
)

__version__ = "0.1.0"
